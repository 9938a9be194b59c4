#pragma once

#include <string>

#include "rsq/model.hpp"

namespace rsq {

/// Model container format "RSQM": magic bytes, u32 LE format version, u32 LE
/// header length, UTF-8 JSON header (arch + tensor directory), then raw
/// little-endian payloads. fp tensors are float/double arrays; quantized
/// tensors are bit-packed codes (rows byte-aligned, LSB-first) followed by
/// f32 scales and f32 zeros per group. Writes are canonical: identical
/// containers serialize to identical bytes.
void write_model(const ModelContainer& model, const std::string& path);

ModelContainer read_model(const std::string& path);

}  // namespace rsq
