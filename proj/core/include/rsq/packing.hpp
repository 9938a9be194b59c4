#pragma once

#include <cstdint>
#include <vector>

namespace rsq {

/// Pack quantization codes into a little-endian bitstream, LSB-first within
/// each byte. The final byte is zero-padded. Codes must fit in `bits`.
std::vector<std::uint8_t> pack_codes(const std::vector<std::int32_t>& codes, int bits);

/// Inverse of pack_codes. Throws std::runtime_error with expected/actual byte
/// counts when the payload is truncated (or oversized).
std::vector<std::int32_t> unpack_codes(const std::vector<std::uint8_t>& bytes, int bits, std::size_t n);

std::size_t packed_size(std::size_t n, int bits);

}  // namespace rsq
