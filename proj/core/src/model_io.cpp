#include "rsq/model_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "rsq/packing.hpp"

static_assert(std::endian::native == std::endian::little, "RSQM writer assumes a little-endian host");

namespace rsq {

namespace {

using nlohmann::json;

constexpr std::uint32_t kModelFileVersion = 1;

std::string dtype_name(Dtype d) { return d == Dtype::f32 ? "f32" : "f64"; }

Dtype dtype_from_name(const std::string& s) {
  if (s == "f32") return Dtype::f32;
  if (s == "f64") return Dtype::f64;
  throw std::runtime_error("unknown dtype in model header: " + s);
}

void append_u32(std::string& out, std::uint32_t v) {
  char b[4];
  std::memcpy(b, &v, 4);
  out.append(b, 4);
}

std::size_t fp_payload_size(const Tensor& t) {
  const std::size_t n = t.values.data().size();
  return n * (t.dtype == Dtype::f32 ? 4 : 8);
}

}  // namespace

void write_model(const ModelContainer& model, const std::string& path) {
  model.validate();
  json dir = json::array();
  std::string payload;

  for (const auto& [name, t] : model.tensors) {  // std::map order: canonical
    json entry;
    entry["name"] = name;
    entry["rows"] = t.values.rows();
    entry["cols"] = t.values.cols();
    entry["offset"] = payload.size();
    if (!t.quantized()) {
      entry["dtype"] = dtype_name(t.dtype);
      if (t.dtype == Dtype::f32) {
        for (double v : t.values.data()) {
          const float f = static_cast<float>(v);
          char b[4];
          std::memcpy(b, &f, 4);
          payload.append(b, 4);
        }
      } else {
        for (double v : t.values.data()) {
          char b[8];
          std::memcpy(b, &v, 8);
          payload.append(b, 8);
        }
      }
      entry["nbytes"] = fp_payload_size(t);
    } else {
      const QuantCodes& q = *t.quant;
      const int rows = t.values.rows();
      const int cols = t.values.cols();
      entry["dtype"] = "packed";
      json quant;
      quant["bits"] = q.bits;
      quant["group_size"] = q.group_size;
      quant["n_groups"] = q.scales.size();
      const std::size_t codes_offset = payload.size();
      // Rows packed independently so every row starts byte-aligned.
      for (int r = 0; r < rows; ++r) {
        std::vector<std::int32_t> row_codes(q.codes.begin() + static_cast<std::size_t>(r) * cols,
                                            q.codes.begin() + static_cast<std::size_t>(r + 1) * cols);
        const auto packed = pack_codes(row_codes, q.bits);
        payload.append(reinterpret_cast<const char*>(packed.data()), packed.size());
      }
      quant["codes_offset"] = codes_offset;
      quant["scales_offset"] = payload.size();
      for (float s : q.scales) {
        char b[4];
        std::memcpy(b, &s, 4);
        payload.append(b, 4);
      }
      quant["zeros_offset"] = payload.size();
      for (std::int32_t z : q.zeros) {
        const float f = static_cast<float>(z);
        char b[4];
        std::memcpy(b, &f, 4);
        payload.append(b, 4);
      }
      entry["nbytes"] = payload.size() - codes_offset;
      entry["quant"] = quant;
    }
    dir.push_back(entry);
  }

  json header;
  header["arch"] = {{"n_layers", model.arch.n_layers}, {"d_model", model.arch.d_model},
                    {"n_heads", model.arch.n_heads},   {"d_ff", model.arch.d_ff},
                    {"vocab", model.arch.vocab},       {"max_seq", model.arch.max_seq}};
  header["precision"] = model.precision == Precision::full ? "full" : "quantized";
  header["dtype"] = dtype_name(model.dtype);
  header["tensors"] = dir;
  const std::string header_str = header.dump();

  std::string out;
  out.append("RSQM", 4);
  append_u32(out, kModelFileVersion);
  append_u32(out, static_cast<std::uint32_t>(header_str.size()));
  out += header_str;
  out += payload;

  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for write: " + path);
  os.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!os) throw std::runtime_error("write failed: " + path);
}

ModelContainer read_model(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open: " + path);
  std::string blob((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());

  if (blob.size() < 12 || blob.compare(0, 4, "RSQM") != 0) {
    throw std::runtime_error("bad model file magic in " + path);
  }
  std::uint32_t version = 0;
  std::uint32_t header_len = 0;
  std::memcpy(&version, blob.data() + 4, 4);
  std::memcpy(&header_len, blob.data() + 8, 4);
  if (version != kModelFileVersion) {
    throw std::runtime_error("unsupported model file version " + std::to_string(version));
  }
  if (blob.size() < 12 + static_cast<std::size_t>(header_len)) {
    throw std::runtime_error("model file truncated inside header");
  }
  const json header = json::parse(blob.substr(12, header_len));
  const char* payload = blob.data() + 12 + header_len;
  const std::size_t payload_size = blob.size() - 12 - header_len;

  ModelContainer m;
  m.arch.n_layers = header.at("arch").at("n_layers").get<int>();
  m.arch.d_model = header.at("arch").at("d_model").get<int>();
  m.arch.n_heads = header.at("arch").at("n_heads").get<int>();
  m.arch.d_ff = header.at("arch").at("d_ff").get<int>();
  m.arch.vocab = header.at("arch").at("vocab").get<int>();
  m.arch.max_seq = header.at("arch").at("max_seq").get<int>();
  m.precision = header.at("precision").get<std::string>() == "quantized" ? Precision::quantized : Precision::full;
  m.dtype = dtype_from_name(header.at("dtype").get<std::string>());

  auto need = [&](std::size_t off, std::size_t n) {
    if (off + n > payload_size) {
      throw std::runtime_error("model payload truncated: need " + std::to_string(off + n) + " bytes, have " +
                               std::to_string(payload_size));
    }
  };

  for (const auto& entry : header.at("tensors")) {
    const std::string name = entry.at("name").get<std::string>();
    const int rows = entry.at("rows").get<int>();
    const int cols = entry.at("cols").get<int>();
    const std::string dtype = entry.at("dtype").get<std::string>();
    const std::size_t offset = entry.at("offset").get<std::size_t>();
    Tensor t;
    if (dtype == "packed") {
      const auto& quant = entry.at("quant");
      QuantCodes q;
      q.bits = quant.at("bits").get<int>();
      q.group_size = quant.at("group_size").get<int>();
      const std::size_t n_groups = quant.at("n_groups").get<std::size_t>();
      const std::size_t codes_offset = quant.at("codes_offset").get<std::size_t>();
      const std::size_t scales_offset = quant.at("scales_offset").get<std::size_t>();
      const std::size_t zeros_offset = quant.at("zeros_offset").get<std::size_t>();
      const std::size_t row_bytes = packed_size(static_cast<std::size_t>(cols), q.bits);
      need(codes_offset, row_bytes * rows);
      q.codes.reserve(static_cast<std::size_t>(rows) * cols);
      for (int r = 0; r < rows; ++r) {
        std::vector<std::uint8_t> row(payload + codes_offset + r * row_bytes,
                                      payload + codes_offset + (r + 1) * row_bytes);
        const auto codes = unpack_codes(row, q.bits, static_cast<std::size_t>(cols));
        q.codes.insert(q.codes.end(), codes.begin(), codes.end());
      }
      need(scales_offset, n_groups * 4);
      need(zeros_offset, n_groups * 4);
      q.scales.resize(n_groups);
      std::memcpy(q.scales.data(), payload + scales_offset, n_groups * 4);
      q.zeros.resize(n_groups);
      for (std::size_t g = 0; g < n_groups; ++g) {
        float f;
        std::memcpy(&f, payload + zeros_offset + g * 4, 4);
        q.zeros[g] = static_cast<std::int32_t>(f);
      }
      t.dtype = m.dtype;
      t.values = dequantize(q, rows, cols, t.dtype);
      t.quant = std::move(q);
    } else {
      t.dtype = dtype_from_name(dtype);
      t.values = Matrix(rows, cols);
      const std::size_t n = static_cast<std::size_t>(rows) * cols;
      if (t.dtype == Dtype::f32) {
        need(offset, n * 4);
        for (std::size_t i = 0; i < n; ++i) {
          float f;
          std::memcpy(&f, payload + offset + i * 4, 4);
          t.values.data()[i] = static_cast<double>(f);
        }
      } else {
        need(offset, n * 8);
        std::memcpy(t.values.data().data(), payload + offset, n * 8);
      }
    }
    m.tensors[name] = std::move(t);
  }
  m.validate();
  return m;
}

}  // namespace rsq
