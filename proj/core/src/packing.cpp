#include "rsq/packing.hpp"

#include <stdexcept>
#include <string>

namespace rsq {

std::size_t packed_size(std::size_t n, int bits) { return (n * bits + 7) / 8; }

std::vector<std::uint8_t> pack_codes(const std::vector<std::int32_t>& codes, int bits) {
  if (bits < 1 || bits > 16) {
    throw std::invalid_argument("pack_codes: bits must be in [1,16], got " + std::to_string(bits));
  }
  const std::int32_t max_code = (1 << bits) - 1;
  std::vector<std::uint8_t> out(packed_size(codes.size(), bits), 0);
  std::size_t bitpos = 0;
  for (std::int32_t code : codes) {
    if (code < 0 || code > max_code) {
      throw std::invalid_argument("pack_codes: code " + std::to_string(code) + " out of range for " +
                                  std::to_string(bits) + " bits");
    }
    const std::uint32_t v = static_cast<std::uint32_t>(code);
    for (int b = 0; b < bits; ++b) {
      if (v & (1u << b)) out[(bitpos + b) >> 3] |= static_cast<std::uint8_t>(1u << ((bitpos + b) & 7));
    }
    bitpos += bits;
  }
  return out;
}

std::vector<std::int32_t> unpack_codes(const std::vector<std::uint8_t>& bytes, int bits, std::size_t n) {
  const std::size_t expected = packed_size(n, bits);
  if (bytes.size() != expected) {
    throw std::runtime_error("unpack_codes: expected " + std::to_string(expected) + " bytes for " +
                             std::to_string(n) + " codes of " + std::to_string(bits) + " bits, got " +
                             std::to_string(bytes.size()));
  }
  std::vector<std::int32_t> codes(n, 0);
  std::size_t bitpos = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::uint32_t v = 0;
    for (int b = 0; b < bits; ++b) {
      if (bytes[(bitpos + b) >> 3] & (1u << ((bitpos + b) & 7))) v |= 1u << b;
    }
    codes[i] = static_cast<std::int32_t>(v);
    bitpos += bits;
  }
  return codes;
}

}  // namespace rsq
