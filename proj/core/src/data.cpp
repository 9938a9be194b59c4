#include "rsq/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "rsq/rng.hpp"

namespace rsq {

namespace {

constexpr double kZipfExponent = 1.1;
constexpr double kMarkovMixture = 0.5;  // probability of the bigram-table branch

std::vector<double> zipf_cdf(int vocab) {
  std::vector<double> cdf(vocab);
  double total = 0.0;
  for (int t = 0; t < vocab; ++t) {
    total += 1.0 / std::pow(static_cast<double>(t + 1), kZipfExponent);
    cdf[t] = total;
  }
  for (double& v : cdf) v /= total;
  cdf.back() = 1.0;
  return cdf;
}

int sample_cdf(const std::vector<double>& cdf, double u) {
  auto it = std::lower_bound(cdf.begin(), cdf.end(), u);
  if (it == cdf.end()) return static_cast<int>(cdf.size()) - 1;
  return static_cast<int>(it - cdf.begin());
}

// Fixed bigram table: (a, b) hashes to a Zipf quantile. Seed-independent so
// every corpus speaks the same language.
int bigram_next(int a, int b, const std::vector<double>& cdf) {
  const std::uint64_t h = splitmix64((static_cast<std::uint64_t>(a) << 32) ^
                                     static_cast<std::uint64_t>(b) ^ 0x5bf03635ull);
  const double u = static_cast<double>(h >> 11) * 0x1.0p-53;
  return sample_cdf(cdf, u);
}

void write_u32(std::ofstream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff), static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::ifstream& is, std::size_t offset) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) {
    throw std::runtime_error("token file truncated at offset " + std::to_string(offset));
  }
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

constexpr std::uint32_t kTokenFileVersion = 1;

}  // namespace

std::vector<TokenSeq> gen_corpus(int vocab, int n_samples, int seq_len, std::uint64_t seed) {
  if (vocab < 2) throw std::invalid_argument("gen_corpus: vocab must be >= 2");
  if (n_samples < 1 || seq_len < 1) throw std::invalid_argument("gen_corpus: empty corpus requested");
  const std::vector<double> cdf = zipf_cdf(vocab);
  Rng rng(seed);
  std::vector<TokenSeq> samples(n_samples);
  for (auto& seq : samples) {
    seq.resize(seq_len);
    for (int i = 0; i < seq_len; ++i) {
      if (i >= 2 && rng.uniform() < kMarkovMixture) {
        seq[i] = bigram_next(seq[i - 2], seq[i - 1], cdf);
      } else {
        seq[i] = sample_cdf(cdf, rng.uniform());
      }
    }
  }
  return samples;
}

TokenSeq tokenize_bytes(std::string_view text) {
  TokenSeq out(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    out[i] = static_cast<std::int32_t>(static_cast<unsigned char>(text[i]));
  }
  return out;
}

void write_token_file(const std::string& path, const std::vector<TokenSeq>& samples) {
  if (samples.empty()) throw std::invalid_argument("write_token_file: no samples");
  const std::size_t seq_len = samples.front().size();
  for (const auto& s : samples) {
    if (s.size() != seq_len) throw std::invalid_argument("write_token_file: samples must share one length");
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for write: " + path);
  os.write("RSQT", 4);
  write_u32(os, kTokenFileVersion);
  write_u32(os, static_cast<std::uint32_t>(samples.size()));
  write_u32(os, static_cast<std::uint32_t>(seq_len));
  for (const auto& s : samples) {
    for (std::int32_t id : s) write_u32(os, static_cast<std::uint32_t>(id));
  }
  if (!os) throw std::runtime_error("write failed: " + path);
}

std::vector<TokenSeq> read_token_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::string(magic, 4) != "RSQT") {
    throw std::runtime_error("bad token file magic at offset 0 in " + path);
  }
  const std::uint32_t version = read_u32(is, 4);
  if (version != kTokenFileVersion) {
    throw std::runtime_error("unsupported token file version " + std::to_string(version) + " at offset 4");
  }
  const std::uint32_t n_samples = read_u32(is, 8);
  const std::uint32_t seq_len = read_u32(is, 12);
  std::vector<TokenSeq> samples(n_samples);
  std::size_t offset = 16;
  for (auto& s : samples) {
    s.resize(seq_len);
    for (std::uint32_t i = 0; i < seq_len; ++i) {
      s[i] = static_cast<std::int32_t>(read_u32(is, offset));
      offset += 4;
    }
  }
  // Any trailing bytes mean the header lied about the payload length.
  is.peek();
  if (!is.eof()) {
    throw std::runtime_error("token file has trailing bytes past offset " + std::to_string(offset));
  }
  return samples;
}

}  // namespace rsq
