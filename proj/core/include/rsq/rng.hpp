#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace rsq {

// One root seed drives every random stage of a run. Each stage derives its
// own stream so e.g. regenerating the calibration corpus never perturbs the
// Hadamard signs.
enum class SeedStage : std::uint64_t {
  model_init = 1,
  corpus = 2,
  hadamard_signs = 3,
  eval_corpus = 4,
  retrieval = 5,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t root, SeedStage stage) {
  return splitmix64(root + 0x9e3779b97f4a7c15ull * static_cast<std::uint64_t>(stage));
}

// Seeded generator with explicit transforms. mt19937_64 output is pinned by
// the standard; the uniform/gaussian mappings are spelled out here instead of
// relying on std distributions, whose bit streams vary across stdlibs.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). Modulo bias is negligible for n << 2^64.
  std::uint64_t uniform_int(std::uint64_t n) { return engine_() % n; }

  int sign() { return (engine_() & 1ull) ? 1 : -1; }

  // Standard normal via Box-Muller; caches the paired deviate.
  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * 3.14159265358979323846 * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  double gaussian(double mean, double stddev) { return mean + stddev * gaussian(); }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace rsq
