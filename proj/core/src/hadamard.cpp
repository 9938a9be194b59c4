#include "rsq/hadamard.hpp"

#include <bit>
#include <cmath>
#include <stdexcept>
#include <string>

#include "rsq/rng.hpp"

namespace rsq {

bool is_power_of_two(int n) { return n >= 1 && std::has_single_bit(static_cast<unsigned>(n)); }

RandomizedHadamard sample_hadamard_signs(int dim, std::uint64_t seed) {
  if (!is_power_of_two(dim)) {
    throw std::invalid_argument("unsupported dimension " + std::to_string(dim) +
                                ": Hadamard construction needs a power of two");
  }
  RandomizedHadamard rh;
  rh.dim = dim;
  rh.seed = seed;
  rh.signs.resize(dim);
  Rng rng(seed);
  for (int i = 0; i < dim; ++i) rh.signs[i] = rng.sign();
  return rh;
}

Matrix hadamard_matrix(const RandomizedHadamard& rh) {
  if (!is_power_of_two(rh.dim) || rh.signs.size() != static_cast<std::size_t>(rh.dim)) {
    throw std::invalid_argument("unsupported dimension " + std::to_string(rh.dim));
  }
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(rh.dim));
  Matrix q(rh.dim, rh.dim);
  // Sylvester entry: H[i][j] = (-1)^popcount(i & j).
  for (int i = 0; i < rh.dim; ++i) {
    double* row = q.row(i);
    for (int j = 0; j < rh.dim; ++j) {
      const int parity = std::popcount(static_cast<unsigned>(i & j)) & 1;
      const double h = parity ? -1.0 : 1.0;
      row[j] = inv_sqrt * h * rh.signs[j];
    }
  }
  return q;
}

Matrix hadamard_matrix(int dim, std::uint64_t seed) {
  return hadamard_matrix(sample_hadamard_signs(dim, seed));
}

}  // namespace rsq
