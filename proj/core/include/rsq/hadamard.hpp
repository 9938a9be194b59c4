#pragma once

#include <cstdint>
#include <vector>

#include "rsq/matrix.hpp"

namespace rsq {

/// Randomized Hadamard matrix Q = (1/sqrt(dim)) * H_dim * diag(signs):
/// orthogonal, and it spreads weight mass evenly across coordinates. Only
/// power-of-two dims are supported (Sylvester construction).
struct RandomizedHadamard {
  int dim = 0;
  std::vector<int> signs;  // entries in {-1, +1}
  std::uint64_t seed = 0;
};

bool is_power_of_two(int n);

RandomizedHadamard sample_hadamard_signs(int dim, std::uint64_t seed);

Matrix hadamard_matrix(const RandomizedHadamard& rh);

/// Convenience: sample signs from `seed` and build the dense matrix.
/// Throws std::invalid_argument("unsupported dimension ...") unless dim is a
/// power of two >= 1.
Matrix hadamard_matrix(int dim, std::uint64_t seed);

}  // namespace rsq
