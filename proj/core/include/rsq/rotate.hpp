#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "rsq/matrix.hpp"
#include "rsq/model.hpp"

namespace rsq {

struct RotationSpec {
  Matrix q;  // d_model x d_model orthogonal
  std::uint64_t seed = 0;
  bool enabled = true;
};

/// Randomized-Hadamard rotation for a given root seed (signs come from the
/// hadamard_signs stage of the seed split).
RotationSpec make_rotation(int d_model, std::uint64_t root_seed, bool enabled = true);

/// Orthogonally transform a fused model so that its outputs are preserved
/// while weight outliers are spread out. Residual-stream consumers
/// (wq/wk/wv/wup/wgate/lm_head and the embedding tables, all of which dot
/// rows against the stream or emit stream rows) become W*Q^T; stream
/// producers (wo/wdown) become Q*W. Throws "fusion required before rotation"
/// if any norm scale differs from one.
ModelContainer rotate_model(const ModelContainer& model, const RotationSpec& spec);

struct TensorStats {
  double min = 0.0;
  double max = 0.0;
  double kurtosis = 0.0;  // m4 / m2^2, ~3 for a Gaussian
};

/// Per-tensor summary statistics; used to report outlier reduction from the
/// rotation side by side with the unrotated model.
std::map<std::string, TensorStats> weight_range_stats(const ModelContainer& model);

}  // namespace rsq
