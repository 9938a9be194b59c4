#include "rsq/rotate.hpp"

#include <cmath>
#include <stdexcept>

#include "rsq/hadamard.hpp"
#include "rsq/rng.hpp"

namespace rsq {

RotationSpec make_rotation(int d_model, std::uint64_t root_seed, bool enabled) {
  RotationSpec spec;
  spec.seed = root_seed;
  spec.enabled = enabled;
  spec.q = hadamard_matrix(d_model, derive_seed(root_seed, SeedStage::hadamard_signs));
  return spec;
}

ModelContainer rotate_model(const ModelContainer& model, const RotationSpec& spec) {
  if (!spec.enabled) return model;
  if (model.precision != Precision::full) {
    throw std::invalid_argument("rotate_model: requires a full-precision container");
  }
  if (!norm_scales_are_unit(model)) {
    throw std::invalid_argument("fusion required before rotation (found a norm scale != 1)");
  }
  const int d = model.arch.d_model;
  if (spec.q.rows() != d || spec.q.cols() != d) {
    throw std::invalid_argument("rotation matrix shape mismatch");
  }
  const Matrix check = matmul_nt(spec.q, spec.q);  // Q Q^T
  if (max_abs_diff(check, Matrix::identity(d)) > 1e-10) {
    throw std::invalid_argument("rotation matrix is not orthogonal");
  }

  ModelContainer out = model;
  // W <- W Q^T: rows of these tensors live in (or dot against) the residual
  // stream basis.
  const std::string right_names[] = {"wq", "wk", "wv", "wup", "wgate"};
  auto apply_right = [&](const std::string& name) {
    Tensor& t = out.tensor(name);
    t.values = matmul_nt(t.values, spec.q);
    snap_to_dtype(t.values, t.dtype);
  };
  // W <- Q W: outputs of these tensors feed the residual stream.
  auto apply_left = [&](const std::string& name) {
    Tensor& t = out.tensor(name);
    t.values = matmul(spec.q, t.values);
    snap_to_dtype(t.values, t.dtype);
  };
  for (int l = 0; l < model.arch.n_layers; ++l) {
    for (const auto& n : right_names) apply_right(ModelContainer::layer_key(l, n));
    apply_left(ModelContainer::layer_key(l, "wo"));
    apply_left(ModelContainer::layer_key(l, "wdown"));
  }
  apply_right("lm_head");
  apply_right("embedding");
  apply_right("pos_embedding");
  return out;
}

std::map<std::string, TensorStats> weight_range_stats(const ModelContainer& model) {
  std::map<std::string, TensorStats> out;
  for (const auto& [name, t] : model.tensors) {
    const auto& d = t.values.data();
    TensorStats s;
    s.min = d.front();
    s.max = d.front();
    double mean = 0.0;
    for (double v : d) {
      s.min = std::min(s.min, v);
      s.max = std::max(s.max, v);
      mean += v;
    }
    mean /= static_cast<double>(d.size());
    double m2 = 0.0;
    double m4 = 0.0;
    for (double v : d) {
      const double c = v - mean;
      m2 += c * c;
      m4 += c * c * c * c;
    }
    m2 /= static_cast<double>(d.size());
    m4 /= static_cast<double>(d.size());
    s.kurtosis = m2 > 0.0 ? m4 / (m2 * m2) : 0.0;
    out[name] = s;
  }
  return out;
}

}  // namespace rsq
