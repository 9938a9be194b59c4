#include "rsq/model.hpp"

#include <cmath>
#include <stdexcept>

#include "rsq/hadamard.hpp"
#include "rsq/rng.hpp"

namespace rsq {

namespace {

constexpr double kRmsEps = 1e-6;
constexpr double kInitStd = 0.02;

double silu(double x) { return x / (1.0 + std::exp(-x)); }

// RMSNorm with a per-feature scale vector (the scale row lives in `gamma`).
Matrix rmsnorm(const Matrix& x, const Matrix& gamma) {
  Matrix out(x.rows(), x.cols());
  const int d = x.cols();
  const double* g = gamma.row(0);
  for (int i = 0; i < x.rows(); ++i) {
    const double* in = x.row(i);
    double* o = out.row(i);
    double ss = 0.0;
    for (int j = 0; j < d; ++j) ss += in[j] * in[j];
    const double inv_rms = 1.0 / std::sqrt(ss / d + kRmsEps);
    for (int j = 0; j < d; ++j) o[j] = in[j] * inv_rms * g[j];
  }
  return out;
}

Matrix gaussian_matrix(int rows, int cols, double stddev, Rng& rng) {
  Matrix m(rows, cols);
  for (double& v : m.data()) v = rng.gaussian(0.0, stddev);
  return m;
}

Matrix sinusoidal_positions(int max_seq, int d_model) {
  Matrix p(max_seq, d_model);
  for (int t = 0; t < max_seq; ++t) {
    for (int j = 0; j < d_model; j += 2) {
      const double freq = std::pow(10000.0, -static_cast<double>(j) / d_model);
      p.at(t, j) = std::sin(t * freq);
      if (j + 1 < d_model) p.at(t, j + 1) = std::cos(t * freq);
    }
  }
  return p;
}

}  // namespace

void ModelArch::validate() const {
  if (n_layers < 1) throw std::invalid_argument("arch: n_layers must be >= 1");
  if (!is_power_of_two(d_model)) throw std::invalid_argument("arch: d_model must be a power of two");
  if (!is_power_of_two(d_ff)) throw std::invalid_argument("arch: d_ff must be a power of two");
  if (n_heads < 1 || d_model % n_heads != 0) {
    throw std::invalid_argument("arch: n_heads must divide d_model");
  }
  if (vocab < 2) throw std::invalid_argument("arch: vocab must be >= 2");
  if (max_seq < 1) throw std::invalid_argument("arch: max_seq must be >= 1");
}

void snap_to_dtype(Matrix& m, Dtype dtype) {
  if (dtype == Dtype::f64) return;
  for (double& v : m.data()) v = static_cast<double>(static_cast<float>(v));
}

Matrix dequantize(const QuantCodes& q, int rows, int cols, Dtype dtype) {
  Matrix out(rows, cols);
  const int gpr = q.groups_per_row(cols);
  const int gs = q.group_size == 0 ? cols : q.group_size;
  for (int r = 0; r < rows; ++r) {
    double* orow = out.row(r);
    const std::int32_t* crow = q.codes.data() + static_cast<std::size_t>(r) * cols;
    for (int c = 0; c < cols; ++c) {
      const int g = r * gpr + c / gs;
      orow[c] = (static_cast<double>(crow[c]) - static_cast<double>(q.zeros[g])) *
                static_cast<double>(q.scales[g]);
    }
  }
  snap_to_dtype(out, dtype);
  return out;
}

const Tensor& ModelContainer::tensor(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw std::invalid_argument("missing tensor: " + name);
  return it->second;
}

Tensor& ModelContainer::tensor(const std::string& name) {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw std::invalid_argument("missing tensor: " + name);
  return it->second;
}

std::string ModelContainer::layer_key(int layer, const std::string& name) {
  const std::string idx = layer < 10 ? "0" + std::to_string(layer) : std::to_string(layer);
  return "layers." + idx + "." + name;
}

void ModelContainer::validate() const {
  arch.validate();
  auto expect = [&](const std::string& name, int rows, int cols) {
    const Tensor& t = tensor(name);
    if (t.values.rows() != rows || t.values.cols() != cols) {
      throw std::invalid_argument("tensor " + name + " has shape " + std::to_string(t.values.rows()) + "x" +
                                  std::to_string(t.values.cols()) + ", expected " + std::to_string(rows) +
                                  "x" + std::to_string(cols));
    }
  };
  expect("embedding", arch.vocab, arch.d_model);
  expect("pos_embedding", arch.max_seq, arch.d_model);
  expect("lm_head", arch.vocab, arch.d_model);
  expect("final_norm_scale", 1, arch.d_model);
  for (int l = 0; l < arch.n_layers; ++l) {
    expect(layer_key(l, "wq"), arch.d_model, arch.d_model);
    expect(layer_key(l, "wk"), arch.d_model, arch.d_model);
    expect(layer_key(l, "wv"), arch.d_model, arch.d_model);
    expect(layer_key(l, "wo"), arch.d_model, arch.d_model);
    expect(layer_key(l, "wup"), arch.d_ff, arch.d_model);
    expect(layer_key(l, "wgate"), arch.d_ff, arch.d_model);
    expect(layer_key(l, "wdown"), arch.d_model, arch.d_ff);
    expect(layer_key(l, "norm1_scale"), 1, arch.d_model);
    expect(layer_key(l, "norm2_scale"), 1, arch.d_model);
  }
  bool any_quant = false;
  for (const auto& [name, t] : tensors) {
    if (t.quantized()) any_quant = true;
  }
  if (any_quant != (precision == Precision::quantized)) {
    throw std::invalid_argument("precision tag inconsistent with quant metadata");
  }
}

ModelContainer generate_model(const ModelArch& arch, std::uint64_t seed, Dtype dtype) {
  arch.validate();
  ModelContainer m;
  m.arch = arch;
  m.precision = Precision::full;
  m.dtype = dtype;
  Rng rng(derive_seed(seed, SeedStage::model_init));

  auto put = [&](const std::string& name, Matrix values) {
    snap_to_dtype(values, dtype);
    m.tensors[name] = Tensor{std::move(values), dtype, std::nullopt};
  };
  auto uniform_row = [&](int n, double lo, double hi) {
    Matrix v(1, n);
    for (double& x : v.data()) x = rng.uniform(lo, hi);
    return v;
  };

  // Generation order is fixed; it is part of the determinism contract.
  put("embedding", gaussian_matrix(arch.vocab, arch.d_model, kInitStd, rng));
  put("lm_head", gaussian_matrix(arch.vocab, arch.d_model, kInitStd, rng));
  for (int l = 0; l < arch.n_layers; ++l) {
    put(ModelContainer::layer_key(l, "wq"), gaussian_matrix(arch.d_model, arch.d_model, kInitStd, rng));
    put(ModelContainer::layer_key(l, "wk"), gaussian_matrix(arch.d_model, arch.d_model, kInitStd, rng));
    put(ModelContainer::layer_key(l, "wv"), gaussian_matrix(arch.d_model, arch.d_model, kInitStd, rng));
    put(ModelContainer::layer_key(l, "wo"), gaussian_matrix(arch.d_model, arch.d_model, kInitStd, rng));
    put(ModelContainer::layer_key(l, "wup"), gaussian_matrix(arch.d_ff, arch.d_model, kInitStd, rng));
    put(ModelContainer::layer_key(l, "wgate"), gaussian_matrix(arch.d_ff, arch.d_model, kInitStd, rng));
    put(ModelContainer::layer_key(l, "wdown"), gaussian_matrix(arch.d_model, arch.d_ff, kInitStd, rng));
    // Scales away from 1 keep the fusion step nontrivial.
    put(ModelContainer::layer_key(l, "norm1_scale"), uniform_row(arch.d_model, 0.5, 1.5));
    put(ModelContainer::layer_key(l, "norm2_scale"), uniform_row(arch.d_model, 0.5, 1.5));
  }
  put("final_norm_scale", uniform_row(arch.d_model, 0.5, 1.5));
  put("pos_embedding", sinusoidal_positions(arch.max_seq, arch.d_model));
  m.validate();
  return m;
}

Matrix embed_tokens(const ModelContainer& model, const TokenSeq& tokens) {
  const int t_len = static_cast<int>(tokens.size());
  if (t_len < 1) throw std::invalid_argument("forward: empty token sequence");
  if (t_len > model.arch.max_seq) {
    throw std::invalid_argument("forward: sequence length " + std::to_string(t_len) + " exceeds max_seq " +
                                std::to_string(model.arch.max_seq));
  }
  const Matrix& emb = model.tensor("embedding").values;
  const Matrix& pos = model.tensor("pos_embedding").values;
  Matrix z(t_len, model.arch.d_model);
  for (int i = 0; i < t_len; ++i) {
    const std::int32_t id = tokens[i];
    if (id < 0 || id >= model.arch.vocab) {
      throw std::invalid_argument("forward: token id " + std::to_string(id) + " out of range at position " +
                                  std::to_string(i));
    }
    const double* e = emb.row(id);
    const double* p = pos.row(i);
    double* zr = z.row(i);
    for (int j = 0; j < model.arch.d_model; ++j) zr[j] = e[j] + p[j];
  }
  return z;
}

LayerTrace forward_layer(const ModelContainer& model, int layer, const Matrix& z_in, bool capture_attention) {
  const ModelArch& arch = model.arch;
  const int t_len = z_in.rows();
  const int dh = arch.head_dim();
  LayerTrace tr;
  tr.z_in = z_in;

  const Matrix& wq = model.tensor(ModelContainer::layer_key(layer, "wq")).values;
  const Matrix& wk = model.tensor(ModelContainer::layer_key(layer, "wk")).values;
  const Matrix& wv = model.tensor(ModelContainer::layer_key(layer, "wv")).values;
  const Matrix& wo = model.tensor(ModelContainer::layer_key(layer, "wo")).values;
  const Matrix& wup = model.tensor(ModelContainer::layer_key(layer, "wup")).values;
  const Matrix& wgate = model.tensor(ModelContainer::layer_key(layer, "wgate")).values;
  const Matrix& wdown = model.tensor(ModelContainer::layer_key(layer, "wdown")).values;
  const Matrix& g1 = model.tensor(ModelContainer::layer_key(layer, "norm1_scale")).values;
  const Matrix& g2 = model.tensor(ModelContainer::layer_key(layer, "norm2_scale")).values;

  tr.h_norm1 = rmsnorm(z_in, g1);
  const Matrix q = matmul_nt(tr.h_norm1, wq);
  const Matrix k = matmul_nt(tr.h_norm1, wk);
  const Matrix v = matmul_nt(tr.h_norm1, wv);

  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));
  tr.attn_ctx = Matrix(t_len, arch.d_model);
  if (capture_attention) tr.attn.assign(arch.n_heads, Matrix(t_len, t_len));
  std::vector<double> scores(t_len);
  for (int m = 0; m < arch.n_heads; ++m) {
    const int off = m * dh;
    for (int i = 0; i < t_len; ++i) {
      // Causal attention: scores over j <= i only, softmax with max-shift.
      double max_score = -1e300;
      for (int j = 0; j <= i; ++j) {
        double s = 0.0;
        const double* qi = q.row(i) + off;
        const double* kj = k.row(j) + off;
        for (int x = 0; x < dh; ++x) s += qi[x] * kj[x];
        scores[j] = s * inv_sqrt_dh;
        max_score = std::max(max_score, scores[j]);
      }
      double denom = 0.0;
      for (int j = 0; j <= i; ++j) {
        scores[j] = std::exp(scores[j] - max_score);
        denom += scores[j];
      }
      double* ctx = tr.attn_ctx.row(i) + off;
      for (int j = 0; j <= i; ++j) {
        const double a = scores[j] / denom;
        if (capture_attention) tr.attn[m].at(i, j) = a;
        const double* vj = v.row(j) + off;
        for (int x = 0; x < dh; ++x) ctx[x] += a * vj[x];
      }
    }
  }

  const Matrix attn_out = matmul_nt(tr.attn_ctx, wo);
  Matrix z_mid(t_len, arch.d_model);
  for (int i = 0; i < t_len; ++i) {
    const double* a = z_in.row(i);
    const double* b = attn_out.row(i);
    double* o = z_mid.row(i);
    for (int j = 0; j < arch.d_model; ++j) o[j] = a[j] + b[j];
  }

  tr.h_norm2 = rmsnorm(z_mid, g2);
  const Matrix up = matmul_nt(tr.h_norm2, wup);
  const Matrix gate = matmul_nt(tr.h_norm2, wgate);
  tr.ffn_act = Matrix(t_len, arch.d_ff);
  for (int i = 0; i < t_len; ++i) {
    const double* u = up.row(i);
    const double* g = gate.row(i);
    double* o = tr.ffn_act.row(i);
    for (int j = 0; j < arch.d_ff; ++j) o[j] = silu(g[j]) * u[j];
  }
  const Matrix ffn_out = matmul_nt(tr.ffn_act, wdown);

  tr.z_out = Matrix(t_len, arch.d_model);
  for (int i = 0; i < t_len; ++i) {
    const double* a = z_mid.row(i);
    const double* b = ffn_out.row(i);
    double* o = tr.z_out.row(i);
    for (int j = 0; j < arch.d_model; ++j) o[j] = a[j] + b[j];
  }
  return tr;
}

Matrix final_norm_output(const ModelContainer& model, const Matrix& z) {
  return rmsnorm(z, model.tensor("final_norm_scale").values);
}

Matrix output_logits(const ModelContainer& model, const Matrix& z) {
  return matmul_nt(final_norm_output(model, z), model.tensor("lm_head").values);
}

Matrix forward(const ModelContainer& model, const TokenSeq& tokens) {
  Matrix z = embed_tokens(model, tokens);
  for (int l = 0; l < model.arch.n_layers; ++l) {
    z = forward_layer(model, l, z, /*capture_attention=*/false).z_out;
  }
  return output_logits(model, z);
}

TracedForward forward_with_trace(const ModelContainer& model, const TokenSeq& tokens) {
  TracedForward out;
  Matrix z = embed_tokens(model, tokens);
  out.layers.reserve(model.arch.n_layers);
  for (int l = 0; l < model.arch.n_layers; ++l) {
    out.layers.push_back(forward_layer(model, l, z, /*capture_attention=*/true));
    z = out.layers.back().z_out;
  }
  out.logits = output_logits(model, z);
  return out;
}

bool norm_scales_are_unit(const ModelContainer& model) {
  auto unit = [&](const std::string& name) {
    for (double v : model.tensor(name).values.data()) {
      if (v != 1.0) return false;
    }
    return true;
  };
  if (!unit("final_norm_scale")) return false;
  for (int l = 0; l < model.arch.n_layers; ++l) {
    if (!unit(ModelContainer::layer_key(l, "norm1_scale"))) return false;
    if (!unit(ModelContainer::layer_key(l, "norm2_scale"))) return false;
  }
  return true;
}

ModelContainer fuse_norm_scales(const ModelContainer& model) {
  if (model.precision != Precision::full) {
    throw std::invalid_argument("fuse_norm_scales: requires a full-precision container");
  }
  ModelContainer out = model;
  auto scale_columns = [&](const std::string& weight, const std::string& scale) {
    Tensor& w = out.tensor(weight);
    const Matrix& g = out.tensor(scale).values;
    for (int r = 0; r < w.values.rows(); ++r) {
      double* row = w.values.row(r);
      for (int c = 0; c < w.values.cols(); ++c) row[c] *= g.at(0, c);
    }
    snap_to_dtype(w.values, w.dtype);
  };
  auto reset = [&](const std::string& scale) {
    for (double& v : out.tensor(scale).values.data()) v = 1.0;
  };
  for (int l = 0; l < model.arch.n_layers; ++l) {
    scale_columns(ModelContainer::layer_key(l, "wq"), ModelContainer::layer_key(l, "norm1_scale"));
    scale_columns(ModelContainer::layer_key(l, "wk"), ModelContainer::layer_key(l, "norm1_scale"));
    scale_columns(ModelContainer::layer_key(l, "wv"), ModelContainer::layer_key(l, "norm1_scale"));
    scale_columns(ModelContainer::layer_key(l, "wup"), ModelContainer::layer_key(l, "norm2_scale"));
    scale_columns(ModelContainer::layer_key(l, "wgate"), ModelContainer::layer_key(l, "norm2_scale"));
    reset(ModelContainer::layer_key(l, "norm1_scale"));
    reset(ModelContainer::layer_key(l, "norm2_scale"));
  }
  scale_columns("lm_head", "final_norm_scale");
  reset("final_norm_scale");
  return out;
}

}  // namespace rsq
