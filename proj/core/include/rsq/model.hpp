#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rsq/data.hpp"
#include "rsq/matrix.hpp"

namespace rsq {

enum class Dtype { f32, f64 };

struct ModelArch {
  int n_layers = 0;
  int d_model = 0;  // power of two
  int n_heads = 0;  // divides d_model
  int d_ff = 0;     // power of two
  int vocab = 0;
  int max_seq = 0;

  void validate() const;
  int head_dim() const { return d_model / n_heads; }
};

/// Packed integer representation of a quantized tensor: per-(row, group)
/// asymmetric grids, codes kept unpacked in memory and bit-packed on disk.
struct QuantCodes {
  int bits = 0;
  int group_size = 0;  // columns per group; 0 = whole row
  std::vector<std::int32_t> codes;  // rows*cols, row-major
  std::vector<float> scales;        // rows * groups_per_row
  std::vector<std::int32_t> zeros;  // same shape as scales

  int groups_per_row(int cols) const {
    const int gs = group_size == 0 ? cols : group_size;
    return (cols + gs - 1) / gs;
  }
};

/// A named model tensor. `values` always holds the dense matrix the forward
/// pass consumes; for fp32 tensors every entry is exactly float-representable,
/// and for quantized tensors it caches the dequantized weights
/// (code - zero) * scale.
struct Tensor {
  Matrix values;
  Dtype dtype = Dtype::f32;
  std::optional<QuantCodes> quant;

  bool quantized() const { return quant.has_value(); }
};

/// Snap every entry through float so the value set matches 32-bit storage.
void snap_to_dtype(Matrix& m, Dtype dtype);

Matrix dequantize(const QuantCodes& q, int rows, int cols, Dtype dtype);

enum class Precision { full, quantized };

/// Describes one forward pass through a single block, capturing everything
/// the importance strategies and per-weight Hessians need.
struct LayerTrace {
  Matrix z_in;                // T x d_model, layer input
  std::vector<Matrix> attn;   // per head, T x T causal row-stochastic
  Matrix h_norm1;             // input features of wq/wk/wv
  Matrix attn_ctx;            // input features of wo
  Matrix h_norm2;             // input features of wup/wgate
  Matrix ffn_act;             // input features of wdown
  Matrix z_out;               // T x d_model, layer output
};

inline const std::vector<std::string>& layer_weight_names() {
  static const std::vector<std::string> names = {"wq", "wk", "wv", "wo", "wup", "wgate", "wdown"};
  return names;
}

struct ModelContainer {
  ModelArch arch;
  Precision precision = Precision::full;
  Dtype dtype = Dtype::f32;
  std::map<std::string, Tensor> tensors;

  const Tensor& tensor(const std::string& name) const;
  Tensor& tensor(const std::string& name);
  static std::string layer_key(int layer, const std::string& name);

  void validate() const;
};

/// Deterministic seeded init: Gaussian std 0.02 projections, norm scales
/// uniform in [0.5, 1.5], sinusoidal positional table. Same (arch, seed,
/// dtype) gives a bit-identical container.
ModelContainer generate_model(const ModelArch& arch, std::uint64_t seed, Dtype dtype = Dtype::f32);

/// Causal decoder forward; logits are T x vocab. Throws on out-of-range
/// token ids (naming the position) and on T > max_seq.
Matrix forward(const ModelContainer& model, const TokenSeq& tokens);

struct TracedForward {
  Matrix logits;
  std::vector<LayerTrace> layers;
};

TracedForward forward_with_trace(const ModelContainer& model, const TokenSeq& tokens);

/// Absorb each RMSNorm scale vector into the weights consuming its output
/// (wq/wk/wv for norm1, wup/wgate for norm2, lm_head for the final norm) and
/// reset the scales to one. A no-op on an already fused model.
ModelContainer fuse_norm_scales(const ModelContainer& model);

bool norm_scales_are_unit(const ModelContainer& model);

// Layer-level entry points; forward() composes exactly these, so quantized
// and full-precision containers share one arithmetic path.
Matrix embed_tokens(const ModelContainer& model, const TokenSeq& tokens);
LayerTrace forward_layer(const ModelContainer& model, int layer, const Matrix& z_in, bool capture_attention);
Matrix final_norm_output(const ModelContainer& model, const Matrix& z);
Matrix output_logits(const ModelContainer& model, const Matrix& z);

}  // namespace rsq
