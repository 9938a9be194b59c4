#pragma once

#include <functional>
#include <span>
#include <vector>

#include "rsq/matrix.hpp"
#include "rsq/model.hpp"

namespace rsq {

/// Asymmetric min-max grid for one group of weights:
///   scale = (max - min) / (2^bits - 1), zero = round(-min / scale),
///   code  = clamp(round(w / scale) + zero, 0, 2^bits - 1),
///   deq   = (code - zero) * scale.
/// Constant groups degenerate: an all-zero group stores scale 1 with every
/// code at the zero point; a nonzero constant c stores scale |c| with a one
/// step code offset, so the constant is reconstructed exactly.
struct QuantGrid {
  int bits = 0;
  int group_size = 0;
  float scale = 1.0f;
  std::int32_t zero = 0;

  std::int32_t max_code() const { return (1 << bits) - 1; }
};

QuantGrid fit_grid(std::span<const double> group, int bits, int group_size);

std::int32_t quantize_value(double w, const QuantGrid& grid);
double dequantize_value(std::int32_t code, const QuantGrid& grid);

struct RtnResult {
  std::vector<std::int32_t> codes;
  std::vector<double> dequant;
};

/// Round-to-nearest over one row group with a fixed grid.
RtnResult rtn_quantize(std::span<const double> w_group, const QuantGrid& grid);

/// Column i of x scaled by r[i]; the multiplication is elementwise so
/// accumulating (x, r) and (x*r, ones) take bit-identical paths.
Matrix scale_columns(const Matrix& x, const std::vector<double>& r);

/// Running second-moment matrix H = 2 * sum_i (r_i x_i)(r_i x_i)^T of one
/// weight's input features across the calibration stream. With uniform r
/// this is the classic 2 X X^T.
class HessianAccumulator {
 public:
  explicit HessianAccumulator(int dim, double damp_lambda = 0.01);

  /// x is d_in x T (token features in columns), r has length T.
  void accumulate(const Matrix& x, const std::vector<double>& r);
  /// Token-major variant, x is T x d_in. Same arithmetic, row access.
  void accumulate_rows(const Matrix& x, const std::vector<double>& r);

  const Matrix& raw() const { return h_; }
  long long tokens_seen() const { return tokens_seen_; }
  double damp_lambda() const { return damp_lambda_; }

  struct Finalized {
    Matrix h;                       // damped, positive definite
    std::vector<int> dead_columns;  // zero-diagonal inputs, pinned to 1
  };

  /// Dampen the diagonal by damp_lambda * mean(diag) and pin dead columns.
  /// Throws "no calibration signal" when nothing was accumulated.
  Finalized finalize() const;

 private:
  Matrix h_;
  long long tokens_seen_ = 0;
  double damp_lambda_ = 0.01;
};

struct QuantizedWeight {
  QuantCodes codes;      // packed-grid representation (codes + scales + zeros)
  Matrix dequant;        // W~ as the forward pass will see it
  double weighted_loss = 0.0;  // 0.5 * tr((W - W~) H_raw (W - W~)^T)
};

/// Loss the quantizer minimizes: 0.5 * tr(dW * H * dW^T). With
/// H = 2 X R^2 X^T this equals sum_i r_i^2 ||W x_i - W~ x_i||^2.
double reconstruction_loss(const Matrix& w, const Matrix& w_deq, const Matrix& h_raw);

/// Plain round-to-nearest of a whole matrix (grids fit per row group).
QuantizedWeight rtn_quantize_weight(const Matrix& w, int bits, int group_size, const Matrix* h_raw = nullptr);

/// Observes the working matrix after each column step: quantized prefix
/// 0..q, compensated continuous remainder q+1.. .
using ColumnObserver = std::function<void(int q, const Matrix& work)>;

/// Column-by-column quantize-and-compensate: for each column q (ascending),
/// round it on its pre-fit grid, then spread the rounding error over the
/// not-yet-quantized columns through the Cholesky factor of H^{-1}. Grids are
/// fit once from the original weights before the loop.
QuantizedWeight gptq_quantize_weight(const Matrix& w, const Matrix& h_damped, int bits, int group_size,
                                     const Matrix* h_raw = nullptr,
                                     const ColumnObserver& observer = {});

/// Lazy-update variant processing columns in blocks; bit-compatible with the
/// naive loop (cross-checked in tests).
QuantizedWeight gptq_quantize_weight_blocked(const Matrix& w, const Matrix& h_damped, int bits,
                                             int group_size, int block_size = 32,
                                             const Matrix* h_raw = nullptr);

}  // namespace rsq
