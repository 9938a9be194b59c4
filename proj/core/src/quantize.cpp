#include "rsq/quantize.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace rsq {

namespace {

int effective_group(int group_size, int cols) { return group_size == 0 ? cols : group_size; }

}  // namespace

QuantGrid fit_grid(std::span<const double> group, int bits, int group_size) {
  if (group.empty()) throw std::invalid_argument("fit_grid: empty group");
  if (bits < 1 || bits > 16) throw std::invalid_argument("fit_grid: bits must be in [1,16]");
  double lo = group[0];
  double hi = group[0];
  for (double v : group) {
    if (!std::isfinite(v)) throw std::invalid_argument("fit_grid: non-finite weight");
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  QuantGrid grid;
  grid.bits = bits;
  grid.group_size = group_size;
  const std::int32_t maxq = grid.max_code();
  if (hi == lo) {
    if (lo == 0.0) {
      grid.scale = 1.0f;
      grid.zero = 0;
    } else {
      // Two-point grid straddling the constant so it is reconstructed exactly.
      grid.scale = static_cast<float>(std::fabs(lo));
      grid.zero = lo > 0.0 ? 0 : 1;
    }
    return grid;
  }
  // The grid always covers 0 so the zero point lands inside [0, maxq] and
  // every group value sits in the representable range.
  lo = std::min(lo, 0.0);
  hi = std::max(hi, 0.0);
  grid.scale = static_cast<float>((hi - lo) / static_cast<double>(maxq));
  if (grid.scale <= 0.0f) {  // span underflowed in f32
    grid.scale = 1.0f;
    grid.zero = 0;
    return grid;
  }
  const double z = std::round(-lo / static_cast<double>(grid.scale));
  grid.zero = static_cast<std::int32_t>(std::clamp(z, 0.0, static_cast<double>(maxq)));
  return grid;
}

std::int32_t quantize_value(double w, const QuantGrid& grid) {
  const double q = std::round(w / static_cast<double>(grid.scale)) + grid.zero;
  return static_cast<std::int32_t>(std::clamp(q, 0.0, static_cast<double>(grid.max_code())));
}

double dequantize_value(std::int32_t code, const QuantGrid& grid) {
  return (static_cast<double>(code) - static_cast<double>(grid.zero)) * static_cast<double>(grid.scale);
}

RtnResult rtn_quantize(std::span<const double> w_group, const QuantGrid& grid) {
  RtnResult out;
  out.codes.resize(w_group.size());
  out.dequant.resize(w_group.size());
  for (std::size_t i = 0; i < w_group.size(); ++i) {
    out.codes[i] = quantize_value(w_group[i], grid);
    out.dequant[i] = dequantize_value(out.codes[i], grid);
  }
  return out;
}

Matrix scale_columns(const Matrix& x, const std::vector<double>& r) {
  if (r.size() != static_cast<std::size_t>(x.cols())) {
    throw std::invalid_argument("scale_columns: importance length " + std::to_string(r.size()) +
                                " != token count " + std::to_string(x.cols()));
  }
  Matrix out(x.rows(), x.cols());
  for (int a = 0; a < x.rows(); ++a) {
    const double* in = x.row(a);
    double* o = out.row(a);
    for (int i = 0; i < x.cols(); ++i) o[i] = r[i] * in[i];
  }
  return out;
}

HessianAccumulator::HessianAccumulator(int dim, double damp_lambda)
    : h_(dim, dim), damp_lambda_(damp_lambda) {
  if (dim < 1) throw std::invalid_argument("HessianAccumulator: dim must be >= 1");
  if (!(damp_lambda > 0.0)) throw std::invalid_argument("HessianAccumulator: damp_lambda must be > 0");
}

void HessianAccumulator::accumulate_rows(const Matrix& x, const std::vector<double>& r) {
  if (x.cols() != h_.rows()) {
    throw std::invalid_argument("Hessian accumulate: feature dim " + std::to_string(x.cols()) +
                                " != " + std::to_string(h_.rows()));
  }
  if (r.size() != static_cast<std::size_t>(x.rows())) {
    throw std::invalid_argument("Hessian accumulate: importance length " + std::to_string(r.size()) +
                                " != token count " + std::to_string(x.rows()));
  }
  const int d = h_.rows();
  std::vector<double> s(d);
  for (int i = 0; i < x.rows(); ++i) {
    if (!(r[i] >= 0.0)) throw std::invalid_argument("Hessian accumulate: negative importance");
    const double* xi = x.row(i);
    for (int j = 0; j < d; ++j) s[j] = r[i] * xi[j];
    for (int a = 0; a < d; ++a) {
      const double sa2 = 2.0 * s[a];
      double* hrow = h_.row(a);
      for (int b = 0; b < d; ++b) hrow[b] += sa2 * s[b];
    }
    ++tokens_seen_;
  }
}

void HessianAccumulator::accumulate(const Matrix& x, const std::vector<double>& r) {
  accumulate_rows(transpose(x), r);
}

HessianAccumulator::Finalized HessianAccumulator::finalize() const {
  if (tokens_seen_ == 0 || max_abs(h_) == 0.0) {
    throw std::runtime_error("Hessian finalize: no calibration signal");
  }
  Finalized out;
  out.h = h_;
  const int d = h_.rows();
  for (int i = 0; i < d; ++i) {
    if (out.h.at(i, i) == 0.0) {
      out.h.at(i, i) = 1.0;
      out.dead_columns.push_back(i);
    }
  }
  double mean_diag = 0.0;
  for (int i = 0; i < d; ++i) mean_diag += out.h.at(i, i);
  mean_diag /= static_cast<double>(d);
  const double damp = damp_lambda_ * mean_diag;
  for (int i = 0; i < d; ++i) out.h.at(i, i) += damp;
  return out;
}

double reconstruction_loss(const Matrix& w, const Matrix& w_deq, const Matrix& h_raw) {
  const int rows = w.rows();
  const int cols = w.cols();
  std::vector<double> delta(cols);
  std::vector<double> hd(cols);
  double loss = 0.0;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) delta[c] = w.at(r, c) - w_deq.at(r, c);
    for (int a = 0; a < cols; ++a) {
      double acc = 0.0;
      const double* hrow = h_raw.row(a);
      for (int c = 0; c < cols; ++c) acc += hrow[c] * delta[c];
      hd[a] = acc;
    }
    for (int c = 0; c < cols; ++c) loss += delta[c] * hd[c];
  }
  return 0.5 * loss;
}

namespace {

struct GridSet {
  std::vector<QuantGrid> grids;  // rows * groups_per_row
  int gpr = 0;
  int gs = 0;

  const QuantGrid& at(int row, int col) const { return grids[row * gpr + col / gs]; }
};

GridSet fit_all_grids(const Matrix& w, int bits, int group_size) {
  GridSet gs;
  gs.gs = effective_group(group_size, w.cols());
  gs.gpr = (w.cols() + gs.gs - 1) / gs.gs;
  gs.grids.reserve(static_cast<std::size_t>(w.rows()) * gs.gpr);
  for (int r = 0; r < w.rows(); ++r) {
    for (int g = 0; g < gs.gpr; ++g) {
      const int begin = g * gs.gs;
      const int len = std::min(gs.gs, w.cols() - begin);
      gs.grids.push_back(fit_grid(std::span<const double>(w.row(r) + begin, len), bits, group_size));
    }
  }
  return gs;
}

QuantizedWeight assemble(const Matrix& w, Matrix work, std::vector<std::int32_t> codes, const GridSet& gs,
                         int bits, int group_size, const Matrix* h_raw) {
  QuantizedWeight out;
  out.codes.bits = bits;
  out.codes.group_size = group_size;
  out.codes.codes = std::move(codes);
  out.codes.scales.reserve(gs.grids.size());
  out.codes.zeros.reserve(gs.grids.size());
  for (const QuantGrid& g : gs.grids) {
    out.codes.scales.push_back(g.scale);
    out.codes.zeros.push_back(g.zero);
  }
  out.dequant = std::move(work);
  if (h_raw != nullptr) out.weighted_loss = reconstruction_loss(w, out.dequant, *h_raw);
  return out;
}

}  // namespace

QuantizedWeight rtn_quantize_weight(const Matrix& w, int bits, int group_size, const Matrix* h_raw) {
  const GridSet gs = fit_all_grids(w, bits, group_size);
  Matrix work(w.rows(), w.cols());
  std::vector<std::int32_t> codes(static_cast<std::size_t>(w.rows()) * w.cols());
  for (int r = 0; r < w.rows(); ++r) {
    for (int c = 0; c < w.cols(); ++c) {
      const QuantGrid& grid = gs.at(r, c);
      const std::int32_t code = quantize_value(w.at(r, c), grid);
      codes[static_cast<std::size_t>(r) * w.cols() + c] = code;
      work.at(r, c) = dequantize_value(code, grid);
    }
  }
  return assemble(w, std::move(work), std::move(codes), gs, bits, group_size, h_raw);
}

QuantizedWeight gptq_quantize_weight(const Matrix& w, const Matrix& h_damped, int bits, int group_size,
                                     const Matrix* h_raw, const ColumnObserver& observer) {
  if (h_damped.rows() != w.cols() || h_damped.cols() != w.cols()) {
    throw std::invalid_argument("gptq: Hessian shape mismatch");
  }
  const GridSet gs = fit_all_grids(w, bits, group_size);
  const Matrix u = upper_cholesky_of_inverse(h_damped);  // H^{-1} = U^T U
  const int rows = w.rows();
  const int cols = w.cols();
  Matrix work = w;
  std::vector<std::int32_t> codes(static_cast<std::size_t>(rows) * cols);
  for (int q = 0; q < cols; ++q) {
    const double inv_d = u.at(q, q);
    const double* urow = u.row(q);
    for (int r = 0; r < rows; ++r) {
      double* wrow = work.row(r);
      const QuantGrid& grid = gs.at(r, q);
      const std::int32_t code = quantize_value(wrow[q], grid);
      const double dq = dequantize_value(code, grid);
      const double err = (wrow[q] - dq) / inv_d;
      codes[static_cast<std::size_t>(r) * cols + q] = code;
      wrow[q] = dq;
      for (int c = q + 1; c < cols; ++c) wrow[c] -= err * urow[c];
    }
    if (observer) observer(q, work);
  }
  return assemble(w, std::move(work), std::move(codes), gs, bits, group_size, h_raw);
}

QuantizedWeight gptq_quantize_weight_blocked(const Matrix& w, const Matrix& h_damped, int bits,
                                             int group_size, int block_size, const Matrix* h_raw) {
  if (h_damped.rows() != w.cols() || h_damped.cols() != w.cols()) {
    throw std::invalid_argument("gptq: Hessian shape mismatch");
  }
  if (block_size < 1) throw std::invalid_argument("gptq: block_size must be >= 1");
  const GridSet gs = fit_all_grids(w, bits, group_size);
  const Matrix u = upper_cholesky_of_inverse(h_damped);
  const int rows = w.rows();
  const int cols = w.cols();
  Matrix work = w;
  std::vector<std::int32_t> codes(static_cast<std::size_t>(rows) * cols);
  std::vector<double> err_block(static_cast<std::size_t>(rows) * block_size);
  for (int b0 = 0; b0 < cols; b0 += block_size) {
    const int b1 = std::min(b0 + block_size, cols);
    for (int q = b0; q < b1; ++q) {
      const double inv_d = u.at(q, q);
      const double* urow = u.row(q);
      for (int r = 0; r < rows; ++r) {
        double* wrow = work.row(r);
        const QuantGrid& grid = gs.at(r, q);
        const std::int32_t code = quantize_value(wrow[q], grid);
        const double dq = dequantize_value(code, grid);
        const double err = (wrow[q] - dq) / inv_d;
        codes[static_cast<std::size_t>(r) * cols + q] = code;
        wrow[q] = dq;
        err_block[static_cast<std::size_t>(r) * block_size + (q - b0)] = err;
        // In-block columns updated eagerly; the tail is deferred.
        for (int c = q + 1; c < b1; ++c) wrow[c] -= err * urow[c];
      }
    }
    // Deferred tail update. Ascending q keeps the per-element operation
    // sequence identical to the naive loop, so results match bit for bit.
    for (int q = b0; q < b1; ++q) {
      const double* urow = u.row(q);
      for (int r = 0; r < rows; ++r) {
        const double err = err_block[static_cast<std::size_t>(r) * block_size + (q - b0)];
        double* wrow = work.row(r);
        for (int c = b1; c < cols; ++c) wrow[c] -= err * urow[c];
      }
    }
  }
  return assemble(w, std::move(work), std::move(codes), gs, bits, group_size, h_raw);
}

}  // namespace rsq
