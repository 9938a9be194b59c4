#include "rsq/matrix.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace rsq {

namespace {

std::string shape_str(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace

Matrix::Matrix(int rows, int cols, std::vector<double> data) : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != static_cast<std::size_t>(rows) * cols) {
    throw std::invalid_argument("matrix data length " + std::to_string(data_.size()) + " != " +
                                std::to_string(rows) + "*" + std::to_string(cols));
  }
}

Matrix Matrix::identity(int n) {
  Matrix m(n, n);
  for (int i = 0; i < n; ++i) m.at(i, i) = 1.0;
  return m;
}

bool Matrix::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw std::invalid_argument("matmul shape mismatch: " + shape_str(a) + " x " + shape_str(b));
  }
  Matrix c(a.rows(), b.cols());
  for (int i = 0; i < a.rows(); ++i) {
    const double* arow = a.row(i);
    double* crow = c.row(i);
    for (int k = 0; k < a.cols(); ++k) {
      const double aik = arow[k];
      if (aik == 0.0) continue;
      const double* brow = b.row(k);
      for (int j = 0; j < b.cols(); ++j) {
        crow[j] += aik * brow[j];
      }
    }
  }
  return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    throw std::invalid_argument("matmul_nt shape mismatch: " + shape_str(a) + " x " + shape_str(b) + "^T");
  }
  Matrix c(a.rows(), b.rows());
  for (int i = 0; i < a.rows(); ++i) {
    const double* arow = a.row(i);
    double* crow = c.row(i);
    for (int j = 0; j < b.rows(); ++j) {
      const double* brow = b.row(j);
      double acc = 0.0;
      for (int k = 0; k < a.cols(); ++k) acc += arow[k] * brow[k];
      crow[j] = acc;
    }
  }
  return c;
}

Matrix transpose(const Matrix& m) {
  Matrix t(m.cols(), m.rows());
  for (int i = 0; i < m.rows(); ++i) {
    for (int j = 0; j < m.cols(); ++j) t.at(j, i) = m.at(i, j);
  }
  return t;
}

Matrix cholesky_lower(const Matrix& h) {
  if (h.rows() != h.cols()) {
    throw std::invalid_argument("cholesky: matrix not square: " + shape_str(h));
  }
  const int n = h.rows();
  Matrix l(n, n);
  for (int j = 0; j < n; ++j) {
    double diag = h.at(j, j);
    for (int k = 0; k < j; ++k) diag -= l.at(j, k) * l.at(j, k);
    if (!(diag > 0.0)) {
      throw std::runtime_error("cholesky: not positive definite at pivot " + std::to_string(j));
    }
    const double ljj = std::sqrt(diag);
    l.at(j, j) = ljj;
    for (int i = j + 1; i < n; ++i) {
      double acc = h.at(i, j);
      for (int k = 0; k < j; ++k) acc -= l.at(i, k) * l.at(j, k);
      l.at(i, j) = acc / ljj;
    }
  }
  return l;
}

namespace {

// Inverse of a lower-triangular matrix by forward substitution per column.
Matrix lower_triangular_inverse(const Matrix& l) {
  const int n = l.rows();
  Matrix inv(n, n);
  for (int j = 0; j < n; ++j) {
    inv.at(j, j) = 1.0 / l.at(j, j);
    for (int i = j + 1; i < n; ++i) {
      double acc = 0.0;
      for (int k = j; k < i; ++k) acc += l.at(i, k) * inv.at(k, j);
      inv.at(i, j) = -acc / l.at(i, i);
    }
  }
  return inv;
}

}  // namespace

Matrix cholesky_inverse(const Matrix& h) {
  const Matrix l = cholesky_lower(h);
  const Matrix linv = lower_triangular_inverse(l);
  // H^{-1} = L^{-T} L^{-1}
  const int n = h.rows();
  Matrix inv(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) {
      double acc = 0.0;
      for (int k = i; k < n; ++k) acc += linv.at(k, i) * linv.at(k, j);
      inv.at(i, j) = acc;
      inv.at(j, i) = acc;
    }
  }
  return inv;
}

Matrix upper_cholesky_of_inverse(const Matrix& h) {
  return transpose(cholesky_lower(cholesky_inverse(h)));
}

double max_abs(const Matrix& m) {
  double r = 0.0;
  for (double v : m.data()) r = std::max(r, std::fabs(v));
  return r;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument("max_abs_diff shape mismatch: " + shape_str(a) + " vs " + shape_str(b));
  }
  double r = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i) {
    r = std::max(r, std::fabs(a.data()[i] - b.data()[i]));
  }
  return r;
}

double frobenius_norm(const Matrix& m) {
  double acc = 0.0;
  for (double v : m.data()) acc += v * v;
  return std::sqrt(acc);
}

}  // namespace rsq
