#pragma once

#include <cstddef>
#include <vector>

namespace rsq {

/// Dense row-major matrix of doubles. All Hessian, rotation and solver math
/// runs in 64-bit; fp32 model tensors are held as doubles whose values are
/// exactly float-representable (see Tensor).
class Matrix {
 public:
  Matrix() = default;
  Matrix(int rows, int cols) : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, 0.0) {}
  Matrix(int rows, int cols, std::vector<double> data);

  static Matrix identity(int n);

  int rows() const { return rows_; }
  int cols() const { return cols_; }

  double& at(int r, int c) { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
  double at(int r, int c) const { return data_[static_cast<std::size_t>(r) * cols_ + c]; }

  double* row(int r) { return data_.data() + static_cast<std::size_t>(r) * cols_; }
  const double* row(int r) const { return data_.data() + static_cast<std::size_t>(r) * cols_; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool all_finite() const;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

/// Standard product A*B. Throws std::invalid_argument naming both shapes on
/// a mismatch.
Matrix matmul(const Matrix& a, const Matrix& b);

/// A * B^T without materializing the transpose (rows of both operands are
/// contiguous, which is the layout every weight application in the model hits).
Matrix matmul_nt(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& m);

/// Lower Cholesky factor L with H = L*L^T. No pivoting; throws
/// std::runtime_error "not positive definite" naming the failing pivot index.
Matrix cholesky_lower(const Matrix& h);

/// H^{-1} for symmetric positive definite H, via the Cholesky factorization.
Matrix cholesky_inverse(const Matrix& h);

/// Upper-triangular U with H^{-1} = U^T * U (the factor the quantizer's
/// column loop consumes).
Matrix upper_cholesky_of_inverse(const Matrix& h);

double max_abs(const Matrix& m);
double max_abs_diff(const Matrix& a, const Matrix& b);
double frobenius_norm(const Matrix& m);

}  // namespace rsq
