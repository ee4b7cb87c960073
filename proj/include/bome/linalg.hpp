#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "bome/core.hpp"

namespace bome {

/// Small dense row-major matrix. Sized for desk-scale problems only.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }

  const std::vector<double>& data() const { return data_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// A x
inline Vector matvec(const Matrix& A, std::span<const double> x) {
  Vector y(A.rows(), 0.0);
  for (std::size_t r = 0; r < A.rows(); ++r) y[r] = dot(A.row(r), x);
  return y;
}

// A^T y
inline Vector matvec_t(const Matrix& A, std::span<const double> y) {
  Vector x(A.cols(), 0.0);
  for (std::size_t r = 0; r < A.rows(); ++r) axpy(y[r], A.row(r), x);
  return x;
}

// A^T A
inline Matrix gram(const Matrix& A) {
  Matrix G(A.cols(), A.cols());
  for (std::size_t r = 0; r < A.rows(); ++r) {
    const auto a = A.row(r);
    for (std::size_t i = 0; i < A.cols(); ++i)
      for (std::size_t j = 0; j < A.cols(); ++j) G(i, j) += a[i] * a[j];
  }
  return G;
}

/// Solves S x = b for symmetric positive definite S via Cholesky. Throws
/// NumericalError when S is not (numerically) positive definite.
inline Vector cholesky_solve(Matrix S, Vector b) {
  const std::size_t n = S.rows();
  for (std::size_t j = 0; j < n; ++j) {
    double d = S(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= S(j, k) * S(j, k);
    if (!(d > 0.0)) throw NumericalError("cholesky_solve: matrix is not positive definite");
    const double ljj = std::sqrt(d);
    S(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = S(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= S(i, k) * S(j, k);
      S(i, j) = s / ljj;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < i; ++k) b[i] -= S(i, k) * b[k];
    b[i] /= S(i, i);
  }
  for (std::size_t i = n; i-- > 0;) {
    for (std::size_t k = i + 1; k < n; ++k) b[i] -= S(k, i) * b[k];
    b[i] /= S(i, i);
  }
  return b;
}

/// Largest eigenvalue of a symmetric positive semidefinite matrix by power
/// iteration.
inline double max_eigenvalue_psd(const Matrix& S, int iters = 500) {
  const std::size_t n = S.rows();
  if (n == 0) return 0.0;
  Vector x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = 1.0 + 0.1 * static_cast<double>(i);
  double lambda = 0.0;
  for (int it = 0; it < iters; ++it) {
    const double nx = norm(x);
    if (nx == 0.0) return 0.0;
    for (auto& e : x) e /= nx;
    Vector y = matvec(S, x);
    lambda = dot(x, y);
    x = std::move(y);
  }
  return lambda;
}

}  // namespace bome
