#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace segseq {

/// Dense row-major square matrix.
class Matrix {
 public:
  Matrix() = default;
  explicit Matrix(std::size_t n, double fill = 0.0) : n_(n), data_(n * n, fill) {}

  std::size_t size() const { return n_; }
  double& operator()(std::size_t i, std::size_t j) { return data_[i * n_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * n_ + j]; }
  double* row(std::size_t i) { return data_.data() + i * n_; }
  const double* row(std::size_t i) const { return data_.data() + i * n_; }
  std::span<const double> values() const { return data_; }

 private:
  std::size_t n_ = 0;
  std::vector<double> data_;
};

/// Overwrites the lower triangle of `a` with its Cholesky factor and zeros
/// the strict upper triangle. Returns false on a non-positive pivot, leaving
/// `a` in an unspecified state.
bool cholesky_in_place(Matrix& a);

/// Solves L z = b in place.
void forward_solve(const Matrix& chol, std::span<double> b);

/// Solves L^T x = b in place.
void backward_solve_transposed(const Matrix& chol, std::span<double> b);

/// ln|A| given the Cholesky factor of A.
double log_det_from_cholesky(const Matrix& chol);

/// Full symmetric A^{-1} from the Cholesky factor of A.
Matrix inverse_from_cholesky(const Matrix& chol);

}  // namespace segseq
