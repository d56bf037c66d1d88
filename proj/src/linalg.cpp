#include "segseq/linalg.hpp"

#include <cmath>

#include "segseq/simd/kernels.hpp"

namespace segseq {

bool cholesky_in_place(Matrix& a) {
  const auto& k = simd::active();
  const std::size_t n = a.size();
  for (std::size_t i = 0; i < n; ++i) {
    double* ri = a.row(i);
    for (std::size_t j = 0; j < i; ++j) {
      const double* rj = a.row(j);
      ri[j] = (ri[j] - k.dot(ri, rj, j)) / rj[j];
    }
    const double pivot = ri[i] - k.dot(ri, ri, i);
    if (!(pivot > 0.0) || !std::isfinite(pivot)) return false;
    ri[i] = std::sqrt(pivot);
    for (std::size_t j = i + 1; j < n; ++j) ri[j] = 0.0;
  }
  return true;
}

void forward_solve(const Matrix& chol, std::span<double> b) {
  const auto& k = simd::active();
  for (std::size_t i = 0; i < chol.size(); ++i) {
    const double* ri = chol.row(i);
    b[i] = (b[i] - k.dot(ri, b.data(), i)) / ri[i];
  }
}

void backward_solve_transposed(const Matrix& chol, std::span<double> b) {
  const auto& k = simd::active();
  for (std::size_t i = chol.size(); i-- > 0;) {
    const double* ri = chol.row(i);
    b[i] /= ri[i];
    k.axpy(-b[i], ri, b.data(), i);
  }
}

double log_det_from_cholesky(const Matrix& chol) {
  double s = 0.0;
  for (std::size_t i = 0; i < chol.size(); ++i) s += std::log(chol(i, i));
  return 2.0 * s;
}

Matrix inverse_from_cholesky(const Matrix& chol) {
  const auto& k = simd::active();
  const std::size_t n = chol.size();
  // Rows of L^{-1}: row_i = -(1/L_ii) * sum_{j<i} L_ij * row_j, plus 1/L_ii on
  // the diagonal.
  Matrix linv(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double* li = chol.row(i);
    double* out = linv.row(i);
    for (std::size_t j = 0; j < i; ++j) {
      if (li[j] != 0.0) k.axpy(li[j], linv.row(j), out, j + 1);
    }
    const double inv_diag = 1.0 / li[i];
    for (std::size_t j = 0; j < i; ++j) out[j] *= -inv_diag;
    out[i] = inv_diag;
  }
  // A^{-1}[i][j] = sum_{r >= max(i,j)} Linv[r][i] Linv[r][j]; transpose so the
  // sum runs over contiguous memory.
  Matrix upper(n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c <= r; ++c) upper(c, r) = linv(r, c);
  }
  Matrix inv(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      const double v = k.dot(upper.row(i) + j, upper.row(j) + j, n - j);
      inv(i, j) = v;
      inv(j, i) = v;
    }
  }
  return inv;
}

}  // namespace segseq
