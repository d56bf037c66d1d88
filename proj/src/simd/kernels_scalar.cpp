#include <cmath>

#include "segseq/simd/kernels.hpp"

namespace segseq::simd::scalar {

double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t k = 0; k < n; ++k) s += a[k] * b[k];
  return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t k = 0; k < n; ++k) y[k] += alpha * x[k];
}

void se_row(const double* xs, std::size_t n, double xi, double scale, double amp2, double* out) {
  for (std::size_t k = 0; k < n; ++k) {
    const double d = xi - xs[k];
    const double arg = scale * d * d;
    out[k] = arg < -708.0 ? 0.0 : amp2 * std::exp(arg);
  }
}

void exp_nonpositive(const double* in, double* out, std::size_t n) {
  for (std::size_t k = 0; k < n; ++k) out[k] = in[k] < -708.0 ? 0.0 : std::exp(in[k]);
}

}  // namespace segseq::simd::scalar
