// Compiled with -mavx2 -mfma; only reached through the dispatch table after a
// CPUID check.
#include <immintrin.h>

#include <cmath>

#include "segseq/simd/kernels.hpp"

namespace segseq::simd::avx2 {
namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

// exp(x) for x in [-708, 0]. Cody-Waite reduction x = n ln2 + r with
// |r| <= ln2/2, then a degree-13 Taylor polynomial (truncation < 1e-17).
inline __m256d exp_kernel(__m256d x) {
  const __m256d lower = _mm256_set1_pd(-708.0);
  const __m256d underflow = _mm256_cmp_pd(x, lower, _CMP_LT_OQ);
  x = _mm256_max_pd(x, lower);

  const __m256d log2e = _mm256_set1_pd(1.4426950408889634);
  const __m256d ln2_hi = _mm256_set1_pd(6.93147180369123816490e-01);
  const __m256d ln2_lo = _mm256_set1_pd(1.90821492927058770002e-10);
  const __m256d n = _mm256_round_pd(_mm256_mul_pd(x, log2e), _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256d r = _mm256_fnmadd_pd(n, ln2_hi, x);
  r = _mm256_fnmadd_pd(n, ln2_lo, r);

  static constexpr double inv_fact[] = {
      1.0 / 6227020800.0, 1.0 / 479001600.0, 1.0 / 39916800.0, 1.0 / 3628800.0, 1.0 / 362880.0,
      1.0 / 40320.0,      1.0 / 5040.0,      1.0 / 720.0,      1.0 / 120.0,     1.0 / 24.0,
      1.0 / 6.0,          0.5,               1.0,              1.0};
  __m256d p = _mm256_set1_pd(inv_fact[0]);
  for (int k = 1; k < 14; ++k) p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(inv_fact[k]));

  // 2^n via the exponent field: n + 1023 lands in the low mantissa bits of
  // (n + 1023 + 1.5 * 2^52), then shifts into place.
  const __m256d magic = _mm256_set1_pd(6755399441055744.0);
  const __m256d biased = _mm256_add_pd(_mm256_add_pd(n, _mm256_set1_pd(1023.0)), magic);
  const __m256i bits = _mm256_slli_epi64(_mm256_castpd_si256(biased), 52);
  const __m256d scale = _mm256_castsi256_pd(bits);

  return _mm256_andnot_pd(underflow, _mm256_mul_pd(p, scale));
}

}  // namespace

double dot(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  __m256d acc2 = _mm256_setzero_pd();
  __m256d acc3 = _mm256_setzero_pd();
  std::size_t k = 0;
  for (; k + 16 <= n; k += 16) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + k), _mm256_loadu_pd(b + k), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + k + 4), _mm256_loadu_pd(b + k + 4), acc1);
    acc2 = _mm256_fmadd_pd(_mm256_loadu_pd(a + k + 8), _mm256_loadu_pd(b + k + 8), acc2);
    acc3 = _mm256_fmadd_pd(_mm256_loadu_pd(a + k + 12), _mm256_loadu_pd(b + k + 12), acc3);
  }
  for (; k + 4 <= n; k += 4) acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + k), _mm256_loadu_pd(b + k), acc0);
  double s = hsum(_mm256_add_pd(_mm256_add_pd(acc0, acc1), _mm256_add_pd(acc2, acc3)));
  for (; k < n; ++k) s += a[k] * b[k];
  return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    _mm256_storeu_pd(y + k, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + k), _mm256_loadu_pd(y + k)));
  }
  for (; k < n; ++k) y[k] += alpha * x[k];
}

void se_row(const double* xs, std::size_t n, double xi, double scale, double amp2, double* out) {
  const __m256d vxi = _mm256_set1_pd(xi);
  const __m256d vscale = _mm256_set1_pd(scale);
  const __m256d vamp = _mm256_set1_pd(amp2);
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    const __m256d d = _mm256_sub_pd(vxi, _mm256_loadu_pd(xs + k));
    const __m256d arg = _mm256_mul_pd(_mm256_mul_pd(vscale, d), d);
    _mm256_storeu_pd(out + k, _mm256_mul_pd(vamp, exp_kernel(arg)));
  }
  for (; k < n; ++k) {
    const double d = xi - xs[k];
    const double arg = scale * d * d;
    out[k] = arg < -708.0 ? 0.0 : amp2 * std::exp(arg);
  }
}

void exp_nonpositive(const double* in, double* out, std::size_t n) {
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) _mm256_storeu_pd(out + k, exp_kernel(_mm256_loadu_pd(in + k)));
  for (; k < n; ++k) out[k] = in[k] < -708.0 ? 0.0 : std::exp(in[k]);
}

}  // namespace segseq::simd::avx2
