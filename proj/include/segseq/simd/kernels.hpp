#pragma once

// Data-parallel inner loops used by the dense linear algebra and covariance
// construction. Every kernel has a portable scalar reference; the AVX2+FMA
// variant is selected at runtime when the CPU supports it. Set
// SEGSEQ_SIMD=scalar in the environment to force the reference path.

#include <cstddef>
#include <string_view>

namespace segseq::simd {

enum class Isa { scalar, avx2 };

struct KernelTable {
  // sum_k a[k] * b[k]
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y[k] += alpha * x[k]
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // out[k] = amp2 * exp(scale * (xi - xs[k])^2), scale <= 0
  void (*se_row)(const double* xs, std::size_t n, double xi, double scale, double amp2, double* out);
  // out[k] = exp(in[k]) for in[k] <= 0; inputs below -708 flush to 0
  void (*exp_nonpositive)(const double* in, double* out, std::size_t n);
};

bool supported(Isa isa);
const KernelTable& table(Isa isa);

/// The table chosen for this process.
const KernelTable& active();
Isa active_isa();
std::string_view isa_name(Isa isa);

/// Overrides the runtime choice; intended for tests and benchmarking.
/// Throws std::invalid_argument when the ISA is unsupported on this CPU.
void force_isa(Isa isa);

namespace scalar {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void se_row(const double* xs, std::size_t n, double xi, double scale, double amp2, double* out);
void exp_nonpositive(const double* in, double* out, std::size_t n);
}  // namespace scalar

namespace avx2 {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void se_row(const double* xs, std::size_t n, double xi, double scale, double amp2, double* out);
void exp_nonpositive(const double* in, double* out, std::size_t n);
}  // namespace avx2

}  // namespace segseq::simd
