#include "segseq/gp_kernel.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "segseq/simd/kernels.hpp"

namespace segseq {
namespace {

void check_params(const KernelParams& params, double beta) {
  if (!(params.amp2 > 0.0) || !(params.ls2 > 0.0) || !(beta > 0.0) || !std::isfinite(params.amp2) ||
      !std::isfinite(params.ls2) || !std::isfinite(beta)) {
    std::ostringstream os;
    os << "invalid kernel parameters (amp2=" << params.amp2 << ", ls2=" << params.ls2 << ", beta=" << beta << ")";
    throw std::invalid_argument(os.str());
  }
}

void fill_covariance(std::span<const double> xs, const KernelParams& params, double diag, Matrix& k) {
  const auto& simd = simd::active();
  const double scale = -0.5 / params.ls2;
  const std::size_t n = xs.size();
  for (std::size_t i = 0; i < n; ++i) {
    simd.se_row(xs.data(), i + 1, xs[i], scale, params.amp2, k.row(i));
    k(i, i) += diag;
    for (std::size_t j = 0; j < i; ++j) k(j, i) = k(i, j);
  }
}

}  // namespace

SegmentView make_view(const Sequence& seq, SegmentRange range) {
  return SegmentView{std::span<const double>(seq.x).subspan(range.start, range.size()),
                     std::span<const double>(seq.y).subspan(range.start, range.size()), seq.id, range.start};
}

Matrix se_covariance(std::span<const double> xs, const KernelParams& params, double beta, double jitter) {
  check_params(params, beta);
  Matrix k(xs.size());
  fill_covariance(xs, params, beta + jitter, k);
  return k;
}

Matrix se_covariance(std::span<const double> xs, const KernelParams& params, double beta) {
  return se_covariance(xs, params, beta, kJitterStart * params.amp2);
}

namespace {

// Noise-free kernel matrix, both triangles filled.
Matrix kernel_matrix(std::span<const double> xs, const KernelParams& params) {
  Matrix kf(xs.size());
  fill_covariance(xs, params, 0.0, kf);
  return kf;
}

Factorization factorize_kernel(const SegmentView& seg, const Matrix& kf, const KernelParams& params, double beta) {
  const std::size_t n = kf.size();
  Factorization f{Matrix(n), 0.0};
  for (double rel = kJitterStart; rel <= kJitterMax * (1.0 + 1e-9); rel *= 10.0) {
    f.jitter = rel * params.amp2;
    f.chol = kf;
    for (std::size_t i = 0; i < n; ++i) f.chol(i, i) += beta + f.jitter;
    if (cholesky_in_place(f.chol)) return f;
  }
  std::ostringstream os;
  os << "Cholesky failed for segment of '" << seg.seq_id << "' starting at " << seg.start << " (n=" << seg.size()
     << ", amp2=" << params.amp2 << ", ls2=" << params.ls2 << ", beta=" << beta << ")";
  throw NumericalError(os.str());
}

}  // namespace

Factorization factorize_segment(const SegmentView& seg, const KernelParams& params, double beta) {
  check_params(params, beta);
  if (seg.size() == 0) throw std::invalid_argument("empty segment");
  return factorize_kernel(seg, kernel_matrix(seg.xs, params), params, beta);
}

double segment_log_marginal(const SegmentView& seg, const KernelParams& params, double beta) {
  const Factorization f = factorize_segment(seg, params, beta);
  std::vector<double> z(seg.ys.begin(), seg.ys.end());
  forward_solve(f.chol, z);
  const double quad = simd::active().dot(z.data(), z.data(), z.size());
  const double n = static_cast<double>(seg.size());
  return -0.5 * quad - 0.5 * log_det_from_cholesky(f.chol) - 0.5 * n * std::log(2.0 * std::numbers::pi);
}

MarginalGradient segment_log_marginal_grad(const SegmentView& seg, const KernelParams& params, double beta) {
  check_params(params, beta);
  if (seg.size() == 0) throw std::invalid_argument("empty segment");
  const std::size_t n = seg.size();
  const Matrix kf = kernel_matrix(seg.xs, params);
  const Factorization f = factorize_kernel(seg, kf, params, beta);

  std::vector<double> alpha(seg.ys.begin(), seg.ys.end());
  forward_solve(f.chol, alpha);
  const double quad = simd::active().dot(alpha.data(), alpha.data(), n);
  backward_solve_transposed(f.chol, alpha);

  MarginalGradient g;
  g.value = -0.5 * quad - 0.5 * log_det_from_cholesky(f.chol) -
            0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);

  // Every derivative has the form 1/2 sum_ij (alpha alpha^T - K^-1)_ij dK_ij,
  // so build W = alpha alpha^T - K^-1 once and contract it with each dK.
  const Matrix kinv = inverse_from_cholesky(f.chol);
  const double inv_two_l2 = 0.5 / params.ls2;
  double amp = 0.0, ls = 0.0, trace_w = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double* ki = kf.row(i);
    const double* vi = kinv.row(i);
    double amp_row = 0.0, ls_row = 0.0;
    for (std::size_t j = 0; j < i; ++j) {
      const double w = alpha[i] * alpha[j] - vi[j];
      const double d = seg.xs[i] - seg.xs[j];
      amp_row += w * ki[j];
      ls_row += w * ki[j] * d * d;
    }
    const double wii = alpha[i] * alpha[i] - vi[i];
    amp += 2.0 * amp_row + wii * ki[i];
    ls += 2.0 * ls_row;
    trace_w += wii;
  }
  // The jitter scales with amp2, so it belongs to the amplitude derivative.
  g.d_log_amp2 = 0.5 * amp + 0.5 * f.jitter * trace_w;
  g.d_log_ls2 = 0.5 * inv_two_l2 * ls;
  g.d_log_beta = 0.5 * beta * trace_w;
  return g;
}

PrefixMarginal::PrefixMarginal(std::span<const double> xs, std::span<const double> ys, const KernelParams& params,
                               double beta)
    : xs_(xs), ys_(ys), params_(params), diag_(beta + kJitterStart * params.amp2) {
  check_params(params, beta);
  if (xs.size() != ys.size()) throw std::invalid_argument("xs and ys differ in length");
}

bool PrefixMarginal::extend() {
  const auto& simd = simd::active();
  const std::size_t i = z_.size();
  scratch_.resize(i + 1);
  simd.se_row(xs_.data(), i + 1, xs_[i], -0.5 / params_.ls2, params_.amp2, scratch_.data());
  scratch_[i] += diag_;
  const std::size_t base = packed_.size();
  packed_.resize(base + i + 1);
  double* ri = packed_.data() + base;
  for (std::size_t j = 0; j < i; ++j) {
    const double* rj = packed_.data() + j * (j + 1) / 2;
    ri[j] = (scratch_[j] - simd.dot(ri, rj, j)) / rj[j];
  }
  const double pivot = scratch_[i] - simd.dot(ri, ri, i);
  if (!(pivot > 0.0) || !std::isfinite(pivot)) {
    packed_.resize(base);
    return false;
  }
  ri[i] = std::sqrt(pivot);
  const double zi = (ys_[i] - simd.dot(ri, z_.data(), i)) / ri[i];
  z_.push_back(zi);
  quad_.push_back((i == 0 ? 0.0 : quad_.back()) + zi * zi);
  log_diag_.push_back((i == 0 ? 0.0 : log_diag_.back()) + std::log(ri[i]));
  return true;
}

std::optional<double> PrefixMarginal::log_marginal(std::size_t n) {
  if (n == 0 || n > xs_.size()) throw std::out_of_range("prefix length out of range");
  while (!broken_ && z_.size() < n) broken_ = !extend();
  if (z_.size() < n) return std::nullopt;
  return -0.5 * quad_[n - 1] - log_diag_[n - 1] - 0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
}

}  // namespace segseq
