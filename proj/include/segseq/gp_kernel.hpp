#pragma once

#include <optional>
#include <span>
#include <vector>
#include <string_view>

#include "segseq/linalg.hpp"
#include "segseq/types.hpp"

namespace segseq {

/// Points of one segment. `seq_id` and `start` only label error messages.
struct SegmentView {
  std::span<const double> xs;
  std::span<const double> ys;
  std::string_view seq_id = {};
  std::size_t start = 0;

  std::size_t size() const { return xs.size(); }
};

SegmentView make_view(const Sequence& seq, SegmentRange range);

// Jitter schedule, relative to amp2.
inline constexpr double kJitterStart = 1e-9;
inline constexpr double kJitterMax = 1e-3;

/// a2 * exp(-(xi - xj)^2 / (2 l2)) + (beta + jitter) on the diagonal.
Matrix se_covariance(std::span<const double> xs, const KernelParams& params, double beta, double jitter);

/// se_covariance with the first jitter level of the schedule.
Matrix se_covariance(std::span<const double> xs, const KernelParams& params, double beta);

struct Factorization {
  Matrix chol;
  // Absolute jitter added to the diagonal.
  double jitter = 0.0;
};

/// Cholesky factor of the segment covariance, escalating the jitter by 10x
/// from 1e-9 * amp2 up to 1e-3 * amp2. Throws NumericalError if every level
/// fails.
Factorization factorize_segment(const SegmentView& seg, const KernelParams& params, double beta);

/// ln N(ys | 0, K + beta I).
double segment_log_marginal(const SegmentView& seg, const KernelParams& params, double beta);

struct MarginalGradient {
  double value = 0.0;
  double d_log_amp2 = 0.0;
  double d_log_ls2 = 0.0;
  double d_log_beta = 0.0;
};

/// Value and gradient of segment_log_marginal in (ln a2, ln l2, ln beta).
MarginalGradient segment_log_marginal_grad(const SegmentView& seg, const KernelParams& params, double beta);

/// Log marginals of every prefix [0, n) of a point run, sharing one
/// Cholesky factor that grows a row at a time. Covariance rows are built
/// exactly as in se_covariance with the first jitter level, so a prefix
/// value agrees with segment_log_marginal up to summation order.
class PrefixMarginal {
 public:
  PrefixMarginal(std::span<const double> xs, std::span<const double> ys, const KernelParams& params, double beta);

  /// Value for the first n points, or nullopt when the first-level jitter
  /// is not enough and the caller has to use the escalating path.
  std::optional<double> log_marginal(std::size_t n);

  std::size_t rows() const { return z_.size(); }
  std::size_t stored_doubles() const { return packed_.size() + 3 * z_.size(); }

 private:
  bool extend();

  std::span<const double> xs_;
  std::span<const double> ys_;
  KernelParams params_;
  double diag_;
  std::vector<double> packed_;  // row i starts at i(i+1)/2
  std::vector<double> z_;
  std::vector<double> quad_;
  std::vector<double> log_diag_;
  std::vector<double> scratch_;
  bool broken_ = false;
};

}  // namespace segseq
