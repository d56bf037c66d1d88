#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace segseq {

/// Raised when a Cholesky factorization fails even after the jitter schedule
/// is exhausted.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One observed time series: strictly increasing timestamps and values.
struct Sequence {
  std::string id;
  std::vector<double> x;
  std::vector<double> y;

  std::size_t size() const { return x.size(); }
};

using Dataset = std::vector<Sequence>;

/// Half-open index range [start, end) of one segment.
struct SegmentRange {
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - start; }
  bool operator==(const SegmentRange&) const = default;
};

/// Split indicators for one sequence; c[i] == 1 marks the first point of a
/// segment. c[0] is always 1.
class Segmentation {
 public:
  Segmentation() = default;
  Segmentation(std::string seq_id, std::vector<std::uint8_t> c);

  /// Builds from sorted segment start indices (must begin with 0).
  static Segmentation from_starts(std::string seq_id, std::size_t n, const std::vector<std::size_t>& starts);
  static Segmentation single(std::string seq_id, std::size_t n);

  const std::string& seq_id() const { return seq_id_; }
  const std::vector<std::uint8_t>& indicators() const { return c_; }
  std::vector<std::uint8_t>& mutable_indicators() { return c_; }
  std::size_t size() const { return c_.size(); }

  std::size_t num_segments() const;
  std::vector<std::size_t> starts() const;
  std::vector<SegmentRange> segments() const;

  /// Segment lengths in x-units; see segment_length().
  std::vector<double> lengths(const Sequence& seq) const;

  bool operator==(const Segmentation&) const = default;

 private:
  std::string seq_id_;
  std::vector<std::uint8_t> c_;
};

/// Trailing-segment increment used for the last segment of a sequence: the
/// median spacing of x, or 1.0 for single-point sequences.
double median_spacing(const std::vector<double>& x);

/// Length of [start, end): x[end] - x[start] for inner segments, and
/// x[N-1] - x[start] + median spacing for the final one.
double segment_length(const std::vector<double>& x, std::size_t start, std::size_t end, double trailing);

struct KernelParams {
  double amp2 = 0.0;
  double ls2 = 0.0;

  bool operator==(const KernelParams&) const = default;
};

struct LogNormalPrior {
  double mu = 0.0;
  double sigma = 1.0;

  bool operator==(const LogNormalPrior&) const = default;
};

struct GibbsConfig {
  std::size_t num_samples = 100;
  std::size_t burn_in = 50;
  std::size_t thinning = 2;
  // Warm-up sweeps at the start of every round after the first; chains
  // continue from where the previous round stopped.
  std::size_t sweeps_per_round = 10;

  bool operator==(const GibbsConfig&) const = default;
};

struct MStepConfig {
  std::size_t max_iters = 200;
  double step_size = 0.1;
  double grad_tol = 1e-5;
  double rel_tol = 1e-10;

  bool operator==(const MStepConfig&) const = default;
};

struct OuterConfig {
  std::size_t max_rounds = 30;
  double elbo_rel_tol = 1e-4;
  std::size_t vem_cycles = 3;

  bool operator==(const OuterConfig&) const = default;
};

struct Hyperparams {
  double lambda = 0.25;
  double alpha0 = 0.1;
  std::size_t num_kernels = 5;
  LogNormalPrior lognormal_amp{-2.995732273553991, 1.0};
  LogNormalPrior lognormal_ls{-2.995732273553991, 1.0};
  LogNormalPrior lognormal_noise{-4.605170185988091, 1.0};
  GibbsConfig gibbs;
  MStepConfig mstep;
  OuterConfig outer;
  double active_threshold = 0.05;
  bool standardize = false;
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument naming the first offending field.
  void validate() const;

  bool operator==(const Hyperparams&) const = default;
};

/// Retained Gibbs output: samples[i][d] is the segmentation of sequence d in
/// sample i.
using SampleSet = std::vector<std::vector<Segmentation>>;

struct ModelState {
  std::vector<KernelParams> kernels;
  double beta = 0.0;
  std::vector<double> alpha;
  std::vector<bool> frozen;

  std::size_t num_kernels() const { return kernels.size(); }

  /// E_q[pi_m] = alpha_m / sum(alpha).
  std::vector<double> expected_pi() const;
  std::vector<double> log_expected_pi() const;
  std::size_t active_kernels(double threshold) const;
};

}  // namespace segseq
