#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <unordered_map>
#include <vector>

#include "segseq/gp_kernel.hpp"
#include "segseq/types.hpp"

namespace segseq {

using Rng = std::mt19937_64;

/// ln sum_m exp(ln p(Y_s | theta_m) + ln E_q[pi_m]).
double approx_segment_marginal(const SegmentView& seg, const ModelState& state);

/// Per-sequence memo of per-kernel segment log-likelihoods. Valid for one
/// (kernels, beta) setting; the owner discards it when parameters change.
/// Not thread-safe: each Gibbs chain owns its scorer.
class SegmentScorer {
 public:
  SegmentScorer(const Sequence& seq, const ModelState& state);

  const Sequence& sequence() const { return *seq_; }
  std::size_t num_kernels() const { return log_pi_.size(); }

  /// ln p(Y[start, end) | theta_m, beta) for every m.
  std::span<const double> kernel_log_liks(std::size_t start, std::size_t end);

  /// Cached approx_segment_marginal for [start, end).
  double approx_marginal(std::size_t start, std::size_t end);

  double length(std::size_t start, std::size_t end) const;

  std::size_t cache_size() const { return index_.size(); }

 private:
  const Sequence* seq_;
  std::vector<KernelParams> kernels_;
  double beta_;
  std::vector<double> log_pi_;
  double trailing_;
  std::unordered_map<std::uint64_t, std::size_t> index_;
  std::vector<double> pool_;
  // Growing factors per segment start, one per kernel; dropped wholesale
  // when they exceed the memory budget.
  std::unordered_map<std::size_t, std::vector<PrefixMarginal>> prefixes_;
  std::size_t prefix_doubles_ = 0;
};

/// P(c_i = 1 | c_{-i}, Y) for 1 <= i < N.
double split_conditional(SegmentScorer& scorer, const std::vector<std::uint8_t>& c, std::size_t i, double lambda);
double split_conditional(const Sequence& seq, const std::vector<std::uint8_t>& c, std::size_t i,
                         const ModelState& state, double lambda);

/// One systematic-scan sweep over indices 1..N-1 in a fresh random order.
void gibbs_sweep(SegmentScorer& scorer, std::vector<std::uint8_t>& c, double lambda, Rng& rng);
std::vector<std::uint8_t> gibbs_sweep(const Sequence& seq, std::vector<std::uint8_t> c, const ModelState& state,
                                      double lambda, Rng& rng);

/// Prior draw: segment lengths from Exp(lambda), snapped to the grid.
std::vector<std::uint8_t> initial_splits(const Sequence& seq, double lambda, Rng& rng);

/// One Gibbs chain per sequence, each with its own random stream seeded
/// seed + ordinal so the worker partitioning never changes the draws.
struct GibbsChains {
  std::vector<Rng> rngs;
  std::vector<std::vector<std::uint8_t>> splits;
  bool warmed_up = false;

  static GibbsChains init(const Dataset& data, double lambda, std::uint64_t seed);
};

/// Runs warm-up sweeps (burn_in on the first call, sweeps_per_round after),
/// then keeps L samples at the configured thinning. `warmup_override`
/// replaces the warm-up length when set.
SampleSet sample_segmentations(const Dataset& data, const ModelState& state, const Hyperparams& hp,
                               GibbsChains& chains, std::size_t threads = 1,
                               std::optional<std::size_t> warmup_override = std::nullopt);

struct ExactPosterior {
  // marginal[i] = P(c_i = 1) for i in 0..N-1 (marginal[0] == 1).
  std::vector<double> marginal;
  double log_partition = 0.0;
};

inline constexpr std::size_t kMaxEnumerationLength = 12;

/// Brute-force posterior over all 2^(N-1) split vectors. Refuses N > 12.
ExactPosterior enumerate_exact_posterior(const Sequence& seq, const ModelState& state, double lambda);

/// Fraction of samples with a split at each index 1..N-1 for sequence `d`.
std::vector<double> split_marginals(const SampleSet& samples, std::size_t d);

}  // namespace segseq
