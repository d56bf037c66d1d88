#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "segseq/gibbs.hpp"
#include "segseq/types.hpp"
#include "segseq/vem.hpp"

namespace segseq {

struct RoundDiagnostics {
  std::size_t round = 0;
  double objective = 0.0;
  std::vector<double> alpha;
  std::size_t active_kernels = 0;
  double mean_segments = 0.0;
  double wallclock_ms = 0.0;
  bool line_search_failed = false;
};

struct FitResult {
  ModelState state;
  std::vector<RoundDiagnostics> rounds;
  bool converged = false;
};

/// Fresh state: kernels drawn from the log-normal priors, alpha = alpha0,
/// beta at its prior median.
ModelState initial_state(const Hyperparams& hp);

/// Invoked after every completed round with the state reached so far.
using RoundCallback = std::function<void(const ModelState&, const RoundDiagnostics&)>;

/// Alternates Gibbs sampling of splits and variational EM until the M-step
/// objective changes by less than outer.elbo_rel_tol between rounds or
/// outer.max_rounds is reached. Deterministic given (data, hp.seed).
FitResult fit(const Dataset& data, const Hyperparams& hp, std::size_t threads = 1,
              const RoundCallback& on_round = {});

struct SampleLabels {
  std::vector<std::size_t> starts;
  std::vector<std::size_t> labels;
};

struct SequenceReport {
  std::string seq_id;
  std::size_t num_points = 0;
  // P(c_i = 1) for i = 1..N-1.
  std::vector<double> marginal_split_prob;
  std::vector<SampleLabels> samples;
};

struct SegmentReport {
  std::size_t num_kernels = 0;
  std::vector<SequenceReport> sequences;
};

/// Gibbs sampling with frozen (theta, beta, alpha); every sampled segment is
/// labelled with its most responsible kernel.
SegmentReport segment(const Dataset& data, const ModelState& state, const Hyperparams& hp,
                      std::size_t threads = 1);

/// Pairs (learned index, reference index) chosen greedily by smallest
/// symmetric relative distance over (amp2, ls2). Only learned kernels with
/// `include[m]` set take part.
std::vector<std::pair<std::size_t, std::size_t>> match_kernels(const std::vector<KernelParams>& learned,
                                                               const std::vector<bool>& include,
                                                               const std::vector<KernelParams>& reference);

double kernel_distance(const KernelParams& a, const KernelParams& b);

}  // namespace segseq
