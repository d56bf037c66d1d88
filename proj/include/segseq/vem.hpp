#pragma once

#include <span>
#include <vector>

#include "segseq/types.hpp"

namespace segseq {

/// psi(alpha_m) - psi(sum alpha).
std::vector<double> expected_log_pi(std::span<const double> alpha);

struct SegmentKey {
  std::size_t seq = 0;
  SegmentRange range;

  bool operator==(const SegmentKey&) const = default;
};

/// Distinct segments appearing across a sample set. Identical segments in
/// different samples share likelihoods and responsibilities, so every
/// per-segment quantity is computed once per row and weighted by `counts`.
struct SegmentTable {
  std::size_t num_samples = 0;
  std::vector<SegmentKey> rows;
  std::vector<double> counts;
  // ids[i][d][s] -> row of segment s of sequence d in sample i.
  std::vector<std::vector<std::vector<std::size_t>>> ids;

  static SegmentTable build(const SampleSet& samples);
  /// Sum over samples of segment counts, divided by L.
  double mean_segment_count() const;
};

/// rows x M table of ln p(Y_s | theta_m, beta).
std::vector<double> segment_log_liks(const Dataset& data, const SegmentTable& table, const ModelState& state,
                                     std::size_t threads = 1);

/// q(Z): r[i][d][s][m], stored once per distinct segment.
struct Responsibilities {
  SegmentTable table;
  std::size_t num_kernels = 0;
  std::vector<double> r;
  // ln p(Y_s | theta_m, beta) for the parameters the responsibilities were
  // computed with.
  std::vector<double> log_liks;

  std::span<const double> row(std::size_t u) const { return {r.data() + u * num_kernels, num_kernels}; }
  std::span<const double> at(std::size_t i, std::size_t d, std::size_t s) const { return row(table.ids[i][d][s]); }
};

/// softmax_m(E[ln pi_m] + ln p(Y_s | theta_m, beta)) for every sampled segment.
Responsibilities update_responsibilities(const Dataset& data, const SampleSet& samples, const ModelState& state,
                                         std::size_t threads = 1);

/// Recomputes r from cached log-likelihoods under a new q(pi).
void refresh_responsibilities(Responsibilities& resp, std::span<const double> alpha);

/// alpha_m = alpha0 + (1/L) sum_i sum_d sum_s r[i][d][s][m].
std::vector<double> update_pi(const Responsibilities& resp, double alpha0);

/// Monte-Carlo evidence lower bound with q(C) terms dropped as constants:
/// (1/L) sum_i sum_{d,s,m} r (ln p(Y_s|theta_m) + E ln pi_m - ln r)
///   - KL(q(pi) || p(pi)) + ln p(theta) + ln p(beta).
/// Priors are densities over the log parameters, matching the M step.
double elbo(const Dataset& data, const Responsibilities& resp, std::span<const double> alpha,
            const ModelState& state, const Hyperparams& hp, std::size_t threads = 1);

/// Log-space prior over all kernel parameters and the noise.
double log_param_prior(const ModelState& state, const Hyperparams& hp);

struct ObjectiveValue {
  double value = 0.0;
  // Gradient over (ln a2_0, ln l2_0, ..., ln a2_{M-1}, ln l2_{M-1}, ln beta).
  std::vector<double> grad;
};

/// Responsibility weights below this are dropped from the M-step objective.
inline constexpr double kWeightFloor = 1e-6;

/// (1/L) sum r ln p(Y_s | theta_m, beta) + ln p(theta) + ln p(beta), with its
/// gradient in log-parameter space. Frozen kernels get zero gradient.
ObjectiveValue mstep_objective(const Dataset& data, const Responsibilities& resp, const ModelState& state,
                               const Hyperparams& hp, bool with_grad = true, std::size_t threads = 1);

struct MStepResult {
  std::vector<KernelParams> kernels;
  double beta = 0.0;
  double start_objective = 0.0;
  double objective = 0.0;
  // Objective after each accepted step, starting with the initial value.
  std::vector<double> trace;
  std::size_t iterations = 0;
  bool line_search_failed = false;
};

/// Quasi-Newton ascent with Armijo backtracking on mstep_objective. Never
/// returns parameters with a lower objective than the starting point.
MStepResult mstep(const Dataset& data, const Responsibilities& resp, const ModelState& state,
                  const Hyperparams& hp, std::size_t threads = 1);

struct VemResult {
  Responsibilities resp;
  std::vector<double> alpha;
  std::vector<KernelParams> kernels;
  double beta = 0.0;
  double objective = 0.0;
  std::size_t cycles = 0;
  // All accepted M-step objective values, cycle after cycle.
  std::vector<std::vector<double>> traces;
  bool line_search_failed = false;
};

/// Alternates q(Z), q(pi) and the M step on fixed samples until the M-step
/// objective changes by less than outer.elbo_rel_tol or outer.vem_cycles
/// cycles have run.
VemResult run_vem(const Dataset& data, const SampleSet& samples, const ModelState& state, const Hyperparams& hp,
                  std::size_t threads = 1);

}  // namespace segseq
