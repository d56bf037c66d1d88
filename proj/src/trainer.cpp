#include "segseq/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <random>

namespace segseq {
namespace {

// A kernel whose expected weight stays below this for kCollapseRounds
// consecutive rounds is frozen.
constexpr double kCollapseWeight = 1e-6;
constexpr std::size_t kCollapseRounds = 3;

}  // namespace

ModelState initial_state(const Hyperparams& hp) {
  ModelState state;
  std::seed_seq seq{static_cast<std::uint32_t>(hp.seed & 0xffffffffU), static_cast<std::uint32_t>(hp.seed >> 32),
                    0x6b65726eU};
  Rng rng(seq);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t m = 0; m < hp.num_kernels; ++m) {
    KernelParams k;
    k.amp2 = std::exp(hp.lognormal_amp.mu + hp.lognormal_amp.sigma * normal(rng));
    k.ls2 = std::exp(hp.lognormal_ls.mu + hp.lognormal_ls.sigma * normal(rng));
    state.kernels.push_back(k);
  }
  state.beta = std::exp(hp.lognormal_noise.mu);
  state.alpha.assign(hp.num_kernels, hp.alpha0);
  state.frozen.assign(hp.num_kernels, false);
  return state;
}

FitResult fit(const Dataset& data, const Hyperparams& hp, std::size_t threads, const RoundCallback& on_round) {
  hp.validate();
  FitResult result;
  result.state = initial_state(hp);
  GibbsChains chains = GibbsChains::init(data, hp.lambda, hp.seed);
  std::vector<std::size_t> low_rounds(hp.num_kernels, 0);
  double previous = std::numeric_limits<double>::quiet_NaN();

  for (std::size_t round = 0; round < hp.outer.max_rounds; ++round) {
    const auto t0 = std::chrono::steady_clock::now();
    const SampleSet samples = sample_segmentations(data, result.state, hp, chains, threads);
    const VemResult vem = run_vem(data, samples, result.state, hp, threads);

    ModelState next = result.state;
    next.alpha = vem.alpha;
    next.kernels = vem.kernels;
    next.beta = vem.beta;
    const auto pi = next.expected_pi();
    for (std::size_t m = 0; m < pi.size(); ++m) {
      low_rounds[m] = pi[m] < kCollapseWeight ? low_rounds[m] + 1 : 0;
      if (low_rounds[m] >= kCollapseRounds) next.frozen[m] = true;
    }
    result.state = std::move(next);

    RoundDiagnostics diag;
    diag.round = round;
    diag.objective = vem.objective;
    diag.alpha = result.state.alpha;
    diag.active_kernels = result.state.active_kernels(hp.active_threshold);
    diag.mean_segments = vem.resp.table.mean_segment_count();
    diag.line_search_failed = vem.line_search_failed;
    diag.wallclock_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    result.rounds.push_back(diag);
    if (on_round) on_round(result.state, diag);

    if (std::isfinite(previous) &&
        std::abs(vem.objective - previous) <= hp.outer.elbo_rel_tol * std::max(1.0, std::abs(previous))) {
      result.converged = true;
      break;
    }
    previous = vem.objective;
  }
  return result;
}

SegmentReport segment(const Dataset& data, const ModelState& state, const Hyperparams& hp, std::size_t threads) {
  GibbsChains chains = GibbsChains::init(data, hp.lambda, hp.seed);
  const SampleSet samples = sample_segmentations(data, state, hp, chains, threads);
  const Responsibilities resp = update_responsibilities(data, samples, state, threads);

  SegmentReport report;
  report.num_kernels = state.num_kernels();
  for (std::size_t d = 0; d < data.size(); ++d) {
    SequenceReport seq;
    seq.seq_id = data[d].id;
    seq.num_points = data[d].size();
    seq.marginal_split_prob = split_marginals(samples, d);
    for (std::size_t i = 0; i < samples.size(); ++i) {
      SampleLabels s;
      s.starts = samples[i][d].starts();
      for (std::size_t k = 0; k < s.starts.size(); ++k) {
        const auto r = resp.at(i, d, k);
        s.labels.push_back(static_cast<std::size_t>(std::max_element(r.begin(), r.end()) - r.begin()));
      }
      seq.samples.push_back(std::move(s));
    }
    report.sequences.push_back(std::move(seq));
  }
  return report;
}

double kernel_distance(const KernelParams& a, const KernelParams& b) {
  auto rel = [](double x, double y) { return std::abs(x - y) / (0.5 * (x + y)); };
  return rel(a.amp2, b.amp2) + rel(a.ls2, b.ls2);
}

std::vector<std::pair<std::size_t, std::size_t>> match_kernels(const std::vector<KernelParams>& learned,
                                                               const std::vector<bool>& include,
                                                               const std::vector<KernelParams>& reference) {
  std::vector<bool> used_l(learned.size(), false);
  std::vector<bool> used_r(reference.size(), false);
  for (std::size_t m = 0; m < learned.size(); ++m) used_l[m] = m < include.size() && !include[m];
  std::vector<std::pair<std::size_t, std::size_t>> out;
  while (true) {
    double best = std::numeric_limits<double>::infinity();
    std::pair<std::size_t, std::size_t> pick{0, 0};
    for (std::size_t m = 0; m < learned.size(); ++m) {
      if (used_l[m]) continue;
      for (std::size_t r = 0; r < reference.size(); ++r) {
        if (used_r[r]) continue;
        const double dist = kernel_distance(learned[m], reference[r]);
        if (dist < best) {
          best = dist;
          pick = {m, r};
        }
      }
    }
    if (!std::isfinite(best)) break;
    used_l[pick.first] = true;
    used_r[pick.second] = true;
    out.push_back(pick);
  }
  return out;
}

}  // namespace segseq
