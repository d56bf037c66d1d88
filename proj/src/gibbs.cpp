#include "segseq/gibbs.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "segseq/model.hpp"
#include "segseq/numeric.hpp"
#include "segseq/parallel.hpp"

namespace segseq {
namespace {

// About 64 MB of cached factor entries per scorer.
constexpr std::size_t kPrefixBudget = std::size_t{8} << 20;

}  // namespace

double approx_segment_marginal(const SegmentView& seg, const ModelState& state) {
  const auto log_pi = state.log_expected_pi();
  std::vector<double> terms(state.num_kernels());
  for (std::size_t m = 0; m < terms.size(); ++m) {
    terms[m] = segment_log_marginal(seg, state.kernels[m], state.beta) + log_pi[m];
  }
  return log_sum_exp(terms);
}

SegmentScorer::SegmentScorer(const Sequence& seq, const ModelState& state)
    : seq_(&seq),
      kernels_(state.kernels),
      beta_(state.beta),
      log_pi_(state.log_expected_pi()),
      trailing_(median_spacing(seq.x)) {}

std::span<const double> SegmentScorer::kernel_log_liks(std::size_t start, std::size_t end) {
  const std::size_t m = kernels_.size();
  const std::uint64_t key = static_cast<std::uint64_t>(start) * (seq_->size() + 1) + end;
  auto it = index_.find(key);
  if (it == index_.end()) {
    const std::size_t offset = pool_.size();
    pool_.resize(offset + m + 1);
    auto pit = prefixes_.find(start);
    if (pit == prefixes_.end()) {
      if (prefix_doubles_ > kPrefixBudget) {
        prefixes_.clear();
        prefix_doubles_ = 0;
      }
      const auto xs = std::span<const double>(seq_->x).subspan(start);
      const auto ys = std::span<const double>(seq_->y).subspan(start);
      std::vector<PrefixMarginal> row;
      row.reserve(m);
      for (std::size_t k = 0; k < m; ++k) row.emplace_back(xs, ys, kernels_[k], beta_);
      pit = prefixes_.emplace(start, std::move(row)).first;
    }
    for (std::size_t k = 0; k < m; ++k) {
      auto& prefix = pit->second[k];
      const std::size_t before = prefix.stored_doubles();
      const auto value = prefix.log_marginal(end - start);
      prefix_doubles_ += prefix.stored_doubles() - before;
      pool_[offset + k] =
          value ? *value : segment_log_marginal(make_view(*seq_, {start, end}), kernels_[k], beta_);
    }
    std::vector<double> terms(m);
    for (std::size_t k = 0; k < m; ++k) terms[k] = pool_[offset + k] + log_pi_[k];
    pool_[offset + m] = log_sum_exp(terms);
    it = index_.emplace(key, offset).first;
  }
  return {pool_.data() + it->second, m};
}

double SegmentScorer::approx_marginal(std::size_t start, std::size_t end) {
  const auto ll = kernel_log_liks(start, end);
  return *(ll.data() + ll.size());
}

double SegmentScorer::length(std::size_t start, std::size_t end) const {
  return segment_length(seq_->x, start, end, trailing_);
}

double split_conditional(SegmentScorer& scorer, const std::vector<std::uint8_t>& c, std::size_t i, double lambda) {
  const std::size_t n = c.size();
  if (i == 0 || i >= n) throw std::out_of_range("split index must lie in [1, N-1]");
  std::size_t prev = i - 1;
  while (c[prev] == 0) --prev;
  std::size_t next = i + 1;
  while (next < n && c[next] == 0) ++next;

  const double merged = scorer.approx_marginal(prev, next) + length_log_prior(scorer.length(prev, next), lambda);
  const double split = scorer.approx_marginal(prev, i) + scorer.approx_marginal(i, next) +
                       length_log_prior(scorer.length(prev, i), lambda) +
                       length_log_prior(scorer.length(i, next), lambda);
  return 1.0 / (1.0 + std::exp(merged - split));
}

double split_conditional(const Sequence& seq, const std::vector<std::uint8_t>& c, std::size_t i,
                         const ModelState& state, double lambda) {
  SegmentScorer scorer(seq, state);
  return split_conditional(scorer, c, i, lambda);
}

void gibbs_sweep(SegmentScorer& scorer, std::vector<std::uint8_t>& c, double lambda, Rng& rng) {
  if (c.size() < 2) return;
  std::vector<std::size_t> order(c.size() - 1);
  std::iota(order.begin(), order.end(), std::size_t{1});
  std::shuffle(order.begin(), order.end(), rng);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (std::size_t i : order) {
    const double p = split_conditional(scorer, c, i, lambda);
    c[i] = unif(rng) < p ? 1 : 0;
  }
}

std::vector<std::uint8_t> gibbs_sweep(const Sequence& seq, std::vector<std::uint8_t> c, const ModelState& state,
                                      double lambda, Rng& rng) {
  SegmentScorer scorer(seq, state);
  gibbs_sweep(scorer, c, lambda, rng);
  return c;
}

std::vector<std::uint8_t> initial_splits(const Sequence& seq, double lambda, Rng& rng) {
  const std::size_t n = seq.size();
  std::vector<std::uint8_t> c(n, 0);
  if (n == 0) return c;
  c[0] = 1;
  std::exponential_distribution<double> length(lambda);
  std::size_t start = 0;
  while (true) {
    const double target = seq.x[start] + length(rng);
    std::size_t next = start + 1;
    while (next < n && seq.x[next] < target) ++next;
    if (next >= n) break;
    c[next] = 1;
    start = next;
  }
  return c;
}

GibbsChains GibbsChains::init(const Dataset& data, double lambda, std::uint64_t seed) {
  GibbsChains chains;
  for (std::size_t d = 0; d < data.size(); ++d) {
    chains.rngs.emplace_back(seed + d);
    chains.splits.push_back(initial_splits(data[d], lambda, chains.rngs.back()));
  }
  return chains;
}

SampleSet sample_segmentations(const Dataset& data, const ModelState& state, const Hyperparams& hp,
                               GibbsChains& chains, std::size_t threads, std::optional<std::size_t> warmup_override) {
  if (chains.splits.size() != data.size()) throw std::invalid_argument("chain count does not match the dataset");
  const std::size_t warmup =
      warmup_override ? *warmup_override : (chains.warmed_up ? hp.gibbs.sweeps_per_round : hp.gibbs.burn_in);
  const std::size_t num_samples = hp.gibbs.num_samples;
  SampleSet samples(num_samples, std::vector<Segmentation>(data.size()));

  parallel_for(data.size(), threads, [&](std::size_t d) {
    SegmentScorer scorer(data[d], state);
    auto& c = chains.splits[d];
    auto& rng = chains.rngs[d];
    for (std::size_t s = 0; s < warmup; ++s) gibbs_sweep(scorer, c, hp.lambda, rng);
    for (std::size_t i = 0; i < num_samples; ++i) {
      for (std::size_t t = 0; t < hp.gibbs.thinning; ++t) gibbs_sweep(scorer, c, hp.lambda, rng);
      samples[i][d] = Segmentation(data[d].id, c);
    }
  });
  chains.warmed_up = true;
  return samples;
}

ExactPosterior enumerate_exact_posterior(const Sequence& seq, const ModelState& state, double lambda) {
  const std::size_t n = seq.size();
  if (n == 0) throw std::invalid_argument("cannot enumerate an empty sequence");
  if (n > kMaxEnumerationLength) {
    throw std::invalid_argument("exact enumeration is limited to sequences of at most 12 points");
  }
  SegmentScorer scorer(seq, state);
  const std::size_t free_sites = n - 1;
  const std::size_t configs = std::size_t{1} << free_sites;
  std::vector<double> scores(configs);
  for (std::size_t mask = 0; mask < configs; ++mask) {
    double score = 0.0;
    std::size_t start = 0;
    for (std::size_t i = 1; i <= n; ++i) {
      const bool boundary = i == n || ((mask >> (i - 1)) & 1U);
      if (!boundary) continue;
      score += scorer.approx_marginal(start, i) + length_log_prior(scorer.length(start, i), lambda);
      start = i;
    }
    scores[mask] = score;
  }
  ExactPosterior out;
  out.log_partition = log_sum_exp(scores);
  out.marginal.assign(n, 0.0);
  out.marginal[0] = 1.0;
  for (std::size_t mask = 0; mask < configs; ++mask) {
    const double w = std::exp(scores[mask] - out.log_partition);
    for (std::size_t i = 1; i < n; ++i) {
      if ((mask >> (i - 1)) & 1U) out.marginal[i] += w;
    }
  }
  return out;
}

std::vector<double> split_marginals(const SampleSet& samples, std::size_t d) {
  if (samples.empty()) return {};
  const std::size_t n = samples.front()[d].size();
  std::vector<double> out(n > 0 ? n - 1 : 0, 0.0);
  for (const auto& sample : samples) {
    const auto& c = sample[d].indicators();
    for (std::size_t i = 1; i < n; ++i) out[i - 1] += c[i];
  }
  for (double& v : out) v /= static_cast<double>(samples.size());
  return out;
}

}  // namespace segseq
