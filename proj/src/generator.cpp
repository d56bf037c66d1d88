#include "segseq/generator.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "segseq/gp_kernel.hpp"
#include "segseq/linalg.hpp"

namespace segseq {

void GeneratorSpec::validate() const {
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  if (!(beta > 0.0)) throw std::invalid_argument("beta must be positive");
  if (kernels.empty()) throw std::invalid_argument("kernels must not be empty");
  for (const auto& k : kernels) {
    if (!(k.amp2 > 0.0)) throw std::invalid_argument("kernels[].amp2 must be positive");
    if (!(k.ls2 > 0.0)) throw std::invalid_argument("kernels[].ls2 must be positive");
  }
  if (sequences.empty()) throw std::invalid_argument("sequences must not be empty");
  for (const auto& s : sequences) {
    if (!(s.horizon > 0.0) || std::llround(s.horizon / dt) < 1) {
      throw std::invalid_argument("sequences[].horizon must cover at least one grid point");
    }
  }
  if (fixed) {
    if (fixed->size() != sequences.size()) throw std::invalid_argument("fixed segmentation count must match sequences");
    return;
  }
  if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
  if (pi) {
    if (pi->size() != kernels.size()) throw std::invalid_argument("pi must have one entry per kernel");
    double total = 0.0;
    for (double p : *pi) {
      if (!(p >= 0.0)) throw std::invalid_argument("pi entries must be non-negative");
      total += p;
    }
    if (!(total > 0.0)) throw std::invalid_argument("pi must have positive mass");
  }
  if (alpha0 && !(*alpha0 > 0.0)) throw std::invalid_argument("alpha0 must be positive");
}

std::vector<double> make_grid(double horizon, double dt) {
  const auto n = static_cast<std::size_t>(std::llround(horizon / dt));
  std::vector<double> x(n);
  for (std::size_t k = 0; k < n; ++k) x[k] = static_cast<double>(k) * dt;
  return x;
}

std::vector<double> sample_gp(std::span<const double> xs, const KernelParams& params, double beta, Rng& rng) {
  const SegmentView view{xs, xs};
  const Factorization f = factorize_segment(view, params, beta);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> eps(xs.size());
  for (double& e : eps) e = normal(rng);
  std::vector<double> y(xs.size(), 0.0);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    for (std::size_t j = 0; j <= i; ++j) y[i] += f.chol(i, j) * eps[j];
  }
  return y;
}

namespace {

void check_fixed(const FixedSegments& seg, std::size_t n, std::size_t num_kernels, const std::string& id) {
  if (seg.starts.empty() || seg.starts.front() != 0) {
    throw std::invalid_argument("fixed segments of '" + id + "' must start at index 0");
  }
  if (seg.labels.size() != seg.starts.size()) {
    throw std::invalid_argument("fixed segments of '" + id + "' need one label per segment");
  }
  for (std::size_t k = 0; k < seg.starts.size(); ++k) {
    if (seg.starts[k] >= n || (k > 0 && seg.starts[k] <= seg.starts[k - 1])) {
      throw std::invalid_argument("fixed segments of '" + id + "' contain a zero-length or out-of-range segment");
    }
    if (seg.labels[k] >= num_kernels) throw std::invalid_argument("fixed segment label out of range in '" + id + "'");
  }
}

GeneratedData generate(const GeneratorSpec& spec, const std::vector<FixedSegments>* fixed) {
  spec.validate();
  GeneratedData out;
  out.kernels = spec.kernels;
  out.beta = spec.beta;

  std::vector<double> weights;
  if (!fixed) {
    if (spec.pi) {
      weights = *spec.pi;
    } else if (spec.alpha0) {
      Rng rng(spec.seed + spec.sequences.size());
      double total = 0.0;
      for (std::size_t m = 0; m < spec.kernels.size(); ++m) {
        std::gamma_distribution<double> g(*spec.alpha0, 1.0);
        weights.push_back(g(rng));
        total += weights.back();
      }
      for (double& w : weights) w /= total;
    } else {
      weights.assign(spec.kernels.size(), 1.0);
    }
  }

  for (std::size_t d = 0; d < spec.sequences.size(); ++d) {
    const auto& s = spec.sequences[d];
    Rng rng(spec.seed + d);
    Sequence seq{s.id, make_grid(s.horizon, spec.dt), {}};
    const std::size_t n = seq.x.size();
    GroundTruth truth{s.id, {}, {}};
    if (fixed) {
      check_fixed((*fixed)[d], n, spec.kernels.size(), s.id);
      truth.boundaries = (*fixed)[d].starts;
      truth.labels = (*fixed)[d].labels;
    } else {
      truth.boundaries = Segmentation(s.id, initial_splits(seq, spec.lambda, rng)).starts();
      std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
      for (std::size_t k = 0; k < truth.boundaries.size(); ++k) truth.labels.push_back(pick(rng));
    }
    seq.y.resize(n);
    for (std::size_t k = 0; k < truth.boundaries.size(); ++k) {
      const std::size_t start = truth.boundaries[k];
      const std::size_t end = k + 1 < truth.boundaries.size() ? truth.boundaries[k + 1] : n;
      const auto xs = std::span<const double>(seq.x).subspan(start, end - start);
      const auto y = sample_gp(xs, spec.kernels[truth.labels[k]], spec.beta, rng);
      std::copy(y.begin(), y.end(), seq.y.begin() + static_cast<std::ptrdiff_t>(start));
    }
    out.data.push_back(std::move(seq));
    out.truth.push_back(std::move(truth));
  }
  return out;
}

}  // namespace

GeneratedData sample_dataset(const GeneratorSpec& spec) {
  return generate(spec, spec.fixed ? &*spec.fixed : nullptr);
}

GeneratedData fixed_segmentation_dataset(const GeneratorSpec& spec, const std::vector<FixedSegments>& segments) {
  if (segments.size() != spec.sequences.size()) {
    throw std::invalid_argument("fixed segmentation count must match sequences");
  }
  return generate(spec, &segments);
}

}  // namespace segseq
