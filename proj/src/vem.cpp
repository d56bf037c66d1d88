#include "segseq/vem.hpp"

#include <boost/math/special_functions/digamma.hpp>
#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <stdexcept>
#include <unordered_map>

#include "segseq/gp_kernel.hpp"
#include "segseq/model.hpp"
#include "segseq/numeric.hpp"
#include "segseq/parallel.hpp"

namespace segseq {
namespace {

struct KeyHash {
  std::size_t operator()(const SegmentKey& k) const {
    std::size_t h = k.seq * 0x9E3779B97F4A7C15ULL;
    h ^= k.range.start + 0x632BE59BD9B4E019ULL + (h << 6) + (h >> 2);
    h ^= k.range.end + 0x85EBCA77C2B2AE63ULL + (h << 6) + (h >> 2);
    return h;
  }
};

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

std::vector<double> pack(const ModelState& state) {
  std::vector<double> u;
  u.reserve(2 * state.num_kernels() + 1);
  for (const auto& k : state.kernels) {
    u.push_back(std::log(k.amp2));
    u.push_back(std::log(k.ls2));
  }
  u.push_back(std::log(state.beta));
  return u;
}

bool is_frozen(const ModelState& state, std::size_t m) { return m < state.frozen.size() && state.frozen[m]; }

void unpack(std::span<const double> u, ModelState& state) {
  for (std::size_t m = 0; m < state.num_kernels(); ++m) {
    if (is_frozen(state, m)) continue;
    state.kernels[m].amp2 = std::exp(u[2 * m]);
    state.kernels[m].ls2 = std::exp(u[2 * m + 1]);
  }
  state.beta = std::exp(u.back());
}

}  // namespace

std::vector<double> expected_log_pi(std::span<const double> alpha) {
  double total = 0.0;
  for (double a : alpha) {
    if (!(a > 0.0) || !std::isfinite(a)) throw std::invalid_argument("Dirichlet parameters must be positive");
    total += a;
  }
  const double psi_total = boost::math::digamma(total);
  std::vector<double> out(alpha.size());
  for (std::size_t m = 0; m < alpha.size(); ++m) out[m] = boost::math::digamma(alpha[m]) - psi_total;
  return out;
}

SegmentTable SegmentTable::build(const SampleSet& samples) {
  SegmentTable table;
  table.num_samples = samples.size();
  std::unordered_map<SegmentKey, std::size_t, KeyHash> lookup;
  table.ids.resize(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    table.ids[i].resize(samples[i].size());
    for (std::size_t d = 0; d < samples[i].size(); ++d) {
      for (const auto& range : samples[i][d].segments()) {
        const SegmentKey key{d, range};
        auto [it, inserted] = lookup.try_emplace(key, table.rows.size());
        if (inserted) {
          table.rows.push_back(key);
          table.counts.push_back(0.0);
        }
        table.counts[it->second] += 1.0;
        table.ids[i][d].push_back(it->second);
      }
    }
  }
  return table;
}

double SegmentTable::mean_segment_count() const {
  if (num_samples == 0) return 0.0;
  double total = 0.0;
  for (double c : counts) total += c;
  return total / static_cast<double>(num_samples);
}

std::vector<double> segment_log_liks(const Dataset& data, const SegmentTable& table, const ModelState& state,
                                     std::size_t threads) {
  const std::size_t m = state.num_kernels();
  std::vector<double> out(table.rows.size() * m);
  parallel_for(table.rows.size(), threads, [&](std::size_t u) {
    const auto& key = table.rows[u];
    const SegmentView view = make_view(data[key.seq], key.range);
    for (std::size_t k = 0; k < m; ++k) out[u * m + k] = segment_log_marginal(view, state.kernels[k], state.beta);
  });
  return out;
}

void refresh_responsibilities(Responsibilities& resp, std::span<const double> alpha) {
  const auto elog = expected_log_pi(alpha);
  const std::size_t m = resp.num_kernels;
  resp.r.resize(resp.log_liks.size());
  for (std::size_t u = 0; u < resp.table.rows.size(); ++u) {
    std::span<double> logits(resp.r.data() + u * m, m);
    for (std::size_t k = 0; k < m; ++k) logits[k] = elog[k] + resp.log_liks[u * m + k];
    softmax_in_place(logits);
  }
}

Responsibilities update_responsibilities(const Dataset& data, const SampleSet& samples, const ModelState& state,
                                         std::size_t threads) {
  Responsibilities resp;
  resp.table = SegmentTable::build(samples);
  resp.num_kernels = state.num_kernels();
  resp.log_liks = segment_log_liks(data, resp.table, state, threads);
  refresh_responsibilities(resp, state.alpha);
  return resp;
}

std::vector<double> update_pi(const Responsibilities& resp, double alpha0) {
  const std::size_t m = resp.num_kernels;
  std::vector<double> mass(m, 0.0);
  for (std::size_t u = 0; u < resp.table.rows.size(); ++u) {
    for (std::size_t k = 0; k < m; ++k) mass[k] += resp.table.counts[u] * resp.r[u * m + k];
  }
  std::vector<double> alpha(m, alpha0);
  const double inv_l = resp.table.num_samples > 0 ? 1.0 / static_cast<double>(resp.table.num_samples) : 0.0;
  for (std::size_t k = 0; k < m; ++k) alpha[k] += inv_l * mass[k];
  return alpha;
}

double log_param_prior(const ModelState& state, const Hyperparams& hp) {
  double total = log_space_prior(state.beta, hp.lognormal_noise);
  for (const auto& k : state.kernels) {
    total += log_space_prior(k.amp2, hp.lognormal_amp) + log_space_prior(k.ls2, hp.lognormal_ls);
  }
  return total;
}

double elbo(const Dataset& data, const Responsibilities& resp, std::span<const double> alpha,
            const ModelState& state, const Hyperparams& hp, std::size_t threads) {
  const std::size_t m = state.num_kernels();
  if (resp.num_kernels != m || alpha.size() != m) throw std::invalid_argument("elbo: kernel count mismatch");
  if (resp.r.size() != resp.table.rows.size() * m) throw std::invalid_argument("elbo: responsibility shape mismatch");
  const auto ll = segment_log_liks(data, resp.table, state, threads);
  const auto elog = expected_log_pi(alpha);

  double data_term = 0.0;
  for (std::size_t u = 0; u < resp.table.rows.size(); ++u) {
    double row = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
      const double r = resp.r[u * m + k];
      if (r <= 0.0) continue;
      row += r * (ll[u * m + k] + elog[k] - std::log(r));
    }
    data_term += resp.table.counts[u] * row;
  }
  if (resp.table.num_samples > 0) data_term /= static_cast<double>(resp.table.num_samples);

  double alpha_sum = 0.0;
  for (double a : alpha) alpha_sum += a;
  const double md = static_cast<double>(m);
  double e_log_p = std::lgamma(md * hp.alpha0) - md * std::lgamma(hp.alpha0);
  double e_log_q = std::lgamma(alpha_sum);
  for (std::size_t k = 0; k < m; ++k) {
    e_log_p += (hp.alpha0 - 1.0) * elog[k];
    e_log_q += -std::lgamma(alpha[k]) + (alpha[k] - 1.0) * elog[k];
  }
  return data_term + e_log_p - e_log_q + log_param_prior(state, hp);
}

ObjectiveValue mstep_objective(const Dataset& data, const Responsibilities& resp, const ModelState& state,
                               const Hyperparams& hp, bool with_grad, std::size_t threads) {
  const std::size_t m = state.num_kernels();
  if (resp.num_kernels != m) throw std::invalid_argument("mstep: kernel count mismatch");
  const double inv_l = resp.table.num_samples > 0 ? 1.0 / static_cast<double>(resp.table.num_samples) : 0.0;
  const std::size_t stride = 3 * m + 1;
  const std::size_t rows = resp.table.rows.size();
  // Per-row partials, reduced serially below so the sum order is fixed.
  std::vector<double> partial(rows * stride, 0.0);
  parallel_for(rows, threads, [&](std::size_t u) {
    const auto& key = resp.table.rows[u];
    const SegmentView view = make_view(data[key.seq], key.range);
    double* out = partial.data() + u * stride;
    for (std::size_t k = 0; k < m; ++k) {
      const double w = resp.table.counts[u] * inv_l * resp.r[u * m + k];
      if (w < kWeightFloor) continue;
      if (with_grad) {
        const MarginalGradient g = segment_log_marginal_grad(view, state.kernels[k], state.beta);
        out[3 * m] += w * g.value;
        out[3 * k] += w * g.d_log_amp2;
        out[3 * k + 1] += w * g.d_log_ls2;
        out[3 * k + 2] += w * g.d_log_beta;
      } else {
        out[3 * m] += w * segment_log_marginal(view, state.kernels[k], state.beta);
      }
    }
  });

  ObjectiveValue result;
  result.value = log_param_prior(state, hp);
  if (with_grad) result.grad.assign(2 * m + 1, 0.0);
  for (std::size_t u = 0; u < rows; ++u) {
    const double* p = partial.data() + u * stride;
    result.value += p[3 * m];
    if (!with_grad) continue;
    for (std::size_t k = 0; k < m; ++k) {
      result.grad[2 * k] += p[3 * k];
      result.grad[2 * k + 1] += p[3 * k + 1];
      result.grad.back() += p[3 * k + 2];
    }
  }
  if (with_grad) {
    for (std::size_t k = 0; k < m; ++k) {
      result.grad[2 * k] += lognormal_log_prior(state.kernels[k].amp2, hp.lognormal_amp.mu, hp.lognormal_amp.sigma).dlog;
      result.grad[2 * k + 1] += lognormal_log_prior(state.kernels[k].ls2, hp.lognormal_ls.mu, hp.lognormal_ls.sigma).dlog;
      if (is_frozen(state, k)) {
        result.grad[2 * k] = 0.0;
        result.grad[2 * k + 1] = 0.0;
      }
    }
    result.grad.back() += lognormal_log_prior(state.beta, hp.lognormal_noise.mu, hp.lognormal_noise.sigma).dlog;
  }
  return result;
}

MStepResult mstep(const Dataset& data, const Responsibilities& resp, const ModelState& state, const Hyperparams& hp,
                  std::size_t threads) {
  constexpr double kArmijo = 1e-4;
  constexpr double kShrink = 0.5;
  constexpr double kMinStep = 1e-12;
  // Largest move of any log-parameter in one step.
  constexpr double kMaxLogStep = 2.0;
  constexpr std::size_t kMemory = 7;

  ModelState current = state;
  ObjectiveValue f = mstep_objective(data, resp, current, hp, true, threads);
  std::vector<double> u = pack(current);

  MStepResult result;
  result.start_objective = f.value;
  result.trace.push_back(f.value);

  std::deque<std::vector<double>> s_hist;
  std::deque<std::vector<double>> y_hist;

  for (std::size_t iter = 0; iter < hp.mstep.max_iters; ++iter) {
    const double gnorm = norm(f.grad);
    if (gnorm <= hp.mstep.grad_tol) break;

    // Two-loop recursion on the minimization problem -objective.
    std::vector<double> d = f.grad;
    std::vector<double> coef(s_hist.size());
    for (std::size_t j = s_hist.size(); j-- > 0;) {
      coef[j] = dot(s_hist[j], d) / dot(y_hist[j], s_hist[j]);
      for (std::size_t k = 0; k < d.size(); ++k) d[k] -= coef[j] * y_hist[j][k];
    }
    if (!s_hist.empty()) {
      const double gamma = dot(s_hist.back(), y_hist.back()) / dot(y_hist.back(), y_hist.back());
      for (double& v : d) v *= gamma;
    } else {
      double gmax = 0.0;
      for (double v : f.grad) gmax = std::max(gmax, std::abs(v));
      for (double& v : d) v *= hp.mstep.step_size / gmax;
    }
    for (std::size_t j = 0; j < s_hist.size(); ++j) {
      const double b = dot(y_hist[j], d) / dot(y_hist[j], s_hist[j]);
      for (std::size_t k = 0; k < d.size(); ++k) d[k] += (coef[j] - b) * s_hist[j][k];
    }
    double slope = dot(f.grad, d);
    if (!(slope > 0.0) || !std::isfinite(slope)) {
      s_hist.clear();
      y_hist.clear();
      double gmax = 0.0;
      for (double v : f.grad) gmax = std::max(gmax, std::abs(v));
      d = f.grad;
      for (double& v : d) v *= hp.mstep.step_size / gmax;
      slope = dot(f.grad, d);
    }
    double dmax = 0.0;
    for (double v : d) dmax = std::max(dmax, std::abs(v));
    if (dmax > kMaxLogStep) {
      for (double& v : d) v *= kMaxLogStep / dmax;
      slope *= kMaxLogStep / dmax;
    }

    bool accepted = false;
    ObjectiveValue trial;
    std::vector<double> u_trial(u.size());
    for (double t = 1.0; t >= kMinStep; t *= kShrink) {
      for (std::size_t k = 0; k < u.size(); ++k) u_trial[k] = u[k] + t * d[k];
      ModelState candidate = current;
      unpack(u_trial, candidate);
      try {
        trial = mstep_objective(data, resp, candidate, hp, true, threads);
      } catch (const NumericalError&) {
        continue;
      }
      if (std::isfinite(trial.value) && trial.value >= f.value + kArmijo * t * slope) {
        current = std::move(candidate);
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      result.line_search_failed = true;
      break;
    }

    std::vector<double> s(u.size());
    std::vector<double> y(u.size());
    for (std::size_t k = 0; k < u.size(); ++k) {
      s[k] = u_trial[k] - u[k];
      y[k] = f.grad[k] - trial.grad[k];
    }
    if (dot(s, y) > 1e-12 * dot(s, s)) {
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
      if (s_hist.size() > kMemory) {
        s_hist.pop_front();
        y_hist.pop_front();
      }
    }
    const double previous = f.value;
    u = u_trial;
    f = std::move(trial);
    result.trace.push_back(f.value);
    result.iterations = iter + 1;
    if (std::abs(f.value - previous) <= hp.mstep.rel_tol * std::max(1.0, std::abs(previous))) break;
  }

  result.kernels = current.kernels;
  result.beta = current.beta;
  result.objective = f.value;
  return result;
}

VemResult run_vem(const Dataset& data, const SampleSet& samples, const ModelState& state, const Hyperparams& hp,
                  std::size_t threads) {
  VemResult out;
  ModelState current = state;
  out.resp.table = SegmentTable::build(samples);
  out.resp.num_kernels = current.num_kernels();
  double previous = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t cycle = 0; cycle < hp.outer.vem_cycles; ++cycle) {
    out.resp.log_liks = segment_log_liks(data, out.resp.table, current, threads);
    refresh_responsibilities(out.resp, current.alpha);
    current.alpha = update_pi(out.resp, hp.alpha0);

    MStepResult ms = mstep(data, out.resp, current, hp, threads);
    current.kernels = ms.kernels;
    current.beta = ms.beta;
    out.traces.push_back(ms.trace);
    out.line_search_failed = out.line_search_failed || ms.line_search_failed;
    out.objective = ms.objective;
    out.cycles = cycle + 1;
    if (std::isfinite(previous) &&
        std::abs(ms.objective - previous) <= hp.outer.elbo_rel_tol * std::max(1.0, std::abs(previous))) {
      break;
    }
    previous = ms.objective;
  }
  out.alpha = current.alpha;
  out.kernels = current.kernels;
  out.beta = current.beta;
  return out;
}

}  // namespace segseq
