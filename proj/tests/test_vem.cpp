#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "segseq/generator.hpp"
#include "segseq/gp_kernel.hpp"
#include "segseq/model.hpp"
#include "segseq/vem.hpp"

using namespace segseq;

namespace {

// Digamma by upward recurrence and the asymptotic series.
double digamma_oracle(double x) {
  double acc = 0.0;
  while (x < 10.0) {
    acc -= 1.0 / x;
    x += 1.0;
  }
  const double inv = 1.0 / x, inv2 = inv * inv;
  return acc + std::log(x) - 0.5 * inv - inv2 * (1.0 / 12 - inv2 * (1.0 / 120 - inv2 * (1.0 / 252)));
}

struct Fixture {
  Dataset data;
  SampleSet samples;
  ModelState state;
  Hyperparams hp;
};

Fixture make_fixture(std::uint64_t seed, std::size_t num_samples = 6) {
  Fixture f;
  std::mt19937_64 rng(seed);
  Rng gp_rng(seed);
  for (int d = 0; d < 2; ++d) {
    Sequence s{"s" + std::to_string(d), make_grid(3.0, 0.1), {}};
    s.y = sample_gp(s.x, {0.05, 0.05}, 0.001, gp_rng);
    f.data.push_back(std::move(s));
  }
  for (std::size_t i = 0; i < num_samples; ++i) {
    std::vector<Segmentation> sample;
    for (const auto& s : f.data) {
      std::vector<std::uint8_t> c(s.size(), 0);
      c[0] = 1;
      for (std::size_t k = 1; k < c.size(); ++k) c[k] = rng() % 6 == 0;
      sample.emplace_back(s.id, c);
    }
    f.samples.push_back(std::move(sample));
  }
  f.state.kernels = {{0.01, 0.1}, {0.05, 0.05}, {0.05, 0.005}};
  f.state.alpha = {0.7, 2.0, 1.3};
  f.state.beta = 0.002;
  f.state.frozen.assign(3, false);
  f.hp.num_kernels = 3;
  return f;
}

// Evidence bound summed directly over samples and segments.
double elbo_oracle(const Fixture& f, const std::vector<std::vector<std::vector<std::vector<double>>>>& r,
                   const std::vector<double>& alpha) {
  double total_alpha = 0.0;
  for (double a : alpha) total_alpha += a;
  std::vector<double> elog(alpha.size());
  for (std::size_t m = 0; m < alpha.size(); ++m) elog[m] = digamma_oracle(alpha[m]) - digamma_oracle(total_alpha);
  double data_term = 0.0;
  for (std::size_t i = 0; i < f.samples.size(); ++i) {
    for (std::size_t d = 0; d < f.data.size(); ++d) {
      const auto segs = f.samples[i][d].segments();
      for (std::size_t s = 0; s < segs.size(); ++s) {
        for (std::size_t m = 0; m < alpha.size(); ++m) {
          const double rr = r[i][d][s][m];
          if (rr <= 0.0) continue;
          const double ll = segment_log_marginal(make_view(f.data[d], segs[s]), f.state.kernels[m], f.state.beta);
          data_term += rr * (ll + elog[m] - std::log(rr));
        }
      }
    }
  }
  data_term /= static_cast<double>(f.samples.size());
  const double a0 = f.hp.alpha0, md = static_cast<double>(alpha.size());
  double kl = std::lgamma(total_alpha) - std::lgamma(md * a0) + md * std::lgamma(a0);
  for (std::size_t m = 0; m < alpha.size(); ++m) kl += -std::lgamma(alpha[m]) + (alpha[m] - a0) * elog[m];
  return data_term - kl + log_param_prior(f.state, f.hp);
}

std::vector<std::vector<std::vector<std::vector<double>>>> expand(const Fixture& f, const Responsibilities& resp) {
  std::vector<std::vector<std::vector<std::vector<double>>>> out(f.samples.size());
  for (std::size_t i = 0; i < f.samples.size(); ++i) {
    out[i].resize(f.data.size());
    for (std::size_t d = 0; d < f.data.size(); ++d) {
      for (std::size_t s = 0; s < resp.table.ids[i][d].size(); ++s) {
        const auto row = resp.at(i, d, s);
        out[i][d].emplace_back(row.begin(), row.end());
      }
    }
  }
  return out;
}

}  // namespace

TEST_CASE("expected log pi") {
  const auto e = expected_log_pi(std::vector<double>{1.0, 1.0});
  CHECK(e[0] == doctest::Approx(-1.0).epsilon(1e-14));
  CHECK(e[1] == doctest::Approx(-1.0).epsilon(1e-14));
  const auto big = expected_log_pi(std::vector<double>{1000.0, 3000.0});
  CHECK(big[0] == doctest::Approx(std::log(0.25)).epsilon(1e-3));
  std::mt19937_64 rng(1);
  for (int t = 0; t < 20; ++t) {
    std::vector<double> a{0.01 + 5.0 * (rng() % 1000) / 1000.0, 0.1 + (rng() % 1000) / 100.0};
    const auto v = expected_log_pi(a);
    CHECK(v[0] == doctest::Approx(digamma_oracle(a[0]) - digamma_oracle(a[0] + a[1])).epsilon(1e-10));
  }
  CHECK_THROWS_AS(expected_log_pi(std::vector<double>{1.0, 0.0}), std::invalid_argument);
}

TEST_CASE("segment table deduplicates across samples") {
  auto f = make_fixture(2);
  SampleSet doubled;
  for (const auto& s : f.samples) {
    doubled.push_back(s);
    doubled.push_back(s);
  }
  const auto t1 = SegmentTable::build(f.samples);
  const auto t2 = SegmentTable::build(doubled);
  CHECK(t1.rows.size() == t2.rows.size());
  CHECK(t1.mean_segment_count() == doctest::Approx(t2.mean_segment_count()));
  double total = 0.0;
  for (double c : t1.counts) total += c;
  std::size_t segs = 0;
  for (const auto& s : f.samples) {
    for (const auto& seg : s) segs += seg.num_segments();
  }
  CHECK(total == static_cast<double>(segs));
}

TEST_CASE("responsibilities are normalized softmaxes") {
  auto f = make_fixture(3);
  const auto resp = update_responsibilities(f.data, f.samples, f.state);
  const auto elog = expected_log_pi(f.state.alpha);
  for (std::size_t u = 0; u < resp.table.rows.size(); ++u) {
    const auto row = resp.row(u);
    double sum = 0.0;
    for (double v : row) {
      CHECK(v >= 0.0);
      sum += v;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    const auto& key = resp.table.rows[u];
    double l[3], mx = -INFINITY;
    for (std::size_t m = 0; m < 3; ++m) {
      l[m] = elog[m] + segment_log_marginal(make_view(f.data[key.seq], key.range), f.state.kernels[m], f.state.beta);
      mx = std::max(mx, l[m]);
    }
    double z = 0.0;
    for (double v : l) z += std::exp(v - mx);
    for (std::size_t m = 0; m < 3; ++m) CHECK(row[m] == doctest::Approx(std::exp(l[m] - mx) / z).epsilon(1e-10));
  }
}

TEST_CASE("update_pi adds the mean segment count to the prior mass") {
  auto f = make_fixture(4);
  const auto resp = update_responsibilities(f.data, f.samples, f.state);
  const auto alpha = update_pi(resp, f.hp.alpha0);
  double sum = 0.0;
  for (double a : alpha) {
    CHECK(a >= f.hp.alpha0);
    sum += a;
  }
  CHECK(sum == doctest::Approx(3 * f.hp.alpha0 + resp.table.mean_segment_count()).epsilon(1e-12));
}

TEST_CASE("kernel relabelling permutes responsibilities") {
  auto f = make_fixture(5);
  const auto resp = update_responsibilities(f.data, f.samples, f.state);
  Fixture g = f;
  const std::size_t perm[3] = {2, 0, 1};
  for (std::size_t m = 0; m < 3; ++m) {
    g.state.kernels[m] = f.state.kernels[perm[m]];
    g.state.alpha[m] = f.state.alpha[perm[m]];
  }
  const auto resp2 = update_responsibilities(g.data, g.samples, g.state);
  for (std::size_t u = 0; u < resp.table.rows.size(); ++u) {
    for (std::size_t m = 0; m < 3; ++m) CHECK(resp2.row(u)[m] == doctest::Approx(resp.row(u)[perm[m]]).epsilon(1e-12));
  }
  CHECK(elbo(g.data, resp2, g.state.alpha, g.state, g.hp) ==
        doctest::Approx(elbo(f.data, resp, f.state.alpha, f.state, f.hp)).epsilon(1e-12));
}

TEST_CASE("elbo matches the per-sample oracle and ignores duplicated samples") {
  auto f = make_fixture(6);
  const auto resp = update_responsibilities(f.data, f.samples, f.state);
  const double value = elbo(f.data, resp, f.state.alpha, f.state, f.hp);
  CHECK(value == doctest::Approx(elbo_oracle(f, expand(f, resp), f.state.alpha)).epsilon(1e-10));

  Fixture g = f;
  g.samples.clear();
  for (const auto& s : f.samples) {
    g.samples.push_back(s);
    g.samples.push_back(s);
  }
  const auto resp2 = update_responsibilities(g.data, g.samples, g.state);
  CHECK(elbo(g.data, resp2, g.state.alpha, g.state, g.hp) == doctest::Approx(value).epsilon(1e-12));
  const auto a1 = update_pi(resp, 0.1), a2 = update_pi(resp2, 0.1);
  for (std::size_t m = 0; m < 3; ++m) CHECK(a1[m] == doctest::Approx(a2[m]).epsilon(1e-12));
}

TEST_CASE("coordinate updates do not decrease the bound") {
  auto f = make_fixture(7);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto resp = update_responsibilities(f.data, f.samples, f.state);
  const double at_r = elbo(f.data, resp, f.state.alpha, f.state, f.hp);
  for (int t = 0; t < 10; ++t) {
    Responsibilities perturbed = resp;
    for (std::size_t row = 0; row < perturbed.table.rows.size(); ++row) {
      double sum = 0.0;
      for (std::size_t m = 0; m < 3; ++m) {
        double& v = perturbed.r[row * 3 + m];
        v = std::max(v + 0.05 * (u(rng) - 0.5), 1e-12);
        sum += v;
      }
      for (std::size_t m = 0; m < 3; ++m) perturbed.r[row * 3 + m] /= sum;
    }
    CHECK(elbo(f.data, perturbed, f.state.alpha, f.state, f.hp) <= at_r + 1e-9);
  }

  const auto alpha = update_pi(resp, f.hp.alpha0);
  const double at_alpha = elbo(f.data, resp, alpha, f.state, f.hp);
  for (int t = 0; t < 10; ++t) {
    auto a = alpha;
    for (double& v : a) v *= std::exp(0.2 * (u(rng) - 0.5));
    CHECK(elbo(f.data, resp, a, f.state, f.hp) <= at_alpha + 1e-9);
  }
}

TEST_CASE("mstep objective gradient matches central differences") {
  auto f = make_fixture(8);
  const auto resp = update_responsibilities(f.data, f.samples, f.state);
  const auto g = mstep_objective(f.data, resp, f.state, f.hp, true);
  const double h = 1e-5;
  auto shifted = [&](std::size_t k, double delta) {
    ModelState s = f.state;
    if (k + 1 == g.grad.size()) {
      s.beta *= std::exp(delta);
    } else if (k % 2 == 0) {
      s.kernels[k / 2].amp2 *= std::exp(delta);
    } else {
      s.kernels[k / 2].ls2 *= std::exp(delta);
    }
    return mstep_objective(f.data, resp, s, f.hp, false).value;
  };
  for (std::size_t k = 0; k < g.grad.size(); ++k) {
    const double fd = (shifted(k, h) - shifted(k, -h)) / (2 * h);
    CHECK(g.grad[k] == doctest::Approx(fd).epsilon(1e-4).scale(1.0));
  }
}

TEST_CASE("mstep trace is monotone and frozen kernels stay put") {
  auto f = make_fixture(9);
  f.state.frozen = {false, false, true};
  const auto resp = update_responsibilities(f.data, f.samples, f.state);
  const auto ms = mstep(f.data, resp, f.state, f.hp);
  REQUIRE(ms.trace.size() >= 2);
  for (std::size_t k = 1; k < ms.trace.size(); ++k) CHECK(ms.trace[k] >= ms.trace[k - 1]);
  CHECK(ms.objective >= ms.start_objective);
  CHECK(ms.kernels[2].amp2 == f.state.kernels[2].amp2);
  CHECK(ms.kernels[2].ls2 == f.state.kernels[2].ls2);
}

TEST_CASE("mstep leaves parameters alone at a stationary point") {
  auto f = make_fixture(10);
  f.hp.mstep.grad_tol = 1e12;
  const auto resp = update_responsibilities(f.data, f.samples, f.state);
  const auto ms = mstep(f.data, resp, f.state, f.hp);
  CHECK(ms.iterations == 0);
  for (std::size_t m = 0; m < 3; ++m) {
    CHECK(ms.kernels[m].amp2 == f.state.kernels[m].amp2);
    CHECK(ms.kernels[m].ls2 == f.state.kernels[m].ls2);
  }
  CHECK(ms.beta == f.state.beta);
}

TEST_CASE("single-kernel fit on one long segment recovers the generating parameters") {
  Rng rng(2024);
  Sequence s{"long", make_grid(30.0, 0.1), {}};
  s.y = sample_gp(s.x, {0.05, 0.05}, 0.001, rng);
  Dataset data{s};
  SampleSet samples{{Segmentation::single("long", s.size())}};
  Hyperparams hp;
  hp.num_kernels = 1;
  // Nearly flat priors so the optimum is the likelihood maximizer.
  hp.lognormal_amp.sigma = hp.lognormal_ls.sigma = hp.lognormal_noise.sigma = 100.0;
  ModelState state;
  state.kernels = {{0.2, 0.2}};
  state.beta = 0.01;
  state.alpha = {1.0};
  state.frozen = {false};
  const auto resp = update_responsibilities(data, samples, state);
  const auto ms = mstep(data, resp, state, hp);
  CHECK(std::abs(ms.kernels[0].amp2 / 0.05 - 1.0) < 0.25);
  CHECK(std::abs(ms.kernels[0].ls2 / 0.05 - 1.0) < 0.25);
  CHECK(std::abs(ms.beta / 0.001 - 1.0) < 0.25);
}

TEST_CASE("run_vem produces consistent q(pi) and finite objective") {
  auto f = make_fixture(11);
  f.hp.outer.vem_cycles = 2;
  const auto out = run_vem(f.data, f.samples, f.state, f.hp);
  CHECK(out.cycles >= 1);
  CHECK(std::isfinite(out.objective));
  double sum = 0.0;
  for (double a : out.alpha) sum += a;
  CHECK(sum == doctest::Approx(3 * f.hp.alpha0 + out.resp.table.mean_segment_count()).epsilon(1e-12));
}
