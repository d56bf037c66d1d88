#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <random>

#include "segseq/gp_kernel.hpp"
#include "segseq/linalg.hpp"
#include "segseq/model.hpp"

using namespace segseq;

namespace {

struct RandomSegment {
  std::vector<double> xs;
  std::vector<double> ys;
  KernelParams params;
  double beta;
};

RandomSegment random_segment(std::mt19937_64& rng, std::size_t max_n) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  RandomSegment s;
  const std::size_t n = 1 + rng() % max_n;
  double t = u(rng);
  for (std::size_t i = 0; i < n; ++i) {
    t += 0.02 + 0.2 * u(rng);
    s.xs.push_back(t);
    s.ys.push_back(0.4 * (u(rng) - 0.5));
  }
  s.params = {std::exp(std::log(1e-3) + u(rng) * std::log(1e3)), std::exp(std::log(1e-3) + u(rng) * std::log(1e3))};
  s.beta = std::exp(std::log(1e-4) + u(rng) * std::log(1e3));
  return s;
}

// Independent dense computation: explicit inverse and determinant.
double dense_log_marginal(const std::vector<double>& xs, const std::vector<double>& ys, const KernelParams& p,
                          double beta) {
  const auto n = static_cast<Eigen::Index>(xs.size());
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double d = xs[i] - xs[j];
      k(i, j) = p.amp2 * std::exp(-d * d / (2.0 * p.ls2));
    }
    k(i, i) += beta + kJitterStart * p.amp2;
  }
  Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(ys.data(), n);
  Eigen::FullPivLU<Eigen::MatrixXd> lu(k);
  const double quad = y.dot(lu.inverse() * y);
  return -0.5 * quad - 0.5 * std::log(lu.determinant()) - 0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
}

std::array<double, 3> finite_difference(const RandomSegment& s, double h) {
  const SegmentView view{s.xs, s.ys};
  auto eval = [&](double da, double dl, double db) {
    const KernelParams p{s.params.amp2 * std::exp(da), s.params.ls2 * std::exp(dl)};
    return segment_log_marginal(view, p, s.beta * std::exp(db));
  };
  return {(eval(h, 0, 0) - eval(-h, 0, 0)) / (2 * h), (eval(0, h, 0) - eval(0, -h, 0)) / (2 * h),
          (eval(0, 0, h) - eval(0, 0, -h)) / (2 * h)};
}

}  // namespace

TEST_CASE("se_covariance entries") {
  const std::vector<double> one{0.0};
  const Matrix k1 = se_covariance(one, {0.1, 0.4}, 0.001);
  CHECK(k1(0, 0) == doctest::Approx(0.101 + kJitterStart * 0.1).epsilon(1e-15));

  const std::vector<double> far{0.0, 1e4};
  const Matrix k2 = se_covariance(far, {0.1, 0.4}, 0.001);
  CHECK(k2(0, 1) == 0.0);

  const std::vector<double> near{0.0, 0.2};
  const Matrix k3 = se_covariance(near, {0.05, 0.05}, 0.001);
  CHECK(k3(0, 1) == doctest::Approx(0.05 * std::exp(-0.4)).epsilon(1e-14));
  CHECK(k3(0, 1) == k3(1, 0));

  CHECK_THROWS_AS(se_covariance(near, {0.0, 0.05}, 0.001), std::invalid_argument);
  CHECK_THROWS_AS(se_covariance(near, {0.1, 0.05}, -1.0), std::invalid_argument);
}

TEST_CASE("se_covariance is exactly symmetric and factorizes") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const auto s = random_segment(rng, 40);
    Matrix k = se_covariance(s.xs, s.params, s.beta);
    for (std::size_t i = 0; i < k.size(); ++i) {
      for (std::size_t j = 0; j < k.size(); ++j) CHECK(k(i, j) == k(j, i));
    }
    CHECK_NOTHROW(factorize_segment({s.xs, s.ys}, s.params, s.beta));
  }
}

TEST_CASE("cholesky helpers reproduce the inverse") {
  std::mt19937_64 rng(5);
  const auto s = random_segment(rng, 12);
  Matrix k = se_covariance(s.xs, s.params, s.beta);
  Matrix chol = k;
  REQUIRE(cholesky_in_place(chol));
  const Matrix inv = inverse_from_cholesky(chol);
  for (std::size_t i = 0; i < k.size(); ++i) {
    for (std::size_t j = 0; j < k.size(); ++j) {
      double v = 0.0;
      for (std::size_t r = 0; r < k.size(); ++r) v += k(i, r) * inv(r, j);
      CHECK(v == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-6));
    }
  }
  Matrix bad(2);
  bad(0, 0) = 1.0;
  bad(1, 1) = -1.0;
  CHECK_FALSE(cholesky_in_place(bad));
}

TEST_CASE("segment_log_marginal matches a univariate Gaussian") {
  const std::vector<double> x{0.0};
  const std::vector<double> y{0.0};
  const double var = 0.101 + kJitterStart * 0.1;
  CHECK(segment_log_marginal({x, y}, {0.1, 0.4}, 0.001) ==
        doctest::Approx(-0.5 * std::log(2.0 * std::numbers::pi * var)).epsilon(1e-14));
}

TEST_CASE("segment_log_marginal matches the dense-inverse oracle") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    const auto s = random_segment(rng, 20);
    const double fast = segment_log_marginal({s.xs, s.ys}, s.params, s.beta);
    const double dense = dense_log_marginal(s.xs, s.ys, s.params, s.beta);
    CHECK(std::abs(fast - dense) <= 1e-8 * std::max(1.0, std::abs(dense)));
  }
}

TEST_CASE("Gaussian scaling identity") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    auto s = random_segment(rng, 15);
    const double base = segment_log_marginal({s.xs, s.ys}, s.params, s.beta);
    std::vector<double> ys10 = s.ys;
    for (double& v : ys10) v *= 10.0;
    const double scaled =
        segment_log_marginal({s.xs, ys10}, {s.params.amp2 * 100.0, s.params.ls2}, s.beta * 100.0);
    CHECK(scaled - base == doctest::Approx(-static_cast<double>(s.xs.size()) * std::log(10.0)).epsilon(1e-9));
  }
}

TEST_CASE("analytic gradient matches central differences on 100 random instances") {
  std::mt19937_64 rng(1234);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto s = random_segment(rng, 25);
    const auto g = segment_log_marginal_grad({s.xs, s.ys}, s.params, s.beta);
    const auto fd = finite_difference(s, 1e-5);
    const double an[3] = {g.d_log_amp2, g.d_log_ls2, g.d_log_beta};
    double num = 0.0, den = 0.0;
    for (int k = 0; k < 3; ++k) {
      num += (an[k] - fd[k]) * (an[k] - fd[k]);
      den += fd[k] * fd[k];
    }
    worst = std::max(worst, std::sqrt(num) / std::max(std::sqrt(den), 1e-12));
    CHECK(g.value == doctest::Approx(segment_log_marginal({s.xs, s.ys}, s.params, s.beta)).epsilon(1e-12));
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("gradient special cases") {
  std::mt19937_64 rng(99);
  const std::vector<double> x1{0.3};
  const std::vector<double> y1{0.2};
  CHECK(segment_log_marginal_grad({x1, y1}, {0.1, 0.4}, 0.001).d_log_ls2 == 0.0);

  // With y = 0 only the trace term remains: -1/2 tr(K^-1 dK).
  const auto s = random_segment(rng, 10);
  std::vector<double> zeros(s.xs.size(), 0.0);
  const auto g = segment_log_marginal_grad({s.xs, zeros}, s.params, s.beta);
  Matrix chol = se_covariance(s.xs, s.params, s.beta);
  REQUIRE(cholesky_in_place(chol));
  const Matrix inv = inverse_from_cholesky(chol);
  double trace_beta = 0.0;
  for (std::size_t i = 0; i < inv.size(); ++i) trace_beta += inv(i, i);
  CHECK(g.d_log_beta == doctest::Approx(-0.5 * s.beta * trace_beta).epsilon(1e-10));
  CHECK(g.d_log_amp2 < 0.0);
}

TEST_CASE("lognormal_log_prior") {
  const double mu = std::log(0.05), sigma = 1.0;
  const auto at_mode = lognormal_log_prior(std::exp(mu), mu, sigma);
  CHECK(at_mode.value == doctest::Approx(-mu - std::log(sigma * std::sqrt(2.0 * std::numbers::pi))).epsilon(1e-14));
  CHECK(at_mode.dlog == 0.0);
  CHECK(lognormal_log_prior(0.2, 0.0, 0.5).dlog == doctest::Approx(-std::log(0.2) / 0.25));
  CHECK_THROWS_AS(lognormal_log_prior(0.0, 0.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(lognormal_log_prior(1.0, 0.0, 0.0), std::invalid_argument);

  // Quadrature normalization of the unnormalized density exp(-(ln v - mu)^2 / 2s^2) / v.
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    const double m = -3.0 + 3.0 * u(rng);
    const double s = 0.3 + 1.2 * u(rng);
    const double v = std::exp(m + s * (2.0 * u(rng) - 1.0));
    // Integrate over w = ln v with Simpson's rule on [m - 12s, m + 12s].
    const int n = 4000;
    const double lo = m - 12 * s, hi = m + 12 * s, h = (hi - lo) / n;
    double z = 0.0;
    for (int k = 0; k <= n; ++k) {
      const double w = lo + k * h;
      const double f = std::exp(-0.5 * (w - m) * (w - m) / (s * s));  // density in v times the Jacobian v
      z += f * (k == 0 || k == n ? 1.0 : (k % 2 ? 4.0 : 2.0));
    }
    z *= h / 3.0;
    const double expected = -0.5 * (std::log(v) - m) * (std::log(v) - m) / (s * s) - std::log(v) - std::log(z);
    CHECK(lognormal_log_prior(v, m, s).value == doctest::Approx(expected).epsilon(1e-9));
  }
}

TEST_CASE("data from a kernel prefers that kernel over a 10x length-scale") {
  std::mt19937_64 rng(77);
  std::normal_distribution<double> normal(0.0, 1.0);
  const KernelParams truth{0.05, 0.05};
  const KernelParams wrong{0.05, 0.5};
  std::vector<double> xs(30);
  for (std::size_t i = 0; i < xs.size(); ++i) xs[i] = 0.1 * static_cast<double>(i);
  Matrix chol = se_covariance(xs, truth, 0.001);
  REQUIRE(cholesky_in_place(chol));
  double sum_true = 0.0, sum_wrong = 0.0;
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> eps(xs.size()), ys(xs.size(), 0.0);
    for (double& e : eps) e = normal(rng);
    for (std::size_t i = 0; i < xs.size(); ++i) {
      for (std::size_t j = 0; j <= i; ++j) ys[i] += chol(i, j) * eps[j];
    }
    sum_true += segment_log_marginal({xs, ys}, truth, 0.001);
    sum_wrong += segment_log_marginal({xs, ys}, wrong, 0.001);
  }
  CHECK(sum_true / 50 >= sum_wrong / 50);
}

TEST_CASE("factorization failure names the segment") {
  const std::vector<double> xs{0.0, 1.0};
  const std::vector<double> ys{0.0, std::nan("")};
  // NaN inputs still factorize; use NaN timestamps to break the covariance.
  const std::vector<double> bad_x{0.0, std::nan("")};
  try {
    factorize_segment({bad_x, ys, "seqA", 4}, {0.1, 0.1}, 0.001);
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("seqA") != std::string::npos);
  }
}
