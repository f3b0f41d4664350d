#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "oracles.hpp"
#include "selex/errors.hpp"
#include "selex/ordering_prob.hpp"

using namespace selex;
using doctest::Approx;

namespace {

std::vector<double> random_means(std::mt19937_64& rng, std::size_t p, double spread) {
  std::uniform_real_distribution<double> u(-spread, spread);
  std::vector<double> mu(p);
  for (double& m : mu) m = u(rng);
  return mu;
}

double prob(std::vector<double> mu, double sigma = 1.0) {
  return ordering_probability(MeanConfig(std::move(mu), sigma)).value;
}

}  // namespace

TEST_CASE("MeanConfig validation") {
  CHECK_THROWS_AS(MeanConfig({1.0}, 1.0), InvalidArgument);
  CHECK_THROWS_AS(MeanConfig({1.0, 0.0}, 0.0), InvalidArgument);
  CHECK_THROWS_AS(MeanConfig({1.0, NAN}, 1.0), InvalidArgument);
  CHECK_NOTHROW(MeanConfig({0.0, 5.0, -1.0}, 2.0));
}

TEST_CASE("ordering probability examples") {
  CHECK(prob({0, 0}) == 0.5);
  const auto p2 = ordering_probability(MeanConfig({1, 0}, 1.0));
  CHECK(p2.method == ProbMethod::closed_form_p2);
  CHECK(std::fabs(p2.value - 0.5 * std::erfc(-0.5)) < 1e-9);
  CHECK(std::fabs(p2.value - 0.7602499) < 1e-7);

  const auto p3 = ordering_probability(MeanConfig({0, 0, 0}, 1.0));
  CHECK(p3.method == ProbMethod::quadrature);
  CHECK(std::fabs(p3.value - 1.0 / 6.0) < 1e-8);
  CHECK(std::fabs(p3.log_value - std::log(p3.value)) < 1e-12);
  CHECK(p3.err_est < 1e-10);

  CHECK(std::fabs(prob({0, 0, 0, 0}) - 1.0 / 24.0) < 1e-8);
  CHECK(std::fabs(prob({0, 0, 0, 0, 0}) - 1.0 / 120.0) < 1e-8);
}

TEST_CASE("p=3 grid recursion matches the single conditioning integral") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 40; ++trial) {
    const auto mu = random_means(rng, 3, 3.0);
    const double sigma = std::uniform_real_distribution<double>(0.3, 2.5)(rng);
    const double expected = oracle::ordering_p3_conditioning(mu[0], mu[1], mu[2], sigma);
    CHECK(prob(mu, sigma) == Approx(expected).epsilon(1e-9));
  }
}

TEST_CASE("(2,1,0) agrees with Monte Carlo") {
  const MeanConfig cfg({2, 1, 0}, 1.0);
  const auto q = ordering_probability(cfg);
  const auto mc = mc_ordering_probability(cfg, 1'000'000, 2024);
  CHECK(std::fabs(q.value - mc.value) <= 3.0 * mc.err_est);
}

TEST_CASE("probabilities over all orderings sum to one") {
  std::mt19937_64 rng(5);
  for (std::size_t p : {2u, 3u, 4u}) {
    for (int trial = 0; trial < 5; ++trial) {
      auto mu = random_means(rng, p, 2.0);
      std::sort(mu.begin(), mu.end());
      double total = 0.0;
      do total += prob(mu);
      while (std::next_permutation(mu.begin(), mu.end()));
      CHECK(std::fabs(total - 1.0) < 1e-6);
    }
  }
}

TEST_CASE("translation invariance and scale coupling") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> shift(-50.0, 50.0);
  std::uniform_real_distribution<double> scale(0.1, 10.0);
  for (std::size_t p : {2u, 3u, 4u, 5u}) {
    for (int trial = 0; trial < 4; ++trial) {
      const auto mu = random_means(rng, p, 2.5);
      const double base = prob(mu);
      auto moved = mu;
      const double c = shift(rng);
      for (double& m : moved) m += c;
      CHECK(std::fabs(prob(moved) - base) < 1e-10);
      auto scaled = mu;
      const double a = scale(rng);
      for (double& m : scaled) m *= a;
      CHECK(std::fabs(prob(scaled, a) - base) < 1e-10);
    }
  }
}

TEST_CASE("raising the first mean never lowers the probability") {
  for (const std::vector<double> rest : {std::vector<double>{0.0}, {0.5, -0.5}, {1.0, 0.0, -2.0}}) {
    double prev = 0.0;
    for (double mu1 = -6.0; mu1 <= 6.0; mu1 += 0.25) {
      std::vector<double> mu{mu1};
      mu.insert(mu.end(), rest.begin(), rest.end());
      const double value = prob(mu);
      CHECK(value >= prev - 1e-10);
      prev = value;
    }
  }
}

TEST_CASE("log-stabilised values survive underflow") {
  const auto p2 = ordering_probability(MeanConfig({-60, 0}, 1.0));
  CHECK(p2.underflow);
  const double z = -60.0 / std::sqrt(2.0);
  CHECK(p2.log_value ==
        Approx(log_std_normal_pdf(z) - std::log(oracle::mills_asymptotic(-z))).epsilon(1e-12));

  const auto p3 = ordering_probability(MeanConfig({-30, 0, 30}, 1.0));
  CHECK(p3.underflow);
  CHECK(std::isfinite(p3.log_value));
  const double expected = oracle::log_ordering_p3_conditioning(-30, 0, 30, 1.0, 0.0);
  CHECK(p3.log_value == Approx(expected).epsilon(1e-9));
}

TEST_CASE("grid limit surfaces as ConvergenceFailure") {
  QuadratureSpec spec;
  spec.max_subdivisions = 50;
  CHECK_THROWS_AS(ordering_probability(MeanConfig({0, 100, 0}, 1.0), spec), ConvergenceFailure);
  CHECK_NOTHROW(ordering_probability(MeanConfig({0, 20, 0}, 1.0)));
}

TEST_CASE("Monte Carlo oracle") {
  const auto half = mc_ordering_probability(MeanConfig({0, 0}, 1.0), 1'000'000, 1);
  CHECK(std::fabs(half.value - 0.5) < 0.0015);
  CHECK(half.method == ProbMethod::monte_carlo);

  const MeanConfig far({5, 0}, 1.0);
  const auto mc = mc_ordering_probability(far, 1'000'000, 3);
  const double exact = 0.5 * std::erfc(-5.0 / 2.0);
  CHECK(std::fabs(exact - 0.99979) < 1e-5);
  CHECK(std::fabs(mc.value - exact) <= 3.0 * mc.err_est);

  SUBCASE("deterministic for a seed, whatever the worker count") {
    const MeanConfig cfg({1, 0.5, 0}, 1.0);
    const auto a = mc_ordering_probability(cfg, 300'000, 99, 1);
    const auto b = mc_ordering_probability(cfg, 300'000, 99, 1);
    const auto c = mc_ordering_probability(cfg, 300'000, 99, 4);
    CHECK(a.value == b.value);
    CHECK(a.value == c.value);
    CHECK(mc_ordering_probability(cfg, 300'000, 100, 1).value != a.value);
  }

  SUBCASE("degenerate fractions are flagged") {
    const auto sure = mc_ordering_probability(MeanConfig({100, 0}, 1.0), 10'000, 1);
    CHECK(sure.degenerate);
    CHECK(std::isnan(sure.log_value));
  }

  CHECK_THROWS_AS(mc_ordering_probability(far, 9'999, 1), InvalidArgument);
}

TEST_CASE("gradient of log P") {
  const auto g = grad_log_ordering_probability(MeanConfig({1, 0}, 1.0));
  const double expected = inverse_mills(-1.0 / std::sqrt(2.0)) / std::sqrt(2.0);
  CHECK(std::fabs(g[0] - 0.28897) < 1e-5);
  CHECK(g[0] == Approx(expected).epsilon(1e-14));
  CHECK(g[1] == -g[0]);

  const auto g0 = grad_log_ordering_probability(MeanConfig({0, 0}, 1.0));
  CHECK(std::fabs(g0[0] - 0.5642) < 1e-4);
  CHECK(std::fabs(g0[0] - 1.0 / std::sqrt(M_PI)) < 1e-6);

  SUBCASE("finite differences match the analytic p=2 form") {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 20; ++trial) {
      const auto mu = random_means(rng, 2, 3.0);
      const double sigma = std::uniform_real_distribution<double>(0.5, 2.0)(rng);
      const MeanConfig cfg(mu, sigma);
      const auto analytic = grad_log_ordering_probability(cfg);
      const auto fd = grad_log_ordering_probability(cfg, {}, 0.0, GradientMethod::finite_difference);
      for (int i = 0; i < 2; ++i) CHECK(std::fabs(analytic[i] - fd[i]) <= 1e-5);
    }
  }

  SUBCASE("components sum to zero") {
    std::mt19937_64 rng(4);
    for (std::size_t p : {3u, 4u, 5u}) {
      const auto grad = grad_log_ordering_probability(MeanConfig(random_means(rng, p, 2.0), 1.0));
      CHECK(std::fabs(std::accumulate(grad.begin(), grad.end(), 0.0)) < 1e-6);
    }
  }

  SUBCASE("p=3 finite differences match differentiated conditioning integral") {
    // d/dmu1 of P by differentiating the oracle with a wide step Richardson pair
    const double h = 1e-3;
    const double up = oracle::ordering_p3_conditioning(1.0 + h, 0.2, -0.4, 1.0);
    const double dn = oracle::ordering_p3_conditioning(1.0 - h, 0.2, -0.4, 1.0);
    const double up2 = oracle::ordering_p3_conditioning(1.0 + 2 * h, 0.2, -0.4, 1.0);
    const double dn2 = oracle::ordering_p3_conditioning(1.0 - 2 * h, 0.2, -0.4, 1.0);
    const double dp = (8 * (up - dn) - (up2 - dn2)) / (12 * h);
    const double p = oracle::ordering_p3_conditioning(1.0, 0.2, -0.4, 1.0);
    const auto grad = grad_log_ordering_probability(MeanConfig({1.0, 0.2, -0.4}, 1.0));
    CHECK(grad[0] == Approx(dp / p).epsilon(1e-7));
  }
}

TEST_CASE("quadrature agrees with Monte Carlo across random configurations") {
  std::mt19937_64 rng(31);
  int outside = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t p = 2 + trial % 4;
    const MeanConfig cfg(random_means(rng, p, 1.5), 1.0);
    const auto q = ordering_probability(cfg);
    const auto mc = mc_ordering_probability(cfg, 1'000'000, 1000 + trial);
    if (std::fabs(q.value - mc.value) > 3.0 * mc.err_est) ++outside;
  }
  CHECK(outside == 0);
}

TEST_CASE("far-separated means stay finite in log form") {
  for (double m : {40.0, 100.0}) {
    const auto r = ordering_probability(MeanConfig({0, m, 0}, 1.0));
    const double expected = oracle::log_ordering_p3_conditioning(0, m, 0, 1.0, m / 2.0);
    CHECK(r.log_value == Approx(expected).epsilon(1e-9));
  }
}
