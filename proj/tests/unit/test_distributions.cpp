#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "helpers.hpp"
#include "selinf/distributions.hpp"
#include "selinf/selector.hpp"

using namespace selinf;
using testutil::Phi;

TEST_CASE("log normal cdf matches erfc in the bulk and stays finite far out") {
  for (double x : {-30.0, -5.0, -1.0, 0.0, 0.5, 3.0, 8.0})
    CHECK(dist::log_normal_cdf(x) == doctest::Approx(std::log(Phi(x))).epsilon(1e-12));
  // log Phi(-40) = -800 - log(40 sqrt(2 pi)) - log(1 - 1/1600 + ...)
  const double x = -40.0;
  const double oracle = -0.5 * x * x - std::log(-x * std::sqrt(2.0 * M_PI)) +
                        std::log1p(-1.0 / (x * x) + 3.0 / std::pow(x, 4) - 15.0 / std::pow(x, 6));
  CHECK(dist::log_normal_cdf(x) == doctest::Approx(oracle).epsilon(1e-12));
  CHECK(std::isfinite(dist::log_normal_cdf(-1e3)));
}

TEST_CASE("interval probabilities in log space") {
  using K = RandomizationKind;
  CHECK(dist::log_interval_prob(K::Gaussian, -1.0, 1.0) ==
        doctest::Approx(std::log(0.6826894921370859)).epsilon(1e-12));
  // far upper tail, where 1 - Phi underflows naively
  const double far = dist::log_interval_prob(K::Gaussian, 40.0, 41.0);
  CHECK(far == doctest::Approx(dist::log_normal_cdf(-40.0) + dist::log1mexp(
                                   dist::log_normal_cdf(-41.0) - dist::log_normal_cdf(-40.0))));
  CHECK(std::isfinite(dist::log_interval_prob(K::Gaussian, -60.0, -59.5)));
  // Laplace(0,1): F(1) - F(-1) = 1 - e^{-1}
  CHECK(dist::log_interval_prob(K::Laplace, -1.0, 1.0) ==
        doctest::Approx(std::log1p(-std::exp(-1.0))).epsilon(1e-13));
  CHECK(dist::log_interval_prob(K::Laplace, 2.0, 3.0) ==
        doctest::Approx(std::log(0.5 * (std::exp(-2.0) - std::exp(-3.0)))).epsilon(1e-13));
}

TEST_CASE("interval term derivatives agree with finite differences") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-6.0, 6.0);
  for (auto kind : {RandomizationKind::Gaussian, RandomizationKind::Laplace}) {
    for (int rep = 0; rep < 50; ++rep) {
      double lo = u(rng);
      double hi = lo + 0.2 + std::abs(u(rng));
      if (kind == RandomizationKind::Laplace && (std::abs(lo) < 1e-3 || std::abs(hi) < 1e-3)) continue;
      const auto t = dist::interval_terms(kind, lo, hi);
      const double h = 1e-6;
      const auto f = [&](double a, double b) { return dist::log_interval_prob(kind, a, b); };
      CHECK(t.value == doctest::Approx(f(lo, hi)).epsilon(1e-12));
      CHECK(t.d_lo == doctest::Approx((f(lo + h, hi) - f(lo - h, hi)) / (2 * h)).epsilon(1e-5));
      CHECK(t.d_hi == doctest::Approx((f(lo, hi + h) - f(lo, hi - h)) / (2 * h)).epsilon(1e-5));
      const double h2 = 1e-4;
      const auto dlo = [&](double a, double b) { return dist::interval_terms(kind, a, b).d_lo; };
      const auto dhi = [&](double a, double b) { return dist::interval_terms(kind, a, b).d_hi; };
      CHECK(t.d_lolo == doctest::Approx((dlo(lo + h2, hi) - dlo(lo - h2, hi)) / (2 * h2)).epsilon(1e-4));
      CHECK(t.d_hihi == doctest::Approx((dhi(lo, hi + h2) - dhi(lo, hi - h2)) / (2 * h2)).epsilon(1e-4));
      CHECK(t.d_lohi == doctest::Approx((dlo(lo, hi + h2) - dlo(lo, hi - h2)) / (2 * h2)).epsilon(1e-4));
    }
  }
}

TEST_CASE("log_sum_exp and log1mexp edge cases") {
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> v{-inf, -inf};
  CHECK(dist::log_sum_exp(v) == -inf);
  std::vector<double> w{1000.0, 1000.0};
  CHECK(dist::log_sum_exp(w) == doctest::Approx(1000.0 + std::log(2.0)));
  CHECK(dist::log1mexp(-1e-20) == doctest::Approx(std::log(1e-20)));
  CHECK(dist::log1mexp(-50.0) == doctest::Approx(-std::exp(-50.0)).epsilon(1e-12));
}

TEST_CASE("normal quantile inverts the cdf") {
  CHECK(dist::normal_quantile(0.95) == doctest::Approx(1.6448536269514722).epsilon(1e-12));
  for (double p : {1e-10, 0.01, 0.3, 0.5, 0.99})
    CHECK(dist::normal_cdf(dist::normal_quantile(p)) == doctest::Approx(p).epsilon(1e-10));
}

TEST_CASE("randomization draws: determinism and moments") {
  RandomizationSpec g{RandomizationKind::Gaussian, 1.0, 3};
  CHECK(draw_randomization(g, 5) == draw_randomization(g, 5));
  CHECK(draw_randomization(g, 5) != draw_randomization(g, 6));

  const auto variance = [](const Eigen::VectorXd& v) {
    return (v.array() - v.mean()).square().sum() / static_cast<double>(v.size() - 1);
  };
  RandomizationSpec gt{RandomizationKind::Gaussian, 0.7, 100000};
  CHECK(std::abs(variance(draw_randomization(gt, 1)) / 0.49 - 1.0) < 0.03);
  RandomizationSpec lap{RandomizationKind::Laplace, 1.0, 100000};
  CHECK(std::abs(variance(draw_randomization(lap, 2)) / 2.0 - 1.0) < 0.03);
  CHECK(dist::randomization_variance(lap) == 2.0);

  RandomizationSpec bad{RandomizationKind::Gaussian, 0.0, 3};
  CHECK_THROWS_AS(bad.validate(), Error);
}
