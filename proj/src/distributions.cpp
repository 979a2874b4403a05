#include "selinf/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/distributions/normal.hpp>

namespace selinf::dist {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kLn2 = std::numbers::ln2;
constexpr double kHalfLog2Pi = 0.91893853320467274178;  // log(2 pi) / 2
constexpr double kInvSqrt2 = 0.70710678118654752440;

// Asymptotic log Phi(x) for x << 0:
//   Phi(x) = phi(x)/|x| * (1 - 1/x^2 + 3/x^4 - 15/x^6 + ...)
double log_normal_cdf_tail(double x) {
  const double r = 1.0 / (x * x);
  double series = 1.0;
  double term = 1.0;
  for (int k = 1; k <= 6; ++k) {
    term *= -(2.0 * k - 1.0) * r;
    series += term;
  }
  return -0.5 * x * x - std::log(-x) - kHalfLog2Pi + std::log(series);
}

}  // namespace

double log1mexp(double x) {
  if (x > -kLn2) return std::log(-std::expm1(x));
  return std::log1p(-std::exp(x));
}

double log_sum_exp(std::span<const double> x) {
  double m = -kInf;
  for (double v : x) m = std::max(m, v);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double v : x) s += std::exp(v - m);
  return m + std::log(s);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x * kInvSqrt2); }

double normal_quantile(double p) {
  if (p <= 0.0) return -kInf;
  if (p >= 1.0) return kInf;
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

double log_normal_cdf(double x) {
  if (x == kInf) return 0.0;
  if (x == -kInf) return -kInf;
  if (x > 5.0) return std::log1p(-0.5 * std::erfc(x * kInvSqrt2));
  if (x > -36.0) return std::log(0.5 * std::erfc(-x * kInvSqrt2));
  return log_normal_cdf_tail(x);
}

double log_cdf(RandomizationKind kind, double z) {
  if (kind == RandomizationKind::Gaussian) return log_normal_cdf(z);
  if (z == kInf) return 0.0;
  if (z < 0.0) return z - kLn2;
  return std::log1p(-0.5 * std::exp(-z));
}

double log_sf(RandomizationKind kind, double z) { return log_cdf(kind, -z); }

double log_pdf(RandomizationKind kind, double z) {
  if (!std::isfinite(z)) return -kInf;
  if (kind == RandomizationKind::Gaussian) return -0.5 * z * z - kHalfLog2Pi;
  return -std::abs(z) - kLn2;
}

double pdf_log_slope(RandomizationKind kind, double z) {
  if (kind == RandomizationKind::Gaussian) return -z;
  if (z > 0.0) return -1.0;
  if (z < 0.0) return 1.0;
  return 0.0;
}

double log_interval_prob(RandomizationKind kind, double lo, double hi) {
  if (!(hi > lo)) return -kInf;
  if (lo >= 0.0) {
    const double a = log_sf(kind, lo);
    return a + log1mexp(log_sf(kind, hi) - a);
  }
  if (hi <= 0.0) {
    const double a = log_cdf(kind, hi);
    return a + log1mexp(log_cdf(kind, lo) - a);
  }
  // lo < 0 < hi: both pieces are positive, no cancellation.
  if (kind == RandomizationKind::Gaussian)
    return std::log(0.5 * (std::erf(hi * kInvSqrt2) - std::erf(lo * kInvSqrt2)));
  return std::log(-0.5 * (std::expm1(-hi) + std::expm1(lo)));
}

IntervalTerms interval_terms(RandomizationKind kind, double lo, double hi) {
  IntervalTerms out;
  out.value = log_interval_prob(kind, lo, hi);
  const double r_hi = std::exp(log_pdf(kind, hi) - out.value);
  const double r_lo = std::exp(log_pdf(kind, lo) - out.value);
  out.d_hi = r_hi;
  out.d_lo = -r_lo;
  out.d_hihi = -r_hi * r_hi;
  out.d_lolo = -r_lo * r_lo;
  if (r_hi > 0.0) out.d_hihi += pdf_log_slope(kind, hi) * r_hi;
  if (r_lo > 0.0) out.d_lolo -= pdf_log_slope(kind, lo) * r_lo;
  out.d_lohi = r_hi * r_lo;
  return out;
}

double randomization_variance(const RandomizationSpec& spec) {
  const double s2 = spec.scale * spec.scale;
  return spec.kind == RandomizationKind::Gaussian ? s2 : 2.0 * s2;
}

}  // namespace selinf::dist
