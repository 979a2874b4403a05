#pragma once

#include <span>

#include "selinf/types.hpp"

// Standardized (unit-scale) CDF machinery for the two randomization kinds,
// evaluated in log space so that far-tail intervals stay finite.

namespace selinf::dist {

/// log(1 - exp(x)) for x <= 0.
double log1mexp(double x);

/// log(sum_i exp(x_i)); -inf entries are allowed, an all -inf input yields -inf.
double log_sum_exp(std::span<const double> x);

double normal_cdf(double x);
double normal_quantile(double p);

/// log Phi(x). Uses erfc while it is representable and the asymptotic
/// Mills-ratio series below x = -36.
double log_normal_cdf(double x);

double log_cdf(RandomizationKind kind, double z);
/// log(1 - F(z)).
double log_sf(RandomizationKind kind, double z);
double log_pdf(RandomizationKind kind, double z);
/// f'(z) / f(z).
double pdf_log_slope(RandomizationKind kind, double z);

/// log(F(hi) - F(lo)) for hi > lo.
double log_interval_prob(RandomizationKind kind, double lo, double hi);

/// log(F(hi) - F(lo)) together with its first and second partial derivatives
/// in the endpoints.
struct IntervalTerms {
  double value = 0.0;
  double d_lo = 0.0;
  double d_hi = 0.0;
  double d_lolo = 0.0;
  double d_hihi = 0.0;
  double d_lohi = 0.0;
};

IntervalTerms interval_terms(RandomizationKind kind, double lo, double hi);

/// Variance of one coordinate of the randomization.
double randomization_variance(const RandomizationSpec& spec);

}  // namespace selinf::dist
