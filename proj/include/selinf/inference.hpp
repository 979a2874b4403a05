#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "selinf/volume.hpp"

namespace selinf {

/// Grid pivot: sum_{t > T_obs} w_t / sum_t w_t with
/// log w_t = -(t - b)^2 / (2 sigma^2) + log_h(t); a grid point equal to
/// T_obs contributes half its weight to the numerator (midpoint rule), which
/// keeps the flat-grid pivot within O(step^2) of the Gaussian one. log_h may
/// contain -inf entries; throws DegenerateGrid when every weight vanishes.
double approximate_pivot(double T_obs, double b, std::span<const double> grid,
                         std::span<const double> log_h, double sigma);

/// 2 min(p, 1 - p).
double two_sided_pvalue(double p_hat);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  /// A root fell outside the scan range and the endpoint was clamped.
  bool lo_clamped = false;
  bool hi_clamped = false;

  double length() const { return hi - lo; }
  bool contains(double x) const { return lo <= x && x <= hi; }
};

/// {b : two-sided p-value > alpha}, found by bisection on the pivot
/// (nondecreasing in b) over T_obs ± scan_width·sigma.
Interval invert_interval(double T_obs, std::span<const double> grid,
                         std::span<const double> log_h, double sigma, double alpha,
                         double scan_width = 20.0);

struct MleResult {
  double estimate = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Gradient descent on the negative log pseudo-likelihood in b, step eta
/// halved whenever the objective increases. Stops once the estimating
/// equation |E_b[t] - T_obs| < tol holds. eta <= 0 selects sigma^2 and
/// tol <= 0 selects 1e-9 sigma.
MleResult selective_mle(double T_obs, std::span<const double> grid,
                        std::span<const double> log_h, double sigma, double eta = 0.0,
                        double tol = 0.0, int max_iter = 10000);

/// Tilted grid mean sum_t t w_t / sum_t w_t at parameter b.
double tilted_mean(double b, std::span<const double> grid, std::span<const double> log_h,
                   double sigma);

Interval naive_interval(double T_obs, double sigma, double alpha);
/// 1 - Phi((T_obs - b) / sigma).
double naive_pivot(double T_obs, double b, double sigma);

struct InferenceRecord {
  Index j = 0;
  Index variable = 0;
  double T_obs = 0.0;
  double sigma = 0.0;
  /// Two-sided p-value for b = 0.
  double pvalue = 1.0;
  Interval ci;
  double mle = 0.0;
  Interval naive_ci;
  double naive_estimate = 0.0;
  /// Pivots evaluated at the true parameter, when one is known.
  std::optional<double> truth;
  std::optional<double> pivot_at_truth;
  std::optional<double> naive_pivot_at_truth;
  std::vector<std::string> flags;
};

/// Pivot, interval, p-value and MLE for one coefficient from its grid.
InferenceRecord infer_target(const TargetContext& ctx, const GridApprox& approx, double alpha,
                             std::optional<double> truth = std::nullopt);

}  // namespace selinf
