#include "selinf/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "selinf/distributions.hpp"

namespace selinf {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_inputs(std::span<const double> grid, std::span<const double> log_h, double sigma) {
  if (grid.empty() || grid.size() != log_h.size())
    throw Error(ErrorKind::DimensionMismatch, "grid and log_h differ in length");
  if (!(sigma > 0.0)) throw Error(ErrorKind::InvalidArgument, "sigma must be positive");
}

// Log of the tilted weights; returns their maximum.
double tilted_log_weights(double b, std::span<const double> grid, std::span<const double> log_h,
                          double sigma, std::vector<double>& out) {
  out.resize(grid.size());
  const double inv = 0.5 / (sigma * sigma);
  double top = -kInf;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double d = grid[i] - b;
    out[i] = -d * d * inv + log_h[i];
    top = std::max(top, out[i]);
  }
  return top;
}

// Negative log pseudo-likelihood of b, up to a b-free constant.
double neg_log_lik(double T_obs, double b, std::span<const double> grid,
                   std::span<const double> log_h, double sigma, std::vector<double>& buf) {
  tilted_log_weights(b, grid, log_h, sigma, buf);
  const double d = T_obs - b;
  return 0.5 * d * d / (sigma * sigma) + dist::log_sum_exp(buf);
}

}  // namespace

double approximate_pivot(double T_obs, double b, std::span<const double> grid,
                         std::span<const double> log_h, double sigma) {
  check_inputs(grid, log_h, sigma);
  std::vector<double> lw;
  const double top = tilted_log_weights(b, grid, log_h, sigma, lw);
  if (!std::isfinite(top)) throw Error(ErrorKind::DegenerateGrid, "all grid weights vanish");
  // p = A / (A + B) written as 1 / (1 + B / A): correctly rounded division
  // and addition are monotone, so p inherits the monotonicity of B / A even
  // when it saturates near 0 or 1.
  double above = 0.0;
  double below = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double w = std::exp(lw[i] - top);
    if (grid[i] > T_obs) {
      above += w;
    } else if (grid[i] < T_obs) {
      below += w;
    } else {
      above += 0.5 * w;
      below += 0.5 * w;
    }
  }
  if (above == 0.0) return 0.0;
  return 1.0 / (1.0 + below / above);
}

double two_sided_pvalue(double p_hat) { return 2.0 * std::min(p_hat, 1.0 - p_hat); }

Interval invert_interval(double T_obs, std::span<const double> grid,
                         std::span<const double> log_h, double sigma, double alpha,
                         double scan_width) {
  check_inputs(grid, log_h, sigma);
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorKind::InvalidArgument, "alpha outside (0,1)");

  const double lo_b = T_obs - scan_width * sigma;
  const double hi_b = T_obs + scan_width * sigma;
  const double tol = 1e-6 * sigma;
  const auto pivot = [&](double b) { return approximate_pivot(T_obs, b, grid, log_h, sigma); };

  // Smallest b with pivot(b) >= level, by bisection on the monotone pivot.
  const auto root = [&](double level, bool& clamped) {
    if (pivot(lo_b) >= level) {
      clamped = true;
      return lo_b;
    }
    if (pivot(hi_b) < level) {
      clamped = true;
      return hi_b;
    }
    double a = lo_b;
    double c = hi_b;
    while (c - a > tol) {
      const double mid = 0.5 * (a + c);
      (pivot(mid) < level ? a : c) = mid;
    }
    return 0.5 * (a + c);
  };

  Interval out;
  out.lo = root(0.5 * alpha, out.lo_clamped);
  out.hi = root(1.0 - 0.5 * alpha, out.hi_clamped);
  return out;
}

double tilted_mean(double b, std::span<const double> grid, std::span<const double> log_h,
                   double sigma) {
  check_inputs(grid, log_h, sigma);
  std::vector<double> lw;
  const double top = tilted_log_weights(b, grid, log_h, sigma, lw);
  if (!std::isfinite(top)) throw Error(ErrorKind::DegenerateGrid, "all grid weights vanish");
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double w = std::exp(lw[i] - top);
    den += w;
    num += w * grid[i];
  }
  return num / den;
}

MleResult selective_mle(double T_obs, std::span<const double> grid,
                        std::span<const double> log_h, double sigma, double eta, double tol,
                        int max_iter) {
  check_inputs(grid, log_h, sigma);
  const double s2 = sigma * sigma;
  if (eta <= 0.0) eta = s2;
  if (tol <= 0.0) tol = 1e-9 * sigma;

  std::vector<double> buf;
  MleResult res;
  double b = T_obs;
  double f = neg_log_lik(T_obs, b, grid, log_h, sigma, buf);
  for (int k = 0; k < max_iter; ++k) {
    const double residual = tilted_mean(b, grid, log_h, sigma) - T_obs;
    if (std::abs(residual) < tol) {
      res.converged = true;
      break;
    }
    const double grad = residual / s2;
    double next = b - eta * grad;
    double f_next = neg_log_lik(T_obs, next, grid, log_h, sigma, buf);
    // Differences below rounding level in f carry no information near the optimum.
    while (f_next > f + 1e-13 * (1.0 + std::abs(f)) && eta > 1e-12 * s2) {
      eta *= 0.5;
      next = b - eta * grad;
      f_next = neg_log_lik(T_obs, next, grid, log_h, sigma, buf);
    }
    res.iterations = k + 1;
    if (next == b) break;
    b = next;
    f = f_next;
  }
  res.estimate = b;
  return res;
}

Interval naive_interval(double T_obs, double sigma, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorKind::InvalidArgument, "alpha outside (0,1)");
  const double half = dist::normal_quantile(1.0 - 0.5 * alpha) * sigma;
  return {T_obs - half, T_obs + half};
}

double naive_pivot(double T_obs, double b, double sigma) {
  return 1.0 - dist::normal_cdf((T_obs - b) / sigma);
}

InferenceRecord infer_target(const TargetContext& ctx, const GridApprox& approx, double alpha,
                             std::optional<double> truth) {
  InferenceRecord rec;
  rec.j = ctx.j;
  rec.variable = ctx.variable;
  rec.T_obs = ctx.T_obs;
  rec.sigma = ctx.sigma;

  const std::span<const double> grid(approx.grid);
  const std::span<const double> log_h(approx.log_h);
  rec.pvalue = two_sided_pvalue(approximate_pivot(ctx.T_obs, 0.0, grid, log_h, ctx.sigma));
  rec.ci = invert_interval(ctx.T_obs, grid, log_h, ctx.sigma, alpha);
  const MleResult mle = selective_mle(ctx.T_obs, grid, log_h, ctx.sigma);
  rec.mle = mle.estimate;
  rec.naive_ci = naive_interval(ctx.T_obs, ctx.sigma, alpha);
  rec.naive_estimate = ctx.T_obs;
  if (truth) {
    rec.truth = *truth;
    rec.pivot_at_truth = approximate_pivot(ctx.T_obs, *truth, grid, log_h, ctx.sigma);
    rec.naive_pivot_at_truth = naive_pivot(ctx.T_obs, *truth, ctx.sigma);
  }

  if (const int n = approx.n_flagged(); n > 0)
    rec.flags.push_back("nonconverged_grid_points=" + std::to_string(n));
  if (rec.ci.lo_clamped) rec.flags.push_back("ci_lo_clamped");
  if (rec.ci.hi_clamped) rec.flags.push_back("ci_hi_clamped");
  if (!mle.converged) rec.flags.push_back("mle_nonconverged");
  return rec;
}

}  // namespace selinf
