#include "selinf/volume.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "selinf/distributions.hpp"

namespace selinf {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double soft_threshold(double x, double t) {
  if (x > t) return x - t;
  if (x < -t) return x + t;
  return 0.0;
}

// Derivatives of log P(a - w <= W <= a + w) for one cube coordinate, in the
// shift a and the half-width w, for W with scale `s`.
struct CubeCoordinate {
  double value;
  double d_a;
  double d_w;
  double d_aa;
  double d_ww;
  double d_aw;
};

CubeCoordinate cube_coordinate(RandomizationKind kind, double s, double a, double w) {
  const auto it = dist::interval_terms(kind, (a - w) / s, (a + w) / s);
  const double s2 = s * s;
  return {it.value,
          (it.d_lo + it.d_hi) / s,
          (it.d_hi - it.d_lo) / s,
          (it.d_lolo + 2.0 * it.d_lohi + it.d_hihi) / s2,
          (it.d_lolo - 2.0 * it.d_lohi + it.d_hihi) / s2,
          (it.d_hihi - it.d_lolo) / s2};
}

}  // namespace

int GridApprox::n_flagged() const {
  return static_cast<int>(std::count(flagged.begin(), flagged.end(), true));
}

std::pair<double, Eigen::VectorXd> cube_log_prob(const Eigen::VectorXd& alpha, double lambda,
                                                 const RandomizationSpec& rnd) {
  if (!(lambda > 0.0)) throw Error(ErrorKind::InvalidArgument, "lambda must be positive");
  double value = 0.0;
  Eigen::VectorXd grad(alpha.size());
  for (Index i = 0; i < alpha.size(); ++i) {
    const auto cc = cube_coordinate(rnd.kind, rnd.scale, alpha[i], lambda);
    value += cc.value;
    grad[i] = cc.d_a;
  }
  return {value, grad};
}

VolumeProblem::VolumeProblem(const TargetContext& ctx, double t)
    : ctx_(ctx),
      t_(t),
      base_active_(ctx.A_active * t + ctx.c_active),
      base_inactive_(ctx.A_inactive * t + ctx.c_inactive) {}

bool VolumeProblem::feasible(const Eigen::VectorXd& o) const {
  for (Index i = 0; i < o.size(); ++i)
    if (!(ctx_.signs[i] * o[i] > 0.0)) return false;
  return true;
}

Eigen::VectorXd VolumeProblem::active_residual(const Eigen::VectorXd& o) const {
  return base_active_ + ctx_.B_active * o;
}

Eigen::VectorXd VolumeProblem::inactive_shift(const Eigen::VectorXd& o) const {
  return base_inactive_ + ctx_.B_inactive * o;
}

double VolumeProblem::cube_half_width(const Eigen::VectorXd& o) const {
  return ctx_.cube == CubeWidth::Fixed ? ctx_.lambda : ctx_.signs[0] * o[0];
}

double VolumeProblem::max_step(const Eigen::VectorXd& o, const Eigen::VectorXd& d,
                               double fraction) const {
  double step = 1.0;
  for (Index i = 0; i < o.size(); ++i) {
    const double slack = ctx_.signs[i] * o[i];
    const double rate = ctx_.signs[i] * d[i];
    if (rate < 0.0) step = std::min(step, fraction * slack / -rate);
  }
  return step;
}

double VolumeProblem::smooth_terms(const Eigen::VectorXd& o, Eigen::VectorXd* grad,
                                   Eigen::MatrixXd* hess) const {
  if (!feasible(o)) throw Error(ErrorKind::DomainViolation, "s_E o_E must be positive");
  const Index m = dim();
  const auto& rnd = ctx_.randomization;
  const Eigen::VectorXd alpha = inactive_shift(o);
  const double w = cube_half_width(o);
  const bool scaled = ctx_.cube == CubeWidth::ActiveMagnitude;

  double value = 0.0;
  Eigen::VectorXd d_alpha(alpha.size());
  Eigen::VectorXd d2_alpha(alpha.size());
  Eigen::VectorXd d_aw(alpha.size());
  double d_w = 0.0;
  double d_ww = 0.0;
  for (Index i = 0; i < alpha.size(); ++i) {
    const auto cc = cube_coordinate(rnd.kind, rnd.scale, alpha[i], w);
    value -= cc.value;
    d_alpha[i] = cc.d_a;
    // H is concave; clip rounding noise so the Hessian stays PSD.
    d2_alpha[i] = std::min(cc.d_aa, 0.0);
    d_aw[i] = cc.d_aw;
    d_w += cc.d_w;
    d_ww += cc.d_ww;
  }

  for (Index i = 0; i < m; ++i) {
    const double x = ctx_.signs[i] * o[i];
    value += std::log1p(1.0 / x);
  }

  if (grad) {
    *grad = -ctx_.B_inactive.transpose() * d_alpha;
    if (scaled) (*grad)[0] -= ctx_.signs[0] * d_w;
    for (Index i = 0; i < m; ++i) {
      const double x = ctx_.signs[i] * o[i];
      (*grad)[i] += ctx_.signs[i] * (1.0 / (x + 1.0) - 1.0 / x);
    }
  }
  if (hess) {
    *hess = -ctx_.B_inactive.transpose() * d2_alpha.asDiagonal() * ctx_.B_inactive;
    if (scaled) {
      const double cross = ctx_.signs[0] * ctx_.B_inactive.col(0).dot(d_aw);
      (*hess)(0, 0) -= 2.0 * cross + std::min(d_ww, 0.0);
    }
    for (Index i = 0; i < m; ++i) {
      const double x = ctx_.signs[i] * o[i];
      (*hess)(i, i) += 1.0 / (x * x) - 1.0 / ((x + 1.0) * (x + 1.0));
    }
  }
  return value;
}

double VolumeProblem::value(const Eigen::VectorXd& o, Eigen::VectorXd* grad,
                            Eigen::MatrixXd* hess) const {
  const double smooth = smooth_terms(o, grad, hess);
  const Eigen::VectorXd v = active_residual(o);
  const auto& rnd = ctx_.randomization;
  if (rnd.kind == RandomizationKind::Gaussian) {
    const double s2 = rnd.scale * rnd.scale;
    if (grad) *grad += ctx_.B_active.transpose() * v / s2;
    if (hess) *hess += ctx_.B_active.transpose() * ctx_.B_active / s2;
    return smooth + 0.5 * v.squaredNorm() / s2;
  }
  if (grad) *grad += ctx_.B_active.transpose() * v.cwiseSign() / rnd.scale;
  return smooth + v.lpNorm<1>() / rnd.scale;
}

std::pair<double, Eigen::VectorXd> selective_objective(const VolumeProblem& prob,
                                                       const Eigen::VectorXd& o) {
  Eigen::VectorXd grad;
  const double v = prob.value(o, &grad);
  return {v, grad};
}

namespace {

InnerResult newton_descent(const VolumeProblem& prob, Eigen::VectorXd o,
                           const InnerOptions& opt) {
  InnerResult res;
  Eigen::VectorXd g;
  Eigen::MatrixXd H;
  double f = prob.value(o, &g, &H);
  int iter = 0;
  for (; iter < opt.max_iter; ++iter) {
    if (g.lpNorm<Eigen::Infinity>() < opt.grad_tol) {
      res.converged = true;
      break;
    }
    Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
    Eigen::VectorXd d;
    if (ldlt.info() == Eigen::Success && ldlt.isPositive()) d = -ldlt.solve(g);
    if (d.size() != g.size() || !d.allFinite() || g.dot(d) >= 0.0) d = -g;

    const double slope = g.dot(d);
    double step = prob.max_step(o, d, opt.boundary_fraction);
    bool accepted = false;
    Eigen::VectorXd trial;
    double f_trial = kInf;
    while (step * d.norm() >= opt.step_tol) {
      trial = o + step * d;
      if (prob.feasible(trial)) {
        f_trial = prob.value(trial);
        if (f_trial <= f + opt.armijo * step * slope) {
          accepted = true;
          break;
        }
      }
      step *= opt.shrink;
    }
    if (!accepted) {
      res.converged = true;
      break;
    }
    o = trial;
    f = prob.value(o, &g, &H);
  }
  res.o_star = o;
  res.log_h = -f;
  res.iterations = iter;
  return res;
}

// Laplace randomization: the objective is ||v||_1 / b + smooth(o(v)) with
// v = A_E t + B_E o + c_E. Proximal Newton on v.
InnerResult prox_newton(const VolumeProblem& prob, const Eigen::VectorXd& init,
                        const InnerOptions& opt) {
  const auto& ctx = prob.context();
  const double inv_b = 1.0 / ctx.randomization.scale;
  const Index m = prob.dim();
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(ctx.B_active);
  const Eigen::MatrixXd Binv = lu.inverse();
  const Eigen::VectorXd base = prob.active_residual(Eigen::VectorXd::Zero(m));
  const auto to_o = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd { return Binv * (v - base); };

  Eigen::VectorXd v = prob.active_residual(init);
  Eigen::VectorXd o = init;
  Eigen::VectorXd go;
  Eigen::MatrixXd Ho;
  double s = prob.smooth_terms(o, &go, &Ho);
  double F = s + inv_b * v.lpNorm<1>();

  InnerResult res;
  int iter = 0;
  for (; iter < opt.max_iter; ++iter) {
    const Eigen::VectorXd g = Binv.transpose() * go;
    Eigen::MatrixXd H = Binv.transpose() * Ho * Binv;
    H.diagonal().array() += 1e-12;

    double measure = 0.0;
    for (Index k = 0; k < m; ++k)
      measure = std::max(measure, std::abs(v[k] - soft_threshold(v[k] - g[k], inv_b)));
    if (measure < opt.grad_tol) {
      res.converged = true;
      break;
    }

    // Coordinate descent on the quadratic model plus the ℓ1 term.
    Eigen::VectorXd z = v;
    for (int sweep = 0; sweep < 200; ++sweep) {
      double change = 0.0;
      for (Index k = 0; k < m; ++k) {
        const double gk = g[k] + H.row(k).dot(z - v);
        const double zk = soft_threshold(z[k] - gk / H(k, k), inv_b / H(k, k));
        change = std::max(change, std::abs(zk - z[k]));
        z[k] = zk;
      }
      if (change < 1e-15 * (1.0 + z.lpNorm<Eigen::Infinity>())) break;
    }
    const Eigen::VectorXd d = z - v;
    const double decrease = g.dot(d) + inv_b * (z.lpNorm<1>() - v.lpNorm<1>());
    if (!(decrease < 0.0)) {
      res.converged = true;
      break;
    }

    double step = prob.max_step(o, Binv * d, opt.boundary_fraction);
    bool accepted = false;
    Eigen::VectorXd v_trial;
    Eigen::VectorXd o_trial;
    while (step * d.norm() >= opt.step_tol) {
      v_trial = v + step * d;
      o_trial = to_o(v_trial);
      if (prob.feasible(o_trial)) {
        const double F_trial = prob.smooth_terms(o_trial) + inv_b * v_trial.lpNorm<1>();
        if (F_trial <= F + opt.armijo * step * decrease) {
          accepted = true;
          break;
        }
      }
      step *= opt.shrink;
    }
    if (!accepted) {
      res.converged = true;
      break;
    }
    v = v_trial;
    o = o_trial;
    s = prob.smooth_terms(o, &go, &Ho);
    F = s + inv_b * v.lpNorm<1>();
  }
  res.o_star = o;
  res.log_h = -F;
  res.iterations = iter;
  return res;
}

}  // namespace

InnerResult solve_inner(const VolumeProblem& prob, const Eigen::VectorXd& init,
                        const InnerOptions& options) {
  if (init.size() != prob.dim() || !prob.feasible(init))
    throw Error(ErrorKind::DomainViolation, "initial point is not strictly feasible");
  if (prob.context().randomization.kind == RandomizationKind::Gaussian)
    return newton_descent(prob, init, options);
  return prox_newton(prob, init, options);
}

std::vector<double> make_grid(double center, double sigma, int points, double width) {
  if (points < 2 || !(sigma > 0.0) || !(width > 0.0))
    throw Error(ErrorKind::InvalidArgument, "grid needs >= 2 points and positive span");
  std::vector<double> grid(static_cast<std::size_t>(points));
  const double step = 2.0 * width * sigma / (points - 1);
  const double mid = 0.5 * (points - 1);
  for (int i = 0; i < points; ++i) grid[static_cast<std::size_t>(i)] = center + (i - mid) * step;
  return grid;
}

GridApprox grid_log_h(const TargetContext& ctx, std::span<const double> grid,
                      const InnerOptions& options) {
  ctx.validate();
  if (grid.empty()) throw Error(ErrorKind::InvalidArgument, "empty grid");
  const bool ascending = grid.size() < 2 || grid[1] > grid[0];
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (!(ascending ? grid[i] > grid[i - 1] : grid[i] < grid[i - 1]))
      throw Error(ErrorKind::InvalidArgument, "grid must be strictly monotone");

  const Index m = ctx.active_size();
  GridApprox out;
  out.grid.assign(grid.begin(), grid.end());
  out.log_h.resize(grid.size());
  out.flagged.assign(grid.size(), false);
  out.argmins.resize(static_cast<Index>(grid.size()), m);

  const Eigen::VectorXd cold = ctx.signs;
  Eigen::VectorXd warm = cold;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const VolumeProblem prob(ctx, grid[i]);
    InnerResult best = solve_inner(prob, prob.feasible(warm) ? warm : cold, options);
    if (ctx.cube == CubeWidth::ActiveMagnitude) {
      for (double mult : {0.1, 0.5, 1.0, 2.0, 5.0}) {
        const Eigen::VectorXd start = Eigen::VectorXd::Constant(1, ctx.signs[0] * mult * ctx.lambda);
        InnerResult r = solve_inner(prob, start, options);
        if (r.log_h > best.log_h) best = std::move(r);
      }
    }
    out.log_h[i] = best.log_h;
    out.flagged[i] = !best.converged;
    out.argmins.row(static_cast<Index>(i)) = best.o_star.transpose();
    warm = best.o_star;
  }
  return out;
}

McEstimate mc_volume_oracle(const TargetContext& ctx, double t, std::int64_t n_samples,
                            std::uint64_t seed) {
  ctx.validate();
  const Index m = ctx.active_size();
  const Index q = ctx.inactive_size();
  if (m + q > 12 || m > 3)
    throw Error(ErrorKind::GuardExceeded, "oracle limited to p <= 12 and |E| <= 3");
  if (n_samples < 2) throw Error(ErrorKind::InvalidArgument, "need at least two samples");

  const auto& rnd = ctx.randomization;
  const double sd = std::sqrt(dist::randomization_variance(rnd));
  const Eigen::VectorXd base_active = ctx.A_active * t + ctx.c_active;
  const Eigen::VectorXd base_inactive = ctx.A_inactive * t + ctx.c_inactive;

  // Exponential proposal scales: spread of one randomization sd through B_E,
  // plus the sign-matched part of the unconstrained centre.
  const Eigen::VectorXd centre = -ctx.B_active.partialPivLu().solve(base_active);
  Eigen::VectorXd scales(m);
  for (Index k = 0; k < m; ++k)
    scales[k] = sd / std::abs(ctx.B_active(k, k)) + std::max(0.0, ctx.signs[k] * centre[k]);

  const double log_norm = -static_cast<double>(m + q) * std::log(rnd.scale);
  const auto log_density = [&](double x) { return dist::log_pdf(rnd.kind, x / rnd.scale); };

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Eigen::VectorXd o(m);
  double sum = 0.0;
  double sum_sq = 0.0;
  for (std::int64_t s = 0; s < n_samples; ++s) {
    double log_q = 0.0;
    for (Index k = 0; k < m; ++k) {
      const double e = -scales[k] * std::log1p(-unif(rng));
      o[k] = ctx.signs[k] * e;
      log_q += -std::log(scales[k]) - e / scales[k];
    }
    const double w = ctx.cube == CubeWidth::Fixed ? ctx.lambda : ctx.signs[0] * o[0];
    double log_g = log_norm;
    const Eigen::VectorXd act = base_active + ctx.B_active * o;
    for (Index k = 0; k < m; ++k) log_g += log_density(act[k]);
    for (Index i = 0; i < q; ++i) {
      const double u = w * (2.0 * unif(rng) - 1.0);
      const double omega = base_inactive[i] + ctx.B_inactive.row(i).dot(o) + u;
      log_g += log_density(omega);
    }
    log_q -= static_cast<double>(q) * std::log(2.0 * w);
    const double weight = std::exp(log_g - log_q);
    sum += weight;
    sum_sq += weight * weight;
  }
  const double n = static_cast<double>(n_samples);
  McEstimate out;
  out.estimate = sum / n;
  const double var = std::max(0.0, sum_sq / n - out.estimate * out.estimate);
  out.std_error = std::sqrt(var / (n - 1.0));
  return out;
}

}  // namespace selinf
