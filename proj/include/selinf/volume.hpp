#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "selinf/reconstruction.hpp"

namespace selinf {

/// log ĥ(t) tabulated on an ascending grid, with the per-point optimizers.
struct GridApprox {
  std::vector<double> grid;
  std::vector<double> log_h;
  Eigen::MatrixXd argmins;
  /// Grid points whose inner solve hit the iteration cap.
  std::vector<bool> flagged;

  int n_flagged() const;
};

/// Sum over inactive coordinates of log(F((lambda + a_i)/s) - F((-lambda + a_i)/s))
/// and its gradient in alpha. m = 0 gives (0, empty).
std::pair<double, Eigen::VectorXd> cube_log_prob(const Eigen::VectorXd& alpha, double lambda,
                                                 const RandomizationSpec& rnd);

/// Barrier-smoothed objective for one grid point t:
///   R(A_E t + B_E o + c_E) - H(o; t) + sum_i log(1 + 1/(s_i o_i))
/// where R is the randomization negative log-density (up to constants) and H
/// is the inactive cube log-probability.
class VolumeProblem {
 public:
  VolumeProblem(const TargetContext& ctx, double t);

  const TargetContext& context() const { return ctx_; }
  double t() const { return t_; }
  Index dim() const { return ctx_.active_size(); }

  bool feasible(const Eigen::VectorXd& o) const;

  /// Objective value; optional gradient (a subgradient at Laplace kinks) and
  /// Hessian of the smooth terms. Throws DomainViolation outside s∘o > 0.
  double value(const Eigen::VectorXd& o, Eigen::VectorXd* grad = nullptr,
               Eigen::MatrixXd* hess = nullptr) const;

  /// -H + barrier, the part that is smooth for either randomization.
  double smooth_terms(const Eigen::VectorXd& o, Eigen::VectorXd* grad = nullptr,
                      Eigen::MatrixXd* hess = nullptr) const;

  /// A_E t + B_E o + c_E.
  Eigen::VectorXd active_residual(const Eigen::VectorXd& o) const;
  /// A_-E t + B_-E o + c_-E.
  Eigen::VectorXd inactive_shift(const Eigen::VectorXd& o) const;
  double cube_half_width(const Eigen::VectorXd& o) const;

  /// Largest step in [0, 1] along `d` keeping `fraction` of the distance to
  /// the sign-constraint boundary.
  double max_step(const Eigen::VectorXd& o, const Eigen::VectorXd& d, double fraction) const;

 private:
  const TargetContext& ctx_;
  double t_;
  Eigen::VectorXd base_active_;
  Eigen::VectorXd base_inactive_;
};

/// Convenience wrapper returning (value, gradient).
std::pair<double, Eigen::VectorXd> selective_objective(const VolumeProblem& prob,
                                                       const Eigen::VectorXd& o);

struct InnerOptions {
  double grad_tol = 1e-8;
  double step_tol = 1e-10;
  int max_iter = 500;
  double armijo = 1e-4;
  double shrink = 0.5;
  double boundary_fraction = 0.99;
};

struct InnerResult {
  Eigen::VectorXd o_star;
  double log_h = 0.0;
  bool converged = false;
  int iterations = 0;
};

/// log ĥ(t) = -inf_o objective(o). Newton with backtracking for Gaussian
/// randomization, proximal Newton on the active residual for Laplace. On
/// hitting the iteration cap the best iterate is returned with
/// converged = false.
InnerResult solve_inner(const VolumeProblem& prob, const Eigen::VectorXd& init,
                        const InnerOptions& options = {});

/// Grid of `points` values spaced evenly over center ± width·sigma; for odd
/// `points` the middle value is exactly `center`.
std::vector<double> make_grid(double center, double sigma, int points = 801, double width = 12.0);

/// Solves the inner problem at every grid point (any strictly monotone
/// order), warm-starting from the previous optimizer. Forward-stepwise contexts also try five multi-starts.
GridApprox grid_log_h(const TargetContext& ctx, std::span<const double> grid,
                      const InnerOptions& options = {});

struct McEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
};

/// Importance-sampling estimate of h(t) = ∫_K g(A t + B o + c) do with the
/// normalized randomization density g: sign-matched exponential proposals
/// for the active block and uniform draws over the cube for the inactive
/// block. Small problems only (p <= 12, |E| <= 3), otherwise GuardExceeded.
McEstimate mc_volume_oracle(const TargetContext& ctx, double t, std::int64_t n_samples,
                            std::uint64_t seed);

}  // namespace selinf
