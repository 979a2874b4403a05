#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "selinf/types.hpp"

namespace selinf {

/// Fixed design plus response. Columns of X have unit Euclidean norm.
struct Dataset {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  LossKind loss = LossKind::SquaredError;

  /// Normalizes the columns of `X` and validates the response for `loss`.
  static Dataset normalized(Eigen::MatrixXd X, Eigen::VectorXd y, LossKind loss);

  Index n() const { return X.rows(); }
  Index p() const { return X.cols(); }
};

/// Output of the randomized program. For forward stepwise the single
/// optimization variable is the achieved ℓ1 multiplier: `beta_active` holds
/// s * lambda_hat and `lambda` holds lambda_hat.
struct SelectionEvent {
  std::vector<Index> active;
  Eigen::VectorXd signs;
  Eigen::VectorXd beta_active;
  /// Inactive subgradient, unscaled: |u| <= lambda.
  Eigen::VectorXd u_inactive;
  Eigen::VectorXd omega;
  double lambda = 0.0;
  double epsilon = 0.0;
  LossKind loss = LossKind::SquaredError;
  int iterations = 0;

  std::vector<Index> inactive() const;
  /// Active indices followed by inactive ones: the block order used by the
  /// reconstruction map.
  std::vector<Index> partition_order() const;
};

/// i.i.d. draws of the randomization, deterministic in `seed`.
Eigen::VectorXd draw_randomization(const RandomizationSpec& spec, std::uint64_t seed);

/// (c / n_draws) * sum_k ||X^T Z_k||_inf with Z ~ N(0, I) (Bernoulli(1/2)
/// entries for the logistic loss).
double tune_lambda(const Dataset& data, double c, int n_draws, std::uint64_t seed);

struct ProgramOptions {
  double step_tol = 1e-9;
  int max_iter = 5000;
  double active_threshold = 1e-8;
};

/// Objective value after every accepted proximal-gradient step.
struct ProgramTrace {
  std::vector<double> objective;
};

/// Solves  loss(b) + lambda ||b||_1 - omega^T b + (eps/2)||b||^2  by proximal
/// gradient with backtracking, finished by an exact solve on the stable
/// support, or runs the randomized first forward-stepwise
/// step. Throws EmptySelection when nothing is selected.
SelectionEvent solve_randomized_program(const Dataset& data, const PenaltySpec& penalty,
                                        const Eigen::VectorXd& omega,
                                        const ProgramOptions& options = {},
                                        ProgramTrace* trace = nullptr);

/// Gradient of the (unpenalized) loss at beta.
Eigen::VectorXd loss_gradient(const Dataset& data, const Eigen::VectorXd& beta);

/// Logistic mean function, applied elementwise.
Eigen::VectorXd logistic(const Eigen::VectorXd& eta);

}  // namespace selinf
