#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "selinf/selector.hpp"
#include "selinf/types.hpp"

namespace selinf {

/// Affine map omega = A0 D + B O + gamma from the stationarity conditions,
/// written in partition order (active block first). Only the columns of B
/// acting on the active optimization variables are stored; the block acting
/// on the inactive subgradient is the identity.
struct KKTMap {
  std::vector<Index> order;
  Eigen::MatrixXd A0;
  Eigen::MatrixXd B_active;
  Eigen::VectorXd gamma;
};

/// How the half-width of the inactive cube is determined.
enum class CubeWidth {
  /// Fixed at lambda (ℓ1-penalized programs).
  Fixed,
  /// Equal to s * o (forward stepwise, where the multiplier is free).
  ActiveMagnitude,
};

/// Everything the volume approximation needs for one selected coefficient:
///   omega_E  = A_active t   + B_active o   + c_active
///   omega_-E = A_inactive t + B_inactive o + c_inactive + o_-E
/// with o sign-constrained by `signs` and o_-E in the cube.
struct TargetContext {
  /// Position within the active set.
  Index j = 0;
  /// Column of X.
  Index variable = 0;
  double T_obs = 0.0;
  double sigma = 1.0;
  Eigen::VectorXd A_active;
  Eigen::VectorXd A_inactive;
  Eigen::MatrixXd B_active;
  Eigen::MatrixXd B_inactive;
  Eigen::VectorXd c_active;
  Eigen::VectorXd c_inactive;
  double lambda = 0.0;
  Eigen::VectorXd signs;
  RandomizationSpec randomization;
  CubeWidth cube = CubeWidth::Fixed;

  Index active_size() const { return A_active.size(); }
  Index inactive_size() const { return A_inactive.size(); }
  void validate() const;
};

struct CovarianceSpec {
  /// Noise variance for the squared-error and forward-stepwise models.
  double noise_variance = 1.0;
};

/// Least squares (squared error, forward stepwise) or logistic MLE on X_E.
/// Throws SingularDesign when cond(X_E^T X_E) > 1e12, Separation when the
/// logistic Newton iteration diverges or the fit saturates (max |x_i^T b| > 30).
Eigen::VectorXd refit_unpenalized(const Dataset& data, std::span<const Index> active);

/// D = (beta_bar_E, X_-E^T (y - mean_E(beta_bar_E))) in partition order; for
/// forward stepwise D = X^T y.
Eigen::VectorXd build_data_vector(const Dataset& data, const SelectionEvent& event,
                                  const Eigen::VectorXd& beta_bar);

KKTMap build_kkt_map(const Dataset& data, const SelectionEvent& event,
                     const Eigen::VectorXd& beta_bar);

/// A0 D + B_active beta_E + (0; u_-E) + gamma, in partition order.
Eigen::VectorXd reconstruct_omega(const KKTMap& map, const SelectionEvent& event,
                                  const Eigen::VectorXd& D);

/// Plug-in covariance of the target with the data vector, Sigma_{D,T_j}, and
/// the target variance sigma_j^2.
struct TargetCovariance {
  Eigen::VectorXd cross;
  double variance = 0.0;
};

TargetCovariance target_covariance(const Dataset& data, const SelectionEvent& event,
                                   const KKTMap& map, Index j, const CovarianceSpec& cov);

TargetContext decompose_target(const KKTMap& map, const Dataset& data,
                               const SelectionEvent& event, const Eigen::VectorXd& D,
                               const Eigen::VectorXd& beta_bar, Index j,
                               const CovarianceSpec& cov, const RandomizationSpec& randomization);

/// ||y - X_E beta_bar||^2 / (n - |E|).
double estimate_noise_variance(const Dataset& data, std::span<const Index> active,
                               const Eigen::VectorXd& beta_bar);

Eigen::MatrixXd select_columns(const Eigen::MatrixXd& X, std::span<const Index> cols);

}  // namespace selinf
