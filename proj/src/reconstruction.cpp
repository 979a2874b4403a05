#include "selinf/reconstruction.hpp"

#include <cmath>

namespace selinf {

namespace {

void check_condition(const Eigen::MatrixXd& XE) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(XE);
  const auto& sv = svd.singularValues();
  const double smax = sv.maxCoeff();
  const double smin = sv.minCoeff();
  if (XE.rows() < XE.cols() || !(smin > 0.0) || (smax / smin) * (smax / smin) > 1e12)
    throw Error(ErrorKind::SingularDesign, "X_E^T X_E is ill-conditioned");
}

Eigen::VectorXd logistic_mle(const Eigen::MatrixXd& XE, const Eigen::VectorXd& y) {
  const auto loglik = [&](const Eigen::VectorXd& b) {
    const Eigen::VectorXd eta = XE * b;
    double s = 0.0;
    for (Index i = 0; i < eta.size(); ++i) {
      const double x = eta[i];
      const double log1pexp = x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
      s += y[i] * x - log1pexp;
    }
    return s;
  };

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(XE.cols());
  double ll = loglik(beta);
  for (int iter = 0; iter < 200; ++iter) {
    const Eigen::VectorXd pi = logistic(XE * beta);
    const Eigen::VectorXd score = XE.transpose() * (y - pi);
    if (score.lpNorm<Eigen::Infinity>() < 1e-10) {
      // Fitted probabilities of exactly 0 or 1 mean the data are (quasi-)separated.
      if ((XE * beta).lpNorm<Eigen::Infinity>() > 30.0)
        throw Error(ErrorKind::Separation, "fitted probabilities saturate");
      return beta;
    }
    const Eigen::VectorXd w = pi.array() * (1.0 - pi.array());
    const Eigen::MatrixXd info = XE.transpose() * w.asDiagonal() * XE;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
      throw Error(ErrorKind::Separation, "information matrix is singular");
    const Eigen::VectorXd step = ldlt.solve(score);
    double scale = 1.0;
    Eigen::VectorXd next = beta + step;
    double ll_next = loglik(next);
    while (!(ll_next >= ll - 1e-12 * std::abs(ll)) && scale > 1e-10) {
      scale *= 0.5;
      next = beta + scale * step;
      ll_next = loglik(next);
    }
    beta = next;
    ll = ll_next;
    if (!beta.allFinite() || beta.lpNorm<Eigen::Infinity>() > 1e3)
      throw Error(ErrorKind::Separation, "logistic refit diverges");
  }
  throw Error(ErrorKind::Separation, "logistic refit did not converge");
}

// Weights W for the Taylor expansion of the loss gradient at beta_bar.
Eigen::VectorXd curvature_weights(const Dataset& data, const Eigen::MatrixXd& XE,
                                  const Eigen::VectorXd& beta_bar) {
  if (data.loss != LossKind::Logistic) return Eigen::VectorXd::Ones(data.n());
  const Eigen::VectorXd pi = logistic(XE * beta_bar);
  return pi.array() * (1.0 - pi.array());
}

}  // namespace

void TargetContext::validate() const {
  const Index m = active_size();
  const Index q = inactive_size();
  if (m < 1) throw Error(ErrorKind::DimensionMismatch, "empty active block");
  if (B_active.rows() != m || B_active.cols() != m || B_inactive.rows() != q ||
      B_inactive.cols() != m || c_active.size() != m || c_inactive.size() != q ||
      signs.size() != m)
    throw Error(ErrorKind::DimensionMismatch, "inconsistent target context blocks");
  if (!(sigma > 0.0)) throw Error(ErrorKind::InvalidArgument, "sigma must be positive");
  if (cube == CubeWidth::ActiveMagnitude && m != 1)
    throw Error(ErrorKind::DimensionMismatch, "scaled cube needs a single active variable");
  randomization.validate();
}

Eigen::MatrixXd select_columns(const Eigen::MatrixXd& X, std::span<const Index> cols) {
  Eigen::MatrixXd out(X.rows(), static_cast<Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) out.col(static_cast<Index>(k)) = X.col(cols[k]);
  return out;
}

Eigen::VectorXd refit_unpenalized(const Dataset& data, std::span<const Index> active) {
  if (active.empty()) throw Error(ErrorKind::InvalidArgument, "empty active set");
  const Eigen::MatrixXd XE = select_columns(data.X, active);
  check_condition(XE);
  if (data.loss == LossKind::Logistic) return logistic_mle(XE, data.y);
  const Eigen::MatrixXd gram = XE.transpose() * XE;
  return gram.ldlt().solve(XE.transpose() * data.y);
}

Eigen::VectorXd build_data_vector(const Dataset& data, const SelectionEvent& event,
                                  const Eigen::VectorXd& beta_bar) {
  const auto order = event.partition_order();
  const Index m = static_cast<Index>(event.active.size());
  Eigen::VectorXd D(data.p());
  if (data.loss == LossKind::ForwardStepwise) {
    const Eigen::VectorXd score = data.X.transpose() * data.y;
    for (std::size_t k = 0; k < order.size(); ++k) D[static_cast<Index>(k)] = score[order[k]];
    return D;
  }
  const Eigen::MatrixXd XE = select_columns(data.X, event.active);
  const Eigen::VectorXd fitted = XE * beta_bar;
  const Eigen::VectorXd resid =
      data.loss == LossKind::Logistic ? Eigen::VectorXd(data.y - logistic(fitted))
                                      : Eigen::VectorXd(data.y - fitted);
  D.head(m) = beta_bar;
  for (std::size_t k = event.active.size(); k < order.size(); ++k)
    D[static_cast<Index>(k)] = data.X.col(order[k]).dot(resid);
  return D;
}

KKTMap build_kkt_map(const Dataset& data, const SelectionEvent& event,
                     const Eigen::VectorXd& beta_bar) {
  const Index p = data.p();
  const Index m = static_cast<Index>(event.active.size());
  if (event.omega.size() != p || beta_bar.size() != m || event.signs.size() != m)
    throw Error(ErrorKind::DimensionMismatch, "event does not match data");

  KKTMap map;
  map.order = event.partition_order();
  if (data.loss == LossKind::ForwardStepwise) {
    map.A0 = -Eigen::MatrixXd::Identity(p, p);
    map.B_active = Eigen::MatrixXd::Zero(p, 1);
    map.B_active(0, 0) = 1.0;
    map.gamma = Eigen::VectorXd::Zero(p);
    return map;
  }

  const Eigen::MatrixXd XE = select_columns(data.X, event.active);
  const std::vector<Index> rest(map.order.begin() + m, map.order.end());
  const Eigen::MatrixXd XmE = select_columns(data.X, rest);
  const Eigen::VectorXd w = curvature_weights(data, XE, beta_bar);
  const Eigen::MatrixXd WXE = w.asDiagonal() * XE;
  const Eigen::MatrixXd Q = XE.transpose() * WXE;
  const Eigen::MatrixXd C = XmE.transpose() * WXE;

  map.A0 = Eigen::MatrixXd::Zero(p, p);
  map.A0.topLeftCorner(m, m) = -Q;
  map.A0.bottomLeftCorner(p - m, m) = -C;
  map.A0.bottomRightCorner(p - m, p - m) = -Eigen::MatrixXd::Identity(p - m, p - m);

  map.B_active.resize(p, m);
  map.B_active.topRows(m) = Q + event.epsilon * Eigen::MatrixXd::Identity(m, m);
  map.B_active.bottomRows(p - m) = C;

  map.gamma = Eigen::VectorXd::Zero(p);
  map.gamma.head(m) = event.lambda * event.signs;
  return map;
}

Eigen::VectorXd reconstruct_omega(const KKTMap& map, const SelectionEvent& event,
                                  const Eigen::VectorXd& D) {
  const Index m = static_cast<Index>(event.active.size());
  Eigen::VectorXd omega = map.A0 * D + map.B_active * event.beta_active + map.gamma;
  omega.tail(omega.size() - m) += event.u_inactive;
  return omega;
}

TargetCovariance target_covariance(const Dataset& data, const SelectionEvent& event,
                                   const KKTMap& map, Index j, const CovarianceSpec& cov) {
  const Index p = data.p();
  const Index m = static_cast<Index>(event.active.size());
  if (j < 0 || j >= m) throw Error(ErrorKind::InvalidArgument, "target index outside active set");
  TargetCovariance out;
  out.cross = Eigen::VectorXd::Zero(p);

  if (data.loss == LossKind::ForwardStepwise) {
    const Eigen::VectorXd xj = data.X.col(event.active[static_cast<std::size_t>(j)]);
    for (Index k = 0; k < p; ++k)
      out.cross[k] = cov.noise_variance * data.X.col(map.order[static_cast<std::size_t>(k)]).dot(xj);
    out.variance = cov.noise_variance * xj.squaredNorm();
    return out;
  }

  // -A0 top-left block is Q_E = X_E^T W X_E (W = I for squared error).
  const Eigen::MatrixXd Q = -map.A0.topLeftCorner(m, m);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(Q);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
    throw Error(ErrorKind::SingularDesign, "Q_E is not positive definite");
  const Eigen::VectorXd col = ldlt.solve(Eigen::VectorXd::Unit(m, j));
  const double scale = data.loss == LossKind::SquaredError ? cov.noise_variance : 1.0;
  out.cross.head(m) = scale * col;
  out.variance = scale * col[j];
  if (!(out.variance > 0.0)) throw Error(ErrorKind::SingularDesign, "non-positive target variance");
  return out;
}

TargetContext decompose_target(const KKTMap& map, const Dataset& data,
                               const SelectionEvent& event, const Eigen::VectorXd& D,
                               const Eigen::VectorXd& beta_bar, Index j,
                               const CovarianceSpec& cov, const RandomizationSpec& randomization) {
  const Index p = data.p();
  const Index m = static_cast<Index>(event.active.size());
  const TargetCovariance tc = target_covariance(data, event, map, j, cov);

  TargetContext ctx;
  ctx.j = j;
  ctx.variable = event.active[static_cast<std::size_t>(j)];
  ctx.T_obs = data.loss == LossKind::ForwardStepwise ? D[0] : beta_bar[j];
  ctx.sigma = std::sqrt(tc.variance);

  const Eigen::VectorXd A = map.A0 * tc.cross / tc.variance;
  const Eigen::VectorXd F = map.A0 * D - A * ctx.T_obs;
  const Eigen::VectorXd c = F + map.gamma;

  ctx.A_active = A.head(m);
  ctx.A_inactive = A.tail(p - m);
  ctx.B_active = map.B_active.topRows(m);
  ctx.B_inactive = map.B_active.bottomRows(p - m);
  ctx.c_active = c.head(m);
  ctx.c_inactive = c.tail(p - m);
  ctx.lambda = event.lambda;
  ctx.signs = event.signs;
  ctx.randomization = randomization;
  ctx.randomization.dimension = p;
  ctx.cube = data.loss == LossKind::ForwardStepwise ? CubeWidth::ActiveMagnitude : CubeWidth::Fixed;
  ctx.validate();
  return ctx;
}

double estimate_noise_variance(const Dataset& data, std::span<const Index> active,
                               const Eigen::VectorXd& beta_bar) {
  const Index dof = data.n() - static_cast<Index>(active.size());
  if (dof < 1) throw Error(ErrorKind::SingularDesign, "no residual degrees of freedom");
  const Eigen::MatrixXd XE = select_columns(data.X, active);
  return (data.y - XE * beta_bar).squaredNorm() / static_cast<double>(dof);
}

}  // namespace selinf
