#pragma once

#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "selinf/reconstruction.hpp"

namespace testutil {

inline Eigen::MatrixXd gaussian(selinf::Index n, selinf::Index p, std::mt19937_64& rng) {
  std::normal_distribution<double> z(0.0, 1.0);
  Eigen::MatrixXd X(n, p);
  for (selinf::Index j = 0; j < p; ++j)
    for (selinf::Index i = 0; i < n; ++i) X(i, j) = z(rng);
  return X;
}

inline Eigen::VectorXd gaussian(selinf::Index n, std::mt19937_64& rng) {
  return gaussian(n, 1, rng).col(0);
}

// Phi via erfc, independent of the library's log-space routines.
inline double Phi(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Context with one active coordinate: omega_E = a t + b o + c, no inactive block.
inline selinf::TargetContext scalar_context(double a, double b, double c, double sign = 1.0,
                                            double tau = 1.0) {
  selinf::TargetContext ctx;
  ctx.A_active = Eigen::VectorXd::Constant(1, a);
  ctx.A_inactive.resize(0);
  ctx.B_active = Eigen::MatrixXd::Constant(1, 1, b);
  ctx.B_inactive.resize(0, 1);
  ctx.c_active = Eigen::VectorXd::Constant(1, c);
  ctx.c_inactive.resize(0);
  ctx.lambda = 1.0;
  ctx.signs = Eigen::VectorXd::Constant(1, sign);
  ctx.randomization = {selinf::RandomizationKind::Gaussian, tau, 1};
  return ctx;
}

// Random well-posed context with `m` active and `k` inactive coordinates.
inline selinf::TargetContext random_context(selinf::Index m, selinf::Index k, std::mt19937_64& rng,
                                            selinf::RandomizationKind kind =
                                                selinf::RandomizationKind::Gaussian) {
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.5, 2.0);
  selinf::TargetContext ctx;
  ctx.A_active = gaussian(m, rng);
  ctx.A_inactive = gaussian(k, rng);
  Eigen::MatrixXd G = gaussian(m + 3, m, rng);
  ctx.B_active = G.transpose() * G / (m + 3) + Eigen::MatrixXd::Identity(m, m);
  ctx.B_inactive = 0.5 * gaussian(k, m, rng);
  ctx.c_active = gaussian(m, rng);
  ctx.c_inactive = 0.3 * gaussian(k, rng);
  ctx.lambda = u(rng) + 0.5;
  ctx.signs.resize(m);
  for (selinf::Index i = 0; i < m; ++i) ctx.signs[i] = z(rng) > 0 ? 1.0 : -1.0;
  ctx.randomization = {kind, u(rng), m + k};
  ctx.sigma = 1.0;
  return ctx;
}

}  // namespace testutil
