#include "selinf/selector.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>

namespace selinf {

namespace {

double log1pexp(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double soft_threshold(double x, double t) {
  if (x > t) return x - t;
  if (x < -t) return x + t;
  return 0.0;
}

// X * beta using only the nonzero coordinates of beta.
Eigen::VectorXd sparse_product(const Eigen::MatrixXd& X, const Eigen::VectorXd& beta) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(X.rows());
  for (Index k = 0; k < beta.size(); ++k)
    if (beta[k] != 0.0) out.noalias() += beta[k] * X.col(k);
  return out;
}

// Smooth part of the randomized objective: loss - omega^T b + (eps/2)||b||^2.
class SmoothPart {
 public:
  SmoothPart(const Dataset& data, const Eigen::VectorXd& omega, double epsilon)
      : data_(data), omega_(omega), epsilon_(epsilon) {}

  double value(const Eigen::VectorXd& beta) const {
    const Eigen::VectorXd eta = sparse_product(data_.X, beta);
    double loss = 0.0;
    if (data_.loss == LossKind::SquaredError) {
      loss = 0.5 * (data_.y - eta).squaredNorm();
    } else {
      for (Index i = 0; i < eta.size(); ++i) loss += log1pexp(eta[i]) - data_.y[i] * eta[i];
    }
    return loss - omega_.dot(beta) + 0.5 * epsilon_ * beta.squaredNorm();
  }

  Eigen::VectorXd gradient(const Eigen::VectorXd& beta) const {
    return loss_gradient(data_, beta) - omega_ + epsilon_ * beta;
  }

 private:
  const Dataset& data_;
  const Eigen::VectorXd& omega_;
  double epsilon_;
};

// Solves the stationarity equations with the support and signs of `beta`
// held fixed; returns the solution only if it satisfies every KKT condition.
std::optional<Eigen::VectorXd> polish_on_support(const Dataset& data, const SmoothPart& smooth,
                                                 const Eigen::VectorXd& beta, double lambda,
                                                 double epsilon) {
  std::vector<Index> support;
  for (Index k = 0; k < beta.size(); ++k)
    if (beta[k] != 0.0) support.push_back(k);
  if (support.empty()) {
    if (smooth.gradient(beta).lpNorm<Eigen::Infinity>() <= lambda) return beta;
    return std::nullopt;
  }
  const Index m = static_cast<Index>(support.size());
  Eigen::MatrixXd XE(data.n(), m);
  Eigen::VectorXd b(m);
  Eigen::VectorXd s(m);
  for (Index i = 0; i < m; ++i) {
    XE.col(i) = data.X.col(support[static_cast<std::size_t>(i)]);
    b[i] = beta[support[static_cast<std::size_t>(i)]];
    s[i] = b[i] > 0.0 ? 1.0 : -1.0;
  }
  Eigen::VectorXd full = beta;
  const auto scatter = [&](const Eigen::VectorXd& v) {
    full.setZero();
    for (Index i = 0; i < m; ++i) full[support[static_cast<std::size_t>(i)]] = v[i];
  };
  for (int it = 0; it < 50; ++it) {
    scatter(b);
    const Eigen::VectorXd g = smooth.gradient(full);
    Eigen::VectorXd r(m);
    for (Index i = 0; i < m; ++i) r[i] = g[support[static_cast<std::size_t>(i)]] + lambda * s[i];
    if (r.lpNorm<Eigen::Infinity>() < 1e-11 * (1.0 + lambda)) break;
    Eigen::MatrixXd H;
    if (data.loss == LossKind::Logistic) {
      const Eigen::VectorXd pi = logistic(XE * b);
      const Eigen::VectorXd w = pi.array() * (1.0 - pi.array());
      H = XE.transpose() * w.asDiagonal() * XE;
    } else {
      H = XE.transpose() * XE;
    }
    H.diagonal().array() += epsilon;
    b -= H.ldlt().solve(r);
    if (!b.allFinite()) return std::nullopt;
  }
  scatter(b);
  for (Index i = 0; i < m; ++i)
    if (b[i] * s[i] <= 0.0) return std::nullopt;
  const Eigen::VectorXd g = smooth.gradient(full);
  for (Index i = 0; i < m; ++i)
    if (std::abs(g[support[static_cast<std::size_t>(i)]] + lambda * s[i]) > 1e-8 * (1.0 + lambda))
      return std::nullopt;
  for (Index k = 0; k < full.size(); ++k)
    if (full[k] == 0.0 && std::abs(g[k]) > lambda) return std::nullopt;
  return full;
}

}  // namespace

Dataset Dataset::normalized(Eigen::MatrixXd X, Eigen::VectorXd y, LossKind loss) {
  if (X.rows() < 1 || X.cols() < 1)
    throw Error(ErrorKind::InvalidArgument, "design must have n >= 1 and p >= 1");
  if (y.size() != X.rows())
    throw Error(ErrorKind::DimensionMismatch, "response length differs from design rows");
  for (Index k = 0; k < X.cols(); ++k) {
    const double norm = X.col(k).norm();
    if (!(norm > 0.0) || !std::isfinite(norm))
      throw Error(ErrorKind::InvalidArgument, "column " + std::to_string(k) + " has zero norm");
    X.col(k) /= norm;
  }
  if (loss == LossKind::Logistic) {
    for (Index i = 0; i < y.size(); ++i)
      if (y[i] != 0.0 && y[i] != 1.0)
        throw Error(ErrorKind::InvalidArgument, "logistic response must be 0/1");
  }
  return Dataset{std::move(X), std::move(y), loss};
}

std::vector<Index> SelectionEvent::inactive() const {
  std::vector<Index> out;
  const Index p = omega.size();
  out.reserve(static_cast<std::size_t>(p) - active.size());
  std::vector<bool> is_active(static_cast<std::size_t>(p), false);
  for (Index j : active) is_active[static_cast<std::size_t>(j)] = true;
  for (Index k = 0; k < p; ++k)
    if (!is_active[static_cast<std::size_t>(k)]) out.push_back(k);
  return out;
}

std::vector<Index> SelectionEvent::partition_order() const {
  std::vector<Index> order = active;
  const auto rest = inactive();
  order.insert(order.end(), rest.begin(), rest.end());
  return order;
}

Eigen::VectorXd logistic(const Eigen::VectorXd& eta) {
  return eta.unaryExpr([](double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
  });
}

Eigen::VectorXd loss_gradient(const Dataset& data, const Eigen::VectorXd& beta) {
  switch (data.loss) {
    case LossKind::SquaredError:
      return -data.X.transpose() * (data.y - sparse_product(data.X, beta));
    case LossKind::Logistic:
      return -data.X.transpose() * (data.y - logistic(sparse_product(data.X, beta)));
    case LossKind::ForwardStepwise:
      return -data.X.transpose() * data.y;
  }
  return {};
}

Eigen::VectorXd draw_randomization(const RandomizationSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::mt19937_64 rng(seed);
  Eigen::VectorXd out(spec.dimension);
  if (spec.kind == RandomizationKind::Gaussian) {
    std::normal_distribution<double> normal(0.0, spec.scale);
    for (Index i = 0; i < out.size(); ++i) out[i] = normal(rng);
  } else {
    std::exponential_distribution<double> expo(1.0 / spec.scale);
    std::bernoulli_distribution coin(0.5);
    for (Index i = 0; i < out.size(); ++i) {
      const double magnitude = expo(rng);
      out[i] = coin(rng) ? magnitude : -magnitude;
    }
  }
  return out;
}

double tune_lambda(const Dataset& data, double c, int n_draws, std::uint64_t seed) {
  if (n_draws < 1) throw Error(ErrorKind::InvalidArgument, "n_draws must be >= 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);
  Eigen::VectorXd z(data.n());
  double total = 0.0;
  for (int k = 0; k < n_draws; ++k) {
    for (Index i = 0; i < z.size(); ++i)
      z[i] = data.loss == LossKind::Logistic ? (coin(rng) ? 1.0 : 0.0) : normal(rng);
    total += (data.X.transpose() * z).lpNorm<Eigen::Infinity>();
  }
  return c * total / n_draws;
}

namespace {

SelectionEvent forward_step(const Dataset& data, const Eigen::VectorXd& omega) {
  const Eigen::VectorXd score = data.X.transpose() * data.y + omega;
  Index best = 0;
  score.cwiseAbs().maxCoeff(&best);
  const double lambda_hat = std::abs(score[best]);
  if (!(lambda_hat > 0.0)) throw Error(ErrorKind::EmptySelection, "zero score vector");

  SelectionEvent event;
  event.loss = LossKind::ForwardStepwise;
  event.omega = omega;
  event.active = {best};
  event.signs = Eigen::VectorXd::Constant(1, score[best] > 0.0 ? 1.0 : -1.0);
  event.beta_active = Eigen::VectorXd::Constant(1, score[best]);
  event.lambda = lambda_hat;
  event.epsilon = 0.0;
  const auto rest = event.inactive();
  event.u_inactive.resize(static_cast<Index>(rest.size()));
  for (std::size_t k = 0; k < rest.size(); ++k)
    event.u_inactive[static_cast<Index>(k)] = score[rest[k]];
  return event;
}

}  // namespace

SelectionEvent solve_randomized_program(const Dataset& data, const PenaltySpec& penalty,
                                        const Eigen::VectorXd& omega,
                                        const ProgramOptions& options, ProgramTrace* trace) {
  if (omega.size() != data.p())
    throw Error(ErrorKind::DimensionMismatch, "omega length differs from p");
  if (data.loss == LossKind::ForwardStepwise) return forward_step(data, omega);
  if (!(penalty.lambda > 0.0))
    throw Error(ErrorKind::InvalidArgument, "lambda must be positive for l1 losses");
  if (!(penalty.epsilon > 0.0))
    throw Error(ErrorKind::InvalidArgument, "epsilon must be positive for l1 losses");

  const SmoothPart smooth(data, omega, penalty.epsilon);
  const double lambda = penalty.lambda;
  const Index p = data.p();

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  double f = smooth.value(beta);
  double L = 1.0;
  bool converged = false;
  int iter = 0;
  int stable = 0;
  if (trace) trace->objective.push_back(f);

  Eigen::VectorXd next(p);
  for (; iter < options.max_iter; ++iter) {
    const Eigen::VectorXd g = smooth.gradient(beta);
    double f_next = 0.0;
    Eigen::VectorXd step;
    for (;;) {
      for (Index k = 0; k < p; ++k) next[k] = soft_threshold(beta[k] - g[k] / L, lambda / L);
      step = next - beta;
      f_next = smooth.value(next);
      const double model = f + g.dot(step) + 0.5 * L * step.squaredNorm();
      if (f_next <= model + 1e-12 * std::abs(f)) break;
      L *= 2.0;
      if (L > 1e14) throw Error(ErrorKind::NonConvergence, "backtracking failed");
    }
    const bool same_pattern = ((beta.array() > 0) == (next.array() > 0)).all() &&
                              ((beta.array() < 0) == (next.array() < 0)).all();
    stable = same_pattern ? stable + 1 : 0;
    beta.swap(next);
    f = f_next;
    if (trace) trace->objective.push_back(f + lambda * beta.lpNorm<1>());
    if (stable >= 10 && stable % 10 == 0) {
      if (auto exact = polish_on_support(data, smooth, beta, lambda, penalty.epsilon)) {
        beta = std::move(*exact);
        if (trace) trace->objective.push_back(smooth.value(beta) + lambda * beta.lpNorm<1>());
        converged = true;
        ++iter;
        break;
      }
    }
    if (step.norm() < options.step_tol * (1.0 + beta.norm())) {
      converged = true;
      ++iter;
      break;
    }
  }
  if (!converged)
    throw Error(ErrorKind::NonConvergence,
                "proximal gradient hit " + std::to_string(options.max_iter) + " iterations");

  for (Index k = 0; k < p; ++k)
    if (std::abs(beta[k]) <= options.active_threshold) beta[k] = 0.0;

  SelectionEvent event;
  event.loss = data.loss;
  event.omega = omega;
  event.lambda = lambda;
  event.epsilon = penalty.epsilon;
  event.iterations = iter;
  for (Index k = 0; k < p; ++k)
    if (beta[k] != 0.0) event.active.push_back(k);
  if (event.active.empty()) throw Error(ErrorKind::EmptySelection, "solution is identically zero");

  const Index m = static_cast<Index>(event.active.size());
  event.signs.resize(m);
  event.beta_active.resize(m);
  for (Index i = 0; i < m; ++i) {
    const double b = beta[event.active[static_cast<std::size_t>(i)]];
    event.beta_active[i] = b;
    event.signs[i] = b > 0.0 ? 1.0 : -1.0;
  }
  const Eigen::VectorXd grad = loss_gradient(data, beta);
  const auto rest = event.inactive();
  event.u_inactive.resize(static_cast<Index>(rest.size()));
  for (std::size_t k = 0; k < rest.size(); ++k)
    event.u_inactive[static_cast<Index>(k)] = omega[rest[k]] - grad[rest[k]];
  return event;
}

}  // namespace selinf
