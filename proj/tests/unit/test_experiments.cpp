#include <doctest.h>

#include <cmath>

#include "selinf/experiments.hpp"

using namespace selinf;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig cfg;
  cfg.n = 200;
  cfg.p = 40;
  cfg.c = 1.0;
  cfg.n_reps = 6;
  cfg.seed = 42;
  cfg.grid_points = 101;
  cfg.grid_width = 8.0;
  cfg.lambda_draws = 20;
  return cfg;
}

}  // namespace

TEST_CASE("signal magnitudes") {
  const Eigen::VectorXd ls = signal_values(5, {0.5, 3.5});
  const double expected[] = {0.5, 1.25, 2.0, 2.75, 3.5};
  for (Index k = 0; k < 5; ++k) CHECK(std::abs(ls[k]) == doctest::Approx(expected[k]));
  CHECK(ls[0] > 0.0);
  CHECK(ls[1] < 0.0);
  const Eigen::VectorXd ms = signal_values(5, {3.5, 6.5});
  CHECK(std::abs(ms[4]) == doctest::Approx(6.5));
  CHECK(std::abs(ms[2]) == doctest::Approx(5.0));
}

TEST_CASE("seed streams") {
  const auto a = ReplicationSeeds::derive(7, 0);
  const auto b = ReplicationSeeds::derive(7, 1);
  CHECK(a.data != b.data);
  CHECK(a.data != a.omega);
  CHECK(a.omega != a.lambda);
  CHECK(hash64(1, 2) == hash64(1, 2));
  CHECK(hash64(1, 2) != hash64(2, 1));
}

TEST_CASE("generated data") {
  ExperimentConfig cfg = small_config();
  const auto g = gen_dataset(cfg, 0);
  for (Index k = 0; k < cfg.p; ++k) CHECK(g.data.X.col(k).norm() == doctest::Approx(1.0));
  CHECK(g.mu.cwiseAbs().maxCoeff() == 0.0);

  cfg.sparsity = 3;
  cfg.signal_range = {1.0, 2.0};
  const auto s0 = gen_dataset(cfg, 0);
  const auto s1 = gen_dataset(cfg, 1);
  CHECK(s0.data.X == s1.data.X);
  CHECK(s0.data.y != s1.data.y);
  CHECK(s0.beta_star.head(3).cwiseAbs().isApprox(Eigen::Vector3d(1.0, 1.5, 2.0)));
}

TEST_CASE("true target") {
  ExperimentConfig cfg = small_config();
  cfg.sparsity = 2;
  cfg.signal_range = {2.0, 3.0};
  const auto g = gen_dataset(cfg, 0);
  const std::vector<Index> E{0, 1, 5};
  const Eigen::VectorXd b = true_target(g.data.X, E, g.mu, LossKind::SquaredError);
  const Eigen::MatrixXd XE = select_columns(g.data.X, E);
  CHECK((XE.transpose() * (g.mu - XE * b)).lpNorm<Eigen::Infinity>() < 1e-10);

  const Eigen::VectorXd zero = true_target(g.data.X, E, Eigen::VectorXd::Zero(cfg.n), LossKind::SquaredError);
  CHECK(zero.cwiseAbs().maxCoeff() == 0.0);
  const Eigen::VectorXd half = true_target(g.data.X, E, Eigen::VectorXd::Constant(cfg.n, 0.5), LossKind::Logistic);
  CHECK(half.cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("true target on an orthonormal superset of the support") {
  Eigen::MatrixXd X = Eigen::MatrixXd::Identity(6, 4);
  Eigen::VectorXd beta(4);
  beta << 2.0, -1.0, 0.0, 0.0;
  const Eigen::VectorXd mu = X * beta;
  const std::vector<Index> E{0, 1, 3};
  const Eigen::VectorXd b = true_target(X, E, mu, LossKind::SquaredError);
  CHECK(b.isApprox(Eigen::Vector3d(2.0, -1.0, 0.0)));
}

TEST_CASE("replications are deterministic and internally consistent") {
  const ExperimentConfig cfg = small_config();
  const auto a = run_replication(cfg, 3);
  const auto b = run_replication(cfg, 3);
  REQUIRE(a.records.size() == b.records.size());
  for (std::size_t k = 0; k < a.records.size(); ++k) {
    CHECK(a.records[k].ci.lo == b.records[k].ci.lo);
    CHECK(a.records[k].mle == b.records[k].mle);
    CHECK(a.records[k].T_obs == a.records[k].naive_estimate);
    REQUIRE(a.records[k].truth.has_value());
    CHECK(*a.records[k].truth == 0.0);
  }
}

TEST_CASE("batches do not depend on the thread count") {
  const ExperimentConfig cfg = small_config();
  const auto one = flatten(run_batch(cfg, 1));
  const auto many = flatten(run_batch(cfg, 3));
  REQUIRE(one.size() == many.size());
  for (std::size_t k = 0; k < one.size(); ++k) {
    CHECK(one[k].ci.hi == many[k].ci.hi);
    CHECK(one[k].pvalue == many[k].pvalue);
  }
}

TEST_CASE("config validation") {
  ExperimentConfig cfg = small_config();
  cfg.n_reps = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = small_config();
  cfg.alpha = 1.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = small_config();
  cfg.sparsity = 2;
  CHECK_THROWS_AS(cfg.validate(), Error);
  CHECK(small_config().ridge() == doctest::Approx(1.0 / std::sqrt(200.0)));
}

TEST_CASE("aggregate") {
  InferenceRecord r;
  r.ci = {-1.0, 1.0};
  r.naive_ci = {0.5, 1.0};
  r.truth = 0.0;
  const CoverageRow row = aggregate({r}, "x", 1.2);
  CHECK(row.coverage_selective == 1.0);
  CHECK(row.coverage_naive == 0.0);
  CHECK(row.length_selective == 2.0);
  CHECK(row.length_naive == 0.5);
  CHECK(row.n_targets == 1);
  CHECK_THROWS_AS(aggregate({}, "x"), Error);
}
