#include "selinf/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <random>
#include <thread>

#include "selinf/reconstruction.hpp"

namespace selinf {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Eigen::MatrixXd gaussian_matrix(Index n, Index p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd X(n, p);
  for (Index j = 0; j < p; ++j)
    for (Index i = 0; i < n; ++i) X(i, j) = normal(rng);
  return X;
}

std::vector<InferenceRecord> infer_selected(const Dataset& data, const SelectionEvent& event,
                                            const CovarianceSpec& cov,
                                            const RandomizationSpec& rnd, double alpha,
                                            int grid_points, double grid_width, int max_targets,
                                            const Eigen::VectorXd* truth, int* flagged) {
  const Eigen::VectorXd beta_bar = refit_unpenalized(data, event.active);
  const Eigen::VectorXd D = build_data_vector(data, event, beta_bar);
  const KKTMap map = build_kkt_map(data, event, beta_bar);
  const Index m = std::min<Index>(static_cast<Index>(event.active.size()), max_targets);

  std::vector<InferenceRecord> out;
  for (Index j = 0; j < m; ++j) {
    const TargetContext ctx = decompose_target(map, data, event, D, beta_bar, j, cov, rnd);
    const auto grid = make_grid(ctx.T_obs, ctx.sigma, grid_points, grid_width);
    const GridApprox approx = grid_log_h(ctx, grid);
    if (flagged) *flagged += approx.n_flagged();
    std::optional<double> t;
    if (truth) t = (*truth)[j];
    out.push_back(infer_target(ctx, approx, alpha, t));
  }
  return out;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (n < 1 || p < 1) throw Error(ErrorKind::InvalidArgument, "n and p must be >= 1");
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorKind::InvalidArgument, "alpha outside (0,1)");
  if (sparsity < 0 || sparsity > p) throw Error(ErrorKind::InvalidArgument, "sparsity must be in [0, p]");
  if (sparsity > 0 && !signal_range)
    throw Error(ErrorKind::InvalidArgument, "sparse configs need a signal range");
  if (n_reps < 1) throw Error(ErrorKind::InvalidArgument, "reps must be >= 1");
  if (loss != LossKind::ForwardStepwise && !(c > 0.0))
    throw Error(ErrorKind::InvalidArgument, "c must be positive");
  if (lambda_draws < 1) throw Error(ErrorKind::InvalidArgument, "lambda draws must be >= 1");
  if (!(noise_variance > 0.0)) throw Error(ErrorKind::InvalidArgument, "noise variance must be positive");
  if (grid_points < 3 || !(grid_width > 0.0)) throw Error(ErrorKind::InvalidArgument, "bad grid");
  if (max_targets < 1) throw Error(ErrorKind::InvalidArgument, "max targets must be >= 1");
  RandomizationSpec r = randomization;
  r.dimension = p;
  r.validate();
}

double ExperimentConfig::ridge() const {
  return epsilon >= 0.0 ? epsilon : 1.0 / std::sqrt(static_cast<double>(n));
}

std::uint64_t hash64(std::uint64_t a, std::uint64_t b) {
  return splitmix64(splitmix64(a) ^ (b + 0x632be59bd9b4e019ULL));
}

ReplicationSeeds ReplicationSeeds::derive(std::uint64_t config_seed, int rep_index) {
  const std::uint64_t base = hash64(config_seed, static_cast<std::uint64_t>(rep_index));
  return {hash64(base, 1), hash64(base, 2), hash64(base, 3), hash64(base, 4)};
}

Eigen::VectorXd signal_values(int sparsity, std::pair<double, double> range) {
  Eigen::VectorXd out(sparsity);
  for (int k = 0; k < sparsity; ++k) {
    const double frac = sparsity == 1 ? 0.0 : static_cast<double>(k) / (sparsity - 1);
    const double mag = range.first + frac * (range.second - range.first);
    out[k] = (k % 2 == 0) ? mag : -mag;
  }
  return out;
}

GeneratedData gen_dataset(const ExperimentConfig& config, int rep_index) {
  config.validate();
  const auto seeds = ReplicationSeeds::derive(config.seed, rep_index);
  const std::uint64_t design_seed =
      config.sparsity > 0 ? hash64(config.seed, 0x5eedfeedULL) : seeds.design;

  Eigen::MatrixXd X = gaussian_matrix(config.n, config.p, design_seed);
  for (Index j = 0; j < X.cols(); ++j) X.col(j).normalize();

  Eigen::VectorXd beta_star = Eigen::VectorXd::Zero(config.p);
  if (config.sparsity > 0)
    beta_star.head(config.sparsity) = signal_values(config.sparsity, *config.signal_range);
  const Eigen::VectorXd eta = X * beta_star;

  std::mt19937_64 rng(seeds.data);
  Eigen::VectorXd y(config.n);
  Eigen::VectorXd mu;
  if (config.loss == LossKind::Logistic) {
    mu = logistic(eta);
    for (Index i = 0; i < y.size(); ++i) y[i] = std::bernoulli_distribution(mu[i])(rng) ? 1.0 : 0.0;
  } else {
    mu = eta;
    std::normal_distribution<double> noise(0.0, std::sqrt(config.noise_variance));
    for (Index i = 0; i < y.size(); ++i) y[i] = mu[i] + noise(rng);
  }
  return {Dataset::normalized(std::move(X), std::move(y), config.loss), std::move(mu),
          std::move(beta_star)};
}

Eigen::VectorXd true_target(const Eigen::MatrixXd& X, std::span<const Index> active,
                            const Eigen::VectorXd& mu, LossKind loss) {
  const Eigen::MatrixXd XE = select_columns(X, active);
  const Eigen::MatrixXd gram = XE.transpose() * XE;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
    throw Error(ErrorKind::SingularDesign, "X_E^T X_E is singular");
  if (loss != LossKind::Logistic) return ldlt.solve(XE.transpose() * mu);

  Eigen::VectorXd b = Eigen::VectorXd::Zero(XE.cols());
  for (int iter = 0; iter < 200; ++iter) {
    const Eigen::VectorXd pi = logistic(XE * b);
    const Eigen::VectorXd score = XE.transpose() * (mu - pi);
    if (score.lpNorm<Eigen::Infinity>() < 1e-12) return b;
    const Eigen::VectorXd w = pi.array() * (1.0 - pi.array());
    const Eigen::MatrixXd info = XE.transpose() * w.asDiagonal() * XE;
    b += info.ldlt().solve(score);
    if (!b.allFinite()) break;
  }
  throw Error(ErrorKind::NonConvergence, "population logistic equation did not converge");
}

ReplicationResult run_replication(const ExperimentConfig& config, int rep_index) {
  ReplicationResult result;
  result.rep = rep_index;
  try {
    const auto seeds = ReplicationSeeds::derive(config.seed, rep_index);
    const GeneratedData gen = gen_dataset(config, rep_index);
    const Dataset& data = gen.data;

    PenaltySpec penalty;
    if (config.loss != LossKind::ForwardStepwise) {
      penalty.lambda = tune_lambda(data, config.c, config.lambda_draws, seeds.lambda);
      penalty.epsilon = config.ridge();
    }
    RandomizationSpec rnd = config.randomization;
    rnd.dimension = config.p;
    const Eigen::VectorXd omega = draw_randomization(rnd, seeds.omega);
    const SelectionEvent event = solve_randomized_program(data, penalty, omega);
    result.lambda = event.lambda;

    const Eigen::VectorXd truth = true_target(data.X, event.active, gen.mu, config.loss);
    const CovarianceSpec cov{config.noise_variance};
    result.records =
        infer_selected(data, event, cov, rnd, config.alpha, config.grid_points, config.grid_width,
                       config.max_targets, &truth, &result.flagged_points);
    result.grid_points = static_cast<int>(result.records.size()) * config.grid_points;
  } catch (const Error& e) {
    result.status = std::string(to_string(e.kind()));
    result.records.clear();
  }
  return result;
}

std::vector<ReplicationResult> run_batch(const ExperimentConfig& config, int threads) {
  config.validate();
  std::vector<ReplicationResult> results(static_cast<std::size_t>(config.n_reps));
  std::atomic<int> next{0};
  const auto worker = [&] {
    for (int r = next++; r < config.n_reps; r = next++)
      results[static_cast<std::size_t>(r)] = run_replication(config, r);
  };
  threads = std::clamp(threads, 1, config.n_reps);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int k = 0; k < threads; ++k) pool.emplace_back(worker);
  }
  return results;
}

AnalysisResult analyze_dataset(const Dataset& data, const AnalysisOptions& options) {
  if (data.loss == LossKind::ForwardStepwise)
    throw Error(ErrorKind::InvalidArgument, "analysis runs the randomized lasso");
  const auto seeds = ReplicationSeeds::derive(options.seed, 0);
  PenaltySpec penalty;
  penalty.lambda = tune_lambda(data, options.c, options.lambda_draws, seeds.lambda);
  penalty.epsilon =
      options.epsilon >= 0.0 ? options.epsilon : 1.0 / std::sqrt(static_cast<double>(data.n()));
  RandomizationSpec rnd = options.randomization;
  rnd.dimension = data.p();

  AnalysisResult out;
  out.event = solve_randomized_program(data, penalty, draw_randomization(rnd, seeds.omega));
  if (options.noise_variance) {
    out.noise_variance = *options.noise_variance;
  } else if (data.loss == LossKind::SquaredError) {
    const Eigen::VectorXd beta_bar = refit_unpenalized(data, out.event.active);
    out.noise_variance = estimate_noise_variance(data, out.event.active, beta_bar);
  }
  out.records = infer_selected(data, out.event, CovarianceSpec{out.noise_variance}, rnd,
                               options.alpha, options.grid_points, options.grid_width,
                               static_cast<int>(out.event.active.size()), nullptr, nullptr);
  return out;
}

CoverageRow aggregate(const std::vector<InferenceRecord>& records, std::string label, double c) {
  CoverageRow row;
  row.label = std::move(label);
  row.c = c;
  for (const auto& rec : records) {
    if (!rec.truth) continue;
    ++row.n_targets;
    row.coverage_selective += rec.ci.contains(*rec.truth) ? 1.0 : 0.0;
    row.coverage_naive += rec.naive_ci.contains(*rec.truth) ? 1.0 : 0.0;
    row.length_selective += rec.ci.length();
    row.length_naive += rec.naive_ci.length();
  }
  if (row.n_targets == 0) throw Error(ErrorKind::EmptyBatch, "no records with a known truth");
  const double n = row.n_targets;
  row.coverage_selective /= n;
  row.coverage_naive /= n;
  row.length_selective /= n;
  row.length_naive /= n;
  return row;
}

std::vector<InferenceRecord> flatten(const std::vector<ReplicationResult>& results) {
  std::vector<InferenceRecord> out;
  for (const auto& r : results) out.insert(out.end(), r.records.begin(), r.records.end());
  return out;
}

}  // namespace selinf
