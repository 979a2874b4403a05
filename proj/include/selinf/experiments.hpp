#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "selinf/inference.hpp"

namespace selinf {

struct ExperimentConfig {
  Index n = 1000;
  Index p = 500;
  LossKind loss = LossKind::SquaredError;
  RandomizationSpec randomization{RandomizationKind::Gaussian, 1.0, 0};
  /// Tuning constant for lambda; ignored for forward stepwise.
  double c = 1.2;
  /// Ridge term; a negative value selects 1/sqrt(n).
  double epsilon = -1.0;
  int sparsity = 0;
  std::optional<std::pair<double, double>> signal_range;
  double alpha = 0.1;
  int n_reps = 200;
  std::uint64_t seed = 0;
  int lambda_draws = 100;
  double noise_variance = 1.0;
  int grid_points = 801;
  double grid_width = 12.0;
  /// Cap on the number of coefficients analysed per replication.
  int max_targets = 30;

  void validate() const;
  double ridge() const;
};

/// 64-bit mix of two values (splitmix64 finalizer on a combined state).
std::uint64_t hash64(std::uint64_t a, std::uint64_t b);

/// Independent sub-seed streams for one replication.
struct ReplicationSeeds {
  std::uint64_t data;
  std::uint64_t design;
  std::uint64_t omega;
  std::uint64_t lambda;

  static ReplicationSeeds derive(std::uint64_t config_seed, int rep_index);
};

struct GeneratedData {
  Dataset data;
  /// Mean of y given X (success probabilities for the logistic loss).
  Eigen::VectorXd mu;
  Eigen::VectorXd beta_star;
};

/// Sparse configurations draw X once from the config seed; all-noise ones
/// draw X per replication.
GeneratedData gen_dataset(const ExperimentConfig& config, int rep_index);

/// Equally spaced signal magnitudes over the range with alternating signs.
Eigen::VectorXd signal_values(int sparsity, std::pair<double, double> range);

/// Population coefficients for the selected model: the projection of mu for
/// squared error / forward stepwise, the root of X_E^T (mu - pi(X_E b)) = 0
/// for the logistic loss.
Eigen::VectorXd true_target(const Eigen::MatrixXd& X, std::span<const Index> active,
                            const Eigen::VectorXd& mu, LossKind loss);

/// Selection, reconstruction and inference for one replication.
struct ReplicationResult {
  int rep = 0;
  /// "ok", or the error kind that stopped the replication.
  std::string status = "ok";
  std::vector<InferenceRecord> records;
  int grid_points = 0;
  int flagged_points = 0;
  double lambda = 0.0;
};

ReplicationResult run_replication(const ExperimentConfig& config, int rep_index);

/// Runs every replication; results are ordered by rep index whatever the
/// thread count.
std::vector<ReplicationResult> run_batch(const ExperimentConfig& config, int threads = 1);

/// Pipeline for an observed dataset (no known truth).
struct AnalysisOptions {
  RandomizationSpec randomization{RandomizationKind::Gaussian, 1.0, 0};
  double c = 1.0;
  double epsilon = -1.0;
  double alpha = 0.1;
  int lambda_draws = 100;
  /// Unset: estimated from the refit residuals with n - |E| denominator.
  std::optional<double> noise_variance;
  int grid_points = 801;
  double grid_width = 12.0;
  std::uint64_t seed = 0;
};

struct AnalysisResult {
  SelectionEvent event;
  double noise_variance = 1.0;
  std::vector<InferenceRecord> records;
};

AnalysisResult analyze_dataset(const Dataset& data, const AnalysisOptions& options);

struct CoverageRow {
  std::string label;
  double coverage_selective = 0.0;
  double coverage_naive = 0.0;
  double length_selective = 0.0;
  double length_naive = 0.0;
  double c = 0.0;
  int n_targets = 0;
};

/// Coverage and mean length over records that carry a truth value.
CoverageRow aggregate(const std::vector<InferenceRecord>& records, std::string label = "",
                      double c = 0.0);

std::vector<InferenceRecord> flatten(const std::vector<ReplicationResult>& results);

}  // namespace selinf
