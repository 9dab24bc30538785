#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "data_model.hpp"
#include "estimators.hpp"

namespace bridgeiv {

// Linear structural model over K cells with n units each:
//   S_i = A_i Pi + gamma U_i + eta_i        (structural surrogate)
//   Y_i = S_i beta + delta U_i + eps_i
//   S_i^obs = S_i + nu_i                    (recorded surrogate)
// Pi rows are drawn pi_row_scale * N(0, I_d); beta and gamma default to
// N(0, I_d)/sqrt(d) draws unless fixed here. meas_scale (std of nu) is 0 in
// the plain model; setting it positive with eta_scale = 0 yields the
// error-in-variables regime where the recorded surrogate is a noisy proxy
// of the signal that actually drives the outcome.
struct LinearDgpConfig {
  int num_cells = 45;
  int units_per_cell = 100;
  int surrogate_dim = 5;
  int num_folds = 5;
  double eps_scale = 3.0;
  double eta_scale = 1.0;
  double u_scale = 3.0;
  double delta = 1.0;
  double pi_row_scale = 0.1;
  double meas_scale = 0.0;
  std::optional<Eigen::VectorXd> beta;
  std::optional<Eigen::VectorXd> gamma;
  Eigen::VectorXd novel_first_stage;  // defaults to all-ones when empty
  std::uint64_t seed = 0;

  void validate() const;
  Eigen::VectorXd resolved_novel_first_stage() const;
};

struct GroundTruth {
  Eigen::VectorXd beta;
  Eigen::VectorXd gamma;
  Eigen::MatrixXd pi;  // K x d first-stage effects
};

// Fully deterministic given config.seed: structural draws, unit noise and
// fold assignment come from fixed named streams.
std::pair<Dataset, GroundTruth> simulate_dataset(const LinearDgpConfig& config);

struct NovelCellResult {
  double point = 0.0;     // mean(S(a')) beta_hat
  double target = 0.0;    // (a' Pi) beta
  double sq_error = 0.0;  // (target - point)^2
  double ci_lower = 0.0;
  double ci_upper = 0.0;
  bool covered = false;
};

// Draws a novel cell with first-stage mean novel_first_stage and scores the
// estimate: realized squared error of mean(S(a')) beta_hat against the true
// (a'Pi) beta, and whether the plug-in confidence interval covers it. The
// interval variance combines the estimator covariance with the novel-cell
// sampling covariance: v = m' Cov(beta) m + beta' Cov(m) beta.
NovelCellResult evaluate_novel_cell(const EstimateReport& report, const GroundTruth& truth,
                                    const LinearDgpConfig& config, int novel_units, double alpha,
                                    std::uint64_t seed);

struct SweepRow {
  int num_cells = 0;
  EstimatorTag estimator = EstimatorTag::kJiveLfold;
  double mse = 0.0;
  double mse_se = 0.0;
  double coverage = 0.0;
  double coverage_se = 0.0;
  int n_replications = 0;
  int n_failures = 0;
};

struct SweepResult {
  std::vector<SweepRow> rows;  // ordered by (K grid position, estimator order)
  bool failure_threshold_exceeded = false;
  std::string failure_message;
};

struct SweepConfig {
  LinearDgpConfig base;
  std::vector<int> k_grid = {45, 90, 180, 360, 720, 1440, 2000};
  std::vector<EstimatorTag> estimators = {EstimatorTag::kJiveLfold, EstimatorTag::kTsls,
                                          EstimatorTag::kOls};
  int n_replications = 200;
  int novel_units = 100;
  double alpha = 0.05;
  int parallelism = 1;
  std::uint64_t seed = 0;
};

// Monte Carlo sweep over the K grid: every replication draws fresh
// (Pi, beta, gamma) unless the base config fixes them, runs each estimator,
// and scores one shared novel cell. Replications use pre-assigned RNG
// streams and a fixed-order reduction, so results are identical at any
// parallelism level. Per-replication estimator failures are counted; more
// than 1% in any (K, estimator) bucket flags the sweep as failed.
SweepResult run_sweep(const SweepConfig& config);

// CSV schema: K,estimator,mse,mse_se,coverage,coverage_se,n_reps,n_failures
std::string sweep_to_csv(const SweepResult& result);

}  // namespace bridgeiv
