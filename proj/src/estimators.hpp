#pragma once

#include <Eigen/Dense>
#include <optional>
#include <span>
#include <string>

#include "data_model.hpp"

namespace bridgeiv {

enum class EstimatorTag { kJiveLfold, kJive2fold, kTsls, kOls };

std::string estimator_tag_name(EstimatorTag tag);
EstimatorTag estimator_tag_from_name(const std::string& name);

struct EstimateReport {
  Eigen::VectorXd beta_hat;
  EstimatorTag tag = EstimatorTag::kJiveLfold;
  // Gram term of the estimating equation. For the L-fold JIVE this is
  // sum_a sum_v lfo(S)_{a,v}^T mean(S)_{a,v}; for the two-fold scalar
  // estimator it is the 1x1 matrix holding H_K = sum_a mean(S)_{a,1} mean(S)_{a,2}.
  Eigen::MatrixXd gram;
  std::optional<double> ci_lower;
  std::optional<double> ci_upper;
  std::optional<double> sigma_eta_hat;
  std::optional<double> sigma_eps_hat;
  bool condition_warning = false;
  // Cell-clustered sandwich covariance of beta_hat (present for the L-fold
  // JIVE, TSLS and OLS); feeds the novel-cell confidence interval.
  std::optional<Eigen::MatrixXd> beta_cov;
};

// L-fold JIVE over cell-fold aggregates:
//   beta = (sum_{a,v} lfo_{a,v}^T S_{a,v})^{-1} sum_{a,v} lfo_{a,v}^T Y_{a,v}
// where lfo_{a,v} is the count-weighted mean of the other folds of cell a.
// Requires >= 2 folds in each cell and at least d cells.
EstimateReport jive_lfold(std::span<const CellFoldAggregate> aggregates);

// Two-fold scalar JIVE with a normal-approximation confidence interval:
//   CI = beta +- q_{1-alpha/2} * sqrt(K) / H_K * sigma_eta * sigma_eps.
// beta symmetrizes the two fold orderings, which coincides with the L-fold
// estimator at L=2. Fails with a weak-identification error when H_K <= 0 or
// H_K is negligible against the noise scale.
EstimateReport jive_2fold_with_ci(std::span<const CellFoldAggregate> aggregates, double alpha);

// Two-stage least squares via the cell-means equivalence: regression of
// whole-cell outcome means on whole-cell surrogate means, no intercept.
EstimateReport tsls(std::span<const CellFoldAggregate> aggregates);

// Unit-level least squares of Y on S without intercept (surrogate index).
EstimateReport ols_surrogate_index(const Dataset& dataset);

}  // namespace bridgeiv
