#include "estimators.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <vector>

#include "errors.hpp"
#include "linalg.hpp"

namespace bridgeiv {

namespace {

// Aggregates of one cell, in fold order.
struct CellGroup {
  std::int32_t cell_id;
  std::vector<const CellFoldAggregate*> folds;
  Eigen::RowVectorXd weighted_sum;  // sum_v count_v * mean_surrogate_v
  double weighted_outcome_sum = 0.0;
  std::int64_t total_count = 0;
};

std::vector<CellGroup> group_by_cell(std::span<const CellFoldAggregate> aggregates,
                                     int min_folds) {
  if (aggregates.empty()) throw_data("no aggregates given");
  const int dim = static_cast<int>(aggregates.front().mean_surrogate.size());
  std::map<std::int32_t, CellGroup> cells;
  std::map<std::pair<std::int32_t, std::int32_t>, bool> seen;
  for (const auto& agg : aggregates) {
    if (agg.mean_surrogate.size() != dim) {
      throw_data("aggregates mix surrogate dimensions " + std::to_string(dim) + " and " +
                 std::to_string(agg.mean_surrogate.size()));
    }
    if (agg.count <= 0) throw_data("aggregate with nonpositive count");
    if (!seen.emplace(std::make_pair(agg.cell_id, agg.fold_id), true).second) {
      throw_data("duplicate (cell_id=" + std::to_string(agg.cell_id) + ", fold_id=" +
                 std::to_string(agg.fold_id) + ") aggregate");
    }
    auto [it, inserted] = cells.try_emplace(agg.cell_id);
    CellGroup& group = it->second;
    if (inserted) {
      group.cell_id = agg.cell_id;
      group.weighted_sum = Eigen::RowVectorXd::Zero(dim);
    }
    group.folds.push_back(&agg);
    group.weighted_sum += static_cast<double>(agg.count) * agg.mean_surrogate;
    group.weighted_outcome_sum += static_cast<double>(agg.count) * agg.mean_outcome;
    group.total_count += agg.count;
  }
  std::vector<CellGroup> out;
  out.reserve(cells.size());
  for (auto& [cell_id, group] : cells) {
    if (static_cast<int>(group.folds.size()) < min_folds) {
      throw_data("cell " + std::to_string(cell_id) + " has " +
                 std::to_string(group.folds.size()) + " folds, need at least " +
                 std::to_string(min_folds));
    }
    std::sort(group.folds.begin(), group.folds.end(),
              [](const CellFoldAggregate* a, const CellFoldAggregate* b) {
                return a->fold_id < b->fold_id;
              });
    out.push_back(std::move(group));
  }
  return out;
}

Eigen::MatrixXd sandwich(const Eigen::MatrixXd& gram, const Eigen::MatrixXd& meat) {
  // Solve G X = meat, then G Cov^T = X^T; avoids forming an explicit inverse.
  const Eigen::MatrixXd x = svd_solve(gram, meat, "Gram matrix").x;
  return svd_solve(gram, x.transpose(), "Gram matrix").x.transpose();
}

}  // namespace

std::string estimator_tag_name(EstimatorTag tag) {
  switch (tag) {
    case EstimatorTag::kJiveLfold: return "JIVE_LFOLD";
    case EstimatorTag::kJive2fold: return "JIVE_2FOLD";
    case EstimatorTag::kTsls: return "TSLS";
    case EstimatorTag::kOls: return "OLS";
  }
  throw_config("unknown estimator tag");
}

EstimatorTag estimator_tag_from_name(const std::string& name) {
  if (name == "JIVE_LFOLD") return EstimatorTag::kJiveLfold;
  if (name == "JIVE_2FOLD") return EstimatorTag::kJive2fold;
  if (name == "TSLS") return EstimatorTag::kTsls;
  if (name == "OLS") return EstimatorTag::kOls;
  throw_config("unknown estimator tag '" + name + "'");
}

EstimateReport jive_lfold(std::span<const CellFoldAggregate> aggregates) {
  const auto cells = group_by_cell(aggregates, 2);
  const int dim = static_cast<int>(cells.front().weighted_sum.size());
  if (static_cast<int>(cells.size()) < dim) {
    throw_data("need at least d=" + std::to_string(dim) + " cells, have " +
               std::to_string(cells.size()));
  }

  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(dim);
  for (const auto& cell : cells) {
    for (const auto* agg : cell.folds) {
      const double rest_count = static_cast<double>(cell.total_count - agg->count);
      const Eigen::RowVectorXd lfo =
          (cell.weighted_sum - static_cast<double>(agg->count) * agg->mean_surrogate) /
          rest_count;
      gram.noalias() += lfo.transpose() * agg->mean_surrogate;
      rhs.noalias() += lfo.transpose() * agg->mean_outcome;
    }
  }

  EstimateReport report;
  report.tag = EstimatorTag::kJiveLfold;
  report.gram = gram;
  const SolveResult solve = svd_solve(gram, rhs, "JIVE Gram matrix");
  report.beta_hat = solve.x;
  report.condition_warning = solve.condition_warning;

  // Cell-clustered sandwich covariance: scores from the same cell share
  // fold-mean noise, so they are aggregated before the outer product.
  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(dim, dim);
  for (const auto& cell : cells) {
    Eigen::VectorXd score = Eigen::VectorXd::Zero(dim);
    for (const auto* agg : cell.folds) {
      const double rest_count = static_cast<double>(cell.total_count - agg->count);
      const Eigen::RowVectorXd lfo =
          (cell.weighted_sum - static_cast<double>(agg->count) * agg->mean_surrogate) /
          rest_count;
      const double residual = agg->mean_outcome - agg->mean_surrogate.dot(report.beta_hat);
      score.noalias() += lfo.transpose() * residual;
    }
    meat.noalias() += score * score.transpose();
  }
  report.beta_cov = sandwich(gram, meat);
  return report;
}

EstimateReport jive_2fold_with_ci(std::span<const CellFoldAggregate> aggregates, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw_config("alpha must lie in (0, 1)");
  const auto cells = group_by_cell(aggregates, 2);
  const int dim = static_cast<int>(cells.front().weighted_sum.size());
  if (dim != 1) {
    throw_data("two-fold confidence interval requires a scalar surrogate, got d=" +
               std::to_string(dim));
  }
  for (const auto& cell : cells) {
    if (cell.folds.size() != 2) {
      throw_data("cell " + std::to_string(cell.cell_id) + " has " +
                 std::to_string(cell.folds.size()) + " folds, two-fold estimator needs exactly 2");
    }
  }
  const double num_cells = static_cast<double>(cells.size());

  double h_k = 0.0;
  double numerator = 0.0;
  for (const auto& cell : cells) {
    const double s1 = cell.folds[0]->mean_surrogate(0);
    const double s2 = cell.folds[1]->mean_surrogate(0);
    const double y1 = cell.folds[0]->mean_outcome;
    const double y2 = cell.folds[1]->mean_outcome;
    h_k += s1 * s2;
    numerator += 0.5 * (s1 * y2 + s2 * y1);
  }

  EstimateReport report;
  report.tag = EstimatorTag::kJive2fold;
  report.gram = Eigen::MatrixXd::Constant(1, 1, h_k);

  if (h_k <= 0.0) {
    std::ostringstream msg;
    msg << "weak identification: H_K = " << h_k << " is not positive";
    throw_numeric(msg.str());
  }
  const double beta = numerator / h_k;
  report.beta_hat = Eigen::VectorXd::Constant(1, beta);

  double eta_sq = 0.0;
  double eps_sq = 0.0;
  for (const auto& cell : cells) {
    const double s1 = cell.folds[0]->mean_surrogate(0);
    const double s2 = cell.folds[1]->mean_surrogate(0);
    const double y1 = cell.folds[0]->mean_outcome;
    const double y2 = cell.folds[1]->mean_outcome;
    const double ds = s1 - s2;
    const double dr = (y1 - beta * s1) - (y2 - beta * s2);
    eta_sq += ds * ds / 2.0;
    eps_sq += dr * dr / 2.0;
  }
  const double sigma_eta = std::sqrt(eta_sq / num_cells);
  const double sigma_eps = std::sqrt(eps_sq / num_cells);
  report.sigma_eta_hat = sigma_eta;
  report.sigma_eps_hat = sigma_eps;

  const double scaled_h = h_k / std::sqrt(num_cells);
  if (sigma_eta > 0.0 && scaled_h < 1e-8 * sigma_eta * sigma_eta) {
    std::ostringstream msg;
    msg << "weak identification: H_K / sqrt(K) = " << scaled_h
        << " is negligible against the noise scale " << sigma_eta * sigma_eta;
    throw_numeric(msg.str());
  }

  const double half_width =
      normal_quantile(1.0 - alpha / 2.0) * sigma_eta * sigma_eps / scaled_h;
  report.ci_lower = beta - half_width;
  report.ci_upper = beta + half_width;
  return report;
}

EstimateReport tsls(std::span<const CellFoldAggregate> aggregates) {
  const auto cells = group_by_cell(aggregates, 1);
  const int dim = static_cast<int>(cells.front().weighted_sum.size());
  if (static_cast<int>(cells.size()) < dim) {
    throw_data("need at least d=" + std::to_string(dim) + " cells, have " +
               std::to_string(cells.size()));
  }

  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(dim);
  std::vector<Eigen::RowVectorXd> cell_means(cells.size());
  std::vector<double> cell_outcomes(cells.size());
  for (std::size_t a = 0; a < cells.size(); ++a) {
    cell_means[a] = cells[a].weighted_sum / static_cast<double>(cells[a].total_count);
    cell_outcomes[a] =
        cells[a].weighted_outcome_sum / static_cast<double>(cells[a].total_count);
    gram.noalias() += cell_means[a].transpose() * cell_means[a];
    rhs.noalias() += cell_means[a].transpose() * cell_outcomes[a];
  }

  EstimateReport report;
  report.tag = EstimatorTag::kTsls;
  report.gram = gram;
  const SolveResult solve = svd_solve(gram, rhs, "TSLS Gram matrix");
  report.beta_hat = solve.x;
  report.condition_warning = solve.condition_warning;

  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(dim, dim);
  for (std::size_t a = 0; a < cells.size(); ++a) {
    const double residual = cell_outcomes[a] - cell_means[a].dot(report.beta_hat);
    meat.noalias() += cell_means[a].transpose() * (residual * residual) * cell_means[a];
  }
  report.beta_cov = sandwich(gram, meat);
  return report;
}

EstimateReport ols_surrogate_index(const Dataset& dataset) {
  const int dim = dataset.surrogate_dim();
  if (dataset.size() < dim) {
    throw_data("need at least d=" + std::to_string(dim) + " units, have " +
               std::to_string(dataset.size()));
  }
  const Eigen::MatrixXd& s = dataset.surrogates();
  Eigen::Map<const Eigen::VectorXd> y(dataset.outcomes().data(), dataset.size());

  const Eigen::MatrixXd gram = s.transpose() * s;
  const Eigen::VectorXd rhs = s.transpose() * y;

  EstimateReport report;
  report.tag = EstimatorTag::kOls;
  report.gram = gram;
  const SolveResult solve = svd_solve(gram, rhs, "OLS Gram matrix");
  report.beta_hat = solve.x;
  report.condition_warning = solve.condition_warning;

  const Eigen::VectorXd residuals = y - s * report.beta_hat;
  const Eigen::MatrixXd meat =
      s.transpose() * residuals.array().square().matrix().asDiagonal() * s;
  report.beta_cov = sandwich(gram, meat);
  return report;
}

}  // namespace bridgeiv
