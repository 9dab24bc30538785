#include "crossfold_risk.hpp"

#include <sstream>

#include "errors.hpp"
#include "identification.hpp"
#include "linalg.hpp"

namespace bridgeiv {

namespace {

std::string describe_point(const Eigen::RowVectorXd& row) {
  std::ostringstream out;
  out << "(";
  for (Eigen::Index j = 0; j < row.size(); ++j) {
    if (j) out << ", ";
    out << row(j);
  }
  out << ")";
  return out.str();
}

}  // namespace

BridgeFunction BridgeFunction::linear(Eigen::VectorXd coefficients) {
  if (coefficients.size() < 1) throw_config("linear bridge needs at least one coefficient");
  BridgeFunction h;
  h.is_linear_ = true;
  h.coefficients_ = std::move(coefficients);
  return h;
}

BridgeFunction BridgeFunction::tabular(Eigen::MatrixXd support_points, Eigen::VectorXd values) {
  if (support_points.rows() != values.size() || support_points.rows() == 0) {
    throw_config("tabular bridge needs one value per support point");
  }
  BridgeFunction h;
  h.is_linear_ = false;
  h.support_points_ = std::move(support_points);
  h.values_ = std::move(values);
  return h;
}

int BridgeFunction::dim() const {
  return is_linear_ ? static_cast<int>(coefficients_.size())
                    : static_cast<int>(support_points_.cols());
}

const Eigen::VectorXd& BridgeFunction::coefficients() const {
  if (!is_linear_) throw_config("not a linear bridge function");
  return coefficients_;
}

const Eigen::MatrixXd& BridgeFunction::support_points() const {
  if (is_linear_) throw_config("not a tabular bridge function");
  return support_points_;
}

const Eigen::VectorXd& BridgeFunction::values() const {
  if (is_linear_) throw_config("not a tabular bridge function");
  return values_;
}

double BridgeFunction::operator()(const Eigen::RowVectorXd& surrogate) const {
  if (is_linear_) {
    if (surrogate.size() != coefficients_.size()) {
      throw_data("surrogate length " + std::to_string(surrogate.size()) +
                 " does not match linear bridge dimension " +
                 std::to_string(coefficients_.size()));
    }
    return surrogate.dot(coefficients_.transpose());
  }
  if (surrogate.size() != support_points_.cols()) {
    throw_data("surrogate length " + std::to_string(surrogate.size()) +
               " does not match tabular support dimension " +
               std::to_string(support_points_.cols()));
  }
  for (Eigen::Index r = 0; r < support_points_.rows(); ++r) {
    if ((support_points_.row(r).array() == surrogate.array()).all()) return values_(r);
  }
  throw_data("tabular bridge evaluated off its support at " + describe_point(surrogate));
}

namespace {

// Per-(cell, fold) means of an arbitrary unit-level function, plus the
// leave-fold-out means, shared by the risk evaluation paths.
struct FoldMeans {
  Eigen::MatrixXd own;        // (cell, fold) mean over V = v
  Eigen::MatrixXd leave_out;  // (cell, fold) mean over V != v
};

template <typename UnitFn>
FoldMeans fold_means(const Dataset& dataset, UnitFn&& fn) {
  const int num_cells = dataset.num_cells();
  const int num_folds = dataset.num_folds();
  Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(num_cells, num_folds);
  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(num_cells, num_folds);
  for (std::int64_t i = 0; i < dataset.size(); ++i) {
    const int a = dataset.cell_id(i) - 1;
    const int v = dataset.fold_id(i) - 1;
    sums(a, v) += fn(i);
    counts(a, v) += 1.0;
  }
  FoldMeans means;
  means.own = sums.array() / counts.array();
  means.leave_out.resize(num_cells, num_folds);
  for (int a = 0; a < num_cells; ++a) {
    const double total_sum = sums.row(a).sum();
    const double total_count = counts.row(a).sum();
    for (int v = 0; v < num_folds; ++v) {
      means.leave_out(a, v) = (total_sum - sums(a, v)) / (total_count - counts(a, v));
    }
  }
  return means;
}

void require_folded(const Dataset& dataset) {
  if (!dataset.folds_assigned()) throw_data("cross-fold risk needs assigned folds");
  dataset.validate();
}

EmpiricalRiskValue risk_from_means(const FoldMeans& h_means, const FoldMeans& y_means) {
  const double cells_folds =
      static_cast<double>(h_means.own.rows()) * static_cast<double>(h_means.own.cols());
  EmpiricalRiskValue out;
  out.cross_term = -(y_means.own.array() * h_means.leave_out.array()).sum() / cells_folds;
  out.quadratic_term =
      0.5 * (h_means.own.array() * h_means.leave_out.array()).sum() / cells_folds;
  out.value = out.cross_term + out.quadratic_term;
  return out;
}

}  // namespace

EmpiricalRiskValue empirical_risk(const BridgeFunction& h, const Dataset& dataset) {
  require_folded(dataset);
  const FoldMeans h_means =
      fold_means(dataset, [&](std::int64_t i) { return h(dataset.surrogate(i)); });
  const FoldMeans y_means = fold_means(dataset, [&](std::int64_t i) { return dataset.outcome(i); });
  return risk_from_means(h_means, y_means);
}

std::pair<Eigen::VectorXd, EmpiricalRiskValue> minimize_risk_linear(const Dataset& dataset) {
  require_folded(dataset);
  const int dim = dataset.surrogate_dim();

  // Basis risks: cross_term is linear in h and quadratic_term is a quadratic
  // form, so evaluating the risk at e_j and e_j + e_k recovers the full
  // normal equations of the quadratic objective.
  std::vector<EmpiricalRiskValue> basis(dim);
  for (int j = 0; j < dim; ++j) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(dim);
    e(j) = 1.0;
    basis[j] = empirical_risk(BridgeFunction::linear(e), dataset);
  }
  Eigen::MatrixXd quad(dim, dim);
  Eigen::VectorXd rhs(dim);
  for (int j = 0; j < dim; ++j) {
    quad(j, j) = 2.0 * basis[j].quadratic_term;
    rhs(j) = -basis[j].cross_term;
    for (int k = j + 1; k < dim; ++k) {
      Eigen::VectorXd e = Eigen::VectorXd::Zero(dim);
      e(j) = 1.0;
      e(k) = 1.0;
      const EmpiricalRiskValue pair_risk = empirical_risk(BridgeFunction::linear(e), dataset);
      quad(j, k) = pair_risk.quadratic_term - basis[j].quadratic_term - basis[k].quadratic_term;
      quad(k, j) = quad(j, k);
    }
  }

  const Eigen::VectorXd beta =
      svd_solve(quad, rhs, "cross-fold risk quadratic form").x;
  return {beta, empirical_risk(BridgeFunction::linear(beta), dataset)};
}

std::pair<std::size_t, EmpiricalRiskValue> minimize_risk_finite_class(
    const Dataset& dataset, std::span<const BridgeFunction> candidates) {
  if (candidates.empty()) throw_config("empty candidate list");
  require_folded(dataset);
  const FoldMeans y_means = fold_means(dataset, [&](std::int64_t i) { return dataset.outcome(i); });

  std::size_t best = 0;
  EmpiricalRiskValue best_risk;
  for (std::size_t j = 0; j < candidates.size(); ++j) {
    const BridgeFunction& h = candidates[j];
    const FoldMeans h_means =
        fold_means(dataset, [&](std::int64_t i) { return h(dataset.surrogate(i)); });
    const EmpiricalRiskValue risk = risk_from_means(h_means, y_means);
    if (j == 0 || risk.value < best_risk.value) {
      best = j;
      best_risk = risk;
    }
  }
  return {best, best_risk};
}

double population_risk(const BridgeFunction& h, const FiniteDgp& dgp) {
  KahanSum risk;
  Eigen::RowVectorXd point(2);
  for (int a = 0; a < dgp.num_training(); ++a) {
    const Eigen::VectorXd p_s1 = dgp.s1_marginal(a);
    const Eigen::VectorXd p_s2 = dgp.s2_marginal(a);
    KahanSum h_mean;
    for (int i1 = 0; i1 < dgp.s1_size(); ++i1) {
      for (int i2 = 0; i2 < dgp.s2_size(); ++i2) {
        point(0) = dgp.s1_values()(i1);
        point(1) = dgp.s2_values()(i2);
        h_mean.add(p_s1(i1) * p_s2(i2) * h(point));
      }
    }
    const double y_mean = dgp.outcome_mean(a);
    const double hm = h_mean.value();
    risk.add(dgp.treatment_prob(a) * (-y_mean * hm + 0.5 * hm * hm));
  }
  return risk.value();
}

}  // namespace bridgeiv
