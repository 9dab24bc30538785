#pragma once

#include <Eigen/Dense>
#include <span>
#include <utility>
#include <vector>

#include "data_model.hpp"

namespace bridgeiv {

class FiniteDgp;

// A candidate bridge function: either linear in the surrogate vector,
// h(S) = S beta, or a tabular lookup over a declared finite support.
// Tabular evaluation off the declared support is an error, never a silent 0.
class BridgeFunction {
 public:
  static BridgeFunction linear(Eigen::VectorXd coefficients);
  // support_points: one support atom per row; values: h at each atom.
  static BridgeFunction tabular(Eigen::MatrixXd support_points, Eigen::VectorXd values);

  double operator()(const Eigen::RowVectorXd& surrogate) const;

  bool is_linear() const { return is_linear_; }
  int dim() const;
  const Eigen::VectorXd& coefficients() const;
  const Eigen::MatrixXd& support_points() const;
  const Eigen::VectorXd& values() const;

 private:
  BridgeFunction() = default;

  bool is_linear_ = true;
  Eigen::VectorXd coefficients_;
  Eigen::MatrixXd support_points_;
  Eigen::VectorXd values_;
};

struct EmpiricalRiskValue {
  double value = 0.0;
  double cross_term = 0.0;      // -(1/KL) sum_{a,v} mean(Y)_{a,v} * lfo(h)_{a,v}
  double quadratic_term = 0.0;  // (1/2KL) sum_{a,v} mean(h)_{a,v} * lfo(h)_{a,v}
};

// Empirical cross-fold risk of h on a fold-assigned dataset: products of
// own-fold and leave-fold-out conditional means, averaged over cells and
// folds. The two terms are reported separately; value is their sum.
EmpiricalRiskValue empirical_risk(const BridgeFunction& h, const Dataset& dataset);

// Exact minimizer of the empirical cross-fold risk over linear bridge
// functions, assembled by polarizing the risk functional on basis
// directions and solving the symmetrized normal equations. This is an
// independent route to the same minimizer that the closed-form L-fold JIVE
// computes from aggregates.
std::pair<Eigen::VectorXd, EmpiricalRiskValue> minimize_risk_linear(const Dataset& dataset);

// Argmin of the empirical risk over a finite candidate list; ties break
// toward the lowest index.
std::pair<std::size_t, EmpiricalRiskValue> minimize_risk_finite_class(
    const Dataset& dataset, std::span<const BridgeFunction> candidates);

// Population cross-fold risk under a finite-support DGP, computed by exact
// summation: R(h) = -E_A[E[Y|A] E[h(S)|A]] + (1/2) E_A[E[h(S)|A]^2].
// Fold conditionals coincide with E[.|A] at population level because folds
// are exchangeable.
double population_risk(const BridgeFunction& h, const FiniteDgp& dgp);

}  // namespace bridgeiv
