#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "crossfold_risk.hpp"
#include "data_model.hpp"

namespace bridgeiv {

// A fully specified discrete data-generating process over
// (A, U1, U2, S1, S2, Y) potential-outcome tables:
//   S1(a) | U1   ~ s1_given_u1[a]          (confounded mediator)
//   U2(a)        ~ u2_given_a[a]           (unmediated channel)
//   S2(u2)       ~ s2_given_u2             (proxy for U2, independent of the rest)
//   E[Y(s1,s2,u2) | U1=u1] = y_mean(u1; s1,s2,u2)
// Treatments [0, num_training) carry the design distribution treatment_probs;
// the remaining treatments are held out for transfer checks.
class FiniteDgp {
 public:
  FiniteDgp(Eigen::VectorXd s1_values, Eigen::VectorXd s2_values, Eigen::VectorXd u1_values,
            Eigen::VectorXd u2_values, Eigen::VectorXd u1_probs, int num_training,
            int num_holdout, Eigen::VectorXd treatment_probs,
            std::vector<Eigen::MatrixXd> s1_given_u1, std::vector<Eigen::VectorXd> u2_given_a,
            Eigen::MatrixXd s2_given_u2, Eigen::MatrixXd y_mean);

  int s1_size() const { return static_cast<int>(s1_values_.size()); }
  int s2_size() const { return static_cast<int>(s2_values_.size()); }
  int u1_size() const { return static_cast<int>(u1_values_.size()); }
  int u2_size() const { return static_cast<int>(u2_values_.size()); }
  int num_training() const { return num_training_; }
  int num_treatments() const { return num_training_ + num_holdout_; }
  int num_holdout() const { return num_holdout_; }

  const Eigen::VectorXd& s1_values() const { return s1_values_; }
  const Eigen::VectorXd& s2_values() const { return s2_values_; }
  const Eigen::VectorXd& u1_values() const { return u1_values_; }
  const Eigen::VectorXd& u2_values() const { return u2_values_; }
  const Eigen::VectorXd& u1_probs() const { return u1_probs_; }
  double treatment_prob(int a) const { return treatment_probs_(a); }
  const Eigen::VectorXd& treatment_probs() const { return treatment_probs_; }
  const Eigen::MatrixXd& s1_given_u1(int a) const { return s1_given_u1_[a]; }
  const Eigen::VectorXd& u2_given_a(int a) const { return u2_given_a_[a]; }
  const Eigen::MatrixXd& s2_given_u2() const { return s2_given_u2_; }

  // E[Y(s1,s2,u2) | U1=u1] table access.
  double y_mean(int u1, int s1, int s2, int u2) const {
    return y_mean_(u1, (s1 * s2_size() + s2) * u2_size() + u2);
  }
  const Eigen::MatrixXd& y_mean_table() const { return y_mean_; }

  // P(S1 = s1 | A = a), integrating out U1.
  Eigen::VectorXd s1_marginal(int a) const;
  // P(S2 = s2 | A = a), integrating out U2.
  Eigen::VectorXd s2_marginal(int a) const;
  // E[Y | A = a] (equivalently E[Y(a)]), by exhaustive summation.
  double outcome_mean(int a) const;
  // Rows: training treatments; columns: (s1, u2) pairs; entries
  // P(S1=s1, U2=u2 | A=a). Full column rank is the completeness condition.
  Eigen::MatrixXd completeness_matrix() const;
  // Rows: training treatments; columns: (s1, s2) pairs; entries
  // P(S1=s1, S2=s2 | A=a). Coefficient matrix of the bridge equation.
  Eigen::MatrixXd bridge_matrix() const;
  // All (s1, s2) value pairs as rows, in column-flattened order; the
  // support of tabular bridge functions for this DGP.
  Eigen::MatrixXd surrogate_support() const;

 private:
  Eigen::VectorXd s1_values_, s2_values_, u1_values_, u2_values_;
  Eigen::VectorXd u1_probs_;
  int num_training_ = 0;
  int num_holdout_ = 0;
  Eigen::VectorXd treatment_probs_;
  std::vector<Eigen::MatrixXd> s1_given_u1_;  // per a: (u1, s1), rows sum to 1
  std::vector<Eigen::VectorXd> u2_given_a_;   // per a: (u2)
  Eigen::MatrixXd s2_given_u2_;               // (u2, s2), rows sum to 1
  Eigen::MatrixXd y_mean_;                    // (u1, flat(s1,s2,u2))
};

struct DgpDiagnostics {
  double max_probability_error = 0.0;  // worst |row sum - 1|
  // Largest violation of stratum-effect homogeneity:
  // max over (a, s2, u2) of |sum_{s1,u1} p(u1) P(s1|a,u1) phi(s1,s2,u1,u2)|
  // where phi is the centered stratum effect.
  double stratum_residual = 0.0;
  int completeness_rank = 0;
  double completeness_sigma_min = 0.0;
  int completeness_required_rank = 0;
  int proxy_rank = 0;  // row rank of P(S2|U2); full rank makes S2 informative for U2
  double proxy_sigma_min = 0.0;
};

DgpDiagnostics diagnose(const FiniteDgp& dgp);

// Throws a data error when probabilities do not normalize, stratum
// homogeneity fails, the proxy matrix is row-rank deficient, or the
// completeness matrix is column-rank deficient (naming the achieved rank).
void validate_dgp(const FiniteDgp& dgp);

struct FiniteDgpParams {
  int num_training = 6;
  int num_holdout = 1;
  int s1_size = 2;
  int s2_size = 2;
  int u1_size = 2;
  int u2_size = 2;
  double outcome_scale = 1.0;        // scale of the shared outcome table f(s1,s2,u2)
  double stratum_shift_scale = 0.5;  // scale of the mean-zero additive stratum shift g(u1)
  std::uint64_t seed = 0;
};

// Randomly generated valid instance. The outcome table is built additively,
// E[Y(s1,s2,u2)|U1=u1] = f(s1,s2,u2) + g(u1) with E[g(U1)] = 0, which makes
// the stratum-homogeneity condition hold identically; probability tables are
// mixed toward uniform so the completeness matrix stays well conditioned.
// Re-draws internally (deterministically) if a draw is rank-deficient.
FiniteDgp build_finite_dgp(const FiniteDgpParams& params);

// Deliberately broken instance: the stratum shift is modulated by s1,
// g(u1) * w(s1), so the stratum effect no longer integrates to zero and the
// held-out transfer fails even though the training moments are matched
// exactly. Searches seeds deterministically until the transfer gap exceeds
// min_gap.
FiniteDgp build_stratum_violating_dgp(std::uint64_t seed, double min_gap = 1e-2);

struct BridgeSolution {
  BridgeFunction h;
  double residual_norm = 0.0;  // max over training a of |E[Y - h(S) | A=a]|
};

// Solves sum_{s1,s2} P(s1,s2|a) h(s1,s2) = E[Y|a] over training treatments
// for a tabular h (minimum-norm least squares when underdetermined); fails
// when no solution fits within tolerance, which signals that no bridge
// function exists for this instance.
BridgeSolution solve_bridge(const FiniteDgp& dgp, double tolerance = 1e-10);

struct TransferCheck {
  double lhs = 0.0;  // E[Y(a')]
  double rhs = 0.0;  // E[h(S(a'))]
  double gap = 0.0;  // |lhs - rhs|
};

// Exact-summation check that the training-identified bridge transfers to a
// held-out treatment: E[Y(a')] versus E[h(S(a'))].
TransferCheck verify_holdout_transfer(const FiniteDgp& dgp, const BridgeFunction& h,
                                      int holdout_treatment);

// Samples an experiment-log dataset from the DGP: each cell draws a training
// treatment from the design distribution, units draw (S1, S2, Y); the
// surrogate is the pair (s1, s2). Outcomes get +-outcome_noise with equal
// probability around their conditional mean. Folds are assigned balanced at
// random from the same seed.
Dataset sample_finite_dgp_dataset(const FiniteDgp& dgp, int num_cells, int units_per_cell,
                                  int num_folds, double outcome_noise, std::uint64_t seed);

}  // namespace bridgeiv
