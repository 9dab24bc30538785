#pragma once

#include <Eigen/Dense>
#include <string>

namespace bridgeiv {

// Relative singular-value thresholds for square-system solves.
// Failing systems name the offending singular value in the error message.
constexpr double kSingularRelTol = 1e-10;
constexpr double kConditionWarnRelTol = 1e-6;

struct SolveResult {
  Eigen::MatrixXd x;
  double sigma_min = 0.0;
  double sigma_max = 0.0;
  bool condition_warning = false;
};

// SVD-based solve of A x = b for small dense square A. Throws a numeric
// error when sigma_min < kSingularRelTol * sigma_max; sets condition_warning
// below kConditionWarnRelTol. `context` names the matrix in diagnostics.
SolveResult svd_solve(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                      const std::string& context);

// Minimum-norm least-squares solution of a (possibly rectangular,
// possibly rank-deficient) system. Singular values below
// rank_tol * sigma_max are treated as zero.
Eigen::VectorXd min_norm_least_squares(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                                       double rank_tol = 1e-12);

// Compensated (Kahan) accumulator for exhaustive summations over finite
// supports, where exactness matters more than speed.
class KahanSum {
 public:
  void add(double x) {
    const double y = x - compensation_;
    const double t = sum_ + y;
    compensation_ = (t - sum_) - y;
    sum_ = t;
  }
  double value() const { return sum_; }

 private:
  double sum_ = 0.0;
  double compensation_ = 0.0;
};

// Inverse standard-normal CDF (Wichura's AS 241, double precision).
// Accurate to well below 1e-10 over (0, 1); avoids any external
// statistics dependency.
double normal_quantile(double p);

}  // namespace bridgeiv
