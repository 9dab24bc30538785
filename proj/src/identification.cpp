#include "identification.hpp"

#include <cmath>
#include <sstream>

#include "errors.hpp"
#include "linalg.hpp"
#include "rng.hpp"

namespace bridgeiv {

namespace {

double uniform01(PhiloxRng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double uniform(PhiloxRng& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

// Probability vector mixed halfway toward uniform, which keeps entries
// bounded away from zero and the induced moment matrices well conditioned.
Eigen::VectorXd random_probs(PhiloxRng& rng, int n) {
  Eigen::VectorXd p(n);
  for (int i = 0; i < n; ++i) p(i) = -std::log(1.0 - uniform01(rng));
  p /= p.sum();
  return 0.5 * p + Eigen::VectorXd::Constant(n, 0.5 / n);
}

// Strictly increasing support values in (-1, 1).
Eigen::VectorXd random_support(PhiloxRng& rng, int n) {
  Eigen::VectorXd values(n);
  for (int i = 0; i < n; ++i) {
    values(i) = -1.0 + 2.0 * (i + uniform(rng, 0.1, 0.9)) / n;
  }
  return values;
}

int sample_index(const Eigen::VectorXd& probs, double u) {
  double cdf = 0.0;
  for (int i = 0; i < probs.size(); ++i) {
    cdf += probs(i);
    if (u < cdf) return i;
  }
  return static_cast<int>(probs.size()) - 1;
}

int svd_rank(const Eigen::MatrixXd& m, double* sigma_min_at_required, int required_rank) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  const auto& sv = svd.singularValues();
  const double tol = 1e-10 * (sv.size() > 0 ? sv(0) : 0.0);
  int rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > tol) ++rank;
  }
  if (sigma_min_at_required != nullptr) {
    *sigma_min_at_required =
        required_rank >= 1 && required_rank <= sv.size() ? sv(required_rank - 1) : 0.0;
  }
  return rank;
}

}  // namespace

FiniteDgp::FiniteDgp(Eigen::VectorXd s1_values, Eigen::VectorXd s2_values,
                     Eigen::VectorXd u1_values, Eigen::VectorXd u2_values,
                     Eigen::VectorXd u1_probs, int num_training, int num_holdout,
                     Eigen::VectorXd treatment_probs, std::vector<Eigen::MatrixXd> s1_given_u1,
                     std::vector<Eigen::VectorXd> u2_given_a, Eigen::MatrixXd s2_given_u2,
                     Eigen::MatrixXd y_mean)
    : s1_values_(std::move(s1_values)),
      s2_values_(std::move(s2_values)),
      u1_values_(std::move(u1_values)),
      u2_values_(std::move(u2_values)),
      u1_probs_(std::move(u1_probs)),
      num_training_(num_training),
      num_holdout_(num_holdout),
      treatment_probs_(std::move(treatment_probs)),
      s1_given_u1_(std::move(s1_given_u1)),
      u2_given_a_(std::move(u2_given_a)),
      s2_given_u2_(std::move(s2_given_u2)),
      y_mean_(std::move(y_mean)) {
  const int num_total = num_training_ + num_holdout_;
  if (num_training_ < 1 || num_holdout_ < 1) {
    throw_config("FiniteDgp: need at least one training and one held-out treatment");
  }
  if (static_cast<int>(s1_given_u1_.size()) != num_total ||
      static_cast<int>(u2_given_a_.size()) != num_total) {
    throw_config("FiniteDgp: per-treatment tables must cover every treatment");
  }
  if (treatment_probs_.size() != num_training_) {
    throw_config("FiniteDgp: design distribution must cover the training treatments");
  }
  if (u1_probs_.size() != u1_values_.size()) throw_config("FiniteDgp: U1 support/probs mismatch");
  for (const auto& table : s1_given_u1_) {
    if (table.rows() != u1_values_.size() || table.cols() != s1_values_.size()) {
      throw_config("FiniteDgp: S1 table shape mismatch");
    }
  }
  for (const auto& table : u2_given_a_) {
    if (table.size() != u2_values_.size()) throw_config("FiniteDgp: U2 table shape mismatch");
  }
  if (s2_given_u2_.rows() != u2_values_.size() || s2_given_u2_.cols() != s2_values_.size()) {
    throw_config("FiniteDgp: S2 table shape mismatch");
  }
  if (y_mean_.rows() != u1_values_.size() ||
      y_mean_.cols() != s1_values_.size() * s2_values_.size() * u2_values_.size()) {
    throw_config("FiniteDgp: outcome table shape mismatch");
  }
}

Eigen::VectorXd FiniteDgp::s1_marginal(int a) const {
  return s1_given_u1_[a].transpose() * u1_probs_;
}

Eigen::VectorXd FiniteDgp::s2_marginal(int a) const {
  return s2_given_u2_.transpose() * u2_given_a_[a];
}

double FiniteDgp::outcome_mean(int a) const {
  KahanSum sum;
  for (int iu1 = 0; iu1 < u1_size(); ++iu1) {
    for (int i1 = 0; i1 < s1_size(); ++i1) {
      const double p1 = u1_probs_(iu1) * s1_given_u1_[a](iu1, i1);
      for (int iu2 = 0; iu2 < u2_size(); ++iu2) {
        const double p2 = p1 * u2_given_a_[a](iu2);
        for (int i2 = 0; i2 < s2_size(); ++i2) {
          sum.add(p2 * s2_given_u2_(iu2, i2) * y_mean(iu1, i1, i2, iu2));
        }
      }
    }
  }
  return sum.value();
}

Eigen::MatrixXd FiniteDgp::completeness_matrix() const {
  Eigen::MatrixXd m(num_training_, s1_size() * u2_size());
  for (int a = 0; a < num_training_; ++a) {
    const Eigen::VectorXd p_s1 = s1_marginal(a);
    for (int i1 = 0; i1 < s1_size(); ++i1) {
      for (int iu2 = 0; iu2 < u2_size(); ++iu2) {
        m(a, i1 * u2_size() + iu2) = p_s1(i1) * u2_given_a_[a](iu2);
      }
    }
  }
  return m;
}

Eigen::MatrixXd FiniteDgp::bridge_matrix() const {
  Eigen::MatrixXd m(num_training_, s1_size() * s2_size());
  for (int a = 0; a < num_training_; ++a) {
    const Eigen::VectorXd p_s1 = s1_marginal(a);
    const Eigen::VectorXd p_s2 = s2_marginal(a);
    for (int i1 = 0; i1 < s1_size(); ++i1) {
      for (int i2 = 0; i2 < s2_size(); ++i2) {
        m(a, i1 * s2_size() + i2) = p_s1(i1) * p_s2(i2);
      }
    }
  }
  return m;
}

Eigen::MatrixXd FiniteDgp::surrogate_support() const {
  Eigen::MatrixXd support(s1_size() * s2_size(), 2);
  for (int i1 = 0; i1 < s1_size(); ++i1) {
    for (int i2 = 0; i2 < s2_size(); ++i2) {
      support(i1 * s2_size() + i2, 0) = s1_values_(i1);
      support(i1 * s2_size() + i2, 1) = s2_values_(i2);
    }
  }
  return support;
}

DgpDiagnostics diagnose(const FiniteDgp& dgp) {
  DgpDiagnostics d;

  auto track_probs = [&](const Eigen::VectorXd& p) {
    d.max_probability_error = std::max(d.max_probability_error, std::abs(p.sum() - 1.0));
    if (p.minCoeff() < 0.0) {
      d.max_probability_error = std::max(d.max_probability_error, -p.minCoeff() + 1.0);
    }
  };
  track_probs(dgp.u1_probs());
  track_probs(dgp.treatment_probs());
  for (int a = 0; a < dgp.num_treatments(); ++a) {
    for (int iu1 = 0; iu1 < dgp.u1_size(); ++iu1) {
      track_probs(dgp.s1_given_u1(a).row(iu1).transpose());
    }
    track_probs(dgp.u2_given_a(a));
  }
  for (int iu2 = 0; iu2 < dgp.u2_size(); ++iu2) {
    track_probs(dgp.s2_given_u2().row(iu2).transpose());
  }

  // Centered stratum effect phi(s1,s2,u1,u2) = E[Y|U1=u1] - E[Y], integrated
  // against the joint law of (S1(a), U1); homogeneity requires this to vanish
  // for every treatment (held-out ones included) and every (s2, u2).
  for (int a = 0; a < dgp.num_treatments(); ++a) {
    for (int i2 = 0; i2 < dgp.s2_size(); ++i2) {
      for (int iu2 = 0; iu2 < dgp.u2_size(); ++iu2) {
        KahanSum sum;
        for (int i1 = 0; i1 < dgp.s1_size(); ++i1) {
          double marginal_y = 0.0;
          for (int iu1 = 0; iu1 < dgp.u1_size(); ++iu1) {
            marginal_y += dgp.u1_probs()(iu1) * dgp.y_mean(iu1, i1, i2, iu2);
          }
          for (int iu1 = 0; iu1 < dgp.u1_size(); ++iu1) {
            const double phi = dgp.y_mean(iu1, i1, i2, iu2) - marginal_y;
            sum.add(dgp.u1_probs()(iu1) * dgp.s1_given_u1(a)(iu1, i1) * phi);
          }
        }
        d.stratum_residual = std::max(d.stratum_residual, std::abs(sum.value()));
      }
    }
  }

  d.completeness_required_rank = dgp.s1_size() * dgp.u2_size();
  d.completeness_rank =
      svd_rank(dgp.completeness_matrix(), &d.completeness_sigma_min, d.completeness_required_rank);
  d.proxy_rank = svd_rank(dgp.s2_given_u2(), &d.proxy_sigma_min, dgp.u2_size());
  return d;
}

void validate_dgp(const FiniteDgp& dgp) {
  const DgpDiagnostics d = diagnose(dgp);
  if (d.max_probability_error > 1e-12) {
    throw_data("probability tables do not normalize: worst error " +
               std::to_string(d.max_probability_error));
  }
  if (d.stratum_residual > 1e-10) {
    std::ostringstream msg;
    msg << "stratum-effect homogeneity fails: residual " << d.stratum_residual;
    throw_data(msg.str());
  }
  if (d.proxy_rank < dgp.u2_size()) {
    std::ostringstream msg;
    msg << "proxy matrix P(S2|U2) has row rank " << d.proxy_rank << ", need " << dgp.u2_size()
        << "; S2 cannot identify U2";
    throw_data(msg.str());
  }
  if (d.completeness_rank < d.completeness_required_rank) {
    std::ostringstream msg;
    msg << "completeness fails: P(S1,U2|A) has column rank " << d.completeness_rank
        << " over training treatments, need " << d.completeness_required_rank;
    throw_data(msg.str());
  }
}

namespace {

struct DrawnTables {
  Eigen::VectorXd s1_values, s2_values, u1_values, u2_values;
  Eigen::VectorXd u1_probs, treatment_probs;
  std::vector<Eigen::MatrixXd> s1_given_u1;
  std::vector<Eigen::VectorXd> u2_given_a;
  Eigen::MatrixXd s2_given_u2;
  Eigen::MatrixXd f_table;  // shared outcome component f(s1,s2,u2)
  Eigen::VectorXd g_shift;  // centered stratum shift g(u1)
};

DrawnTables draw_tables(const FiniteDgpParams& params, std::uint64_t seed,
                        bool polarize_s1_tables) {
  DrawnTables t;
  PhiloxRng rng(seed, 0);
  t.s1_values = random_support(rng, params.s1_size);
  t.s2_values = random_support(rng, params.s2_size);
  t.u1_values = random_support(rng, params.u1_size);
  t.u2_values = random_support(rng, params.u2_size);
  t.u1_probs = random_probs(rng, params.u1_size);
  t.treatment_probs = random_probs(rng, params.num_training);

  const int num_total = params.num_training + params.num_holdout;
  t.s1_given_u1.reserve(num_total);
  t.u2_given_a.reserve(num_total);
  for (int a = 0; a < num_total; ++a) {
    Eigen::MatrixXd table(params.u1_size, params.s1_size);
    for (int iu1 = 0; iu1 < params.u1_size; ++iu1) {
      Eigen::VectorXd row = random_probs(rng, params.s1_size);
      if (polarize_s1_tables) {
        // Push most of the mass to the stratum's own column so S1(a)
        // depends strongly on U1.
        Eigen::VectorXd peak = Eigen::VectorXd::Constant(params.s1_size, 0.05 / params.s1_size);
        peak(iu1 % params.s1_size) += 0.95;
        row = 0.2 * row + 0.8 * peak;
        row /= row.sum();
      }
      table.row(iu1) = row.transpose();
    }
    t.s1_given_u1.push_back(std::move(table));
    t.u2_given_a.push_back(random_probs(rng, params.u2_size));
  }

  t.s2_given_u2.resize(params.u2_size, params.s2_size);
  for (int iu2 = 0; iu2 < params.u2_size; ++iu2) {
    t.s2_given_u2.row(iu2) = random_probs(rng, params.s2_size).transpose();
  }

  t.f_table.resize(1, params.s1_size * params.s2_size * params.u2_size);
  for (Eigen::Index j = 0; j < t.f_table.cols(); ++j) {
    t.f_table(0, j) = params.outcome_scale * uniform(rng, -1.0, 1.0);
  }
  t.g_shift.resize(params.u1_size);
  for (int iu1 = 0; iu1 < params.u1_size; ++iu1) {
    t.g_shift(iu1) = params.stratum_shift_scale * uniform(rng, -1.0, 1.0);
  }
  t.g_shift.array() -= t.u1_probs.dot(t.g_shift);
  return t;
}

void check_params(const FiniteDgpParams& params) {
  if (params.s1_size < 2 || params.s2_size < 2 || params.u1_size < 2 || params.u2_size < 2) {
    throw_config("finite DGP supports need at least 2 atoms each");
  }
  if (params.num_training < 2) throw_config("need at least 2 training treatments");
  if (params.num_holdout < 1) throw_config("need at least 1 held-out treatment");
  if (params.s2_size < params.u2_size) {
    throw_config("S2 support must be at least as rich as U2 for the proxy to be informative");
  }
  if (params.num_training < params.s1_size * params.u2_size) {
    throw_config("completeness needs at least |S1|*|U2| = " +
                 std::to_string(params.s1_size * params.u2_size) + " training treatments, got " +
                 std::to_string(params.num_training));
  }
}

}  // namespace

FiniteDgp build_finite_dgp(const FiniteDgpParams& params) {
  check_params(params);
  std::string last_issue;
  for (int attempt = 0; attempt < 100; ++attempt) {
    DrawnTables t = draw_tables(params, derive_seed(params.seed, attempt), false);
    Eigen::MatrixXd y(params.u1_size, t.f_table.cols());
    for (int iu1 = 0; iu1 < params.u1_size; ++iu1) {
      y.row(iu1) = t.f_table.row(0).array() + t.g_shift(iu1);
    }
    FiniteDgp dgp(t.s1_values, t.s2_values, t.u1_values, t.u2_values, t.u1_probs,
                  params.num_training, params.num_holdout, t.treatment_probs,
                  std::move(t.s1_given_u1), std::move(t.u2_given_a), std::move(t.s2_given_u2),
                  std::move(y));
    const DgpDiagnostics d = diagnose(dgp);
    if (d.completeness_rank < d.completeness_required_rank ||
        d.completeness_sigma_min < 1e-4 || d.proxy_rank < params.u2_size ||
        d.proxy_sigma_min < 1e-4) {
      std::ostringstream issue;
      issue << "completeness rank " << d.completeness_rank << "/" << d.completeness_required_rank
            << " (sigma_min " << d.completeness_sigma_min << "), proxy rank " << d.proxy_rank
            << "/" << params.u2_size;
      last_issue = issue.str();
      continue;
    }
    validate_dgp(dgp);
    return dgp;
  }
  throw_data("could not draw a well-conditioned finite DGP in 100 attempts; last issue: " +
             last_issue);
}

FiniteDgp build_stratum_violating_dgp(std::uint64_t seed, double min_gap) {
  FiniteDgpParams params;
  params.s1_size = 2;
  params.s2_size = 2;
  params.u1_size = 2;
  params.u2_size = 2;
  // Square completeness matrix: the training moments stay exactly solvable,
  // so the failure isolated below is the transfer step, not bridge existence.
  params.num_training = params.s1_size * params.u2_size;
  params.num_holdout = 1;
  params.stratum_shift_scale = 1.0;
  for (int attempt = 0; attempt < 1000; ++attempt) {
    params.seed = derive_seed(seed, 7000 + attempt);
    DrawnTables t = draw_tables(params, params.seed, true);
    Eigen::MatrixXd y(params.u1_size, t.f_table.cols());
    for (int iu1 = 0; iu1 < params.u1_size; ++iu1) {
      for (int i1 = 0; i1 < params.s1_size; ++i1) {
        // Stratum shift modulated by s1: phi no longer integrates to zero
        // against the (S1(a), U1) joint law.
        const double w = i1 == 0 ? -1.0 : 1.0;
        for (int i2 = 0; i2 < params.s2_size; ++i2) {
          for (int iu2 = 0; iu2 < params.u2_size; ++iu2) {
            const int flat = (i1 * params.s2_size + i2) * params.u2_size + iu2;
            y(iu1, flat) = t.f_table(0, flat) + t.g_shift(iu1) * w;
          }
        }
      }
    }
    FiniteDgp dgp(t.s1_values, t.s2_values, t.u1_values, t.u2_values, t.u1_probs,
                  params.num_training, params.num_holdout, t.treatment_probs,
                  std::move(t.s1_given_u1), std::move(t.u2_given_a), std::move(t.s2_given_u2),
                  std::move(y));
    const DgpDiagnostics d = diagnose(dgp);
    if (d.completeness_rank < d.completeness_required_rank || d.completeness_sigma_min < 1e-4 ||
        d.proxy_rank < params.u2_size || d.stratum_residual < 1e-3) {
      continue;
    }
    try {
      const BridgeSolution bridge = solve_bridge(dgp);
      const TransferCheck check = verify_holdout_transfer(dgp, bridge.h, params.num_training);
      if (check.gap > min_gap) return dgp;
    } catch (const Error&) {
      continue;
    }
  }
  throw_data("could not construct a stratum-heterogeneity counterexample with gap > " +
             std::to_string(min_gap));
}

BridgeSolution solve_bridge(const FiniteDgp& dgp, double tolerance) {
  const Eigen::MatrixXd b = dgp.bridge_matrix();
  Eigen::VectorXd c(dgp.num_training());
  for (int a = 0; a < dgp.num_training(); ++a) c(a) = dgp.outcome_mean(a);

  const Eigen::VectorXd h_values = min_norm_least_squares(b, c);
  const double residual = (b * h_values - c).cwiseAbs().maxCoeff();
  if (residual > tolerance) {
    std::ostringstream msg;
    msg << "no bridge function matches the training moments: residual " << residual
        << " exceeds tolerance " << tolerance << "; bridge existence fails for this instance";
    throw_numeric(msg.str());
  }
  BridgeSolution solution{BridgeFunction::tabular(dgp.surrogate_support(), h_values), residual};
  return solution;
}

TransferCheck verify_holdout_transfer(const FiniteDgp& dgp, const BridgeFunction& h,
                                      int holdout_treatment) {
  if (holdout_treatment < dgp.num_training() || holdout_treatment >= dgp.num_treatments()) {
    throw_config("holdout treatment " + std::to_string(holdout_treatment) +
                 " is not excluded from training [0, " + std::to_string(dgp.num_training()) +
                 ")");
  }
  TransferCheck check;
  check.lhs = dgp.outcome_mean(holdout_treatment);

  KahanSum rhs;
  const Eigen::VectorXd p_s1 = dgp.s1_marginal(holdout_treatment);
  const Eigen::VectorXd p_s2 = dgp.s2_marginal(holdout_treatment);
  Eigen::RowVectorXd point(2);
  for (int i1 = 0; i1 < dgp.s1_size(); ++i1) {
    for (int i2 = 0; i2 < dgp.s2_size(); ++i2) {
      point(0) = dgp.s1_values()(i1);
      point(1) = dgp.s2_values()(i2);
      rhs.add(p_s1(i1) * p_s2(i2) * h(point));
    }
  }
  check.rhs = rhs.value();
  check.gap = std::abs(check.lhs - check.rhs);
  return check;
}

Dataset sample_finite_dgp_dataset(const FiniteDgp& dgp, int num_cells, int units_per_cell,
                                  int num_folds, double outcome_noise, std::uint64_t seed) {
  if (num_cells < 1 || units_per_cell < 1) {
    throw_config("need positive cell count and cell size");
  }
  Dataset dataset(num_cells, 2, units_per_cell, 0);
  Eigen::RowVectorXd surrogate(2);
  for (int cell = 1; cell <= num_cells; ++cell) {
    PhiloxRng rng(seed, static_cast<std::uint64_t>(cell));
    const int a = sample_index(dgp.treatment_probs(), uniform01(rng));
    for (int i = 0; i < units_per_cell; ++i) {
      const int iu1 = sample_index(dgp.u1_probs(), uniform01(rng));
      const int i1 =
          sample_index(dgp.s1_given_u1(a).row(iu1).transpose(), uniform01(rng));
      const int iu2 = sample_index(dgp.u2_given_a(a), uniform01(rng));
      const int i2 = sample_index(dgp.s2_given_u2().row(iu2).transpose(), uniform01(rng));
      double y = dgp.y_mean(iu1, i1, i2, iu2);
      if (outcome_noise != 0.0) {
        y += (rng() & 1u) ? outcome_noise : -outcome_noise;
      }
      surrogate(0) = dgp.s1_values()(i1);
      surrogate(1) = dgp.s2_values()(i2);
      dataset.add(cell, 0, surrogate, y);
    }
  }
  return assign_folds(dataset, num_folds, derive_seed(seed, 0xF01D));
}

}  // namespace bridgeiv
