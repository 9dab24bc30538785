#include "simulation.hpp"

#include <atomic>
#include <cmath>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include "errors.hpp"
#include "linalg.hpp"
#include "rng.hpp"

namespace bridgeiv {

namespace {

// Named streams within one simulated dataset / replication.
constexpr std::uint64_t kStreamStructural = 0;
constexpr std::uint64_t kStreamUnits = 1;
constexpr std::uint64_t kStreamFolds = 2;
constexpr std::uint64_t kStreamNovel = 3;

Eigen::VectorXd draw_normal_vector(PhiloxRng& rng, std::normal_distribution<double>& normal,
                                   int size, double scale) {
  Eigen::VectorXd v(size);
  for (int i = 0; i < size; ++i) v(i) = scale * normal(rng);
  return v;
}

}  // namespace

void LinearDgpConfig::validate() const {
  if (num_cells < 1 || units_per_cell < 1 || surrogate_dim < 1) {
    throw_config("num_cells, units_per_cell and surrogate_dim must be positive");
  }
  if (num_folds < 2) throw_config("num_folds must be at least 2");
  if (units_per_cell < num_folds) throw_config("units_per_cell must be at least num_folds");
  if (eps_scale < 0 || eta_scale < 0 || u_scale < 0 || pi_row_scale < 0 || meas_scale < 0) {
    throw_config("noise scales must be nonnegative");
  }
  if (beta && beta->size() != surrogate_dim) throw_config("beta dimension mismatch");
  if (gamma && gamma->size() != surrogate_dim) throw_config("gamma dimension mismatch");
  if (novel_first_stage.size() != 0 && novel_first_stage.size() != surrogate_dim) {
    throw_config("novel_first_stage dimension mismatch");
  }
}

Eigen::VectorXd LinearDgpConfig::resolved_novel_first_stage() const {
  return novel_first_stage.size() == 0 ? Eigen::VectorXd::Ones(surrogate_dim)
                                       : novel_first_stage;
}

std::pair<Dataset, GroundTruth> simulate_dataset(const LinearDgpConfig& config) {
  config.validate();
  const int dim = config.surrogate_dim;
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(dim));

  GroundTruth truth;
  {
    PhiloxRng rng(config.seed, kStreamStructural);
    std::normal_distribution<double> normal;
    truth.pi.resize(config.num_cells, dim);
    for (int a = 0; a < config.num_cells; ++a) {
      truth.pi.row(a) = draw_normal_vector(rng, normal, dim, config.pi_row_scale).transpose();
    }
    truth.beta = config.beta ? *config.beta : draw_normal_vector(rng, normal, dim, inv_sqrt_d);
    truth.gamma = config.gamma ? *config.gamma : draw_normal_vector(rng, normal, dim, inv_sqrt_d);
  }

  Dataset dataset(config.num_cells, dim, config.units_per_cell, 0);
  {
    PhiloxRng rng(config.seed, kStreamUnits);
    std::normal_distribution<double> normal;
    Eigen::RowVectorXd surrogate(dim);
    for (int a = 0; a < config.num_cells; ++a) {
      for (int i = 0; i < config.units_per_cell; ++i) {
        const double u = config.u_scale * normal(rng);
        surrogate = truth.pi.row(a);
        for (int j = 0; j < dim; ++j) {
          surrogate(j) += truth.gamma(j) * u + config.eta_scale * normal(rng);
        }
        const double y =
            surrogate.dot(truth.beta) + config.delta * u + config.eps_scale * normal(rng);
        if (config.meas_scale > 0.0) {
          for (int j = 0; j < dim; ++j) surrogate(j) += config.meas_scale * normal(rng);
        }
        dataset.add(a + 1, 0, surrogate, y);
      }
    }
  }
  Dataset folded = assign_folds(dataset, config.num_folds, derive_seed(config.seed, kStreamFolds));
  return {std::move(folded), std::move(truth)};
}

NovelCellResult evaluate_novel_cell(const EstimateReport& report, const GroundTruth& truth,
                                    const LinearDgpConfig& config, int novel_units, double alpha,
                                    std::uint64_t seed) {
  config.validate();
  if (novel_units < 2) throw_config("novel cell needs at least 2 units");
  if (!(alpha > 0.0 && alpha < 1.0)) throw_config("alpha must lie in (0, 1)");
  const int dim = config.surrogate_dim;
  if (report.beta_hat.size() != dim) {
    throw_data("estimate dimension " + std::to_string(report.beta_hat.size()) +
               " does not match config dimension " + std::to_string(dim));
  }
  if (!report.beta_cov) throw_data("estimate carries no covariance for the interval");

  const Eigen::VectorXd first_stage = config.resolved_novel_first_stage();

  PhiloxRng rng(seed, kStreamNovel);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd s(novel_units, dim);
  for (int i = 0; i < novel_units; ++i) {
    const double u = config.u_scale * normal(rng);
    for (int j = 0; j < dim; ++j) {
      s(i, j) = first_stage(j) + truth.gamma(j) * u + config.eta_scale * normal(rng);
    }
    if (config.meas_scale > 0.0) {
      for (int j = 0; j < dim; ++j) s(i, j) += config.meas_scale * normal(rng);
    }
  }

  const Eigen::RowVectorXd mean = s.colwise().mean();
  const Eigen::MatrixXd centered = s.rowwise() - mean;
  // Covariance of the novel-cell mean: sample covariance over units, divided
  // by the cell size.
  const Eigen::MatrixXd mean_cov =
      centered.transpose() * centered /
      (static_cast<double>(novel_units - 1) * static_cast<double>(novel_units));

  NovelCellResult result;
  result.point = mean.dot(report.beta_hat);
  result.target = first_stage.dot(truth.beta);
  result.sq_error = (result.target - result.point) * (result.target - result.point);

  const double variance = (mean * (*report.beta_cov) * mean.transpose()).value() +
                          report.beta_hat.dot(mean_cov * report.beta_hat);
  const double half_width = normal_quantile(1.0 - alpha / 2.0) * std::sqrt(std::max(variance, 0.0));
  result.ci_lower = result.point - half_width;
  result.ci_upper = result.point + half_width;
  result.covered = result.target >= result.ci_lower && result.target <= result.ci_upper;
  return result;
}

namespace {

struct ReplicationOutcome {
  // Per estimator, in SweepConfig::estimators order.
  std::vector<double> sq_error;
  std::vector<bool> covered;
  std::vector<bool> failed;
};

ReplicationOutcome run_replication(const SweepConfig& config, int k, std::uint64_t rep_seed) {
  LinearDgpConfig dgp = config.base;
  dgp.num_cells = k;
  dgp.seed = rep_seed;

  ReplicationOutcome outcome;
  const std::size_t n_estimators = config.estimators.size();
  outcome.sq_error.assign(n_estimators, 0.0);
  outcome.covered.assign(n_estimators, false);
  outcome.failed.assign(n_estimators, false);

  auto [dataset, truth] = simulate_dataset(dgp);
  std::vector<CellFoldAggregate> aggregates;
  const std::uint64_t novel_seed = derive_seed(rep_seed, 0x4E30);

  for (std::size_t e = 0; e < n_estimators; ++e) {
    try {
      EstimateReport report;
      switch (config.estimators[e]) {
        case EstimatorTag::kJiveLfold:
          if (aggregates.empty()) aggregates = aggregate(dataset);
          report = jive_lfold(aggregates);
          break;
        case EstimatorTag::kTsls:
          if (aggregates.empty()) aggregates = aggregate(dataset);
          report = tsls(aggregates);
          break;
        case EstimatorTag::kOls:
          report = ols_surrogate_index(dataset);
          break;
        case EstimatorTag::kJive2fold:
          throw_config("the two-fold interval estimator is not a sweep estimator");
      }
      // All estimators score the same novel-cell draw within a replication.
      const NovelCellResult novel = evaluate_novel_cell(report, truth, dgp, config.novel_units,
                                                        config.alpha, novel_seed);
      outcome.sq_error[e] = novel.sq_error;
      outcome.covered[e] = novel.covered;
    } catch (const Error&) {
      outcome.failed[e] = true;
    }
  }
  return outcome;
}

}  // namespace

SweepResult run_sweep(const SweepConfig& config) {
  if (config.k_grid.empty()) throw_config("empty K grid");
  if (config.n_replications < 1) throw_config("need at least 1 replication");
  if (config.parallelism < 1) throw_config("parallelism must be positive");
  for (const EstimatorTag tag : config.estimators) {
    if (tag == EstimatorTag::kJive2fold) {
      throw_config("sweep estimators must come from {JIVE_LFOLD, TSLS, OLS}");
    }
  }
  if (config.estimators.empty()) throw_config("no estimators selected");

  struct Job {
    std::size_t k_index;
    int replication;
  };
  std::vector<Job> jobs;
  jobs.reserve(config.k_grid.size() * config.n_replications);
  for (std::size_t ki = 0; ki < config.k_grid.size(); ++ki) {
    for (int r = 0; r < config.n_replications; ++r) {
      jobs.push_back(Job{ki, r});
    }
  }

  std::vector<ReplicationOutcome> outcomes(jobs.size());
  std::atomic<std::size_t> next_job{0};
  std::exception_ptr worker_error;
  std::mutex error_mutex;
  auto worker = [&]() {
    while (true) {
      const std::size_t j = next_job.fetch_add(1);
      if (j >= jobs.size()) return;
      try {
        const Job& job = jobs[j];
        const std::uint64_t rep_seed =
            derive_seed(config.seed, job.k_index, static_cast<std::uint64_t>(job.replication));
        outcomes[j] = run_replication(config, config.k_grid[job.k_index], rep_seed);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!worker_error) worker_error = std::current_exception();
        return;
      }
    }
  };

  const int threads = std::min<int>(config.parallelism, static_cast<int>(jobs.size()));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (worker_error) std::rethrow_exception(worker_error);

  SweepResult result;
  std::ostringstream failure_msg;
  for (std::size_t ki = 0; ki < config.k_grid.size(); ++ki) {
    for (std::size_t e = 0; e < config.estimators.size(); ++e) {
      SweepRow row;
      row.num_cells = config.k_grid[ki];
      row.estimator = config.estimators[e];

      double sum = 0.0, sum_sq = 0.0;
      int covered = 0, successes = 0, failures = 0;
      for (int r = 0; r < config.n_replications; ++r) {
        const ReplicationOutcome& out = outcomes[ki * config.n_replications + r];
        if (out.failed[e]) {
          ++failures;
          continue;
        }
        ++successes;
        sum += out.sq_error[e];
        sum_sq += out.sq_error[e] * out.sq_error[e];
        covered += out.covered[e] ? 1 : 0;
      }
      row.n_replications = successes;
      row.n_failures = failures;
      if (successes > 0) {
        row.mse = sum / successes;
        const double var =
            successes > 1 ? (sum_sq - sum * sum / successes) / (successes - 1) : 0.0;
        row.mse_se = std::sqrt(std::max(var, 0.0) / successes);
        row.coverage = static_cast<double>(covered) / successes;
        row.coverage_se = std::sqrt(row.coverage * (1.0 - row.coverage) / successes);
      }
      if (failures > 0.01 * config.n_replications) {
        result.failure_threshold_exceeded = true;
        failure_msg << "K=" << row.num_cells << " " << estimator_tag_name(row.estimator) << ": "
                    << failures << "/" << config.n_replications << " replications failed; ";
      }
      result.rows.push_back(row);
    }
  }
  result.failure_message = failure_msg.str();
  return result;
}

std::string sweep_to_csv(const SweepResult& result) {
  std::string csv = "K,estimator,mse,mse_se,coverage,coverage_se,n_reps,n_failures\n";
  for (const SweepRow& row : result.rows) {
    csv += std::to_string(row.num_cells);
    csv += ',';
    csv += estimator_tag_name(row.estimator);
    csv += ',';
    csv += format_double(row.mse);
    csv += ',';
    csv += format_double(row.mse_se);
    csv += ',';
    csv += format_double(row.coverage);
    csv += ',';
    csv += format_double(row.coverage_se);
    csv += ',';
    csv += std::to_string(row.n_replications);
    csv += ',';
    csv += std::to_string(row.n_failures);
    csv += '\n';
  }
  return csv;
}

}  // namespace bridgeiv
