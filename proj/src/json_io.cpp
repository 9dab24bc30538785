#include "json_io.hpp"

#include "errors.hpp"

namespace bridgeiv {

namespace {

json vector_to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json out = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    out.push_back(std::move(row));
  }
  return out;
}

Eigen::VectorXd vector_from_json(const json& j, const std::string& what) {
  if (!j.is_array()) throw_data(what + ": expected an array");
  Eigen::VectorXd v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) v(i) = j[i].get<double>();
  return v;
}

Eigen::MatrixXd matrix_from_json(const json& j, const std::string& what) {
  if (!j.is_array() || j.empty()) throw_data(what + ": expected a nonempty array of rows");
  const std::size_t cols = j[0].size();
  Eigen::MatrixXd m(j.size(), cols);
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (j[r].size() != cols) throw_data(what + ": ragged rows");
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

template <typename T>
T get_or(const json& j, const std::string& key, T fallback) {
  const auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  return it->get<T>();
}

}  // namespace

json report_to_json(const EstimateReport& report) {
  json j;
  j["beta_hat"] = vector_to_json(report.beta_hat);
  j["estimator_tag"] = estimator_tag_name(report.tag);
  j["h_k_matrix"] = matrix_to_json(report.gram);
  if (report.gram.size() == 1) j["h_k"] = report.gram(0, 0);
  if (report.ci_lower) j["ci_lower"] = *report.ci_lower;
  if (report.ci_upper) j["ci_upper"] = *report.ci_upper;
  if (report.sigma_eta_hat) j["sigma_eta_hat"] = *report.sigma_eta_hat;
  if (report.sigma_eps_hat) j["sigma_eps_hat"] = *report.sigma_eps_hat;
  j["condition_warning"] = report.condition_warning;
  if (report.beta_cov) j["beta_cov"] = matrix_to_json(*report.beta_cov);
  return j;
}

json linear_dgp_config_to_json(const LinearDgpConfig& config) {
  json j;
  j["num_cells"] = config.num_cells;
  j["units_per_cell"] = config.units_per_cell;
  j["surrogate_dim"] = config.surrogate_dim;
  j["num_folds"] = config.num_folds;
  j["eps_scale"] = config.eps_scale;
  j["eta_scale"] = config.eta_scale;
  j["u_scale"] = config.u_scale;
  j["delta"] = config.delta;
  j["pi_row_scale"] = config.pi_row_scale;
  j["meas_scale"] = config.meas_scale;
  if (config.beta) j["beta"] = vector_to_json(*config.beta);
  if (config.gamma) j["gamma"] = vector_to_json(*config.gamma);
  j["novel_first_stage"] = vector_to_json(config.resolved_novel_first_stage());
  j["seed"] = config.seed;
  return j;
}

LinearDgpConfig linear_dgp_config_from_json(const json& j) {
  LinearDgpConfig config;
  config.num_cells = get_or(j, "num_cells", config.num_cells);
  config.units_per_cell = get_or(j, "units_per_cell", config.units_per_cell);
  config.surrogate_dim = get_or(j, "surrogate_dim", config.surrogate_dim);
  config.num_folds = get_or(j, "num_folds", config.num_folds);
  config.eps_scale = get_or(j, "eps_scale", config.eps_scale);
  config.eta_scale = get_or(j, "eta_scale", config.eta_scale);
  config.u_scale = get_or(j, "u_scale", config.u_scale);
  config.delta = get_or(j, "delta", config.delta);
  config.pi_row_scale = get_or(j, "pi_row_scale", config.pi_row_scale);
  config.meas_scale = get_or(j, "meas_scale", config.meas_scale);
  if (j.contains("beta") && !j["beta"].is_null()) {
    config.beta = vector_from_json(j["beta"], "beta");
  }
  if (j.contains("gamma") && !j["gamma"].is_null()) {
    config.gamma = vector_from_json(j["gamma"], "gamma");
  }
  if (j.contains("novel_first_stage") && !j["novel_first_stage"].is_null()) {
    config.novel_first_stage = vector_from_json(j["novel_first_stage"], "novel_first_stage");
  }
  config.seed = get_or<std::uint64_t>(j, "seed", config.seed);
  config.validate();
  return config;
}

json sweep_config_to_json(const SweepConfig& config) {
  json j;
  j["base"] = linear_dgp_config_to_json(config.base);
  j["k_grid"] = config.k_grid;
  json estimators = json::array();
  for (const EstimatorTag tag : config.estimators) estimators.push_back(estimator_tag_name(tag));
  j["estimators"] = estimators;
  j["n_replications"] = config.n_replications;
  j["novel_units"] = config.novel_units;
  j["alpha"] = config.alpha;
  j["parallelism"] = config.parallelism;
  j["seed"] = config.seed;
  return j;
}

SweepConfig sweep_config_from_json(const json& j) {
  SweepConfig config;
  if (j.contains("base")) config.base = linear_dgp_config_from_json(j["base"]);
  if (j.contains("k_grid")) config.k_grid = j["k_grid"].get<std::vector<int>>();
  if (j.contains("estimators")) {
    config.estimators.clear();
    for (const auto& name : j["estimators"]) {
      config.estimators.push_back(estimator_tag_from_name(name.get<std::string>()));
    }
  }
  config.n_replications = get_or(j, "n_replications", config.n_replications);
  config.novel_units = get_or(j, "novel_units", config.novel_units);
  config.alpha = get_or(j, "alpha", config.alpha);
  config.parallelism = get_or(j, "parallelism", config.parallelism);
  config.seed = get_or<std::uint64_t>(j, "seed", config.seed);
  return config;
}

json sweep_result_to_json(const SweepResult& result) {
  json rows = json::array();
  for (const SweepRow& row : result.rows) {
    json r;
    r["K"] = row.num_cells;
    r["estimator"] = estimator_tag_name(row.estimator);
    r["mse"] = row.mse;
    r["mse_se"] = row.mse_se;
    r["coverage"] = row.coverage;
    r["coverage_se"] = row.coverage_se;
    r["n_reps"] = row.n_replications;
    r["n_failures"] = row.n_failures;
    rows.push_back(std::move(r));
  }
  json j;
  j["rows"] = std::move(rows);
  j["failure_threshold_exceeded"] = result.failure_threshold_exceeded;
  if (!result.failure_message.empty()) j["failure_message"] = result.failure_message;
  return j;
}

json ground_truth_to_json(const GroundTruth& truth) {
  json j;
  j["beta"] = vector_to_json(truth.beta);
  j["gamma"] = vector_to_json(truth.gamma);
  j["pi"] = matrix_to_json(truth.pi);
  return j;
}

json finite_dgp_to_json(const FiniteDgp& dgp) {
  json j;
  j["s1_values"] = vector_to_json(dgp.s1_values());
  j["s2_values"] = vector_to_json(dgp.s2_values());
  j["u1_values"] = vector_to_json(dgp.u1_values());
  j["u2_values"] = vector_to_json(dgp.u2_values());
  j["u1_probs"] = vector_to_json(dgp.u1_probs());
  j["num_training"] = dgp.num_training();
  j["num_holdout"] = dgp.num_holdout();
  j["treatment_probs"] = vector_to_json(dgp.treatment_probs());
  json s1_tables = json::array();
  json u2_tables = json::array();
  for (int a = 0; a < dgp.num_treatments(); ++a) {
    s1_tables.push_back(matrix_to_json(dgp.s1_given_u1(a)));
    u2_tables.push_back(vector_to_json(dgp.u2_given_a(a)));
  }
  j["s1_given_u1"] = std::move(s1_tables);
  j["u2_given_a"] = std::move(u2_tables);
  j["s2_given_u2"] = matrix_to_json(dgp.s2_given_u2());
  j["y_mean"] = matrix_to_json(dgp.y_mean_table());
  return j;
}

FiniteDgp finite_dgp_from_json(const json& j) {
  std::vector<Eigen::MatrixXd> s1_tables;
  for (const auto& table : j.at("s1_given_u1")) {
    s1_tables.push_back(matrix_from_json(table, "s1_given_u1"));
  }
  std::vector<Eigen::VectorXd> u2_tables;
  for (const auto& table : j.at("u2_given_a")) {
    u2_tables.push_back(vector_from_json(table, "u2_given_a"));
  }
  return FiniteDgp(vector_from_json(j.at("s1_values"), "s1_values"),
                   vector_from_json(j.at("s2_values"), "s2_values"),
                   vector_from_json(j.at("u1_values"), "u1_values"),
                   vector_from_json(j.at("u2_values"), "u2_values"),
                   vector_from_json(j.at("u1_probs"), "u1_probs"), j.at("num_training").get<int>(),
                   j.at("num_holdout").get<int>(),
                   vector_from_json(j.at("treatment_probs"), "treatment_probs"),
                   std::move(s1_tables), std::move(u2_tables),
                   matrix_from_json(j.at("s2_given_u2"), "s2_given_u2"),
                   matrix_from_json(j.at("y_mean"), "y_mean"));
}

json finite_dgp_params_to_json(const FiniteDgpParams& params) {
  json j;
  j["num_training"] = params.num_training;
  j["num_holdout"] = params.num_holdout;
  j["s1_size"] = params.s1_size;
  j["s2_size"] = params.s2_size;
  j["u1_size"] = params.u1_size;
  j["u2_size"] = params.u2_size;
  j["outcome_scale"] = params.outcome_scale;
  j["stratum_shift_scale"] = params.stratum_shift_scale;
  j["seed"] = params.seed;
  return j;
}

FiniteDgpParams finite_dgp_params_from_json(const json& j) {
  FiniteDgpParams params;
  params.num_training = get_or(j, "num_training", params.num_training);
  params.num_holdout = get_or(j, "num_holdout", params.num_holdout);
  params.s1_size = get_or(j, "s1_size", params.s1_size);
  params.s2_size = get_or(j, "s2_size", params.s2_size);
  params.u1_size = get_or(j, "u1_size", params.u1_size);
  params.u2_size = get_or(j, "u2_size", params.u2_size);
  params.outcome_scale = get_or(j, "outcome_scale", params.outcome_scale);
  params.stratum_shift_scale = get_or(j, "stratum_shift_scale", params.stratum_shift_scale);
  params.seed = get_or<std::uint64_t>(j, "seed", params.seed);
  return params;
}

}  // namespace bridgeiv
