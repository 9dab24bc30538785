#include "bridgeiv.h"

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <string>

#include "crossfold_risk.hpp"
#include "data_model.hpp"
#include "errors.hpp"
#include "estimators.hpp"
#include "identification.hpp"
#include "json_io.hpp"
#include "rng.hpp"
#include "simulation.hpp"

struct biv_dataset {
  bridgeiv::Dataset impl;
};

struct biv_aggregates {
  std::vector<bridgeiv::CellFoldAggregate> impl;
};

namespace {

thread_local std::string g_last_error;

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out != nullptr) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

biv_status status_from(bridgeiv::ErrorCode code) {
  switch (code) {
    case bridgeiv::ErrorCode::kConfig: return BIV_ERR_CONFIG;
    case bridgeiv::ErrorCode::kData: return BIV_ERR_DATA;
    case bridgeiv::ErrorCode::kNumeric: return BIV_ERR_NUMERIC;
    case bridgeiv::ErrorCode::kIo: return BIV_ERR_IO;
  }
  return BIV_ERR_CONFIG;
}

template <typename Fn>
biv_status wrap(Fn&& fn) {
  try {
    g_last_error.clear();
    return fn();
  } catch (const bridgeiv::Error& e) {
    g_last_error = e.what();
    return status_from(e.code());
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return BIV_ERR_CONFIG;
  }
}

bridgeiv::json parse_json(const char* text, const char* what) {
  if (text == nullptr) bridgeiv::throw_config(std::string(what) + ": null JSON document");
  return bridgeiv::json::parse(text);
}

bridgeiv::EstimateReport estimate_from_aggregates(
    const std::vector<bridgeiv::CellFoldAggregate>& aggregates, const std::string& method,
    double alpha) {
  if (method == "jive") return bridgeiv::jive_lfold(aggregates);
  if (method == "jive2-ci") return bridgeiv::jive_2fold_with_ci(aggregates, alpha);
  if (method == "tsls") return bridgeiv::tsls(aggregates);
  bridgeiv::throw_config("unknown aggregate-level method '" + method +
                         "'; expected jive, jive2-ci or tsls");
}

}  // namespace

extern "C" {

const char* biv_last_error(void) { return g_last_error.c_str(); }

void biv_string_free(char* s) { std::free(s); }
void biv_dataset_free(biv_dataset* dataset) { delete dataset; }
void biv_aggregates_free(biv_aggregates* aggregates) { delete aggregates; }

biv_status biv_dataset_read_csv(const char* path, biv_dataset** out) {
  return wrap([&]() {
    if (path == nullptr || out == nullptr) bridgeiv::throw_config("null argument");
    *out = new biv_dataset{bridgeiv::read_unit_csv(path)};
    return BIV_OK;
  });
}

biv_status biv_dataset_write_csv(const biv_dataset* dataset, const char* path) {
  return wrap([&]() {
    if (dataset == nullptr || path == nullptr) bridgeiv::throw_config("null argument");
    bridgeiv::write_unit_csv(dataset->impl, path);
    return BIV_OK;
  });
}

biv_status biv_aggregates_read_csv(const char* path, biv_aggregates** out) {
  return wrap([&]() {
    if (path == nullptr || out == nullptr) bridgeiv::throw_config("null argument");
    *out = new biv_aggregates{bridgeiv::read_aggregate_csv(path)};
    return BIV_OK;
  });
}

biv_status biv_aggregates_write_csv(const biv_aggregates* aggregates, const char* path) {
  return wrap([&]() {
    if (aggregates == nullptr || path == nullptr) bridgeiv::throw_config("null argument");
    bridgeiv::write_aggregate_csv(aggregates->impl, path);
    return BIV_OK;
  });
}

biv_status biv_dataset_assign_folds(const biv_dataset* dataset, int num_folds, uint64_t seed,
                                    biv_dataset** out) {
  return wrap([&]() {
    if (dataset == nullptr || out == nullptr) bridgeiv::throw_config("null argument");
    *out = new biv_dataset{bridgeiv::assign_folds(dataset->impl, num_folds, seed)};
    return BIV_OK;
  });
}

biv_status biv_dataset_aggregate(const biv_dataset* dataset, biv_aggregates** out) {
  return wrap([&]() {
    if (dataset == nullptr || out == nullptr) bridgeiv::throw_config("null argument");
    *out = new biv_aggregates{bridgeiv::aggregate(dataset->impl)};
    return BIV_OK;
  });
}

biv_status biv_simulate(const char* config_json, biv_dataset** out, char** ground_truth_json) {
  return wrap([&]() {
    if (out == nullptr) bridgeiv::throw_config("null argument");
    const bridgeiv::LinearDgpConfig config =
        bridgeiv::linear_dgp_config_from_json(parse_json(config_json, "simulate config"));
    auto [dataset, truth] = bridgeiv::simulate_dataset(config);
    if (ground_truth_json != nullptr) {
      *ground_truth_json = copy_string(bridgeiv::ground_truth_to_json(truth).dump(2));
    }
    *out = new biv_dataset{std::move(dataset)};
    return BIV_OK;
  });
}

biv_status biv_estimate_aggregates(const biv_aggregates* aggregates, const char* method,
                                   double alpha, char** report_json) {
  return wrap([&]() {
    if (aggregates == nullptr || method == nullptr || report_json == nullptr) {
      bridgeiv::throw_config("null argument");
    }
    const bridgeiv::EstimateReport report =
        estimate_from_aggregates(aggregates->impl, method, alpha);
    *report_json = copy_string(bridgeiv::report_to_json(report).dump(2));
    return BIV_OK;
  });
}

biv_status biv_estimate_dataset(const biv_dataset* dataset, const char* method, double alpha,
                                char** report_json) {
  return wrap([&]() {
    if (dataset == nullptr || method == nullptr || report_json == nullptr) {
      bridgeiv::throw_config("null argument");
    }
    const std::string name(method);
    bridgeiv::json j;
    if (name == "ols") {
      j = bridgeiv::report_to_json(bridgeiv::ols_surrogate_index(dataset->impl));
    } else if (name == "erm-linear") {
      const auto [beta, risk] = bridgeiv::minimize_risk_linear(dataset->impl);
      j["estimator_tag"] = "ERM_LINEAR";
      j["beta_hat"] = bridgeiv::json::array();
      for (Eigen::Index i = 0; i < beta.size(); ++i) j["beta_hat"].push_back(beta(i));
      j["risk"] = risk.value;
      j["risk_cross_term"] = risk.cross_term;
      j["risk_quadratic_term"] = risk.quadratic_term;
    } else {
      const auto aggregates = bridgeiv::aggregate(dataset->impl);
      j = bridgeiv::report_to_json(estimate_from_aggregates(aggregates, name, alpha));
    }
    *report_json = copy_string(j.dump(2));
    return BIV_OK;
  });
}

biv_status biv_run_sweep(const char* config_json, const char* csv_out_path, char** result_json) {
  return wrap([&]() {
    const bridgeiv::SweepConfig config =
        bridgeiv::sweep_config_from_json(parse_json(config_json, "sweep config"));
    const bridgeiv::SweepResult result = bridgeiv::run_sweep(config);
    if (csv_out_path != nullptr) {
      std::ofstream out(csv_out_path, std::ios::binary);
      if (!out) bridgeiv::throw_io(std::string("cannot open '") + csv_out_path + "' for writing");
      out << bridgeiv::sweep_to_csv(result);
      if (!out) bridgeiv::throw_io(std::string("failed writing '") + csv_out_path + "'");
    }
    if (result_json != nullptr) {
      *result_json = copy_string(bridgeiv::sweep_result_to_json(result).dump(2));
    }
    if (result.failure_threshold_exceeded) {
      bridgeiv::throw_numeric("sweep failure threshold exceeded: " + result.failure_message);
    }
    return BIV_OK;
  });
}

biv_status biv_verify_identification(const char* config_json, char** result_json) {
  return wrap([&]() {
    const bridgeiv::json j = parse_json(config_json, "verification config");
    const int instances = j.value("instances", 100);
    const double tolerance = j.value("tolerance", 1e-10);
    const double violation_gap = j.value("violation_gap", 1e-2);
    const bool include_violation = j.value("include_violation", true);
    const std::uint64_t seed = j.value("seed", static_cast<std::uint64_t>(0));
    bridgeiv::FiniteDgpParams params;
    if (j.contains("params")) params = bridgeiv::finite_dgp_params_from_json(j["params"]);
    if (instances < 1) bridgeiv::throw_config("instances must be positive");

    bridgeiv::json out;
    out["instances"] = bridgeiv::json::array();
    double max_gap = 0.0;
    double max_residual = 0.0;
    bool all_pass = true;
    for (int i = 0; i < instances; ++i) {
      params.seed = bridgeiv::derive_seed(seed, static_cast<std::uint64_t>(i));
      const bridgeiv::FiniteDgp dgp = bridgeiv::build_finite_dgp(params);
      const bridgeiv::BridgeSolution bridge = bridgeiv::solve_bridge(dgp);
      bridgeiv::json entry;
      entry["seed"] = params.seed;
      entry["residual_norm"] = bridge.residual_norm;
      double worst = 0.0;
      for (int holdout = dgp.num_training(); holdout < dgp.num_treatments(); ++holdout) {
        const bridgeiv::TransferCheck check =
            bridgeiv::verify_holdout_transfer(dgp, bridge.h, holdout);
        worst = std::max(worst, check.gap);
      }
      entry["gap"] = worst;
      const bool pass = worst < tolerance;
      entry["pass"] = pass;
      if (!pass) {
        entry["dgp"] = bridgeiv::finite_dgp_to_json(dgp);
        all_pass = false;
      }
      max_gap = std::max(max_gap, worst);
      max_residual = std::max(max_residual, bridge.residual_norm);
      out["instances"].push_back(std::move(entry));
    }
    out["max_gap"] = max_gap;
    out["max_residual_norm"] = max_residual;
    out["tolerance"] = tolerance;
    out["all_pass"] = all_pass;

    if (include_violation) {
      const bridgeiv::FiniteDgp broken =
          bridgeiv::build_stratum_violating_dgp(bridgeiv::derive_seed(seed, 0xBADF00D),
                                                violation_gap);
      const bridgeiv::BridgeSolution bridge = bridgeiv::solve_bridge(broken);
      const bridgeiv::TransferCheck check =
          bridgeiv::verify_holdout_transfer(broken, bridge.h, broken.num_training());
      bridgeiv::json demo;
      demo["gap"] = check.gap;
      demo["residual_norm"] = bridge.residual_norm;
      demo["expected_min_gap"] = violation_gap;
      demo["dgp"] = bridgeiv::finite_dgp_to_json(broken);
      out["violation_demo"] = std::move(demo);
    }

    if (result_json != nullptr) *result_json = copy_string(out.dump(2));
    if (!all_pass) {
      bridgeiv::throw_numeric("held-out transfer gap " + std::to_string(max_gap) +
                              " exceeds tolerance in a valid instance");
    }
    return BIV_OK;
  });
}

}  // extern "C"
