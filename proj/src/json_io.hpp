#pragma once

#include <json.hpp>

#include "estimators.hpp"
#include "identification.hpp"
#include "simulation.hpp"

namespace bridgeiv {

using json = nlohmann::json;

json report_to_json(const EstimateReport& report);

json linear_dgp_config_to_json(const LinearDgpConfig& config);
LinearDgpConfig linear_dgp_config_from_json(const json& j);

json sweep_config_to_json(const SweepConfig& config);
SweepConfig sweep_config_from_json(const json& j);

json sweep_result_to_json(const SweepResult& result);

json ground_truth_to_json(const GroundTruth& truth);

json finite_dgp_to_json(const FiniteDgp& dgp);
FiniteDgp finite_dgp_from_json(const json& j);

json finite_dgp_params_to_json(const FiniteDgpParams& params);
FiniteDgpParams finite_dgp_params_from_json(const json& j);

}  // namespace bridgeiv
