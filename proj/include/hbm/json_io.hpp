// Copyright 2026 The HBM Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <filesystem>
#include <initializer_list>
#include <string>

#include <Eigen/Dense>
#include <json.hpp>

#include "hbm/gmm.hpp"
#include "hbm/ioc.hpp"
#include "hbm/lti.hpp"
#include "hbm/pipeline.hpp"
#include "hbm/quadrotor.hpp"
#include "hbm/tp_gmm.hpp"

namespace hbm::io {

using Json = nlohmann::json;

inline constexpr const char* kModelFormat = "hbm-model/1";

/// Throws ConfigError naming the first key of `j` outside `allowed`.
void reject_unknown_keys(const Json& j, std::initializer_list<const char*> allowed,
                         const std::string& where);

/// Matrices are row-major nested arrays.
Json to_json(const Eigen::MatrixXd& M);
Eigen::MatrixXd matrix_from_json(const Json& j, const std::string& what);
Json vector_to_json(const Eigen::VectorXd& v);
Eigen::VectorXd vector_from_json(const Json& j, const std::string& what);

/// {"dt", "states": [[x_0]...], "inputs": [[u_0]...], "meta": {}}
Json to_json(const Trajectoryd& traj);
Trajectoryd trajectory_from_json(const Json& j);

Json to_json(const LtiSystemd& sys);
LtiSystemd system_from_json(const Json& j);

Json to_json(const GainEstimate& gain);
GainEstimate gain_from_json(const Json& j);

/// {"Q", "R", "S", "P", "alpha"}
Json to_json(const TaskObjective& obj);
TaskObjective objective_from_json(const Json& j);

/// {"weights", "means", "covs", "dim"}
Json to_json(const Gmmd& gmm);
Gmmd gmm_from_json(const Json& j);

Json to_json(const TaskFrame& frame);
TaskFrame frame_from_json(const Json& j);

/// {"weights", "dim", "frames": [{"means", "covs"}...]}
Json to_json(const TpGmm& model);
TpGmm tp_gmm_from_json(const Json& j);

/// Mixture, merge frames, merged mixture and the cached regression terms.
Json to_json(const VariabilityModel& model);
VariabilityModel variability_from_json(const Json& j);

Json to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const Json& j);

Json to_json(const quadrotor::ScenarioConfig& config);
quadrotor::ScenarioConfig scenario_from_json(const Json& j);

Json to_json(const quadrotor::VariabilitySpec& spec);
quadrotor::VariabilitySpec variability_spec_from_json(const Json& j);

Json to_json(const quadrotor::LandingOutcome& outcome);

Json to_json(const PredictedTrajectory& pred);

/// Model bundle tagged "hbm-model/1". Doubles are written in shortest
/// round-trip form, so deserialize(serialize(m)) reproduces every value.
std::string serialize_model(const BehaviorModel& model);
BehaviorModel deserialize_model(const std::string& text);

Json read_json_file(const std::filesystem::path& path);
/// Writes through a temporary file and a rename.
void write_json_file(const std::filesystem::path& path, const Json& j);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace hbm::io
