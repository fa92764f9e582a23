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

#include "hbm/service.hpp"

#include <cmath>

#include <httplib.h>

namespace hbm::service {

using io::Json;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

Reply Error(int status, const std::string& message) {
  return {status, Json{{"error", message}}};
}

void Send(httplib::Response& res, const Reply& reply) {
  res.status = reply.status;
  res.set_content(reply.body.dump(), "application/json");
}

}  // namespace

Ingest::Ingest(std::filesystem::path data_dir, quadrotor::ScenarioConfig scenario,
               quadrotor::Params params)
    : scenario_(scenario),
      params_(params),
      system_(quadrotor::make_system(params)),
      store_(std::move(data_dir), scenario) {
  scenario_.validate();
}

Reply Ingest::post_demonstration(const std::string& body) {
  Json j;
  try {
    j = Json::parse(body);
  } catch (const nlohmann::json::parse_error&) {
    return Error(400, "body is not valid JSON");
  }
  if (!j.is_object()) return Error(400, "body must be a JSON object");

  VectorXd x0;
  MatrixXd inputs;
  double dt = 0.0;
  std::map<std::string, std::string> meta;
  std::optional<VectorXd> client_final;
  try {
    io::reject_unknown_keys(
        j, {"initial_state", "inputs", "dt", "meta", "states", "final_state"},
        "demonstration");
    if (!j.contains("initial_state") || !j.contains("inputs") || !j.contains("dt")) {
      return Error(400, "initial_state, inputs and dt are required");
    }
    x0 = io::vector_from_json(j["initial_state"], "initial_state");
    inputs = io::matrix_from_json(j["inputs"], "inputs");
    if (!j["dt"].is_number()) return Error(400, "dt must be a number");
    dt = j["dt"].get<double>();
    if (j.contains("meta")) {
      if (!j["meta"].is_object()) return Error(400, "meta must be an object");
      for (const auto& item : j["meta"].items()) {
        meta[item.key()] = item.value().is_string()
                               ? item.value().get<std::string>()
                               : item.value().dump();
      }
    }
    if (j.contains("states")) {
      const MatrixXd states = io::matrix_from_json(j["states"], "states");
      if (states.rows() != inputs.rows() + 1) {
        return Error(400, "states must have one more row than inputs");
      }
      if (states.cols() != system_.state_dim()) {
        return Error(400, "states rows must have 6 entries");
      }
      client_final = states.row(states.rows() - 1).transpose();
    } else if (j.contains("final_state")) {
      client_final = io::vector_from_json(j["final_state"], "final_state");
    }
  } catch (const hbm::Error& e) {
    return Error(400, e.what());
  }

  const auto n = system_.state_dim();
  const auto m = system_.input_dim();
  if (x0.size() != n) return Error(400, "initial_state must have 6 entries");
  if (inputs.rows() < 1) return Error(400, "at least one input is required");
  if (inputs.cols() != m) return Error(400, "every input must have 2 entries");
  if (!client_final) return Error(400, "states or final_state is required");
  if (client_final->size() != n) return Error(400, "final_state must have 6 entries");
  if (std::abs(dt - system_.dt()) > 1e-12) {
    return Error(400, "dt must equal the plant step " + std::to_string(system_.dt()));
  }
  if (!x0.allFinite() || !inputs.allFinite() || !client_final->allFinite()) {
    return Error(400, "non-finite values");
  }
  if (inputs.cwiseAbs().maxCoeff() > scenario_.input_bound) {
    return Error(400, "inputs must lie in [-1, 1]^2");
  }

  Trajectoryd traj;
  traj.dt = system_.dt();
  traj.meta = std::move(meta);
  traj.inputs = inputs.transpose();
  traj.states.resize(n, traj.inputs.cols() + 1);
  traj.states.col(0) = x0;
  for (Eigen::Index k = 0; k < traj.inputs.cols(); ++k) {
    traj.states.col(k + 1) =
        system_.A() * traj.states.col(k) + system_.B() * traj.inputs.col(k);
  }
  const VectorXd drift = traj.states.col(traj.states.cols() - 1) - *client_final;
  if (drift.cwiseAbs().maxCoeff() > kStateTolerance) {
    return {409, Json{{"error", "client final state disagrees with integration"},
                      {"max_abs_drift", drift.cwiseAbs().maxCoeff()},
                      {"server_final_state",
                       io::vector_to_json(traj.states.col(traj.states.cols() - 1))}}};
  }

  data::Store::Added added;
  try {
    added = store_.add(traj);
  } catch (const hbm::Error& e) {
    return Error(507, std::string("storage failure: ") + e.what());
  } catch (const std::exception& e) {
    return Error(507, std::string("storage failure: ") + e.what());
  }
  return {200, Json{{"id", added.entry.id},
                    {"file", added.entry.file},
                    {"steps", added.entry.steps},
                    {"duplicate", added.duplicate},
                    {"landing_outcome",
                     io::to_json(quadrotor::landing_outcome(traj, scenario_))}}};
}

Reply Ingest::list_demonstrations() const {
  return {200, data::to_json(store_.manifest())};
}

Reply Ingest::scenario() const {
  return {200, Json{{"scenario", io::to_json(scenario_)},
                    {"plant",
                     {{"dt", params_.dt},
                      {"g", params_.g},
                      {"k1", params_.k1},
                      {"k2", params_.k2},
                      {"k3", params_.k3},
                      {"mass", params_.mass},
                      {"inertia", params_.inertia},
                      {"A", io::to_json(system_.A())},
                      {"B", io::to_json(system_.B())}}},
                    {"state_layout", {"x", "y", "phi", "x_dot", "y_dot", "phi_dot"}},
                    {"input_layout", {"angular_acceleration", "thrust"}}}};
}

void register_routes(httplib::Server& server, Ingest& ingest,
                     const std::filesystem::path& static_dir) {
  server.Post("/api/demonstrations",
              [&ingest](const httplib::Request& req, httplib::Response& res) {
                Send(res, ingest.post_demonstration(req.body));
              });
  server.Get("/api/demonstrations",
             [&ingest](const httplib::Request&, httplib::Response& res) {
               Send(res, ingest.list_demonstrations());
             });
  server.Get("/api/scenario",
             [&ingest](const httplib::Request&, httplib::Response& res) {
               Send(res, ingest.scenario());
             });
  server.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
    res.status = 200;
    res.set_content("ok", "text/plain");
  });
  if (!static_dir.empty()) server.set_mount_point("/", static_dir.string());
}

}  // namespace hbm::service
