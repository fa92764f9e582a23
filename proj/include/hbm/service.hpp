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
#include <memory>
#include <string>

#include "hbm/dataset.hpp"
#include "hbm/json_io.hpp"
#include "hbm/quadrotor.hpp"

namespace httplib {
class Server;
}

namespace hbm::service {

/// Client-reported states may drift from the server's integration by at
/// most this much per component.
inline constexpr double kStateTolerance = 1e-6;

struct Reply {
  int status = 200;
  io::Json body;
};

/// Request handlers, independent of the HTTP transport.
class Ingest {
 public:
  Ingest(std::filesystem::path data_dir, quadrotor::ScenarioConfig scenario,
         quadrotor::Params params = {});

  /// Body: {"initial_state", "inputs", "dt", "meta", and "states" or
  /// "final_state"}. The server integrates the inputs from initial_state,
  /// compares the client's final state, and stores its own states.
  /// 400 malformed or out-of-box input, 409 state mismatch, 507 storage.
  Reply post_demonstration(const std::string& body);
  Reply list_demonstrations() const;
  Reply scenario() const;

 private:
  quadrotor::ScenarioConfig scenario_;
  quadrotor::Params params_;
  LtiSystemd system_;
  data::Store store_;
};

/// Binds the routes of `ingest` (and an optional static directory) on
/// `server`.
void register_routes(httplib::Server& server, Ingest& ingest,
                     const std::filesystem::path& static_dir = {});

}  // namespace hbm::service
