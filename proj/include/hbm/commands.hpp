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
#include <string>

#include "hbm/json_io.hpp"

namespace hbm::cli {

inline constexpr const char* kConfigFormat = "hbm-config/1";

/// Resolves `path` against $HBM_DATA_DIR when it is empty; `leaf` names the
/// default directory under the data root.
std::filesystem::path data_path(const std::string& path, const char* leaf);

/// Each command validates its configuration object (unknown keys are
/// rejected), does its work, and returns a JSON summary.

/// {"out", "count", "seed", "strategy", "scenario", "variability"}
io::Json cmd_synth(const io::Json& config);

/// {"data", "out", "report", and any training key: "method", "components",
///  "frames", "independent_frames", "em", "ioc", "input_bound"}
io::Json cmd_train(const io::Json& config);

/// {"model", "test", "out", "horizon"}
io::Json cmd_predict(const io::Json& config);

/// {"models", "tests", "out", "horizon", "n_sigma"}
io::Json cmd_eval(const io::Json& config);

}  // namespace hbm::cli
