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

#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "hbm/json_io.hpp"
#include "hbm/lti.hpp"
#include "hbm/quadrotor.hpp"

namespace hbm::data {

inline constexpr const char* kDatasetFormat = "hbm-dataset/1";
inline constexpr const char* kManifestName = "manifest.json";

struct SynthConfig {
  int count = 30;
  std::uint64_t seed = 0;
  // 0 uses quadrotor::default_objective(), 1 and 2 the strategy analogues.
  int strategy = 0;
  quadrotor::ScenarioConfig scenario;
  quadrotor::VariabilitySpec variability;
  quadrotor::Params params;

  void validate() const;
};

/// Per-demonstration seed derived from the dataset seed.
std::uint64_t demo_seed(std::uint64_t dataset_seed, std::uint64_t index);

/// Generates `config.count` demonstrations. Initial states come from one
/// stream seeded with config.seed; the noise of demo j from demo_seed().
std::vector<quadrotor::SynthResult> synthesize(const SynthConfig& config);

/// 16 hex digits of FNV-1a over the canonical JSON text of `traj`.
std::string content_id(const Trajectoryd& traj);

struct Entry {
  std::string id;
  std::string file;
  long steps = 0;
  bool landed = false;
};

struct Manifest {
  std::string source = "synthetic";
  io::Json details = io::Json::object();
  quadrotor::ScenarioConfig scenario;
  std::vector<Entry> entries;
};

io::Json to_json(const Manifest& manifest);
Manifest manifest_from_json(const io::Json& j);

/// Writes demo_0000.json ... and the manifest into `dir`.
Manifest write_synthetic_dataset(const std::filesystem::path& dir,
                                 const SynthConfig& config);

struct Dataset {
  Manifest manifest;
  DemonstrationSetd demos;
};

Dataset load_dataset(const std::filesystem::path& dir);

/// Append-only demonstration store. Files are named by content id and never
/// overwritten; the manifest only grows. Safe for concurrent add() calls.
class Store {
 public:
  Store(std::filesystem::path dir, quadrotor::ScenarioConfig scenario);

  struct Added {
    Entry entry;
    bool duplicate = false;
  };

  /// Throws IoError when the file or the manifest cannot be written.
  Added add(const Trajectoryd& traj);
  Manifest manifest() const;
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
  mutable std::mutex mutex_;
  Manifest manifest_;
};

}  // namespace hbm::data
