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

#include "hbm/dataset.hpp"

#include <cstdio>
#include <random>

namespace hbm::data {

namespace fs = std::filesystem;
using io::Json;

void SynthConfig::validate() const {
  if (count < 1) throw ConfigError("synth: count must be >= 1");
  if (strategy < 0 || strategy > 2) {
    throw ConfigError("synth: strategy must be 0, 1 or 2");
  }
  scenario.validate();
  variability.validate();
  params.validate();
}

std::uint64_t demo_seed(std::uint64_t dataset_seed, std::uint64_t index) {
  // splitmix64 finalizer
  std::uint64_t z = dataset_seed * 0x9E3779B97F4A7C15ULL + index + 1;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::vector<quadrotor::SynthResult> synthesize(const SynthConfig& config) {
  config.validate();
  const LtiSystemd sys = quadrotor::make_system(config.params);
  const quadrotor::DemonstratorObjective objective =
      config.strategy == 0 ? quadrotor::default_objective()
                           : quadrotor::strategy_objective(config.strategy);
  const Eigen::MatrixXd K = quadrotor::demonstrator_gain(sys, objective);
  std::mt19937_64 rng(config.seed);
  std::vector<quadrotor::SynthResult> out;
  for (int j = 0; j < config.count; ++j) {
    const Eigen::VectorXd x0 = quadrotor::sample_initial_state(config.scenario, rng);
    out.push_back(quadrotor::synth_demonstrate(sys, K, config.variability, x0,
                                               config.scenario,
                                               demo_seed(config.seed, j)));
    if (config.strategy != 0) {
      out.back().trajectory.meta["strategy"] = "CS" + std::to_string(config.strategy);
    }
  }
  return out;
}

std::string content_id(const Trajectoryd& traj) {
  const std::string text = io::to_json(traj).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Json to_json(const Manifest& m) {
  Json entries = Json::array();
  for (const auto& e : m.entries) {
    entries.push_back(
        {{"id", e.id}, {"file", e.file}, {"steps", e.steps}, {"landed", e.landed}});
  }
  return Json{{"format", kDatasetFormat},
              {"source", m.source},
              {"details", m.details},
              {"scenario", io::to_json(m.scenario)},
              {"count", m.entries.size()},
              {"demonstrations", entries}};
}

Manifest manifest_from_json(const Json& j) {
  if (!j.is_object() || j.value("format", "") != kDatasetFormat) {
    throw IoError("manifest: expected format hbm-dataset/1");
  }
  Manifest m;
  m.source = j.value("source", "synthetic");
  m.details = j.value("details", Json::object());
  if (const auto it = j.find("scenario"); it != j.end()) {
    m.scenario = io::scenario_from_json(*it);
  }
  const auto it = j.find("demonstrations");
  if (it == j.end() || !it->is_array()) {
    throw IoError("manifest: missing demonstrations list");
  }
  for (const auto& e : *it) {
    m.entries.push_back({e.at("id").get<std::string>(),
                         e.at("file").get<std::string>(), e.value("steps", 0L),
                         e.value("landed", false)});
  }
  return m;
}

Manifest write_synthetic_dataset(const fs::path& dir, const SynthConfig& config) {
  const auto results = synthesize(config);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  Manifest m;
  m.source = "synthetic";
  m.scenario = config.scenario;
  m.details = {{"count", config.count},
               {"seed", config.seed},
               {"strategy", config.strategy},
               {"variability", io::to_json(config.variability)}};
  long saturated = 0, steps = 0;
  for (std::size_t j = 0; j < results.size(); ++j) {
    char name[32];
    std::snprintf(name, sizeof name, "demo_%04zu.json", j);
    const auto& traj = results[j].trajectory;
    io::write_json_file(dir / name, io::to_json(traj));
    m.entries.push_back({content_id(traj), name, long(traj.steps()),
                         quadrotor::landing_outcome(traj, config.scenario).landed});
    saturated += results[j].saturated_steps;
    steps += traj.steps();
  }
  m.details["saturated_fraction"] = steps ? double(saturated) / double(steps) : 0.0;
  io::write_json_file(dir / kManifestName, to_json(m));
  return m;
}

Dataset load_dataset(const fs::path& dir) {
  if (!fs::is_directory(dir)) {
    throw IoError("dataset directory " + dir.string() + " does not exist");
  }
  Dataset d;
  d.manifest = manifest_from_json(io::read_json_file(dir / kManifestName));
  for (const auto& e : d.manifest.entries) {
    d.demos.trajectories.push_back(
        io::trajectory_from_json(io::read_json_file(dir / e.file)));
  }
  return d;
}

Store::Store(fs::path dir, quadrotor::ScenarioConfig scenario)
    : dir_(std::move(dir)) {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec) throw IoError("cannot create " + dir_.string() + ": " + ec.message());
  if (fs::exists(dir_ / kManifestName)) {
    manifest_ = manifest_from_json(io::read_json_file(dir_ / kManifestName));
  } else {
    manifest_.source = "ingest";
  }
  manifest_.scenario = std::move(scenario);
}

Store::Added Store::add(const Trajectoryd& traj) {
  const std::string id = content_id(traj);
  std::lock_guard<std::mutex> lock(mutex_);
  for (const auto& e : manifest_.entries) {
    if (e.id == id) return {e, true};
  }
  const std::string file = id + ".json";
  const fs::path path = dir_ / file;
  if (!fs::exists(path)) io::write_json_file(path, io::to_json(traj));
  Entry entry{id, file, long(traj.steps()),
              quadrotor::landing_outcome(traj, manifest_.scenario).landed};
  Manifest next = manifest_;
  next.entries.push_back(entry);
  io::write_json_file(dir_ / kManifestName, to_json(next));
  manifest_ = std::move(next);
  return {entry, false};
}

Manifest Store::manifest() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return manifest_;
}

}  // namespace hbm::data
