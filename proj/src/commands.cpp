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

#include "hbm/commands.hpp"

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "hbm/dataset.hpp"
#include "hbm/pipeline.hpp"
#include "hbm/quadrotor.hpp"

namespace hbm::cli {

namespace fs = std::filesystem;
using io::Json;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

const std::vector<int> kPositionDims{quadrotor::kX, quadrotor::kY};
const std::vector<int> kVelocityDims{quadrotor::kVx, quadrotor::kVy};

void CheckFormat(const Json& config, const char* where) {
  if (!config.is_object()) {
    throw ConfigError(std::string(where) + ": configuration must be an object");
  }
  if (const auto it = config.find("format"); it != config.end()) {
    if (!it->is_string() || it->get<std::string>() != kConfigFormat) {
      throw ConfigError(std::string(where) + ": format must be hbm-config/1");
    }
  }
}

template <typename T>
T Get(const Json& j, const char* key, T fallback, const char* where) {
  const auto it = j.find(key);
  if (it == j.end()) return fallback;
  try {
    return it->get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string(where) + "." + key + ": wrong type");
  }
}

std::string Required(const Json& j, const char* key, const char* where) {
  const std::string value = Get<std::string>(j, key, "", where);
  if (value.empty()) {
    throw ConfigError(std::string(where) + ": '" + key + "' is required");
  }
  return value;
}

void EnsureParent(const fs::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create " + path.parent_path().string());
  }
}

std::string MatrixText(const MatrixXd& M) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4);
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    os << "  ";
    for (Eigen::Index c = 0; c < M.cols(); ++c) os << std::setw(9) << M(r, c);
    os << "\n";
  }
  return os.str();
}

}  // namespace

fs::path data_path(const std::string& path, const char* leaf) {
  if (!path.empty()) return path;
  const char* root = std::getenv("HBM_DATA_DIR");
  if (root == nullptr || *root == '\0') {
    throw ConfigError(std::string("no path given for ") + leaf +
                      " and HBM_DATA_DIR is not set");
  }
  return fs::path(root) / leaf;
}

Json cmd_synth(const Json& config) {
  CheckFormat(config, "synth");
  io::reject_unknown_keys(config,
                          {"format", "out", "count", "seed", "strategy",
                           "scenario", "variability"},
                          "synth");
  data::SynthConfig sc;
  sc.count = Get<int>(config, "count", sc.count, "synth");
  sc.seed = Get<std::uint64_t>(config, "seed", sc.seed, "synth");
  sc.strategy = Get<int>(config, "strategy", sc.strategy, "synth");
  if (const auto it = config.find("scenario"); it != config.end()) {
    sc.scenario = io::scenario_from_json(*it);
  }
  if (const auto it = config.find("variability"); it != config.end()) {
    sc.variability = io::variability_spec_from_json(*it);
  }
  sc.validate();
  const fs::path out = data_path(Get<std::string>(config, "out", "", "synth"), "synthetic");
  const data::Manifest m = data::write_synthetic_dataset(out, sc);
  long landed = 0;
  for (const auto& e : m.entries) landed += e.landed;
  return Json{{"out", out.string()},
              {"count", m.entries.size()},
              {"landed", landed},
              {"saturated_fraction", m.details["saturated_fraction"]}};
}

Json cmd_train(const Json& config) {
  CheckFormat(config, "train");
  io::reject_unknown_keys(config,
                          {"format", "data", "out", "report", "method",
                           "components", "frames", "independent_frames", "em",
                           "ioc", "input_bound"},
                          "train");
  Json train_keys = config;
  for (const char* key : {"format", "data", "out", "report"}) train_keys.erase(key);
  const TrainConfig tc = io::train_config_from_json(train_keys);
  const fs::path data_dir =
      data_path(Get<std::string>(config, "data", "", "train"), "synthetic");
  const fs::path out = Required(config, "out", "train");
  const fs::path report = Get<std::string>(config, "report", out.string() + ".report.txt", "train");

  const data::Dataset ds = data::load_dataset(data_dir);
  const LtiSystemd sys = quadrotor::make_system();
  const BehaviorModel model = train(sys, ds.demos, tc);
  EnsureParent(out);
  io::write_text_file(out, io::serialize_model(model) + "\n");

  std::ostringstream text;
  text << "method: " << to_string(model.method) << "\n"
       << "demonstrations: " << ds.demos.size() << "\n";
  Json summary{{"out", out.string()},
               {"report", report.string()},
               {"method", to_string(model.method)},
               {"demonstrations", ds.demos.size()}};
  if (model.gain) {
    text << "gain estimate (rank " << model.gain->data_rank << ", residual "
         << model.gain->lsq_residual << "):\n"
         << MatrixText(model.gain->K_hat);
    summary["data_rank"] = model.gain->data_rank;
  }
  if (model.objective) {
    const TaskObjective norm = normalized(*model.objective);
    text << "alpha: " << model.objective->alpha << "\n"
         << "normalized Q (divided by the largest eigenvalue of [[Q,S],[S',R]]):\n"
         << MatrixText(norm.Q) << "normalized R:\n"
         << MatrixText(norm.R) << "normalized S:\n"
         << MatrixText(norm.S);
    summary["alpha"] = model.objective->alpha;
    summary["normalized_objective"] = io::to_json(norm);
  }
  if (model.mixture) {
    text << "mixture components: " << model.mixture->size() << ", frames: "
         << model.mixture->frames() << "\n";
  }
  EnsureParent(report);
  io::write_text_file(report, text.str());
  return summary;
}

Json cmd_predict(const Json& config) {
  CheckFormat(config, "predict");
  io::reject_unknown_keys(config, {"format", "model", "test", "out", "horizon"},
                          "predict");
  const fs::path model_path = Required(config, "model", "predict");
  const fs::path test_path = Required(config, "test", "predict");
  int horizon = Get<int>(config, "horizon", 60, "predict");
  if (horizon < 1) throw ConfigError("predict: horizon must be >= 1");

  std::ifstream in(model_path);
  if (!in) throw IoError("cannot open " + model_path.string());
  const BehaviorModel model =
      io::deserialize_model(std::string(std::istreambuf_iterator<char>(in), {}));
  const Trajectoryd test = io::trajectory_from_json(io::read_json_file(test_path));
  Json warnings = Json::array();
  if (horizon > test.steps()) {
    warnings.push_back("horizon " + std::to_string(horizon) +
                       " trimmed to the test length " + std::to_string(test.steps()));
    std::cerr << "warning: " << warnings.back().get<std::string>() << "\n";
    horizon = int(test.steps());
  }
  if (horizon < 1) throw InvalidArgument("predict: test trajectory has no inputs");
  const PredictedTrajectory pred =
      predict_trajectory(model, test.states.col(0), horizon);
  const Trajectoryd truth = head(test, horizon);
  Json out = io::to_json(pred);
  out["method"] = to_string(model.method);
  out["horizon"] = horizon;
  out["rmse_position"] = rmse(pred, truth, kPositionDims);
  out["rmse_velocity"] = rmse(pred, truth, kVelocityDims);
  out["warnings"] = warnings;
  if (const auto it = config.find("out"); it != config.end()) {
    const fs::path path = it->get<std::string>();
    EnsureParent(path);
    io::write_json_file(path, out);
  }
  return out;
}

Json cmd_eval(const Json& config) {
  CheckFormat(config, "eval");
  io::reject_unknown_keys(config,
                          {"format", "models", "tests", "out", "horizon", "n_sigma"},
                          "eval");
  const auto model_paths = Get<std::vector<std::string>>(config, "models", {}, "eval");
  if (model_paths.empty()) throw ConfigError("eval: 'models' must list model files");
  const fs::path tests_dir = Required(config, "tests", "eval");
  const fs::path out_dir = Required(config, "out", "eval");
  const int horizon = Get<int>(config, "horizon", 60, "eval");
  const double n_sigma = Get<double>(config, "n_sigma", 3.0, "eval");
  if (horizon < 1 || !(n_sigma > 0)) {
    throw ConfigError("eval: horizon and n_sigma must be positive");
  }
  const data::Dataset tests = data::load_dataset(tests_dir);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string());

  Json per_model = Json::array();
  std::ofstream table(out_dir / "comparison.csv");
  table << "method,test,horizon,rmse_position,rmse_velocity\n";
  table << std::setprecision(17);
  for (const auto& path : model_paths) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    const BehaviorModel model =
        io::deserialize_model(std::string(std::istreambuf_iterator<char>(in), {}));
    const std::string tag = to_string(model.method);
    std::ofstream series(out_dir / ("prediction_" + tag + ".csv"));
    series << std::setprecision(17)
           << "test,k,t,x,y,phi,x_dot,y_dot,phi_dot,u1,u2,"
              "true_x,true_y,true_phi,true_x_dot,true_y_dot,true_phi_dot\n";
    Json rows = Json::array();
    double pos_sum = 0.0, vel_sum = 0.0;
    std::vector<StepBound> pooled;
    for (std::size_t j = 0; j < tests.demos.size(); ++j) {
      const Trajectoryd& test = tests.demos.trajectories[j];
      const int h = int(std::min<Eigen::Index>(horizon, test.steps()));
      if (h < 1) continue;
      const PredictedTrajectory pred = predict_trajectory(model, test.states.col(0), h);
      const Trajectoryd truth = head(test, h);
      const double rp = rmse(pred, truth, kPositionDims);
      const double rv = rmse(pred, truth, kVelocityDims);
      pos_sum += rp;
      vel_sum += rv;
      const std::string& id = tests.manifest.entries[j].id;
      table << tag << "," << id << "," << h << "," << rp << "," << rv << "\n";
      rows.push_back({{"test", id}, {"horizon", h}, {"rmse_position", rp},
                      {"rmse_velocity", rv}});
      for (int k = 0; k <= h; ++k) {
        series << id << "," << k << "," << k * model.system.dt();
        for (Eigen::Index d = 0; d < pred.states.rows(); ++d) series << "," << pred.states(d, k);
        for (Eigen::Index d = 0; d < pred.inputs.rows(); ++d) {
          series << ",";
          if (k < h) series << pred.inputs(d, k);
        }
        for (Eigen::Index d = 0; d < truth.states.rows(); ++d) series << "," << truth.states(d, k);
        series << "\n";
      }
      if (model.method == Method::kProposed) {
        const BoundsReport report = one_step_bounds(model, test, n_sigma);
        std::ofstream bounds(out_dir / ("bounds_" + id + ".csv"));
        bounds << std::setprecision(17)
               << "k,w1,mean1,lower1,upper1,w2,mean2,lower2,upper2\n";
        for (const auto& s : report.steps) {
          bounds << s.k;
          for (Eigen::Index a = 0; a < s.w_hat.size(); ++a) {
            const double half = n_sigma * std::sqrt(std::max(0.0, s.cov(a, a)));
            bounds << "," << s.w_hat(a) << "," << s.mean(a) << ","
                   << s.mean(a) - half << "," << s.mean(a) + half;
          }
          bounds << "\n";
          pooled.push_back(s);
        }
      }
    }
    const double count = double(rows.size());
    Json entry{{"model", path},
               {"method", tag},
               {"tests", rows},
               {"mean_rmse_position", count ? pos_sum / count : 0.0},
               {"mean_rmse_velocity", count ? vel_sum / count : 0.0}};
    if (!pooled.empty()) {
      BoundsReport all;
      all.n_sigma = n_sigma;
      all.steps = std::move(pooled);
      entry["coverage"] = io::vector_to_json(coverage(all));
      entry["coverage_steps"] = all.steps.size();
    }
    per_model.push_back(std::move(entry));
  }
  Json metrics{{"horizon", horizon}, {"n_sigma", n_sigma}, {"models", per_model}};
  io::write_json_file(out_dir / "metrics.json", metrics);
  return metrics;
}

}  // namespace hbm::cli
