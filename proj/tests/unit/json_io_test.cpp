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

#include <cmath>
#include <cstring>
#include <filesystem>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "hbm/json_io.hpp"

namespace hbm::io {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;
namespace quad = quadrotor;

class TempDir {
 public:
  TempDir() {
    path_ = std::filesystem::temp_directory_path() /
            ("hbm_json_" + std::to_string(std::random_device{}()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

DemonstrationSetd Demos(std::uint64_t seed, int count) {
  const LtiSystemd sys = quad::make_system();
  const MatrixXd K = quad::demonstrator_gain(sys, quad::default_objective());
  const quad::ScenarioConfig cfg;
  std::mt19937_64 rng(seed);
  DemonstrationSetd set;
  for (int j = 0; j < count; ++j) {
    set.trajectories.push_back(
        quad::synth_demonstrate(sys, K, quad::VariabilitySpec::gmm_state_dependent(),
                                quad::sample_initial_state(cfg, rng), cfg, seed + j)
            .trajectory);
  }
  return set;
}

TEST(MatrixJson, BitExactRoundTrip) {
  MatrixXd M(2, 3);
  M << 0.1, 1.0 / 3.0, -2.5e-300, std::numeric_limits<double>::denorm_min(),
      std::numeric_limits<double>::max(), -0.0;
  const Json j = Json::parse(to_json(M).dump());
  const MatrixXd back = matrix_from_json(j, "M");
  ASSERT_EQ(back.rows(), 2);
  for (int k = 0; k < M.size(); ++k) {
    EXPECT_EQ(std::memcmp(&M.data()[k], &back.data()[k], sizeof(double)), 0) << k;
  }
  EXPECT_EQ(j[0].size(), 3u);  // row-major
}

TEST(MatrixJson, RejectsMalformed) {
  EXPECT_THROW(matrix_from_json(Json::parse("[[1,2],[3]]"), "M"), IoError);
  EXPECT_THROW(matrix_from_json(Json::parse("[[1,\"a\"]]"), "M"), IoError);
  EXPECT_THROW(matrix_from_json(Json::parse("{}"), "M"), IoError);
  EXPECT_THROW(vector_from_json(Json::parse("[1,null]"), "v"), IoError);
}

TEST(TrajectoryJson, RoundTrip) {
  const Trajectoryd t = Demos(1, 1).trajectories[0];
  const Trajectoryd back = trajectory_from_json(Json::parse(to_json(t).dump()));
  EXPECT_EQ(back.states, t.states);
  EXPECT_EQ(back.inputs, t.inputs);
  EXPECT_EQ(back.dt, t.dt);
  EXPECT_EQ(back.meta, t.meta);
  const Json j = to_json(t);
  EXPECT_EQ(j["states"].size(), std::size_t(t.states.cols()));
  EXPECT_EQ(j["states"][0].size(), 6u);
}

TEST(TrajectoryJson, RejectsInconsistentLengths) {
  Json j = to_json(Demos(2, 1).trajectories[0]);
  j["inputs"].erase(0);
  EXPECT_THROW(trajectory_from_json(j), IoError);
  j = to_json(Demos(2, 1).trajectories[0]);
  j["dt"] = 0.0;
  EXPECT_THROW(trajectory_from_json(j), IoError);
  j.erase("states");
  EXPECT_THROW(trajectory_from_json(j), IoError);
}

TEST(SystemJson, RoundTrip) {
  const LtiSystemd sys = quad::make_system();
  const LtiSystemd back = system_from_json(Json::parse(to_json(sys).dump()));
  EXPECT_EQ(back.A(), sys.A());
  EXPECT_EQ(back.B(), sys.B());
  EXPECT_EQ(back.dt(), sys.dt());
}

TEST(GmmJson, RoundTrip) {
  Gmmd g;
  g.weights = (VectorXd(2) << 0.25, 0.75).finished();
  g.components.push_back({VectorXd::Constant(2, 0.1), MatrixXd::Identity(2, 2) * 0.3});
  g.components.push_back({VectorXd::Constant(2, -1.0 / 7.0), MatrixXd::Identity(2, 2)});
  const Gmmd back = gmm_from_json(Json::parse(to_json(g).dump()));
  EXPECT_EQ(back.weights, g.weights);
  for (int i = 0; i < 2; ++i) {
    EXPECT_EQ(back.components[i].mean, g.components[i].mean);
    EXPECT_EQ(back.components[i].cov, g.components[i].cov);
  }
}

TEST(FrameJson, RoundTrip) {
  VectorXd x0 = VectorXd::Zero(6);
  x0(0) = 1.3;
  const auto frames = quad::build_frames(x0, VectorXd::Zero(6), 0.2);
  const TaskFrame back = frame_from_json(Json::parse(to_json(frames[1]).dump()));
  EXPECT_EQ(back.T, frames[1].T);
  EXPECT_EQ(back.b, frames[1].b);
}

TEST(TrainConfigJson, RoundTripAndUnknownKeys) {
  TrainConfig c;
  c.method = Method::kGmrOnly;
  c.components = 7;
  c.frames = FrameKind::kIdentity;
  c.mixture.em.seed = 42;
  c.ioc.tol = 1e-8;
  const TrainConfig back = train_config_from_json(to_json(c));
  EXPECT_EQ(back.method, c.method);
  EXPECT_EQ(back.components, 7);
  EXPECT_EQ(back.frames, FrameKind::kIdentity);
  EXPECT_EQ(back.mixture.em.seed, 42u);
  EXPECT_EQ(back.ioc.tol, 1e-8);
  Json j = to_json(c);
  j["colour"] = "blue";
  EXPECT_THROW(train_config_from_json(j), ConfigError);
  j = to_json(c);
  j["em"]["restarts"] = 3;
  EXPECT_THROW(train_config_from_json(j), ConfigError);
  j = to_json(c);
  j["method"] = "magic";
  EXPECT_THROW(train_config_from_json(j), ConfigError);
}

TEST(ScenarioJson, RoundTripAndValidation) {
  quad::ScenarioConfig c;
  c.pad_half_width = 0.25;
  c.max_steps = 900;
  const quad::ScenarioConfig back = scenario_from_json(Json::parse(to_json(c).dump()));
  EXPECT_EQ(back.pad_half_width, 0.25);
  EXPECT_EQ(back.max_steps, 900);
  EXPECT_EQ(back.x0_min, c.x0_min);
  Json j = to_json(c);
  j["gravity"] = 9.8;
  EXPECT_THROW(scenario_from_json(j), ConfigError);
  j = to_json(c);
  j["initial"]["x"] = Json::array({-5.0, 2.0});
  EXPECT_THROW(scenario_from_json(j), ConfigError);
}

TEST(VariabilitySpecJson, EveryKindRoundTrips) {
  MatrixXd L = MatrixXd::Zero(2, 6);
  L(0, 2) = -0.02;
  const std::vector<quad::VariabilitySpec> specs = {
      quad::VariabilitySpec::none(),
      quad::VariabilitySpec::gaussian_constant(VectorXd::Constant(2, 0.01),
                                               1e-4 * MatrixXd::Identity(2, 2)),
      quad::VariabilitySpec::linear_state(L, 1e-5 * MatrixXd::Identity(2, 2)),
      quad::VariabilitySpec::gmm_state_dependent()};
  for (const auto& v : specs) {
    const quad::VariabilitySpec back = variability_spec_from_json(Json::parse(to_json(v).dump()));
    EXPECT_EQ(back.kind, v.kind);
    EXPECT_EQ(back.mean, v.mean);
    EXPECT_EQ(back.cov, v.cov);
    EXPECT_EQ(back.L, v.L);
    EXPECT_EQ(back.high.mean, v.high.mean);
    EXPECT_EQ(back.low.cov, v.low.cov);
    EXPECT_EQ(back.gate_width, v.gate_width);
  }
  EXPECT_THROW(variability_spec_from_json(Json{{"kind", "pink"}}), ConfigError);
  EXPECT_THROW(variability_spec_from_json(
                   Json{{"kind", "gaussian_constant"}, {"cov", {{-1, 0}, {0, 1}}}}),
               ConfigError);
}

class ModelBundle : public ::testing::TestWithParam<Method> {};

TEST_P(ModelBundle, RoundTripPreservesPredictions) {
  const DemonstrationSetd demos = Demos(3, 12);
  TrainConfig cfg;
  cfg.method = GetParam();
  const BehaviorModel model = train(quad::make_system(), demos, cfg);
  const std::string text = serialize_model(model);
  const BehaviorModel back = deserialize_model(text);
  EXPECT_EQ(back.method, model.method);
  EXPECT_EQ(serialize_model(back), text);
  EXPECT_EQ(Json::parse(text)["format"], kModelFormat);
  EXPECT_EQ(Json::parse(text)["method_tag"], to_string(GetParam()));
  const VectorXd x0 = demos.trajectories[0].states.col(0);
  const PredictedTrajectory a = predict_trajectory(model, x0, 60);
  const PredictedTrajectory b = predict_trajectory(back, x0, 60);
  EXPECT_EQ(a.states, b.states);
  EXPECT_EQ(a.inputs, b.inputs);
  if (model.objective) {
    EXPECT_EQ(back.objective->Q, model.objective->Q);
    EXPECT_EQ(back.objective->alpha, model.objective->alpha);
  }
  if (model.reference) {
    const VariabilityQuery q1 = model.reference->query(x0);
    const VariabilityQuery q2 = back.reference->query(x0);
    EXPECT_EQ(q1.distribution.mean, q2.distribution.mean);
    EXPECT_EQ(q1.distribution.cov, q2.distribution.cov);
  }
}

INSTANTIATE_TEST_SUITE_P(AllMethods, ModelBundle,
                         ::testing::Values(Method::kProposed, Method::kIocOnly,
                                           Method::kGmrOnly),
                         [](const auto& info) { return to_string(info.param); });

TEST(ModelBundleErrors, RejectsBadInput) {
  EXPECT_THROW(deserialize_model("{not json"), IoError);
  EXPECT_THROW(deserialize_model(R"({"format": "hbm-model/0"})"), IoError);
  const DemonstrationSetd demos = Demos(4, 8);
  TrainConfig cfg;
  cfg.method = Method::kIocOnly;
  Json j = Json::parse(serialize_model(train(quad::make_system(), demos, cfg)));
  j["gain"] = nullptr;
  EXPECT_THROW(deserialize_model(j.dump()), IoError);
}

TEST(Files, WriteThenRead) {
  TempDir dir;
  const auto path = dir.path() / "nested" / "x.json";
  write_json_file(path, Json{{"a", 1.5}});
  EXPECT_EQ(read_json_file(path)["a"], 1.5);
  EXPECT_FALSE(std::filesystem::exists(path.string() + ".tmp"));
  EXPECT_THROW(read_json_file(dir.path() / "missing.json"), IoError);
  write_text_file(dir.path() / "bad.json", "{");
  EXPECT_THROW(read_json_file(dir.path() / "bad.json"), IoError);
}

}  // namespace
}  // namespace hbm::io
