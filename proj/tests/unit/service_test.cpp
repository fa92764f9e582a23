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

#include <filesystem>
#include <fstream>
#include <random>
#include <thread>
#include <vector>

#include <gtest/gtest.h>

// After Eigen: resolv.h, pulled in by httplib, defines a macro named _res.
#include "hbm/service.hpp"
#include <httplib.h>

namespace hbm::service {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using io::Json;
namespace fs = std::filesystem;
namespace quad = quadrotor;

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() /
            ("hbm_service_" + std::to_string(std::random_device{}()));
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

// A noiseless LQR episode encoded the way a client uploads it.
Json Episode(std::uint64_t seed, bool with_states = false) {
  const LtiSystemd sys = quad::make_system();
  const MatrixXd K = quad::demonstrator_gain(sys, quad::default_objective());
  std::mt19937_64 rng(seed);
  const quad::ScenarioConfig cfg;
  const Trajectoryd t = quad::synth_demonstrate(sys, K, quad::VariabilitySpec::none(),
                                                quad::sample_initial_state(cfg, rng), cfg, 0)
                            .trajectory;
  Json body{{"initial_state", io::vector_to_json(t.states.col(0))},
            {"inputs", io::to_json(MatrixXd(t.inputs.transpose()))},
            {"dt", 0.05},
            {"meta", {{"strategy", "CS1"}, {"pilot", 3}}}};
  if (with_states) {
    body["states"] = io::to_json(MatrixXd(t.states.transpose()));
  } else {
    body["final_state"] = io::vector_to_json(t.states.col(t.states.cols() - 1));
  }
  return body;
}

TEST(Ingest, AcceptsReplayedEpisode) {
  TempDir dir;
  Ingest ingest(dir.path(), quad::ScenarioConfig{});
  const Reply r = ingest.post_demonstration(Episode(1).dump());
  ASSERT_EQ(r.status, 200) << r.body.dump();
  EXPECT_TRUE(r.body["landing_outcome"]["landed"].get<bool>());
  EXPECT_FALSE(r.body["duplicate"].get<bool>());
  const std::string file = r.body["file"];
  const Trajectoryd stored = io::trajectory_from_json(io::read_json_file(dir.path() / file));
  const LtiSystemd sys = quad::make_system();
  for (Eigen::Index k = 0; k < stored.steps(); ++k) {
    const VectorXd next = sys.A() * stored.states.col(k) + sys.B() * stored.inputs.col(k);
    ASSERT_EQ(stored.states.col(k + 1), next) << "step " << k;
  }
  EXPECT_EQ(stored.meta.at("strategy"), "CS1");
  EXPECT_EQ(stored.meta.at("pilot"), "3");
  EXPECT_EQ(r.body["steps"].get<long>(), stored.steps());
}

TEST(Ingest, AcceptsFullStateHistory) {
  TempDir dir;
  Ingest ingest(dir.path(), quad::ScenarioConfig{});
  EXPECT_EQ(ingest.post_demonstration(Episode(2, true).dump()).status, 200);
}

TEST(Ingest, DuplicateUploadIsNotStoredTwice) {
  TempDir dir;
  Ingest ingest(dir.path(), quad::ScenarioConfig{});
  const Reply first = ingest.post_demonstration(Episode(3).dump());
  const Reply second = ingest.post_demonstration(Episode(3).dump());
  ASSERT_EQ(second.status, 200);
  EXPECT_TRUE(second.body["duplicate"].get<bool>());
  EXPECT_EQ(first.body["id"], second.body["id"]);
  EXPECT_EQ(ingest.list_demonstrations().body["demonstrations"].size(), 1u);
}

TEST(Ingest, RejectsOutOfBoxInput) {
  TempDir dir;
  Ingest ingest(dir.path(), quad::ScenarioConfig{});
  Json body = Episode(4);
  body["inputs"][3][1] = 1.5;
  const Reply r = ingest.post_demonstration(body.dump());
  EXPECT_EQ(r.status, 400);
  EXPECT_TRUE(r.body.contains("error"));
  EXPECT_EQ(ingest.list_demonstrations().body["demonstrations"].size(), 0u);
}

TEST(Ingest, RejectsDriftBeyondTolerance) {
  TempDir dir;
  Ingest ingest(dir.path(), quad::ScenarioConfig{});
  Json body = Episode(5);
  body["final_state"][1] = body["final_state"][1].get<double>() + 1e-3;
  Reply r = ingest.post_demonstration(body.dump());
  EXPECT_EQ(r.status, 409);
  EXPECT_NEAR(r.body["max_abs_drift"].get<double>(), 1e-3, 1e-9);
  body = Episode(5);
  body["final_state"][0] = body["final_state"][0].get<double>() + 5e-7;
  r = ingest.post_demonstration(body.dump());
  EXPECT_EQ(r.status, 200);
}

TEST(Ingest, RejectsMalformedBodies) {
  TempDir dir;
  Ingest ingest(dir.path(), quad::ScenarioConfig{});
  EXPECT_EQ(ingest.post_demonstration("{").status, 400);
  EXPECT_EQ(ingest.post_demonstration("[1, 2]").status, 400);
  Json body = Episode(6);
  body.erase("dt");
  EXPECT_EQ(ingest.post_demonstration(body.dump()).status, 400);
  body = Episode(6);
  body["dt"] = 0.1;
  EXPECT_EQ(ingest.post_demonstration(body.dump()).status, 400);
  body = Episode(6);
  body["extra"] = true;
  EXPECT_EQ(ingest.post_demonstration(body.dump()).status, 400);
  body = Episode(6);
  body["initial_state"].erase(5);
  EXPECT_EQ(ingest.post_demonstration(body.dump()).status, 400);
  body = Episode(6);
  body["inputs"][0] = Json::array({0.1, 0.2, 0.3});
  EXPECT_EQ(ingest.post_demonstration(body.dump()).status, 400);
  body = Episode(6);
  body.erase("final_state");
  EXPECT_EQ(ingest.post_demonstration(body.dump()).status, 400);
  body = Episode(6);
  body["inputs"] = Json::array();
  EXPECT_EQ(ingest.post_demonstration(body.dump()).status, 400);
  body = Episode(6);
  body["inputs"][0][0] = "fast";
  EXPECT_EQ(ingest.post_demonstration(body.dump()).status, 400);
}

TEST(Ingest, StorageFailureIs507) {
  TempDir dir;
  const fs::path data = dir.path() / "data";
  Ingest ingest(data, quad::ScenarioConfig{});
  // Replace the directory with a plain file so every write fails.
  fs::remove_all(data);
  std::ofstream(data) << "x";
  const Reply r = ingest.post_demonstration(Episode(7).dump());
  EXPECT_EQ(r.status, 507);
}

TEST(Ingest, ReloadsExistingManifest) {
  TempDir dir;
  {
    Ingest ingest(dir.path(), quad::ScenarioConfig{});
    ASSERT_EQ(ingest.post_demonstration(Episode(8).dump()).status, 200);
  }
  Ingest again(dir.path(), quad::ScenarioConfig{});
  EXPECT_EQ(again.list_demonstrations().body["demonstrations"].size(), 1u);
  EXPECT_TRUE(again.post_demonstration(Episode(8).dump()).body["duplicate"].get<bool>());
  const data::Dataset ds = data::load_dataset(dir.path());
  EXPECT_EQ(ds.demos.size(), 1u);
}

TEST(Ingest, ScenarioSharesPlantMatrices) {
  TempDir dir;
  Ingest ingest(dir.path(), quad::ScenarioConfig{});
  const Json s = ingest.scenario().body;
  const LtiSystemd sys = quad::make_system();
  EXPECT_EQ(io::matrix_from_json(s["plant"]["A"], "A"), sys.A());
  EXPECT_EQ(io::matrix_from_json(s["plant"]["B"], "B"), sys.B());
  EXPECT_EQ(s["plant"]["dt"].get<double>(), 0.05);
  EXPECT_EQ(s["state_layout"].size(), 6u);
  EXPECT_NO_THROW(io::scenario_from_json(s["scenario"]));
}

class HttpServer : public ::testing::Test {
 protected:
  void SetUp() override {
    ingest_ = std::make_unique<Ingest>(dir_.path(), quad::ScenarioConfig{});
    register_routes(server_, *ingest_);
    port_ = server_.bind_to_any_port("127.0.0.1");
    ASSERT_GT(port_, 0);
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  void TearDown() override {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }
  httplib::Client Client() const { return httplib::Client("127.0.0.1", port_); }

  TempDir dir_;
  std::unique_ptr<Ingest> ingest_;
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

TEST_F(HttpServer, Healthz) {
  auto res = Client().Get("/healthz");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(res->body, "ok");
}

TEST_F(HttpServer, PostListAndScenario) {
  auto client = Client();
  auto res = client.Post("/api/demonstrations", Episode(9).dump(), "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  const Json ack = Json::parse(res->body);
  EXPECT_TRUE(ack["landing_outcome"]["landed"].get<bool>());
  EXPECT_EQ(res->get_header_value("Content-Type"), "application/json");

  Json bad = Episode(9);
  bad["inputs"][0][0] = -1.5;
  res = client.Post("/api/demonstrations", bad.dump(), "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 400);

  res = client.Get("/api/demonstrations");
  ASSERT_TRUE(res);
  const Json listing = Json::parse(res->body);
  ASSERT_EQ(listing["demonstrations"].size(), 1u);
  EXPECT_EQ(listing["demonstrations"][0]["id"], ack["id"]);

  res = client.Get("/api/scenario");
  ASSERT_TRUE(res);
  EXPECT_EQ(Json::parse(res->body)["plant"]["B"][5][0].get<double>(), 5.0);
}

TEST_F(HttpServer, ConcurrentUploadsAreSerialized) {
  std::vector<std::thread> clients;
  std::vector<int> status(8, 0);
  for (int i = 0; i < 8; ++i) {
    clients.emplace_back([this, i, &status] {
      auto res = Client().Post("/api/demonstrations", Episode(100 + i).dump(),
                               "application/json");
      status[i] = res ? res->status : -1;
    });
  }
  for (auto& t : clients) t.join();
  for (int s : status) EXPECT_EQ(s, 200);
  const data::Dataset ds = data::load_dataset(dir_.path());
  EXPECT_EQ(ds.manifest.entries.size(), 8u);
  EXPECT_EQ(ds.demos.size(), 8u);
}

}  // namespace
}  // namespace hbm::service
