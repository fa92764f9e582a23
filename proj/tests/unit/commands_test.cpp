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

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "hbm/commands.hpp"
#include "hbm/dataset.hpp"
#include "hbm/errors.hpp"

namespace hbm::cli {
namespace {

using io::Json;
namespace fs = std::filesystem;

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

Json GaussianNoise() {
  return Json{{"kind", "gaussian_constant"},
              {"mean", {0.0, 0.0}},
              {"cov", {{4e-4, 0.0}, {0.0, 4e-4}}}};
}

class Workspace : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = fs::temp_directory_path() /
            ("hbm_commands_" + std::to_string(std::random_device{}()));
    cmd_synth({{"out", (root_ / "train").string()}, {"count", 30}, {"seed", 11},
               {"variability", GaussianNoise()}});
    cmd_synth({{"out", (root_ / "tests").string()}, {"count", 5}, {"seed", 12},
               {"variability", GaussianNoise()}});
    for (const char* method : {"proposed", "ioc_only", "gmr_only"}) {
      summaries_[method] = cmd_train({{"data", (root_ / "train").string()},
                                      {"out", Model(method).string()},
                                      {"method", method}});
    }
  }
  static void TearDownTestSuite() { fs::remove_all(root_); }
  static fs::path Model(const std::string& method) {
    return root_ / "models" / (method + ".json");
  }

  static fs::path root_;
  static Json summaries_;
};

fs::path Workspace::root_;
Json Workspace::summaries_;

TEST_F(Workspace, SynthWritesManifestAndFiles) {
  const data::Dataset ds = data::load_dataset(root_ / "train");
  EXPECT_EQ(ds.demos.size(), 30u);
  EXPECT_EQ(ds.manifest.entries.size(), 30u);
  for (const auto& e : ds.manifest.entries) {
    EXPECT_TRUE(fs::exists(root_ / "train" / e.file)) << e.file;
  }
}

TEST_F(Workspace, SynthIsByteReproducible) {
  const fs::path again = root_ / "train_again";
  cmd_synth({{"out", again.string()}, {"count", 30}, {"seed", 11},
             {"variability", GaussianNoise()}});
  std::size_t files = 0;
  for (const auto& entry : fs::directory_iterator(root_ / "train")) {
    const fs::path twin = again / entry.path().filename();
    ASSERT_TRUE(fs::exists(twin)) << twin;
    EXPECT_EQ(Slurp(entry.path()), Slurp(twin)) << entry.path().filename();
    ++files;
  }
  EXPECT_EQ(files, 31u);
}

TEST(Synth, RejectsBadConfiguration) {
  EXPECT_THROW(cmd_synth({{"out", "/tmp/unused"}, {"count", 0}}), ConfigError);
  EXPECT_THROW(cmd_synth({{"out", "/tmp/unused"}, {"colour", 1}}), ConfigError);
  EXPECT_THROW(cmd_synth({{"out", "/tmp/unused"}, {"count", "many"}}), ConfigError);
  EXPECT_THROW(cmd_synth({{"format", "hbm-config/9"}}), ConfigError);
  EXPECT_THROW(cmd_synth(Json::array()), ConfigError);
}

TEST(DataPath, FallsBackToEnvironment) {
  ::unsetenv("HBM_DATA_DIR");
  EXPECT_THROW(data_path("", "synthetic"), ConfigError);
  EXPECT_EQ(data_path("/x/y", "synthetic"), fs::path("/x/y"));
  ::setenv("HBM_DATA_DIR", "/srv/hbm", 1);
  EXPECT_EQ(data_path("", "synthetic"), fs::path("/srv/hbm/synthetic"));
  ::unsetenv("HBM_DATA_DIR");
}

TEST_F(Workspace, TrainProducesDistinctBundles) {
  const std::string a = Slurp(Model("proposed"));
  const std::string b = Slurp(Model("ioc_only"));
  const std::string c = Slurp(Model("gmr_only"));
  EXPECT_NE(a, b);
  EXPECT_NE(b, c);
  EXPECT_NE(a, c);
  EXPECT_EQ(summaries_["proposed"]["method"], "proposed");
  EXPECT_EQ(summaries_["proposed"]["demonstrations"].get<int>(), 30);
  EXPECT_TRUE(summaries_["proposed"].contains("normalized_objective"));
  EXPECT_TRUE(summaries_["ioc_only"].contains("alpha"));
  EXPECT_FALSE(summaries_["gmr_only"].contains("normalized_objective"));
}

TEST_F(Workspace, TrainReportShowsObjective) {
  const std::string report = Slurp(Model("proposed").string() + ".report.txt");
  EXPECT_NE(report.find("normalized Q"), std::string::npos);
  EXPECT_NE(report.find("gain estimate"), std::string::npos);
  EXPECT_NE(report.find("mixture components"), std::string::npos);
}

TEST_F(Workspace, TrainRejectsMissingDataset) {
  EXPECT_THROW(cmd_train({{"data", (root_ / "nowhere").string()},
                          {"out", (root_ / "m.json").string()}}),
               IoError);
  EXPECT_THROW(cmd_train({{"data", (root_ / "train").string()}}), ConfigError);
  EXPECT_THROW(cmd_train({{"data", (root_ / "train").string()},
                          {"out", (root_ / "m.json").string()},
                          {"method", "oracle"}}),
               ConfigError);
}

TEST_F(Workspace, PredictTrimsLongHorizon) {
  const data::Dataset tests = data::load_dataset(root_ / "tests");
  const fs::path test = root_ / "tests" / tests.manifest.entries[0].file;
  const fs::path out = root_ / "pred" / "p.json";
  const Json pred = cmd_predict({{"model", Model("proposed").string()},
                                 {"test", test.string()},
                                 {"horizon", 100000},
                                 {"out", out.string()}});
  EXPECT_EQ(pred["horizon"].get<long>(), tests.demos.trajectories[0].steps());
  EXPECT_EQ(pred["warnings"].size(), 1u);
  EXPECT_TRUE(fs::exists(out));
  const Json short_pred = cmd_predict(
      {{"model", Model("ioc_only").string()}, {"test", test.string()}, {"horizon", 20}});
  EXPECT_EQ(short_pred["horizon"].get<int>(), 20);
  EXPECT_TRUE(short_pred["warnings"].empty());
  EXPECT_THROW(cmd_predict({{"model", Model("ioc_only").string()},
                            {"test", test.string()},
                            {"horizon", 0}}),
               ConfigError);
}

TEST_F(Workspace, EvalComparesAllMethods) {
  const fs::path out = root_ / "eval";
  const Json metrics = cmd_eval({{"models",
                                  {Model("proposed").string(), Model("ioc_only").string(),
                                   Model("gmr_only").string()}},
                                 {"tests", (root_ / "tests").string()},
                                 {"out", out.string()}});
  ASSERT_EQ(metrics["models"].size(), 3u);
  const std::string table = Slurp(out / "comparison.csv");
  for (const char* tag : {"proposed,", "ioc_only,", "gmr_only,"}) {
    EXPECT_NE(table.find(std::string("\n") + tag), std::string::npos) << tag;
  }
  EXPECT_TRUE(fs::exists(out / "metrics.json"));
  EXPECT_TRUE(fs::exists(out / "prediction_gmr_only.csv"));
  const Json& proposed = metrics["models"][0];
  ASSERT_TRUE(proposed.contains("coverage"));
  for (const auto& c : proposed["coverage"]) {
    EXPECT_GE(c.get<double>(), 0.90);
    EXPECT_LE(c.get<double>(), 1.00);
  }
  EXPECT_FALSE(metrics["models"][1].contains("coverage"));
}

TEST(Eval, NoiselessSelfPredictionIsExact) {
  const fs::path root = fs::temp_directory_path() /
                        ("hbm_selfeval_" + std::to_string(std::random_device{}()));
  cmd_synth({{"out", (root / "d").string()}, {"count", 5}, {"seed", 3}});
  cmd_train({{"data", (root / "d").string()},
             {"out", (root / "m.json").string()},
             {"method", "ioc_only"}});
  const Json metrics = cmd_eval({{"models", {(root / "m.json").string()}},
                                 {"tests", (root / "d").string()},
                                 {"out", (root / "e").string()}});
  EXPECT_LE(metrics["models"][0]["mean_rmse_position"].get<double>(), 1e-6);
  EXPECT_LE(metrics["models"][0]["mean_rmse_velocity"].get<double>(), 1e-6);
  EXPECT_THROW(cmd_eval({{"models", Json::array()}, {"tests", "x"}, {"out", "y"}}),
               ConfigError);
  fs::remove_all(root);
}

}  // namespace
}  // namespace hbm::cli
