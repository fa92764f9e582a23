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

// hbm: synthesize demonstrations, train behavior models, predict,
// evaluate, and serve the demonstration ingestion API.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "hbm/commands.hpp"
#include "hbm/json_io.hpp"
#include "hbm/service.hpp"
// After Eigen: resolv.h, pulled in by httplib, defines a macro named _res.
#include <httplib.h>

namespace {

using hbm::io::Json;

Json LoadConfig(const std::string& path) {
  if (path.empty()) return Json::object();
  return hbm::io::read_json_file(path);
}

template <typename T>
void Override(Json& config, const char* key, const std::optional<T>& value) {
  if (value) config[key] = *value;
}

int Serve(const Json& config) {
  hbm::io::reject_unknown_keys(
      config, {"format", "host", "port", "data_dir", "static_dir", "scenario"},
      "serve");
  const std::string host = config.value("host", "127.0.0.1");
  const int port = config.value("port", 8080);
  const auto data_dir =
      hbm::cli::data_path(config.value("data_dir", ""), "demonstrations");
  hbm::quadrotor::ScenarioConfig scenario;
  if (config.contains("scenario")) {
    scenario = hbm::io::scenario_from_json(config["scenario"]);
  }
  hbm::service::Ingest ingest(data_dir, scenario);
  httplib::Server server;
  hbm::service::register_routes(server, ingest, config.value("static_dir", ""));
  std::cerr << "serving " << data_dir << " on http://" << host << ":" << port
            << "\n";
  if (!server.listen(host, port)) {
    std::cerr << "error: cannot listen on " << host << ":" << port << "\n";
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Human behavior modeling: IOC task objective plus learned "
               "variability"};
  app.require_subcommand(1);
  std::string config_path;

  auto* synth = app.add_subcommand("synth", "generate synthetic demonstrations");
  std::optional<std::string> out;
  std::optional<int> count, strategy;
  std::optional<std::uint64_t> seed;
  synth->add_option("--config", config_path, "JSON configuration file");
  synth->add_option("--out", out, "dataset directory");
  synth->add_option("--count", count, "number of demonstrations");
  synth->add_option("--seed", seed, "dataset seed");
  synth->add_option("--strategy", strategy, "0 default, 1 or 2 strategy analogue");

  auto* train = app.add_subcommand("train", "train a behavior model");
  std::optional<std::string> data, method, report;
  std::optional<int> components;
  train->add_option("--config", config_path, "JSON configuration file");
  train->add_option("--data", data, "dataset directory");
  train->add_option("--out", out, "model bundle path");
  train->add_option("--report", report, "report path");
  train->add_option("--method", method, "proposed, ioc_only or gmr_only");
  train->add_option("--components", components, "mixture components G");

  auto* predict = app.add_subcommand("predict", "predict from a test initial state");
  std::optional<std::string> model, test;
  std::optional<int> horizon;
  predict->add_option("--config", config_path, "JSON configuration file");
  predict->add_option("--model", model, "model bundle");
  predict->add_option("--test", test, "test trajectory JSON");
  predict->add_option("--out", out, "prediction output path");
  predict->add_option("--horizon", horizon, "prediction steps (default 60)");

  auto* eval = app.add_subcommand("eval", "evaluate models on a test set");
  std::optional<std::vector<std::string>> models;
  std::optional<std::string> tests;
  std::optional<double> n_sigma;
  eval->add_option("--config", config_path, "JSON configuration file");
  eval->add_option("--models", models, "model bundles");
  eval->add_option("--tests", tests, "test dataset directory");
  eval->add_option("--out", out, "output directory");
  eval->add_option("--horizon", horizon, "prediction steps (default 60)");
  eval->add_option("--n-sigma", n_sigma, "bound width in standard deviations");

  auto* serve = app.add_subcommand("serve", "run the ingestion service");
  std::optional<int> port;
  std::optional<std::string> host, data_dir, static_dir;
  serve->add_option("--config", config_path, "JSON configuration file");
  serve->add_option("--port", port, "TCP port (default 8080)");
  serve->add_option("--host", host, "bind address (default 127.0.0.1)");
  serve->add_option("--data-dir", data_dir, "storage root (default $HBM_DATA_DIR)");
  serve->add_option("--static-dir", static_dir, "directory served at /");

  CLI11_PARSE(app, argc, argv);

  try {
    Json config = LoadConfig(config_path);
    Json result;
    if (synth->parsed()) {
      Override(config, "out", out);
      Override(config, "count", count);
      Override(config, "seed", seed);
      Override(config, "strategy", strategy);
      result = hbm::cli::cmd_synth(config);
    } else if (train->parsed()) {
      Override(config, "data", data);
      Override(config, "out", out);
      Override(config, "report", report);
      Override(config, "method", method);
      Override(config, "components", components);
      result = hbm::cli::cmd_train(config);
    } else if (predict->parsed()) {
      Override(config, "model", model);
      Override(config, "test", test);
      Override(config, "out", out);
      Override(config, "horizon", horizon);
      result = hbm::cli::cmd_predict(config);
      for (const char* bulky : {"states", "inputs", "input_covs", "clamped", "far_field"}) {
        result.erase(bulky);
      }
    } else if (eval->parsed()) {
      Override(config, "models", models);
      Override(config, "tests", tests);
      Override(config, "out", out);
      Override(config, "horizon", horizon);
      Override(config, "n_sigma", n_sigma);
      result = hbm::cli::cmd_eval(config);
    } else if (serve->parsed()) {
      Override(config, "port", port);
      Override(config, "host", host);
      Override(config, "data_dir", data_dir);
      Override(config, "static_dir", static_dir);
      return Serve(config);
    }
    std::cout << result.dump(2) << "\n";
  } catch (const hbm::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const hbm::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
