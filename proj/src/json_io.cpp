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

#include "hbm/json_io.hpp"

#include <fstream>
#include <sstream>

namespace hbm::io {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

const Json& Field(const Json& j, const char* key, const std::string& where) {
  if (!j.is_object()) throw IoError(where + ": expected a JSON object");
  const auto it = j.find(key);
  if (it == j.end()) {
    throw IoError(where + ": missing field '" + key + "'");
  }
  return *it;
}

double Number(const Json& j, const std::string& what) {
  if (!j.is_number()) throw IoError(what + ": expected a number");
  return j.get<double>();
}

// Reads an optional member into `out`, leaving the default when absent.
template <typename T>
void Optional(const Json& j, const char* key, T& out, const std::string& where) {
  const auto it = j.find(key);
  if (it == j.end()) return;
  try {
    out = it->get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(where + "." + key + ": wrong type");
  }
}

Json ComponentsJson(const std::vector<GaussianComponentd>& comps) {
  Json means = Json::array();
  Json covs = Json::array();
  for (const auto& c : comps) {
    means.push_back(vector_to_json(c.mean));
    covs.push_back(to_json(c.cov));
  }
  return Json{{"means", means}, {"covs", covs}};
}

std::vector<GaussianComponentd> ComponentsFromJson(const Json& j,
                                                   const std::string& where) {
  const Json& means = Field(j, "means", where);
  const Json& covs = Field(j, "covs", where);
  if (!means.is_array() || !covs.is_array() || means.size() != covs.size()) {
    throw IoError(where + ": means and covs must be arrays of equal length");
  }
  std::vector<GaussianComponentd> out;
  for (std::size_t i = 0; i < means.size(); ++i) {
    out.push_back({vector_from_json(means[i], where + ".means"),
                   matrix_from_json(covs[i], where + ".covs")});
  }
  return out;
}

}  // namespace

void reject_unknown_keys(const Json& j, std::initializer_list<const char*> allowed,
                         const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected a JSON object");
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* key : allowed) known = known || item.key() == key;
    if (!known) {
      throw ConfigError(where + ": unknown key '" + item.key() + "'");
    }
  }
}

Json to_json(const MatrixXd& M) {
  Json rows = Json::array();
  for (Index r = 0; r < M.rows(); ++r) {
    Json row = Json::array();
    for (Index c = 0; c < M.cols(); ++c) row.push_back(M(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

MatrixXd matrix_from_json(const Json& j, const std::string& what) {
  if (!j.is_array()) throw IoError(what + ": expected an array of rows");
  if (j.empty()) return MatrixXd(0, 0);
  const std::size_t cols = j.front().is_array() ? j.front().size() : 0;
  MatrixXd M(Index(j.size()), Index(cols));
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (!j[r].is_array() || j[r].size() != cols) {
      throw IoError(what + ": rows must be arrays of equal length");
    }
    for (std::size_t c = 0; c < cols; ++c) M(r, c) = Number(j[r][c], what);
  }
  return M;
}

Json vector_to_json(const VectorXd& v) {
  Json out = Json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

VectorXd vector_from_json(const Json& j, const std::string& what) {
  if (!j.is_array()) throw IoError(what + ": expected an array");
  VectorXd v(Index(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(i) = Number(j[i], what);
  return v;
}

Json to_json(const Trajectoryd& traj) {
  Json meta = Json::object();
  for (const auto& [k, v] : traj.meta) meta[k] = v;
  return Json{{"dt", traj.dt},
              {"states", to_json(MatrixXd(traj.states.transpose()))},
              {"inputs", to_json(MatrixXd(traj.inputs.transpose()))},
              {"meta", meta}};
}

Trajectoryd trajectory_from_json(const Json& j) {
  const std::string where = "trajectory";
  Trajectoryd t;
  t.dt = Number(Field(j, "dt", where), where + ".dt");
  t.states = matrix_from_json(Field(j, "states", where), where + ".states")
                 .transpose();
  t.inputs = matrix_from_json(Field(j, "inputs", where), where + ".inputs")
                 .transpose();
  if (t.inputs.cols() == 0) t.inputs.resize(0, 0);
  if (const auto it = j.find("meta"); it != j.end()) {
    if (!it->is_object()) throw IoError(where + ".meta: expected an object");
    for (const auto& item : it->items()) {
      t.meta[item.key()] = item.value().is_string() ? item.value().get<std::string>()
                                                    : item.value().dump();
    }
  }
  if (!(t.dt > 0)) throw IoError(where + ".dt must be positive");
  if (t.states.cols() != t.inputs.cols() + 1) {
    throw IoError(where + ": need exactly one more state than inputs");
  }
  return t;
}

Json to_json(const LtiSystemd& sys) {
  return Json{{"A", to_json(sys.A())}, {"B", to_json(sys.B())}, {"dt", sys.dt()}};
}

LtiSystemd system_from_json(const Json& j) {
  return LtiSystemd(matrix_from_json(Field(j, "A", "system"), "system.A"),
                    matrix_from_json(Field(j, "B", "system"), "system.B"),
                    Number(Field(j, "dt", "system"), "system.dt"));
}

Json to_json(const GainEstimate& g) {
  return Json{{"K_hat", to_json(g.K_hat)},
              {"lsq_residual", g.lsq_residual},
              {"data_rank", g.data_rank},
              {"stabilizing", g.stabilizing},
              {"rank_deficient", g.rank_deficient}};
}

GainEstimate gain_from_json(const Json& j) {
  GainEstimate g;
  g.K_hat = matrix_from_json(Field(j, "K_hat", "gain"), "gain.K_hat");
  g.lsq_residual = Number(Field(j, "lsq_residual", "gain"), "gain");
  g.data_rank = Field(j, "data_rank", "gain").get<int>();
  g.stabilizing = Field(j, "stabilizing", "gain").get<bool>();
  g.rank_deficient = Field(j, "rank_deficient", "gain").get<bool>();
  return g;
}

Json to_json(const TaskObjective& o) {
  return Json{{"Q", to_json(o.Q)}, {"R", to_json(o.R)}, {"S", to_json(o.S)},
              {"P", to_json(o.P)}, {"alpha", o.alpha}};
}

TaskObjective objective_from_json(const Json& j) {
  const std::string w = "objective";
  TaskObjective o;
  o.Q = matrix_from_json(Field(j, "Q", w), w + ".Q");
  o.R = matrix_from_json(Field(j, "R", w), w + ".R");
  o.S = matrix_from_json(Field(j, "S", w), w + ".S");
  o.P = matrix_from_json(Field(j, "P", w), w + ".P");
  o.alpha = Number(Field(j, "alpha", w), w + ".alpha");
  return o;
}

Json to_json(const Gmmd& gmm) {
  Json out = ComponentsJson(gmm.components);
  out["weights"] = vector_to_json(gmm.weights);
  out["dim"] = gmm.dim();
  return out;
}

Gmmd gmm_from_json(const Json& j) {
  Gmmd g;
  g.weights = vector_from_json(Field(j, "weights", "gmm"), "gmm.weights");
  g.components = ComponentsFromJson(j, "gmm");
  const Json& dim = Field(j, "dim", "gmm");
  if (!dim.is_number_integer() || dim.get<Index>() != g.dim()) {
    throw IoError("gmm: dim does not match the component means");
  }
  try {
    g.validate();
  } catch (const Error& e) {
    throw IoError(std::string("gmm: ") + e.what());
  }
  return g;
}

Json to_json(const TaskFrame& f) {
  return Json{{"T", to_json(f.T)}, {"b", vector_to_json(f.b)}};
}

TaskFrame frame_from_json(const Json& j) {
  return {matrix_from_json(Field(j, "T", "frame"), "frame.T"),
          vector_from_json(Field(j, "b", "frame"), "frame.b")};
}

Json to_json(const TpGmm& m) {
  Json frames = Json::array();
  for (const auto& comps : m.per_frame) frames.push_back(ComponentsJson(comps));
  return Json{{"weights", vector_to_json(m.weights)},
              {"dim", m.dim()},
              {"frames", frames}};
}

TpGmm tp_gmm_from_json(const Json& j) {
  TpGmm m;
  m.weights = vector_from_json(Field(j, "weights", "tp_gmm"), "tp_gmm.weights");
  const Json& frames = Field(j, "frames", "tp_gmm");
  if (!frames.is_array() || frames.empty()) {
    throw IoError("tp_gmm.frames: expected a non-empty array");
  }
  for (const auto& f : frames) {
    m.per_frame.push_back(ComponentsFromJson(f, "tp_gmm.frames"));
    if (Index(m.per_frame.back().size()) != m.weights.size()) {
      throw IoError("tp_gmm: every frame needs one Gaussian per weight");
    }
  }
  return m;
}

Json to_json(const VariabilityModel& vm) {
  Json frames = Json::array();
  for (const auto& f : vm.frames()) frames.push_back(to_json(f));
  Json regression = Json::array();
  for (const auto& c : vm.regressor().components()) {
    regression.push_back(Json{{"gain", to_json(c.gain)}, {"cov", to_json(c.cov)}});
  }
  return Json{{"tp_gmm", to_json(vm.tp())},
              {"frames", frames},
              {"merged", to_json(vm.merged())},
              {"regression", regression},
              {"input_dims", vm.regressor().input_dims()},
              {"output_dims", vm.regressor().output_dims()}};
}

VariabilityModel variability_from_json(const Json& j) {
  TpGmm tp = tp_gmm_from_json(Field(j, "tp_gmm", "variability"));
  std::vector<TaskFrame> frames;
  for (const auto& f : Field(j, "frames", "variability")) {
    frames.push_back(frame_from_json(f));
  }
  const auto input_dims =
      Field(j, "input_dims", "variability").get<std::vector<int>>();
  // The merged mixture and regression terms are pure functions of the
  // stored mixture and frames, so they are rebuilt rather than trusted.
  return VariabilityModel(std::move(tp), std::move(frames),
                          Index(input_dims.size()));
}

Json to_json(const TrainConfig& c) {
  return Json{{"method", to_string(c.method)},
              {"components", c.components},
              {"frames", to_string(c.frames)},
              {"independent_frames", c.mixture.independent_frames},
              {"em",
               {{"reg", c.mixture.em.reg},
                {"max_iter", c.mixture.em.max_iter},
                {"tol", c.mixture.em.tol},
                {"seed", c.mixture.em.seed},
                {"kmeans_restarts", c.mixture.em.kmeans_restarts}}},
              {"ioc",
               {{"tol", c.ioc.tol},
                {"barrier_growth", c.ioc.barrier_growth},
                {"max_newton_steps", c.ioc.max_newton_steps},
                {"max_outer_steps", c.ioc.max_outer_steps}}},
              {"input_bound", c.input_bound}};
}

TrainConfig train_config_from_json(const Json& j) {
  const std::string w = "train";
  reject_unknown_keys(j,
                      {"method", "components", "frames", "independent_frames",
                       "em", "ioc", "input_bound"},
                      w);
  TrainConfig c;
  std::string method = to_string(c.method), frames = to_string(c.frames);
  Optional(j, "method", method, w);
  Optional(j, "frames", frames, w);
  try {
    c.method = method_from_string(method);
    c.frames = frame_kind_from_string(frames);
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  Optional(j, "components", c.components, w);
  Optional(j, "independent_frames", c.mixture.independent_frames, w);
  Optional(j, "input_bound", c.input_bound, w);
  if (const auto it = j.find("em"); it != j.end()) {
    reject_unknown_keys(*it, {"reg", "max_iter", "tol", "seed", "kmeans_restarts"},
                        w + ".em");
    Optional(*it, "reg", c.mixture.em.reg, w + ".em");
    Optional(*it, "max_iter", c.mixture.em.max_iter, w + ".em");
    Optional(*it, "tol", c.mixture.em.tol, w + ".em");
    Optional(*it, "seed", c.mixture.em.seed, w + ".em");
    Optional(*it, "kmeans_restarts", c.mixture.em.kmeans_restarts, w + ".em");
  }
  if (const auto it = j.find("ioc"); it != j.end()) {
    reject_unknown_keys(
        *it, {"tol", "barrier_growth", "max_newton_steps", "max_outer_steps"},
        w + ".ioc");
    Optional(*it, "tol", c.ioc.tol, w + ".ioc");
    Optional(*it, "barrier_growth", c.ioc.barrier_growth, w + ".ioc");
    Optional(*it, "max_newton_steps", c.ioc.max_newton_steps, w + ".ioc");
    Optional(*it, "max_outer_steps", c.ioc.max_outer_steps, w + ".ioc");
  }
  c.validate();
  return c;
}

Json to_json(const quadrotor::ScenarioConfig& c) {
  return Json{{"domain", {{"x", {c.x_min, c.x_max}}, {"y", {c.y_min, c.y_max}}}},
              {"initial", {{"x", {c.x0_min, c.x0_max}}, {"y", {c.y0_min, c.y0_max}}}},
              {"pad", {{"x", c.pad_x}, {"half_width", c.pad_half_width}}},
              {"touchdown_altitude", c.touchdown_altitude},
              {"max_final_speed", c.max_final_speed},
              {"max_final_attitude_deg", c.max_final_attitude_deg},
              {"max_steps", c.max_steps},
              {"input_bound", c.input_bound}};
}

quadrotor::ScenarioConfig scenario_from_json(const Json& j) {
  const std::string w = "scenario";
  reject_unknown_keys(j,
                      {"domain", "initial", "pad", "touchdown_altitude",
                       "max_final_speed", "max_final_attitude_deg", "max_steps",
                       "input_bound"},
                      w);
  quadrotor::ScenarioConfig c;
  auto range = [&](const Json& parent, const char* key, double& lo, double& hi,
                   const std::string& where) {
    const auto it = parent.find(key);
    if (it == parent.end()) return;
    if (!it->is_array() || it->size() != 2 || !(*it)[0].is_number() ||
        !(*it)[1].is_number()) {
      throw ConfigError(where + "." + key + ": expected [lo, hi]");
    }
    lo = (*it)[0].get<double>();
    hi = (*it)[1].get<double>();
  };
  if (const auto it = j.find("domain"); it != j.end()) {
    reject_unknown_keys(*it, {"x", "y"}, w + ".domain");
    range(*it, "x", c.x_min, c.x_max, w + ".domain");
    range(*it, "y", c.y_min, c.y_max, w + ".domain");
  }
  if (const auto it = j.find("initial"); it != j.end()) {
    reject_unknown_keys(*it, {"x", "y"}, w + ".initial");
    range(*it, "x", c.x0_min, c.x0_max, w + ".initial");
    range(*it, "y", c.y0_min, c.y0_max, w + ".initial");
  }
  if (const auto it = j.find("pad"); it != j.end()) {
    reject_unknown_keys(*it, {"x", "half_width"}, w + ".pad");
    Optional(*it, "x", c.pad_x, w + ".pad");
    Optional(*it, "half_width", c.pad_half_width, w + ".pad");
  }
  Optional(j, "touchdown_altitude", c.touchdown_altitude, w);
  Optional(j, "max_final_speed", c.max_final_speed, w);
  Optional(j, "max_final_attitude_deg", c.max_final_attitude_deg, w);
  Optional(j, "max_steps", c.max_steps, w);
  Optional(j, "input_bound", c.input_bound, w);
  try {
    c.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  return c;
}

Json to_json(const quadrotor::VariabilitySpec& v) {
  Json out{{"kind", quadrotor::to_string(v.kind)}};
  switch (v.kind) {
    case quadrotor::VariabilityKind::kNone:
      break;
    case quadrotor::VariabilityKind::kGaussianConstant:
      out["mean"] = vector_to_json(v.mean);
      out["cov"] = to_json(v.cov);
      break;
    case quadrotor::VariabilityKind::kLinearState:
      out["L"] = to_json(v.L);
      out["cov"] = to_json(v.cov);
      break;
    case quadrotor::VariabilityKind::kGmmStateDependent:
      out["high"] = {{"mean", vector_to_json(v.high.mean)}, {"cov", to_json(v.high.cov)}};
      out["low"] = {{"mean", vector_to_json(v.low.mean)}, {"cov", to_json(v.low.cov)}};
      out["gate_altitude"] = v.gate_altitude;
      out["gate_width"] = v.gate_width;
      break;
  }
  return out;
}

quadrotor::VariabilitySpec variability_spec_from_json(const Json& j) {
  const std::string w = "variability";
  reject_unknown_keys(j,
                      {"kind", "mean", "cov", "L", "high", "low",
                       "gate_altitude", "gate_width"},
                      w);
  std::string kind = "none";
  Optional(j, "kind", kind, w);
  quadrotor::VariabilitySpec v;
  try {
    v.kind = quadrotor::variability_kind_from_string(kind);
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  if (v.kind == quadrotor::VariabilityKind::kGmmStateDependent) {
    v = quadrotor::VariabilitySpec::gmm_state_dependent();
  }
  auto matrix = [&](const Json& parent, const char* key, MatrixXd& out,
                    const std::string& where) {
    if (const auto it = parent.find(key); it != parent.end()) {
      out = matrix_from_json(*it, where + "." + key);
    }
  };
  auto vector = [&](const Json& parent, const char* key, VectorXd& out,
                    const std::string& where) {
    if (const auto it = parent.find(key); it != parent.end()) {
      out = vector_from_json(*it, where + "." + key);
    }
  };
  vector(j, "mean", v.mean, w);
  matrix(j, "cov", v.cov, w);
  matrix(j, "L", v.L, w);
  for (const char* branch : {"high", "low"}) {
    if (const auto it = j.find(branch); it != j.end()) {
      reject_unknown_keys(*it, {"mean", "cov"}, w + "." + branch);
      auto& b = std::string(branch) == "high" ? v.high : v.low;
      vector(*it, "mean", b.mean, w + "." + branch);
      matrix(*it, "cov", b.cov, w + "." + branch);
    }
  }
  Optional(j, "gate_altitude", v.gate_altitude, w);
  Optional(j, "gate_width", v.gate_width, w);
  try {
    v.validate();
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return v;
}

Json to_json(const quadrotor::LandingOutcome& o) {
  return Json{{"landed", o.landed},
              {"final_speed", o.final_speed},
              {"final_attitude_deg", o.final_attitude_deg},
              {"on_pad", o.on_pad}};
}

Json to_json(const PredictedTrajectory& p) {
  Json covs = Json::array();
  for (const auto& c : p.input_covs) covs.push_back(to_json(c));
  return Json{{"states", to_json(MatrixXd(p.states.transpose()))},
              {"inputs", to_json(MatrixXd(p.inputs.transpose()))},
              {"input_covs", covs},
              {"clamped", p.clamped},
              {"far_field", p.far_field}};
}

std::string serialize_model(const BehaviorModel& m) {
  Json j{{"format", kModelFormat},
         {"method_tag", to_string(m.method)},
         {"system", to_json(m.system)},
         {"gain", m.gain ? to_json(*m.gain) : Json(nullptr)},
         {"objective", m.objective ? to_json(*m.objective) : Json(nullptr)},
         {"variability", m.reference ? to_json(*m.reference) : Json(nullptr)},
         {"config", to_json(m.config)}};
  return j.dump(1);
}

BehaviorModel deserialize_model(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError(std::string("model bundle: ") + e.what());
  }
  const Json& format = Field(j, "format", "model");
  if (!format.is_string() || format.get<std::string>() != kModelFormat) {
    throw IoError("model bundle: unsupported format, expected hbm-model/1");
  }
  BehaviorModel m;
  m.method = method_from_string(Field(j, "method_tag", "model").get<std::string>());
  m.system = system_from_json(Field(j, "system", "model"));
  if (const Json& g = Field(j, "gain", "model"); !g.is_null()) {
    m.gain = gain_from_json(g);
  }
  if (const Json& o = Field(j, "objective", "model"); !o.is_null()) {
    m.objective = objective_from_json(o);
  }
  m.config = train_config_from_json(Field(j, "config", "model"));
  if (const Json& v = Field(j, "variability", "model"); !v.is_null()) {
    m.reference = variability_from_json(v);
    m.mixture = m.reference->tp();
  }
  if (m.method != Method::kGmrOnly && !m.gain) {
    throw IoError("model bundle: method needs a gain");
  }
  if (m.method != Method::kIocOnly && !m.mixture) {
    throw IoError("model bundle: method needs a variability model");
  }
  return m;
}

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create " + path.parent_path().string());
  }
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << text;
    out.flush();
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename onto " + path.string() + ": " + ec.message());
}

void write_json_file(const std::filesystem::path& path, const Json& j) {
  write_text_file(path, j.dump(1) + "\n");
}

}  // namespace hbm::io
