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

#include "hbm/quadrotor.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <numbers>

namespace hbm::quadrotor {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// The parameters are short decimals, so rounding a product to 15
// significant digits recovers its exact decimal value.
double Decimal(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.15g", value);
  return std::strtod(buf, nullptr);
}

void RequirePsd(const MatrixXd& cov, const char* what) {
  if (cov.rows() != kInputDim || cov.cols() != kInputDim) {
    internal::ThrowDimension(std::string(what) + ": covariance must be 2x2");
  }
  if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-12 ||
      Eigen::SelfAdjointEigenSolver<MatrixXd>(cov).eigenvalues().minCoeff() <
          -1e-12) {
    throw InvalidArgument(std::string(what) + ": covariance must be PSD");
  }
}

VectorXd Draw(const VectorXd& mean, const MatrixXd& cov,
              std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  VectorXd z(mean.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = normal(rng);
  // LDLT tolerates singular covariances, including the all-zero one.
  const Eigen::LDLT<MatrixXd> ldlt(cov);
  const VectorXd d = ldlt.vectorD().cwiseMax(0.0).cwiseSqrt();
  VectorXd y = ldlt.matrixL() * (d.asDiagonal() * z);
  return mean + ldlt.transpositionsP().transpose() * y;
}

}  // namespace

void Params::validate() const {
  if (!(dt > 0 && g > 0 && mass > 0 && inertia > 0)) {
    throw InvalidArgument("quadrotor: dt, g, mass, inertia must be positive");
  }
  if (!(k1 < 0 && k2 < 0 && k3 < 0)) {
    throw InvalidArgument("quadrotor: stabilizer entries must be negative");
  }
}

LtiSystemd make_system(const Params& p) {
  p.validate();
  MatrixXd A = MatrixXd::Identity(kStateDim, kStateDim);
  A(kX, kVx) = Decimal(p.dt);
  A(kY, kVy) = Decimal(p.dt);
  A(kPhi, kOmega) = Decimal(p.dt);
  A(kVx, kPhi) = Decimal(p.dt * p.g);
  A(kVy, kVy) = Decimal(1.0 + p.dt * p.k1);
  A(kOmega, kPhi) = Decimal(p.dt * p.k2);
  A(kOmega, kOmega) = Decimal(1.0 + p.dt * p.k3);
  MatrixXd B = MatrixXd::Zero(kStateDim, kInputDim);
  B(kVy, 1) = Decimal(p.dt / p.mass);
  B(kOmega, 0) = Decimal(p.dt / p.inertia);
  return LtiSystemd(std::move(A), std::move(B), p.dt);
}

void ScenarioConfig::validate() const {
  if (!(x_min < x_max && y_min < y_max)) {
    throw InvalidArgument("scenario: empty position domain");
  }
  if (!(x0_min <= x0_max && y0_min <= y0_max && x0_min >= x_min &&
        x0_max <= x_max && y0_min >= y_min && y0_max <= y_max)) {
    throw InvalidArgument("scenario: initial ranges must lie in the domain");
  }
  if (!(pad_half_width > 0 && max_final_speed > 0 &&
        max_final_attitude_deg > 0 && input_bound > 0 && max_steps >= 1)) {
    throw InvalidArgument("scenario: thresholds must be positive");
  }
  if (!(touchdown_altitude >= y_min && touchdown_altitude < y0_min)) {
    throw InvalidArgument("scenario: touchdown altitude below start box");
  }
}

std::string to_string(VariabilityKind kind) {
  switch (kind) {
    case VariabilityKind::kNone: return "none";
    case VariabilityKind::kGaussianConstant: return "gaussian_constant";
    case VariabilityKind::kLinearState: return "linear_state";
    case VariabilityKind::kGmmStateDependent: return "gmm_state_dependent";
  }
  return "none";
}

VariabilityKind variability_kind_from_string(const std::string& name) {
  for (auto k : {VariabilityKind::kNone, VariabilityKind::kGaussianConstant,
                 VariabilityKind::kLinearState,
                 VariabilityKind::kGmmStateDependent}) {
    if (to_string(k) == name) return k;
  }
  throw InvalidArgument("unknown variability kind '" + name + "'");
}

void VariabilitySpec::validate() const {
  if (mean.size() != kInputDim || L.rows() != kInputDim ||
      L.cols() != kStateDim || high.mean.size() != kInputDim ||
      low.mean.size() != kInputDim) {
    internal::ThrowDimension("VariabilitySpec: wrong parameter shapes");
  }
  RequirePsd(cov, "VariabilitySpec.cov");
  RequirePsd(high.cov, "VariabilitySpec.high.cov");
  RequirePsd(low.cov, "VariabilitySpec.low.cov");
  if (!(gate_width > 0)) {
    throw InvalidArgument("VariabilitySpec: gate width must be positive");
  }
}

double VariabilitySpec::gate(const VectorXd& x) const {
  return 1.0 / (1.0 + std::exp(-(x(kY) - gate_altitude) / gate_width));
}

VectorXd VariabilitySpec::mean_field(const VectorXd& x) const {
  switch (kind) {
    case VariabilityKind::kNone: return VectorXd::Zero(kInputDim);
    case VariabilityKind::kGaussianConstant: return mean;
    case VariabilityKind::kLinearState: return L * x;
    case VariabilityKind::kGmmStateDependent: {
      const double s = gate(x);
      return s * high.mean + (1.0 - s) * low.mean;
    }
  }
  return VectorXd::Zero(kInputDim);
}

VariabilitySpec VariabilitySpec::none() { return {}; }

VariabilitySpec VariabilitySpec::gaussian_constant(VectorXd mean,
                                                   MatrixXd cov) {
  VariabilitySpec v;
  v.kind = VariabilityKind::kGaussianConstant;
  v.mean = std::move(mean);
  v.cov = std::move(cov);
  return v;
}

VariabilitySpec VariabilitySpec::linear_state(MatrixXd L, MatrixXd cov) {
  VariabilitySpec v;
  v.kind = VariabilityKind::kLinearState;
  v.L = std::move(L);
  v.cov = std::move(cov);
  return v;
}

VariabilitySpec VariabilitySpec::gmm_state_dependent() {
  VariabilitySpec v;
  v.kind = VariabilityKind::kGmmStateDependent;
  v.high.mean = (VectorXd(2) << 0.03, -0.12).finished();
  v.high.cov = (VectorXd(2) << 4e-4, 4e-4).finished().asDiagonal();
  v.low.mean = VectorXd::Zero(2);
  v.low.cov = (VectorXd(2) << 4e-4, 4e-4).finished().asDiagonal();
  v.gate_altitude = 1.5;
  v.gate_width = 0.25;
  return v;
}

DemonstratorObjective default_objective() {
  DemonstratorObjective o;
  o.q_diag = (VectorXd(6) << 0.05, 0.1, 1.0, 1.0, 0.6, 1.0).finished();
  o.r_diag = (VectorXd(2) << 1.0, 1.0).finished();
  return o;
}

DemonstratorObjective strategy_objective(int strategy) {
  if (strategy != 1 && strategy != 2) {
    throw InvalidArgument("strategy_objective: strategy must be 1 or 2");
  }
  DemonstratorObjective o = default_objective();
  if (strategy == 1) o.q_diag(kPhi) /= 46.0;
  return o;
}

MatrixXd demonstrator_gain(const LtiSystemd& sys,
                           const DemonstratorObjective& objective) {
  return lqr_gain<double>(sys, objective.Q(), objective.R(),
                          MatrixXd::Zero(sys.state_dim(), sys.input_dim()));
}

std::string to_string(StopReason reason) {
  switch (reason) {
    case StopReason::kTouchdown: return "touchdown";
    case StopReason::kMaxSteps: return "max_steps";
    case StopReason::kDiverged: return "diverged";
  }
  return "touchdown";
}

SynthResult synth_demonstrate(const LtiSystemd& sys, const MatrixXd& K_true,
                              const VariabilitySpec& vspec, const VectorXd& x0,
                              const ScenarioConfig& config,
                              std::uint64_t seed) {
  config.validate();
  vspec.validate();
  if (sys.state_dim() != kStateDim || sys.input_dim() != kInputDim ||
      K_true.rows() != kInputDim || K_true.cols() != kStateDim ||
      x0.size() != kStateDim) {
    internal::ThrowDimension("synth_demonstrate: quadrotor shapes expected");
  }
  if (!is_stabilizing(sys, K_true)) {
    throw NotStabilizing("synth_demonstrate: K_true does not stabilize");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double span = 10.0 * std::max(config.x_max - config.x_min,
                                      config.y_max - config.y_min);

  SynthResult out;
  std::vector<VectorXd> states{x0};
  std::vector<VectorXd> inputs;
  out.reason = StopReason::kMaxSteps;
  for (int k = 0; k < config.max_steps; ++k) {
    const VectorXd& x = states.back();
    VectorXd w = VectorXd::Zero(kInputDim);
    switch (vspec.kind) {
      case VariabilityKind::kNone:
        break;
      case VariabilityKind::kGaussianConstant:
        w = Draw(vspec.mean, vspec.cov, rng);
        break;
      case VariabilityKind::kLinearState:
        w = vspec.L * x + Draw(VectorXd::Zero(kInputDim), vspec.cov, rng);
        break;
      case VariabilityKind::kGmmStateDependent: {
        const bool high = unit(rng) < vspec.gate(x);
        const GatedBranch& b = high ? vspec.high : vspec.low;
        w = Draw(b.mean, b.cov, rng);
        break;
      }
    }
    const VectorXd raw = K_true * x + w;
    const VectorXd u =
        raw.cwiseMax(-config.input_bound).cwiseMin(config.input_bound);
    if (u != raw) ++out.saturated_steps;
    inputs.push_back(u);
    states.push_back(sys.step(x, u));
    const VectorXd& next = states.back();
    if (std::abs(next(kX)) > span || std::abs(next(kY)) > span ||
        !next.allFinite()) {
      out.reason = StopReason::kDiverged;
      break;
    }
    if (next(kY) <= config.touchdown_altitude) {
      out.reason = StopReason::kTouchdown;
      break;
    }
  }

  Trajectoryd& t = out.trajectory;
  t.dt = sys.dt();
  t.states.resize(kStateDim, Eigen::Index(states.size()));
  t.inputs.resize(kInputDim, Eigen::Index(inputs.size()));
  for (std::size_t k = 0; k < states.size(); ++k) t.states.col(k) = states[k];
  for (std::size_t k = 0; k < inputs.size(); ++k) t.inputs.col(k) = inputs[k];
  t.meta["variability"] = to_string(vspec.kind);
  t.meta["seed"] = std::to_string(seed);
  t.meta["stop_reason"] = to_string(out.reason);
  t.meta["saturated_steps"] = std::to_string(out.saturated_steps);
  return out;
}

LandingOutcome landing_outcome(const Trajectoryd& traj,
                               const ScenarioConfig& config) {
  if (traj.states.cols() == 0) {
    throw InvalidArgument("landing_outcome: empty trajectory");
  }
  if (traj.state_dim() != kStateDim) {
    internal::ThrowDimension("landing_outcome: quadrotor state expected");
  }
  const VectorXd x = traj.states.col(traj.states.cols() - 1);
  LandingOutcome o;
  o.final_speed = std::hypot(x(kVx), x(kVy));
  o.final_attitude_deg = std::abs(x(kPhi)) * 180.0 / std::numbers::pi;
  o.on_pad = std::abs(x(kX) - config.pad_x) <= config.pad_half_width;
  o.landed = o.final_speed < config.max_final_speed &&
             o.final_attitude_deg < config.max_final_attitude_deg && o.on_pad;
  return o;
}

std::vector<TaskFrame> build_frames(const VectorXd& x0, const VectorXd& x_final,
                                    double phi_final, Eigen::Index input_dim) {
  if (x0.size() != kStateDim || x_final.size() != kStateDim) {
    internal::ThrowDimension("build_frames: quadrotor states expected");
  }
  const Eigen::Index D = kStateDim + input_dim;
  TaskFrame start = TaskFrame::identity(D);
  start.b.head(kStateDim) = x0;
  TaskFrame finish = TaskFrame::identity(D);
  finish.b.head(kStateDim) = x_final;
  const double c = std::cos(phi_final), s = std::sin(phi_final);
  finish.T(kX, kX) = c;
  finish.T(kX, kY) = -s;
  finish.T(kY, kX) = s;
  finish.T(kY, kY) = c;
  return {std::move(start), std::move(finish)};
}

std::vector<TaskFrame> frames_for_demo(const Trajectoryd& traj) {
  const VectorXd last = traj.states.col(traj.states.cols() - 1);
  return build_frames(traj.states.col(0), last, last(kPhi), traj.input_dim());
}

std::vector<TaskFrame> frames_for_prediction(const VectorXd& x0) {
  return build_frames(x0, VectorXd::Zero(kStateDim), 0.0);
}

}  // namespace hbm::quadrotor
