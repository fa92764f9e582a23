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

#include "hbm/pipeline.hpp"

#include <cmath>

#include "hbm/quadrotor.hpp"

namespace hbm {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

std::string to_string(Method method) {
  switch (method) {
    case Method::kProposed: return "proposed";
    case Method::kIocOnly: return "ioc_only";
    case Method::kGmrOnly: return "gmr_only";
  }
  return "proposed";
}

Method method_from_string(const std::string& name) {
  for (auto m : {Method::kProposed, Method::kIocOnly, Method::kGmrOnly}) {
    if (to_string(m) == name) return m;
  }
  throw InvalidArgument("unknown method '" + name + "'");
}

std::string to_string(FrameKind kind) {
  return kind == FrameKind::kIdentity ? "identity" : "start_goal";
}

FrameKind frame_kind_from_string(const std::string& name) {
  if (name == "identity") return FrameKind::kIdentity;
  if (name == "start_goal") return FrameKind::kStartGoal;
  throw InvalidArgument("unknown frame kind '" + name + "'");
}

std::vector<TaskFrame> training_frames(FrameKind kind, const Trajectoryd& traj) {
  if (kind == FrameKind::kIdentity) {
    return {TaskFrame::identity(traj.state_dim() + traj.input_dim())};
  }
  return quadrotor::frames_for_demo(traj);
}

std::vector<TaskFrame> query_frames(FrameKind kind, const VectorXd& x0,
                                    Index input_dim) {
  if (kind == FrameKind::kIdentity) {
    return {TaskFrame::identity(x0.size() + input_dim)};
  }
  return quadrotor::build_frames(x0, VectorXd::Zero(x0.size()), 0.0,
                                 input_dim);
}

void TrainConfig::validate() const {
  if (components < 1) throw ConfigError("components must be >= 1");
  if (!(input_bound > 0)) throw ConfigError("input_bound must be positive");
  if (!(mixture.em.reg > 0) || mixture.em.max_iter < 1 ||
      !(mixture.em.tol > 0) || mixture.em.kmeans_restarts < 1) {
    throw ConfigError("invalid EM settings");
  }
}

VariabilityModel BehaviorModel::variability_for(const VectorXd& x0) const {
  if (!mixture) {
    throw InvalidArgument("BehaviorModel: method " + to_string(method) +
                          " has no variability model");
  }
  return VariabilityModel(
      *mixture, query_frames(config.frames, x0, system.input_dim()),
      system.state_dim());
}

BehaviorModel train(const LtiSystemd& sys, const DemonstrationSetd& demos,
                    const TrainConfig& config) {
  config.validate();
  demos.validate(sys);
  BehaviorModel model;
  model.method = config.method;
  model.system = sys;
  model.config = config;

  std::vector<MatrixXd> outputs;
  if (config.method == Method::kGmrOnly) {
    for (const auto& t : demos.trajectories) outputs.push_back(t.inputs);
  } else {
    GainEstimate est = estimate_gain(sys, demos);
    if (!est.stabilizing) {
      throw NotStabilizing("train: estimated gain does not stabilize the plant");
    }
    model.objective = recover_objective(sys, est.K_hat, config.ioc);
    if (config.method == Method::kProposed) {
      outputs = extract_variability(demos, est.K_hat);
    }
    model.gain = std::move(est);
  }
  if (config.method == Method::kIocOnly) return model;

  std::vector<std::vector<TaskFrame>> frames;
  VectorXd mean_start = VectorXd::Zero(sys.state_dim());
  for (const auto& t : demos.trajectories) {
    frames.push_back(training_frames(config.frames, t));
    mean_start += t.states.col(0);
  }
  mean_start /= double(demos.size());
  TpGmmFit fit = fit_tp_gmm(joint_vectors(demos, outputs), frames,
                            config.components, config.mixture);
  model.mixture = std::move(fit.model);
  model.reference = model.variability_for(mean_start);
  return model;
}

PredictedTrajectory predict_trajectory(const BehaviorModel& model,
                                       const VectorXd& x0, int horizon) {
  const LtiSystemd& sys = model.system;
  if (horizon < 1) throw InvalidArgument("predict_trajectory: horizon >= 1");
  if (x0.size() != sys.state_dim()) {
    internal::ThrowDimension("predict_trajectory: x0 has wrong dimension");
  }
  const Index m = sys.input_dim();
  std::optional<VariabilityModel> vm;
  if (model.method != Method::kIocOnly) vm = model.variability_for(x0);
  if (model.method != Method::kGmrOnly && !model.gain) {
    throw InvalidArgument("predict_trajectory: model carries no gain");
  }

  PredictedTrajectory out;
  out.states.resize(sys.state_dim(), horizon + 1);
  out.inputs.resize(m, horizon);
  out.states.col(0) = x0;
  const double bound = model.config.input_bound;
  for (int k = 0; k < horizon; ++k) {
    const VectorXd x = out.states.col(k);
    VectorXd u = VectorXd::Zero(m);
    MatrixXd cov = MatrixXd::Zero(m, m);
    bool far = false;
    if (model.method != Method::kGmrOnly) u = model.gain->K_hat * x;
    if (vm) {
      const VariabilityQuery q = vm->query(x);
      u += q.distribution.mean;
      cov = q.distribution.cov;
      far = q.far_field;
    }
    const VectorXd clamped = u.cwiseMax(-bound).cwiseMin(bound);
    out.clamped.push_back(clamped != u);
    out.far_field.push_back(far);
    out.inputs.col(k) = clamped;
    out.input_covs.push_back(std::move(cov));
    out.states.col(k + 1) = sys.A() * x + sys.B() * clamped;
  }
  return out;
}

double rmse(const MatrixXd& predicted, const MatrixXd& truth,
            const std::vector<int>& dims) {
  if (predicted.cols() != truth.cols() || predicted.rows() != truth.rows()) {
    internal::ThrowDimension("rmse: horizon or state dimension mismatch");
  }
  const Index horizon = predicted.cols() - 1;
  if (horizon < 1) throw InvalidArgument("rmse: horizon must be >= 1");
  double sum = 0.0;
  for (Index k = 1; k <= horizon; ++k) {
    for (int d : dims) {
      if (d < 0 || d >= predicted.rows()) {
        throw InvalidArgument("rmse: dimension index out of range");
      }
      const double e = predicted(d, k) - truth(d, k);
      sum += e * e;
    }
  }
  return std::sqrt(sum / double(horizon));
}

Trajectoryd head(const Trajectoryd& traj, Index steps) {
  if (steps < 0 || steps > traj.steps()) {
    throw InvalidArgument("head: step count out of range");
  }
  Trajectoryd out;
  out.dt = traj.dt;
  out.meta = traj.meta;
  out.states = traj.states.leftCols(steps + 1);
  out.inputs = traj.inputs.leftCols(steps);
  return out;
}

BoundsReport one_step_bounds(const BehaviorModel& model, const Trajectoryd& test,
                             double n_sigma) {
  if (model.method != Method::kProposed) {
    throw InvalidArgument("one_step_bounds: needs a proposed-method model");
  }
  test.validate();
  const LtiSystemd& sys = model.system;
  if (test.state_dim() != sys.state_dim() ||
      (test.steps() > 0 && test.input_dim() != sys.input_dim())) {
    internal::ThrowDimension("one_step_bounds: trajectory dimension mismatch");
  }
  const VariabilityModel vm = model.variability_for(test.states.col(0));
  const MatrixXd& K = model.gain->K_hat;
  BoundsReport report;
  report.n_sigma = n_sigma;
  for (Index k = 0; k < test.steps(); ++k) {
    const VectorXd x =
        k == 0 ? VectorXd(test.states.col(0))
               : VectorXd(sys.A() * test.states.col(k - 1) +
                          sys.B() * test.inputs.col(k - 1));
    const VariabilityQuery q = vm.query(x);
    StepBound step;
    step.k = k;
    step.w_hat = test.inputs.col(k) - K * test.states.col(k);
    step.mean = q.distribution.mean;
    step.cov = q.distribution.cov;
    step.far_field = q.far_field;
    for (Index a = 0; a < step.w_hat.size(); ++a) {
      const double half = n_sigma * std::sqrt(std::max(0.0, step.cov(a, a)));
      step.inside.push_back(std::abs(step.w_hat(a) - step.mean(a)) <= half);
    }
    report.steps.push_back(std::move(step));
  }
  return report;
}

VectorXd coverage(const BoundsReport& report, double n_sigma) {
  if (report.steps.empty()) throw InvalidArgument("coverage: empty report");
  const Index m = report.steps.front().w_hat.size();
  VectorXd inside = VectorXd::Zero(m);
  for (const auto& s : report.steps) {
    for (Index a = 0; a < m; ++a) {
      const double half = n_sigma * std::sqrt(std::max(0.0, s.cov(a, a)));
      if (std::abs(s.w_hat(a) - s.mean(a)) <= half) inside(a) += 1.0;
    }
  }
  return inside / double(report.steps.size());
}

}  // namespace hbm
