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

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hbm/gmm.hpp"
#include "hbm/ioc.hpp"
#include "hbm/lti.hpp"
#include "hbm/tp_gmm.hpp"

namespace hbm {

/// proposed: IOC gain plus learned state-dependent variability.
/// ioc_only: IOC gain alone.
/// gmr_only: mixture regression of u on x, no gain.
enum class Method { kProposed, kIocOnly, kGmrOnly };

std::string to_string(Method method);
Method method_from_string(const std::string& name);

/// Which task frames observe the data.
///   identity    one identity frame
///   start_goal  quadrotor start frame and goal frame (see quadrotor.hpp)
enum class FrameKind { kIdentity, kStartGoal };

std::string to_string(FrameKind kind);
FrameKind frame_kind_from_string(const std::string& name);

/// Frames of a recorded training episode.
std::vector<TaskFrame> training_frames(FrameKind kind, const Trajectoryd& traj);
/// Frames for a new episode starting at x0.
std::vector<TaskFrame> query_frames(FrameKind kind, const Eigen::VectorXd& x0,
                                    Eigen::Index input_dim);

struct TrainConfig {
  Method method = Method::kProposed;
  int components = 5;
  FrameKind frames = FrameKind::kStartGoal;
  TpGmmOptions mixture;
  IocOptions ioc;
  double input_bound = 1.0;

  void validate() const;
};

/// Trained bundle consumed by the predictors.
struct BehaviorModel {
  Method method = Method::kProposed;
  LtiSystemd system;
  // Absent for gmr_only.
  std::optional<GainEstimate> gain;
  std::optional<TaskObjective> objective;
  // Mixture over [x; w] (proposed) or [x; u] (gmr_only).
  std::optional<TpGmm> mixture;
  // The mixture merged for frames at the mean training start state, kept
  // for inspection and export.
  std::optional<VariabilityModel> reference;
  TrainConfig config;

  /// Variability (or input) model merged for an episode starting at x0.
  VariabilityModel variability_for(const Eigen::VectorXd& x0) const;
};

/// Runs gain estimation, objective recovery and the task-parameterized
/// mixture fit, as required by config.method.
BehaviorModel train(const LtiSystemd& sys, const DemonstrationSetd& demos,
                    const TrainConfig& config = {});

struct PredictedTrajectory {
  Eigen::MatrixXd states;  // n x (N_h + 1)
  Eigen::MatrixXd inputs;  // m x N_h
  std::vector<Eigen::MatrixXd> input_covs;
  std::vector<bool> clamped;
  std::vector<bool> far_field;

  Eigen::Index horizon() const { return inputs.cols(); }
};

/// Open-loop prediction from x0 only. Inputs are clamped to the admissible
/// box after they are predicted; states follow the plant exactly.
PredictedTrajectory predict_trajectory(const BehaviorModel& model,
                                       const Eigen::VectorXd& x0, int horizon);

/// sqrt(sum_{k=1..N_h} ||x_hat_k - x_k||^2 / N_h) over the selected state
/// dimensions. `truth` must have exactly as many states as `predicted`.
double rmse(const Eigen::MatrixXd& predicted_states,
            const Eigen::MatrixXd& true_states, const std::vector<int>& dims);

inline double rmse(const PredictedTrajectory& predicted,
                   const Trajectoryd& truth, const std::vector<int>& dims) {
  return rmse(predicted.states, truth.states, dims);
}

/// First `steps` inputs of `traj` and the states they reach.
Trajectoryd head(const Trajectoryd& traj, Eigen::Index steps);

struct StepBound {
  Eigen::Index k = 0;
  Eigen::VectorXd w_hat;
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  std::vector<bool> inside;
  bool far_field = false;
};

struct BoundsReport {
  double n_sigma = 3.0;
  std::vector<StepBound> steps;
};

/// For each recorded input, compares w_hat_k = u_k - K_hat x_k against the
/// per-axis n-sigma interval of p(w | x) at the state propagated one step
/// from the recorded (x_{k-1}, u_{k-1}).
BoundsReport one_step_bounds(const BehaviorModel& model, const Trajectoryd& test,
                             double n_sigma = 3.0);

/// Fraction of steps whose w_hat lies inside mean +- n_sigma sqrt(diag cov),
/// per axis.
Eigen::VectorXd coverage(const BoundsReport& report, double n_sigma);

inline Eigen::VectorXd coverage(const BoundsReport& report) {
  return coverage(report, report.n_sigma);
}

}  // namespace hbm
