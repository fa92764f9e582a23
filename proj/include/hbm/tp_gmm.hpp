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

#include <vector>

#include <Eigen/Dense>

#include "hbm/gmm.hpp"
#include "hbm/lti.hpp"

namespace hbm {

/// Observer frame for the joint vector xi = [x; w]: Z = T^{-1} (xi - b).
/// T is block diagonal with a state block and an input block.
struct TaskFrame {
  Eigen::MatrixXd T;
  Eigen::VectorXd b;

  static TaskFrame identity(Eigen::Index dim);

  /// Throws unless T is square, matches b, is block diagonal with a
  /// state_dim x state_dim leading block and has condition number <= 1e8.
  void validate(Eigen::Index state_dim) const;
};

inline constexpr double kMaxFrameCondition = 1e8;

/// Columns of `xi` expressed in `frame`.
Eigen::MatrixXd transform_to_frame(const Eigen::MatrixXd& xi,
                                   const TaskFrame& frame);

/// Mixture whose components carry one Gaussian per frame.
struct TpGmm {
  Eigen::VectorXd weights;
  // per_frame[p][i] is component i seen from frame p.
  std::vector<std::vector<GaussianComponentd>> per_frame;

  Eigen::Index size() const { return weights.size(); }
  Eigen::Index frames() const { return Eigen::Index(per_frame.size()); }
  Eigen::Index dim() const {
    return per_frame.empty() ? 0 : per_frame.front().front().mean.size();
  }
};

struct TpGmmOptions {
  EmOptions em;
  // Fit each frame on its own instead of sharing responsibilities. Component
  // indices are then not guaranteed to line up across frames.
  bool independent_frames = false;
};

struct TpGmmFit {
  TpGmm model;
  std::vector<double> loglik_history;
  bool degenerate = false;
};

/// `xi[j]` holds the joint vectors of demonstration j as columns and
/// `frames[j]` its P task frames.
TpGmmFit fit_tp_gmm(const std::vector<Eigen::MatrixXd>& xi,
                    const std::vector<std::vector<TaskFrame>>& frames, int G,
                    const TpGmmOptions& options = {});

/// Product over frames of the transformed per-frame Gaussians, per component.
Gmmd merge_frames(const TpGmm& model, const std::vector<TaskFrame>& frames);

/// w_k = u_k - K_hat x_k for every recorded input of every demonstration.
std::vector<Eigen::MatrixXd> extract_variability(const DemonstrationSetd& demos,
                                                 const Eigen::MatrixXd& K_hat);

/// Joint vectors [x_k; y_k] for k = 0..N_j-1, where y_k is column k of
/// `outputs[j]`.
std::vector<Eigen::MatrixXd> joint_vectors(
    const DemonstrationSetd& demos, const std::vector<Eigen::MatrixXd>& outputs);

struct VariabilityQuery {
  ConditionalGaussiand distribution;
  bool far_field = false;
};

/// Merged mixture over [x; w] with its GMR regressor built once.
class VariabilityModel {
 public:
  VariabilityModel() = default;
  VariabilityModel(TpGmm tp, std::vector<TaskFrame> frames,
                   Eigen::Index state_dim);

  /// Moment-merged conditional p(w | x).
  VariabilityQuery query(const Eigen::VectorXd& x) const;

  const TpGmm& tp() const { return tp_; }
  const std::vector<TaskFrame>& frames() const { return frames_; }
  const Gmmd& merged() const { return merged_; }
  const GmrRegressor<double>& regressor() const { return regressor_; }
  Eigen::Index state_dim() const { return state_dim_; }

 private:
  TpGmm tp_;
  std::vector<TaskFrame> frames_;
  Gmmd merged_;
  GmrRegressor<double> regressor_;
  Eigen::Index state_dim_ = 0;
};

inline VariabilityQuery variability_distribution(const VariabilityModel& model,
                                                 const Eigen::VectorXd& x) {
  return model.query(x);
}

}  // namespace hbm
