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

#include <Eigen/Dense>

#include "hbm/lti.hpp"

namespace hbm {

/// Least-squares estimate of the closed-loop feedback gain.
struct GainEstimate {
  Eigen::MatrixXd K_hat;
  // ||X' - A_tilde X||_F of the fitted one-step map.
  double lsq_residual = 0.0;
  int data_rank = 0;
  bool stabilizing = false;
  // rank(X) < n: the fit is still defined but under-determined.
  bool rank_deficient = false;
};

/// Recovered quadratic objective {Q, R, S} with its Riccati solution P and
/// the bound alpha of I <= [[Q, S], [S^T, R]] <= alpha I.
struct TaskObjective {
  Eigen::MatrixXd Q;
  Eigen::MatrixXd R;
  Eigen::MatrixXd S;
  Eigen::MatrixXd P;
  double alpha = 1.0;

  Eigen::MatrixXd augmented() const;
};

/// Fits A_tilde = X' X^+ over all consecutive state pairs of every
/// demonstration and returns K_hat = B^+ (A_tilde - A).
///
/// Throws InsufficientData when fewer than n state pairs are available.
/// A rank-deficient X is reported through GainEstimate::rank_deficient.
GainEstimate estimate_gain(const LtiSystemd& sys,
                           const DemonstrationSetd& demos);

struct IocOptions {
  // Relative duality-gap target of the barrier path.
  double tol = 1e-9;
  double barrier_growth = 8.0;
  int max_newton_steps = 200;
  int max_outer_steps = 80;
};

/// Recovers {Q, R, S, P} that make K_hat the LQR gain while minimizing the
/// condition bound alpha.
///
/// S and Q are eliminated through the optimality conditions, which leaves a
/// small SDP over (P, R, alpha). It is solved with a log-det barrier and
/// damped Newton steps.
TaskObjective recover_objective(const LtiSystemd& sys,
                                const Eigen::MatrixXd& K_hat,
                                const IocOptions& options = {});

/// Smallest feasible alpha by bisection over independent feasibility
/// problems in the full (Q, R, S, P) parametrization. `alpha_tol` is
/// relative.
double min_alpha_oracle(const LtiSystemd& sys, const Eigen::MatrixXd& K_hat,
                        double alpha_tol = 1e-5, double alpha_hi = 1e6);

/// Sum over recorded inputs of x^T Q x + u^T R u + 2 x^T S u. The terminal
/// state carries no cost.
double evaluate_cost(const LtiSystemd& sys, const TaskObjective& obj,
                     const Trajectoryd& traj);

struct ObjectiveCheck {
  double gain_condition_residual = 0.0;   // (R + B'PB) K + B'PA + S'
  double riccati_condition_residual = 0.0;  // A'PA - P + (A'PB + S) K + Q
  double min_augmented_eig = 0.0;
  double max_augmented_eig = 0.0;
  double min_P_eig = 0.0;
  bool ok = false;
};

/// Independent verification of a recovered objective against K_hat.
ObjectiveCheck check_objective(const LtiSystemd& sys,
                               const Eigen::MatrixXd& K_hat,
                               const TaskObjective& obj, double tol = 1e-6);

/// Divides Q, R, S (and P) by the largest eigenvalue of the augmented cost.
TaskObjective normalized(const TaskObjective& obj);

}  // namespace hbm
