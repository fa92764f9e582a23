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

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hbm/lti.hpp"
#include "hbm/tp_gmm.hpp"

namespace hbm::quadrotor {

// State layout [x, y, phi, x_dot, y_dot, phi_dot]; inputs [angular accel,
// thrust].
inline constexpr int kX = 0;
inline constexpr int kY = 1;
inline constexpr int kPhi = 2;
inline constexpr int kVx = 3;
inline constexpr int kVy = 4;
inline constexpr int kOmega = 5;
inline constexpr int kStateDim = 6;
inline constexpr int kInputDim = 2;

/// Planar quadrotor linearized about hover.
struct Params {
  double dt = 0.05;
  double g = 9.8;
  // Stabilizer entries of the linearization, per unit time.
  double k1 = -0.1;
  double k2 = -1.0;
  double k3 = -30.0;
  double mass = 0.25;
  double inertia = 0.01;

  void validate() const;
};

/// A = I + dt F, B = dt G with every entry rounded to the decimal value of
/// the product of the decimal parameters.
LtiSystemd make_system(const Params& params = {});

struct ScenarioConfig {
  double x_min = -3.0, x_max = 3.0;
  double y_min = 0.0, y_max = 3.5;
  double x0_min = -2.0, x0_max = 2.0;
  double y0_min = 2.5, y0_max = 3.0;
  double pad_x = 0.0;
  double pad_half_width = 0.3;
  // Episodes end once the altitude first drops to this height.
  double touchdown_altitude = 0.02;
  double max_final_speed = 0.1;
  double max_final_attitude_deg = 5.0;
  int max_steps = 1200;
  double input_bound = 1.0;

  void validate() const;
};

/// Uniform x0 and y0 over the configured ranges, every other state zero.
template <typename Rng>
Eigen::VectorXd sample_initial_state(const ScenarioConfig& config, Rng& rng) {
  std::uniform_real_distribution<double> ux(config.x0_min, config.x0_max);
  std::uniform_real_distribution<double> uy(config.y0_min, config.y0_max);
  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(kStateDim);
  x0(kX) = ux(rng);
  x0(kY) = uy(rng);
  return x0;
}

enum class VariabilityKind {
  kNone,
  kGaussianConstant,
  kLinearState,
  kGmmStateDependent,
};

std::string to_string(VariabilityKind kind);
VariabilityKind variability_kind_from_string(const std::string& name);

/// One branch of the altitude-gated variability mixture.
struct GatedBranch {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

/// Ground-truth variability injected by the synthetic demonstrator.
///
///   none               w = 0
///   gaussian_constant  w ~ N(mean, cov)
///   linear_state       w = L x + v,  v ~ N(0, cov)
///   gmm_state_dependent
///     w ~ N(high.mean, high.cov) with probability s(y), otherwise
///     N(low.mean, low.cov), where s(y) = 1 / (1 + exp(-(y - gate_altitude)
///     / gate_width)).
struct VariabilitySpec {
  VariabilityKind kind = VariabilityKind::kNone;
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(kInputDim);
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(kInputDim, kInputDim);
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(kInputDim, kStateDim);
  GatedBranch high{Eigen::VectorXd::Zero(kInputDim),
                   Eigen::MatrixXd::Zero(kInputDim, kInputDim)};
  GatedBranch low{Eigen::VectorXd::Zero(kInputDim),
                  Eigen::MatrixXd::Zero(kInputDim, kInputDim)};
  double gate_altitude = 1.5;
  double gate_width = 0.25;

  void validate() const;

  /// Probability of the high branch at state x.
  double gate(const Eigen::VectorXd& x) const;
  /// E[w | x].
  Eigen::VectorXd mean_field(const Eigen::VectorXd& x) const;

  static VariabilitySpec none();
  static VariabilitySpec gaussian_constant(Eigen::VectorXd mean,
                                           Eigen::MatrixXd cov);
  static VariabilitySpec linear_state(Eigen::MatrixXd L, Eigen::MatrixXd cov);
  /// Default altitude-gated mixture used by the benchmark.
  static VariabilitySpec gmm_state_dependent();
};

/// Diagonal LQR weights of a synthetic demonstrator.
struct DemonstratorObjective {
  Eigen::VectorXd q_diag;
  Eigen::VectorXd r_diag;

  Eigen::MatrixXd Q() const { return q_diag.asDiagonal(); }
  Eigen::MatrixXd R() const { return r_diag.asDiagonal(); }
};

/// Weights whose LQR lands in about 12 s from the initial box.
DemonstratorObjective default_objective();

/// Two demonstrator populations that differ only in the attitude weight, by
/// a factor of 46. Strategy 2 is default_objective(); strategy 1 tolerates
/// attitude 46 times more.
DemonstratorObjective strategy_objective(int strategy);

Eigen::MatrixXd demonstrator_gain(const LtiSystemd& sys,
                                  const DemonstratorObjective& objective);

enum class StopReason { kTouchdown, kMaxSteps, kDiverged };
std::string to_string(StopReason reason);

struct SynthResult {
  Trajectoryd trajectory;
  StopReason reason = StopReason::kTouchdown;
  int saturated_steps = 0;
};

/// Rolls out u_k = clamp(K_true x_k + w_k) with w_k drawn from `vspec`
/// until touchdown, the step limit, or divergence beyond ten times the
/// position domain. Bit-identical for identical (seed, vspec, x0).
SynthResult synth_demonstrate(const LtiSystemd& sys,
                              const Eigen::MatrixXd& K_true,
                              const VariabilitySpec& vspec,
                              const Eigen::VectorXd& x0,
                              const ScenarioConfig& config,
                              std::uint64_t seed);

struct LandingOutcome {
  bool landed = false;
  double final_speed = 0.0;
  double final_attitude_deg = 0.0;
  bool on_pad = false;
};

LandingOutcome landing_outcome(const Trajectoryd& traj,
                               const ScenarioConfig& config);

/// Frame 1 sits at the initial state; frame 2 sits at the final state and
/// is rotated by the final attitude in the (x, y) position block.
std::vector<TaskFrame> build_frames(const Eigen::VectorXd& x0,
                                    const Eigen::VectorXd& x_final,
                                    double phi_final,
                                    Eigen::Index input_dim = kInputDim);

/// Training frames of a recorded episode.
std::vector<TaskFrame> frames_for_demo(const Trajectoryd& traj);

/// Frames for predicting from x0 toward the pad at the origin.
std::vector<TaskFrame> frames_for_prediction(const Eigen::VectorXd& x0);

}  // namespace hbm::quadrotor
