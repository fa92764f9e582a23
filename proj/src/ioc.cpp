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

#include "hbm/ioc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace hbm {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Basis of symmetric n x n matrices: e_a e_a^T on the diagonal and
// e_a e_b^T + e_b e_a^T above it.
std::vector<MatrixXd> SymmetricBasis(int n) {
  std::vector<MatrixXd> basis;
  basis.reserve(n * (n + 1) / 2);
  for (int a = 0; a < n; ++a) {
    for (int b = a; b < n; ++b) {
      MatrixXd E = MatrixXd::Zero(n, n);
      E(a, b) = 1.0;
      E(b, a) = 1.0;
      basis.push_back(std::move(E));
    }
  }
  return basis;
}

MatrixXd FromCoefficients(const std::vector<MatrixXd>& basis,
                          const VectorXd& coeff, int offset, int n) {
  MatrixXd X = MatrixXd::Zero(n, n);
  for (std::size_t i = 0; i < basis.size(); ++i) {
    X += coeff(offset + static_cast<int>(i)) * basis[i];
  }
  return X;
}

// Affine symmetric matrix function F0 + sum_i z_i F_i constrained to be
// positive definite.
struct LmiBlock {
  MatrixXd F0;
  std::vector<MatrixXd> F;

  MatrixXd At(const VectorXd& z) const {
    MatrixXd X = F0;
    for (std::size_t i = 0; i < F.size(); ++i) {
      if (z(i) != 0.0) X += z(i) * F[i];
    }
    return X;
  }
};

// min t c^T z - sum_j log det F_j(z)
class LogDetBarrier {
 public:
  LogDetBarrier(std::vector<LmiBlock> blocks, VectorXd c)
      : blocks_(std::move(blocks)), c_(std::move(c)) {}

  int dim() const { return static_cast<int>(c_.size()); }
  int barrier_degree() const {
    int nu = 0;
    for (const auto& b : blocks_) nu += static_cast<int>(b.F0.rows());
    return nu;
  }

  // Barrier part only, -sum_j log det F_j(z); the linear term is handled
  // separately so that line searches compare differences of moderate size.
  bool LogDetTerm(const VectorXd& z, double* f) const {
    double value = 0.0;
    for (const auto& b : blocks_) {
      Eigen::LLT<MatrixXd> llt(b.At(z));
      if (llt.info() != Eigen::Success) return false;
      const VectorXd d = llt.matrixLLT().diagonal();
      if ((d.array() <= 0.0).any()) return false;
      value -= 2.0 * d.array().log().sum();
    }
    *f = value;
    return std::isfinite(value);
  }

  bool Derivatives(const VectorXd& z, double t, VectorXd* g,
                   MatrixXd* H) const {
    const int p = dim();
    *g = t * c_;
    *H = MatrixXd::Zero(p, p);
    for (const auto& b : blocks_) {
      Eigen::LLT<MatrixXd> llt(b.At(z));
      if (llt.info() != Eigen::Success) return false;
      const MatrixXd L = llt.matrixL();
      std::vector<MatrixXd> scaled(p);
      for (int i = 0; i < p; ++i) {
        // L^{-1} F_i L^{-T}
        MatrixXd tmp = L.triangularView<Eigen::Lower>().solve(b.F[i]);
        scaled[i] = L.triangularView<Eigen::Lower>()
                        .solve(tmp.transpose())
                        .transpose();
        (*g)(i) -= scaled[i].trace();
      }
      for (int i = 0; i < p; ++i) {
        for (int k = i; k < p; ++k) {
          const double h = scaled[i].cwiseProduct(scaled[k]).sum();
          (*H)(i, k) += h;
          if (k != i) (*H)(k, i) += h;
        }
      }
    }
    return g->allFinite() && H->allFinite();
  }

  // Damped Newton centering. Returns false when no descent step exists.
  bool Center(VectorXd* z, double t, int max_steps) const {
    double phi = 0.0;
    if (!LogDetTerm(*z, &phi)) return false;
    for (int it = 0; it < max_steps; ++it) {
      VectorXd g;
      MatrixXd H;
      if (!Derivatives(*z, t, &g, &H)) return false;
      // Jacobi scaling keeps the solve usable when P and alpha differ by
      // many orders of magnitude.
      const VectorXd scale = H.diagonal().cwiseMax(1e-300).cwiseSqrt().cwiseInverse();
      const MatrixXd Hs = scale.asDiagonal() * H * scale.asDiagonal();
      Eigen::LDLT<MatrixXd> ldlt(Hs);
      VectorXd dz = -(scale.asDiagonal() * ldlt.solve(scale.asDiagonal() * g));
      if (!dz.allFinite()) return false;
      // The Newton decrement is scale free; below 2e-12 it is rounding noise
      // and may even come out slightly negative.
      const double decrement = -g.dot(dz);
      if (!std::isfinite(decrement)) return false;
      if (decrement <= 2e-12) return true;
      double step = 1.0;
      bool moved = false;
      while (step > 1e-14) {
        VectorXd trial = *z + step * dz;
        double phi_trial = 0.0;
        // Change of t c^T z + phi, formed without the large absolute values.
        // Changes below the rounding level of the full value count as no increase.
        const double floor = 4.0 * std::numeric_limits<double>::epsilon() *
                             (std::abs(t * c_.dot(*z)) + std::abs(phi));
        if (LogDetTerm(trial, &phi_trial) &&
            step * t * c_.dot(dz) + (phi_trial - phi) <=
                std::max(-0.01 * step * decrement, floor)) {
          *z = std::move(trial);
          phi = phi_trial;
          moved = true;
          break;
        }
        step *= 0.5;
      }
      if (!moved) return decrement < 1e-6;
    }
    return true;
  }

 private:
  std::vector<LmiBlock> blocks_;
  VectorXd c_;
};

MatrixXd Sym(const MatrixXd& M) { return (M + M.transpose()) / 2.0; }

}  // namespace

MatrixXd TaskObjective::augmented() const {
  const auto n = Q.rows();
  const auto m = R.rows();
  MatrixXd M(n + m, n + m);
  M << Q, S, S.transpose(), R;
  return M;
}

GainEstimate estimate_gain(const LtiSystemd& sys,
                           const DemonstrationSetd& demos) {
  demos.validate(sys);
  const Eigen::Index n = sys.state_dim();
  Eigen::Index columns = 0;
  for (const auto& t : demos.trajectories) {
    if (t.states.cols() < 2) {
      throw InvalidArgument("estimate_gain: every trajectory needs >= 2 states");
    }
    columns += t.states.cols() - 1;
  }
  if (columns < n) {
    throw InsufficientData("estimate_gain: " + std::to_string(columns) +
                           " state pairs for a " + std::to_string(n) +
                           "-dimensional state");
  }

  MatrixXd X(n, columns);
  MatrixXd Xn(n, columns);
  Eigen::Index col = 0;
  for (const auto& t : demos.trajectories) {
    const Eigen::Index c = t.states.cols() - 1;
    X.middleCols(col, c) = t.states.leftCols(c);
    Xn.middleCols(col, c) = t.states.rightCols(c);
    col += c;
  }

  const MatrixXd X_pinv = pseudo_inverse(X);
  const MatrixXd A_tilde = Xn * X_pinv;

  GainEstimate est;
  est.data_rank = static_cast<int>(numerical_rank(X));
  est.rank_deficient = est.data_rank < n;
  // B^+ (X' - A X) X^+ equals B^+ (A_tilde - A) whenever X X^+ = I and
  // leaves unexcited state directions with zero gain otherwise.
  est.K_hat = pseudo_inverse(sys.B()) * (Xn - sys.A() * X) * X_pinv;
  est.lsq_residual = (Xn - A_tilde * X).norm();
  est.stabilizing = is_stabilizing(sys, est.K_hat);
  return est;
}

TaskObjective recover_objective(const LtiSystemd& sys, const MatrixXd& K_hat,
                                const IocOptions& options) {
  const int n = static_cast<int>(sys.state_dim());
  const int m = static_cast<int>(sys.input_dim());
  if (K_hat.rows() != m || K_hat.cols() != n) {
    internal::ThrowDimension("recover_objective: K_hat must be m x n");
  }
  if (!is_stabilizing(sys, K_hat)) {
    throw NotStabilizing("recover_objective: K_hat is not stabilizing");
  }
  const MatrixXd& A = sys.A();
  const MatrixXd& B = sys.B();
  const int d = n + m;

  // M(P, R) = E P E^T - F P F^T + G (R + B^T P B) G^T with
  // E = [I; 0], F = [A^T; B^T], G = [K^T; -I].
  MatrixXd E = MatrixXd::Zero(d, n);
  E.topRows(n).setIdentity();
  MatrixXd F(d, n);
  F << A.transpose(), B.transpose();
  MatrixXd G(d, m);
  G << K_hat.transpose(), -MatrixXd::Identity(m, m);

  const auto p_basis = SymmetricBasis(n);
  const auto r_basis = SymmetricBasis(m);
  const int np = static_cast<int>(p_basis.size());
  const int nr = static_cast<int>(r_basis.size());
  const int nz = np + nr + 1;
  const int alpha_index = np + nr;

  std::vector<MatrixXd> M_terms;
  M_terms.reserve(np + nr);
  for (const auto& Ep : p_basis) {
    M_terms.push_back(Sym(E * Ep * E.transpose() - F * Ep * F.transpose() +
                          G * (B.transpose() * Ep * B) * G.transpose()));
  }
  for (const auto& Er : r_basis) {
    M_terms.push_back(Sym(G * Er * G.transpose()));
  }

  LmiBlock p_block{MatrixXd::Zero(n, n), {}};
  LmiBlock lower{-MatrixXd::Identity(d, d), {}};
  LmiBlock upper{MatrixXd::Zero(d, d), {}};
  for (int i = 0; i < nz; ++i) {
    if (i < np) {
      p_block.F.push_back(p_basis[i]);
    } else {
      p_block.F.push_back(MatrixXd::Zero(n, n));
    }
    if (i < alpha_index) {
      lower.F.push_back(M_terms[i]);
      upper.F.push_back(-M_terms[i]);
    } else {
      lower.F.push_back(MatrixXd::Zero(d, d));
      upper.F.push_back(MatrixXd::Identity(d, d));
    }
  }
  VectorXd c = VectorXd::Zero(nz);
  c(alpha_index) = 1.0;
  const LogDetBarrier barrier({p_block, lower, upper}, c);

  // Strictly feasible start: Lyapunov P0 for the closed loop, and R0 large
  // enough that the Schur complement of M0 is positive.
  const MatrixXd A_cl = A + B * K_hat;
  const MatrixXd P0 =
      solve_discrete_lyapunov<double>(A_cl, MatrixXd::Identity(n, n));
  const MatrixXd C = A_cl.transpose() * P0 * B;
  const MatrixXd R0 = Sym(C.transpose() * C + MatrixXd::Identity(m, m));
  MatrixXd M0 = Sym(E * P0 * E.transpose() - F * P0 * F.transpose() +
                    G * (R0 + B.transpose() * P0 * B) * G.transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> es0(M0, Eigen::EigenvaluesOnly);
  if (!(es0.eigenvalues()(0) > 0.0)) {
    throw SolverFailure("recover_objective: no strictly feasible start");
  }
  const double scale = 2.0 / es0.eigenvalues()(0);

  VectorXd z = VectorXd::Zero(nz);
  {
    int k = 0;
    for (int a = 0; a < n; ++a) {
      for (int b = a; b < n; ++b) z(k++) = scale * P0(a, b);
    }
    for (int a = 0; a < m; ++a) {
      for (int b = a; b < m; ++b) z(k++) = scale * R0(a, b);
    }
    z(alpha_index) = 2.0 * scale * es0.eigenvalues()(d - 1);
  }

  const double nu = barrier.barrier_degree();
  double t = 1.0 / std::max(1.0, z(alpha_index));
  for (int outer = 0; outer < options.max_outer_steps; ++outer) {
    if (!barrier.Center(&z, t, options.max_newton_steps)) {
      throw SolverFailure("recover_objective: Newton centering failed");
    }
    if (nu / t <= options.tol * std::max(1.0, z(alpha_index))) break;
    t *= options.barrier_growth;
  }

  TaskObjective obj;
  obj.P = Sym(FromCoefficients(p_basis, z, 0, n));
  obj.R = Sym(FromCoefficients(r_basis, z, np, m));
  const MatrixXd W = obj.R + B.transpose() * obj.P * B;
  obj.S = -A.transpose() * obj.P * B - K_hat.transpose() * W;
  obj.Q = Sym(obj.P - A.transpose() * obj.P * A +
              K_hat.transpose() * W * K_hat);
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(Sym(obj.augmented()),
                                             Eigen::EigenvaluesOnly);
  obj.alpha = es.eigenvalues()(d - 1);
  return obj;
}

double evaluate_cost(const LtiSystemd& sys, const TaskObjective& obj,
                     const Trajectoryd& traj) {
  traj.validate();
  internal::CheckCostShapes(sys, obj.Q, obj.R, obj.S);
  if (traj.state_dim() != sys.state_dim() ||
      (traj.steps() > 0 && traj.input_dim() != sys.input_dim())) {
    internal::ThrowDimension("evaluate_cost: trajectory dimension mismatch");
  }
  double cost = 0.0;
  for (Eigen::Index k = 0; k < traj.steps(); ++k) {
    const auto x = traj.states.col(k);
    const auto u = traj.inputs.col(k);
    cost += x.dot(obj.Q * x) + u.dot(obj.R * u) + 2.0 * x.dot(obj.S * u);
  }
  return cost;
}

ObjectiveCheck check_objective(const LtiSystemd& sys, const MatrixXd& K_hat,
                               const TaskObjective& obj, double tol) {
  const MatrixXd& A = sys.A();
  const MatrixXd& B = sys.B();
  ObjectiveCheck chk;
  chk.gain_condition_residual =
      ((obj.R + B.transpose() * obj.P * B) * K_hat +
       B.transpose() * obj.P * A + obj.S.transpose())
          .norm();
  chk.riccati_condition_residual =
      (A.transpose() * obj.P * A - obj.P +
       (A.transpose() * obj.P * B + obj.S) * K_hat + obj.Q)
          .norm();
  const MatrixXd aug = obj.augmented();
  Eigen::SelfAdjointEigenSolver<MatrixXd> aug_es(Sym(aug),
                                                 Eigen::EigenvaluesOnly);
  chk.min_augmented_eig = aug_es.eigenvalues().minCoeff();
  chk.max_augmented_eig = aug_es.eigenvalues().maxCoeff();
  Eigen::SelfAdjointEigenSolver<MatrixXd> p_es(Sym(obj.P),
                                               Eigen::EigenvaluesOnly);
  chk.min_P_eig = p_es.eigenvalues().minCoeff();
  Eigen::LLT<MatrixXd> r_llt(Sym(obj.R));
  const bool symmetric = (aug - aug.transpose()).norm() <= tol &&
                         (obj.P - obj.P.transpose()).norm() <= tol;
  chk.ok = symmetric && chk.gain_condition_residual <= tol &&
           chk.riccati_condition_residual <= tol &&
           chk.min_augmented_eig >= 1.0 - tol &&
           chk.max_augmented_eig <= obj.alpha + tol && chk.min_P_eig >= -1e-8 &&
           r_llt.info() == Eigen::Success && obj.alpha >= 1.0 - 1e-8;
  return chk;
}

TaskObjective normalized(const TaskObjective& obj) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(Sym(obj.augmented()),
                                             Eigen::EigenvaluesOnly);
  const double top = es.eigenvalues().maxCoeff();
  if (!(top > 0.0)) {
    throw InvalidArgument("normalized: augmented cost has no positive scale");
  }
  TaskObjective out = obj;
  out.Q /= top;
  out.R /= top;
  out.S /= top;
  out.P /= top;
  return out;
}

}  // namespace hbm
