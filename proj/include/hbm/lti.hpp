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

#include <cmath>
#include <complex>
#include <concepts>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "hbm/errors.hpp"

namespace hbm {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Discrete-time linear time-invariant plant x_{k+1} = A x_k + B u_k.
///
/// Construction checks shapes only. The rank and stabilizability
/// assumptions are verified by the operations that rely on them
/// (see is_stabilizable() and has_full_column_rank_input()).
template <typename Scalar = double>
class LtiSystem {
 public:
  using Matrix = MatrixX<Scalar>;
  using Vector = VectorX<Scalar>;

  LtiSystem() = default;
  LtiSystem(Matrix A, Matrix B, Scalar dt)
      : A_(std::move(A)), B_(std::move(B)), dt_(dt) {
    if (A_.rows() != A_.cols()) {
      internal::ThrowDimension("LtiSystem: A must be square");
    }
    if (B_.rows() != A_.rows()) {
      internal::ThrowDimension("LtiSystem: B must have as many rows as A");
    }
    if (!(dt_ > Scalar(0))) {
      throw InvalidArgument("LtiSystem: dt must be positive");
    }
  }

  const Matrix& A() const { return A_; }
  const Matrix& B() const { return B_; }
  Scalar dt() const { return dt_; }
  Eigen::Index state_dim() const { return A_.rows(); }
  Eigen::Index input_dim() const { return B_.cols(); }

  Vector step(const Eigen::Ref<const Vector>& x,
              const Eigen::Ref<const Vector>& u) const {
    return A_ * x + B_ * u;
  }

 private:
  Matrix A_;
  Matrix B_;
  Scalar dt_ = Scalar(1);
};

/// Recorded state/input sequence. Column k of `states` is x_k, column k of
/// `inputs` is u_k; there is always one more state than inputs.
template <typename Scalar = double>
struct Trajectory {
  MatrixX<Scalar> states;
  MatrixX<Scalar> inputs;
  Scalar dt = Scalar(0);
  std::map<std::string, std::string> meta;

  Eigen::Index steps() const { return inputs.cols(); }
  Eigen::Index state_dim() const { return states.rows(); }
  Eigen::Index input_dim() const { return inputs.rows(); }

  void validate() const {
    if (states.cols() != inputs.cols() + 1) {
      internal::ThrowDimension(
          "Trajectory: need exactly one more state than inputs");
    }
  }

  bool inputs_within_box(Scalar bound) const {
    return inputs.size() == 0 || inputs.cwiseAbs().maxCoeff() <= bound;
  }
};

template <typename Scalar = double>
struct DemonstrationSet {
  std::vector<Trajectory<Scalar>> trajectories;

  std::size_t size() const { return trajectories.size(); }

  /// Throws when the set is empty or dimensions/dt disagree.
  void validate(const LtiSystem<Scalar>& sys) const {
    if (trajectories.empty()) {
      throw InvalidArgument("DemonstrationSet: at least one trajectory");
    }
    const Scalar dt0 = trajectories.front().dt;
    for (const auto& t : trajectories) {
      t.validate();
      if (t.state_dim() != sys.state_dim() ||
          (t.steps() > 0 && t.input_dim() != sys.input_dim())) {
        internal::ThrowDimension("DemonstrationSet: dimension mismatch");
      }
      if (t.dt != dt0) {
        throw InvalidArgument("DemonstrationSet: trajectories disagree on dt");
      }
    }
  }
};

using LtiSystemd = LtiSystem<double>;
using Trajectoryd = Trajectory<double>;
using DemonstrationSetd = DemonstrationSet<double>;

template <typename Derived>
typename Derived::RealScalar spectral_radius(
    const Eigen::MatrixBase<Derived>& M) {
  using Real = typename Derived::RealScalar;
  if (M.rows() != M.cols()) {
    internal::ThrowDimension("spectral_radius: matrix must be square");
  }
  if (M.size() == 0) return Real(0);
  using Plain = Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic,
                              Eigen::Dynamic>;
  Eigen::EigenSolver<Plain> es(Plain(M), /*computeEigenvectors=*/false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

template <typename Scalar, typename Derived>
bool is_stabilizing(const LtiSystem<Scalar>& sys,
                    const Eigen::MatrixBase<Derived>& K) {
  if (K.rows() != sys.input_dim() || K.cols() != sys.state_dim()) {
    internal::ThrowDimension("is_stabilizing: K must be m x n");
  }
  return spectral_radius(sys.A() + sys.B() * K) < Scalar(1);
}

/// rank(B) == m < n.
template <typename Scalar>
bool has_full_column_rank_input(const LtiSystem<Scalar>& sys,
                                Scalar tol = Scalar(1e-9)) {
  if (sys.input_dim() >= sys.state_dim()) return false;
  Eigen::JacobiSVD<MatrixX<Scalar>> svd(sys.B());
  const auto& s = svd.singularValues();
  if (s.size() == 0) return false;
  return s(s.size() - 1) > tol * std::max(Scalar(1), s(0));
}

/// PBH test: every eigenvalue with |lambda| >= 1 must satisfy
/// rank [A - lambda I, B] = n.
template <typename Scalar>
bool is_stabilizable(const LtiSystem<Scalar>& sys, Scalar tol = Scalar(1e-9)) {
  using Complex = std::complex<Scalar>;
  using CMatrix = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic>;
  const Eigen::Index n = sys.state_dim();
  const Eigen::Index m = sys.input_dim();
  if (n == 0) return true;
  Eigen::EigenSolver<MatrixX<Scalar>> es(sys.A(), false);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Complex lambda = es.eigenvalues()(i);
    if (std::abs(lambda) < Scalar(1)) continue;
    CMatrix pbh(n, n + m);
    pbh.leftCols(n) = sys.A().template cast<Complex>() -
                      lambda * CMatrix::Identity(n, n);
    pbh.rightCols(m) = sys.B().template cast<Complex>();
    Eigen::JacobiSVD<CMatrix> svd(pbh);
    const auto& s = svd.singularValues();
    if (s(n - 1) <= tol * std::max(Scalar(1), s(0))) return false;
  }
  return true;
}

/// Solves P = A^T P A + C for a Schur-stable A by Kronecker vectorization.
template <typename Scalar>
MatrixX<Scalar> solve_discrete_lyapunov(const MatrixX<Scalar>& A,
                                        const MatrixX<Scalar>& C) {
  const Eigen::Index n = A.rows();
  const MatrixX<Scalar> I = MatrixX<Scalar>::Identity(n * n, n * n);
  MatrixX<Scalar> kron(n * n, n * n);
  const MatrixX<Scalar> At = A.transpose();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      kron.block(i * n, j * n, n, n) = At(i, j) * At;
    }
  }
  // vec(A^T P A) = (A^T kron A^T) vec(P) for column-major vec.
  const VectorX<Scalar> c = Eigen::Map<const VectorX<Scalar>>(C.data(), n * n);
  VectorX<Scalar> p = (I - kron).partialPivLu().solve(c);
  MatrixX<Scalar> P = Eigen::Map<MatrixX<Scalar>>(p.data(), n, n);
  return (P + P.transpose()) / Scalar(2);
}

/// Moore-Penrose pseudo-inverse; singular values below rcond * s_max are
/// treated as zero.
template <typename Derived>
MatrixX<typename Derived::Scalar> pseudo_inverse(
    const Eigen::MatrixBase<Derived>& M,
    typename Derived::RealScalar rcond = 1e-12) {
  using Scalar = typename Derived::Scalar;
  if (M.size() == 0) return MatrixX<Scalar>::Zero(M.cols(), M.rows());
  Eigen::JacobiSVD<MatrixX<Scalar>> svd(
      MatrixX<Scalar>(M), Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  const Scalar cutoff = rcond * s(0);
  VectorX<Scalar> inv = VectorX<Scalar>::Zero(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > cutoff && s(i) > Scalar(0)) inv(i) = Scalar(1) / s(i);
  }
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

template <typename Derived>
Eigen::Index numerical_rank(const Eigen::MatrixBase<Derived>& M,
                            typename Derived::RealScalar rcond = 1e-12) {
  using Scalar = typename Derived::Scalar;
  if (M.size() == 0) return 0;
  Eigen::JacobiSVD<MatrixX<Scalar>> svd{MatrixX<Scalar>(M)};
  const auto& s = svd.singularValues();
  if (s(0) == Scalar(0)) return 0;
  return (s.array() > rcond * s(0)).count();
}

struct DareOptions {
  int max_iterations = 10000;
  double tolerance = 1e-12;
  // Fixed-point iteration hands over to doubling when the contraction ratio
  // stays above this value.
  double stall_ratio = 0.995;
};

/// Frobenius norm of A^T P A - P - (A^T P B + S)(R + B^T P B)^{-1}
/// (B^T P A + S^T) + Q.
template <typename Scalar>
Scalar riccati_residual(const LtiSystem<Scalar>& sys, const MatrixX<Scalar>& Q,
                        const MatrixX<Scalar>& R, const MatrixX<Scalar>& S,
                        const MatrixX<Scalar>& P) {
  const auto& A = sys.A();
  const auto& B = sys.B();
  const MatrixX<Scalar> W = R + B.transpose() * P * B;
  const MatrixX<Scalar> N = B.transpose() * P * A + S.transpose();
  const MatrixX<Scalar> res = A.transpose() * P * A - P -
                              N.transpose() * W.ldlt().solve(N) + Q;
  return res.norm();
}

namespace internal {

template <typename Scalar>
void CheckCostShapes(const LtiSystem<Scalar>& sys, const MatrixX<Scalar>& Q,
                     const MatrixX<Scalar>& R, const MatrixX<Scalar>& S) {
  const Eigen::Index n = sys.state_dim();
  const Eigen::Index m = sys.input_dim();
  if (Q.rows() != n || Q.cols() != n || R.rows() != m || R.cols() != m ||
      S.rows() != n || S.cols() != m) {
    ThrowDimension("cost matrices: expected Q n x n, R m x m, S n x m");
  }
}

template <typename Scalar>
MatrixX<Scalar> Symmetrized(const MatrixX<Scalar>& M) {
  return (M + M.transpose()) / Scalar(2);
}

// Structure-preserving doubling for P = Ab^T P (I + G P)^{-1} Ab + H.
template <typename Scalar>
bool DoublingDare(const MatrixX<Scalar>& Ab, const MatrixX<Scalar>& G0,
                  const MatrixX<Scalar>& H0, const DareOptions& opt,
                  MatrixX<Scalar>* P) {
  const Eigen::Index n = Ab.rows();
  const MatrixX<Scalar> I = MatrixX<Scalar>::Identity(n, n);
  MatrixX<Scalar> A = Ab, G = G0, H = H0;
  for (int it = 0; it < 200; ++it) {
    const Eigen::PartialPivLU<MatrixX<Scalar>> lu(I + G * H);
    const MatrixX<Scalar> WA = lu.solve(A);
    const MatrixX<Scalar> WG = lu.solve(G);
    MatrixX<Scalar> Hn = Symmetrized<Scalar>(H + A.transpose() * H * WA);
    MatrixX<Scalar> Gn = Symmetrized<Scalar>(G + A * WG * A.transpose());
    MatrixX<Scalar> An = A * WA;
    if (!Hn.allFinite()) return false;
    const Scalar diff = (Hn - H).norm();
    H = std::move(Hn);
    G = std::move(Gn);
    A = std::move(An);
    if (diff <= Scalar(opt.tolerance) * std::max(Scalar(1), H.norm())) {
      *P = H;
      return true;
    }
  }
  return false;
}

}  // namespace internal

/// Stabilizing solution of the discrete algebraic Riccati equation with
/// cross term S.
///
/// Fixed-point iteration from P = Q, re-symmetrized every step. When the
/// iteration contracts too slowly it hands over to structure-preserving
/// doubling. Throws InvalidArgument for an indefinite R or augmented cost,
/// NonConvergence when neither route meets the residual bound.
template <typename Scalar>
MatrixX<Scalar> solve_dare(const LtiSystem<Scalar>& sys,
                           const MatrixX<Scalar>& Q, const MatrixX<Scalar>& R,
                           const MatrixX<Scalar>& S,
                           const DareOptions& opt = {}) {
  internal::CheckCostShapes(sys, Q, R, S);
  const Eigen::Index n = sys.state_dim();
  const Eigen::Index m = sys.input_dim();
  const auto& A = sys.A();
  const auto& B = sys.B();

  const Scalar sym_tol = Scalar(1e-10) * std::max(Scalar(1), R.norm());
  if ((R - R.transpose()).norm() > sym_tol) {
    throw InvalidArgument("solve_dare: R must be symmetric");
  }
  Eigen::LLT<MatrixX<Scalar>> r_llt(internal::Symmetrized<Scalar>(R));
  if (r_llt.info() != Eigen::Success) {
    throw InvalidArgument("solve_dare: R must be positive definite");
  }
  MatrixX<Scalar> aug(n + m, n + m);
  aug << Q, S, S.transpose(), R;
  aug = internal::Symmetrized<Scalar>(aug);
  Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> aug_es(aug,
                                                        Eigen::EigenvaluesOnly);
  if (aug_es.eigenvalues()(0) <
      -Scalar(1e-10) * std::max(Scalar(1), aug.norm())) {
    throw InvalidArgument(
        "solve_dare: augmented cost [[Q, S], [S^T, R]] must be PSD");
  }
  if (!is_stabilizable(sys)) {
    throw InvalidArgument("solve_dare: (A, B) is not stabilizable");
  }

  const MatrixX<Scalar> Qs = internal::Symmetrized<Scalar>(Q);
  const MatrixX<Scalar> Rs = internal::Symmetrized<Scalar>(R);
  MatrixX<Scalar> P = Qs;
  bool converged = false;
  Scalar prev_diff = Scalar(-1);
  int slow_steps = 0;
  for (int it = 0; it < opt.max_iterations; ++it) {
    const MatrixX<Scalar> W = Rs + B.transpose() * P * B;
    const MatrixX<Scalar> N = B.transpose() * P * A + S.transpose();
    MatrixX<Scalar> next = internal::Symmetrized<Scalar>(
        A.transpose() * P * A - N.transpose() * W.ldlt().solve(N) + Qs);
    const Scalar diff = (next - P).norm();
    P = std::move(next);
    if (!P.allFinite()) break;
    if (diff <= Scalar(opt.tolerance) * std::max(Scalar(1), P.norm())) {
      converged = true;
      break;
    }
    if (prev_diff > Scalar(0) && diff > Scalar(opt.stall_ratio) * prev_diff) {
      if (++slow_steps > 50) break;
    } else {
      slow_steps = 0;
    }
    prev_diff = diff;
  }

  if (!converged) {
    const MatrixX<Scalar> RinvSt = r_llt.solve(S.transpose());
    const MatrixX<Scalar> Ab = A - B * RinvSt;
    const MatrixX<Scalar> G = B * r_llt.solve(B.transpose());
    const MatrixX<Scalar> H = internal::Symmetrized<Scalar>(Qs - S * RinvSt);
    converged = internal::DoublingDare<Scalar>(Ab, G, H, opt, &P);
  }
  if (!converged) {
    throw NonConvergence("solve_dare: iteration budget exhausted");
  }
  // A few Newton (Hewer) steps polish the last digits the contraction
  // leaves behind; a step is kept only if it lowers the residual.
  Scalar residual = riccati_residual(sys, Qs, Rs, S, P);
  for (int step = 0; step < 4 && residual > Scalar(0); ++step) {
    const MatrixX<Scalar> K =
        -(Rs + B.transpose() * P * B).ldlt().solve(B.transpose() * P * A + S.transpose());
    const MatrixX<Scalar> Acl = A + B * K;
    if (spectral_radius(Acl) >= Scalar(1)) break;
    const MatrixX<Scalar> SK = S * K;
    const MatrixX<Scalar> C = Qs + K.transpose() * Rs * K + SK + SK.transpose();
    const MatrixX<Scalar> next = solve_discrete_lyapunov<Scalar>(Acl, C);
    const Scalar next_residual = riccati_residual(sys, Qs, Rs, S, next);
    if (!(next_residual < residual)) break;
    P = next;
    residual = next_residual;
  }
  if (!(residual <= Scalar(1e-8) * std::max(Scalar(1), P.norm()))) {
    throw NonConvergence("solve_dare: residual bound not met");
  }
  return P;
}

/// K = -(R + B^T P B)^{-1} (B^T P A + S^T).
template <typename Scalar>
MatrixX<Scalar> gain_from_riccati(const LtiSystem<Scalar>& sys,
                                  const MatrixX<Scalar>& R,
                                  const MatrixX<Scalar>& S,
                                  const MatrixX<Scalar>& P) {
  const auto& A = sys.A();
  const auto& B = sys.B();
  const MatrixX<Scalar> W = R + B.transpose() * P * B;
  return -W.ldlt().solve(B.transpose() * P * A + S.transpose());
}

template <typename Scalar>
MatrixX<Scalar> lqr_gain(const LtiSystem<Scalar>& sys,
                         const MatrixX<Scalar>& Q, const MatrixX<Scalar>& R,
                         const MatrixX<Scalar>& S,
                         const DareOptions& opt = {}) {
  const MatrixX<Scalar> P = solve_dare(sys, Q, R, S, opt);
  MatrixX<Scalar> K = gain_from_riccati(sys, R, S, P);
  if (!is_stabilizing(sys, K)) {
    throw NonConvergence("lqr_gain: DARE solution is not stabilizing");
  }
  return K;
}

template <typename F, typename Scalar>
concept Policy = requires(F f, int k, const VectorX<Scalar>& x) {
  { f(k, x) } -> std::convertible_to<VectorX<Scalar>>;
};

/// Propagates x_{k+1} = A x_k + B u_k with u_k = policy(k, x_k) for N steps.
template <typename Scalar, typename F>
  requires Policy<F, Scalar>
Trajectory<Scalar> rollout(const LtiSystem<Scalar>& sys,
                           const VectorX<Scalar>& x0, F&& policy, int N) {
  if (N < 1) throw InvalidArgument("rollout: N must be >= 1");
  if (x0.size() != sys.state_dim()) {
    internal::ThrowDimension("rollout: x0 has wrong dimension");
  }
  Trajectory<Scalar> traj;
  traj.dt = sys.dt();
  traj.states.resize(sys.state_dim(), N + 1);
  traj.inputs.resize(sys.input_dim(), N);
  traj.states.col(0) = x0;
  for (int k = 0; k < N; ++k) {
    const VectorX<Scalar> x = traj.states.col(k);
    const VectorX<Scalar> u = policy(k, x);
    if (u.size() != sys.input_dim()) {
      internal::ThrowDimension("rollout: policy returned wrong input size");
    }
    traj.inputs.col(k) = u;
    traj.states.col(k + 1) = sys.A() * x + sys.B() * u;
  }
  return traj;
}

/// Linear state feedback u = K x as a rollout policy.
template <typename Scalar>
auto linear_policy(MatrixX<Scalar> K) {
  return [K = std::move(K)](int, const VectorX<Scalar>& x) -> VectorX<Scalar> {
    return K * x;
  };
}

}  // namespace hbm
