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

// Reference computation of the minimal condition bound alpha.
//
// Works in the full (Q, R, S, P) parametrization: the two optimality
// conditions are imposed through a numerically computed null space, and
// each fixed-alpha feasibility question is answered by maximizing the
// common eigenvalue margin s of
//   M - I >= s I,   alpha I - M >= s I,   P >= s I.
// Nothing here shares code with recover_objective().

#include <cmath>
#include <limits>
#include <vector>

#include "hbm/ioc.hpp"

namespace hbm {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct Layout {
  int n, m;
  int nq, nr, ns, np;
  int size() const { return nq + nr + ns + np; }
};

MatrixXd SymFromUpper(const VectorXd& y, int offset, int n) {
  MatrixXd X(n, n);
  int k = offset;
  for (int a = 0; a < n; ++a) {
    for (int b = a; b < n; ++b) {
      X(a, b) = y(k);
      X(b, a) = y(k);
      ++k;
    }
  }
  return X;
}

struct Unpacked {
  MatrixXd Q, R, S, P;
};

Unpacked Unpack(const Layout& L, const VectorXd& y) {
  Unpacked u;
  u.Q = SymFromUpper(y, 0, L.n);
  u.R = SymFromUpper(y, L.nq, L.m);
  u.S = Eigen::Map<const MatrixXd>(y.data() + L.nq + L.nr, L.n, L.m);
  u.P = SymFromUpper(y, L.nq + L.nr + L.ns, L.n);
  return u;
}

MatrixXd Augmented(const Unpacked& u) {
  const auto n = u.Q.rows(), m = u.R.rows();
  MatrixXd M(n + m, n + m);
  M << u.Q, u.S, u.S.transpose(), u.R;
  return M;
}

// Affine PSD constraint G0 + sum_i w_i G_i >= 0 handled through an
// eigendecomposition.
struct Constraint {
  MatrixXd G0;
  std::vector<MatrixXd> G;
};

class MarginProblem {
 public:
  MarginProblem(std::vector<Constraint> cons, int dim)
      : cons_(std::move(cons)), dim_(dim) {}

  int degree() const {
    int nu = 0;
    for (const auto& c : cons_) nu += static_cast<int>(c.G0.rows());
    return nu;
  }

  MatrixXd Eval(const Constraint& c, const VectorXd& w) const {
    MatrixXd X = c.G0;
    for (int i = 0; i < dim_; ++i) X += w(i) * c.G[i];
    return (X + X.transpose()) / 2.0;
  }

  double MinEig(const VectorXd& w) const {
    double lo = std::numeric_limits<double>::infinity();
    for (const auto& c : cons_) {
      Eigen::SelfAdjointEigenSolver<MatrixXd> es(Eval(c, w),
                                                 Eigen::EigenvaluesOnly);
      lo = std::min(lo, es.eigenvalues()(0));
    }
    return lo;
  }

  // phi = -t s - sum log det
  bool Phi(const VectorXd& w, double t, double* phi) const {
    double v = -t * w(dim_ - 1);
    for (const auto& c : cons_) {
      Eigen::SelfAdjointEigenSolver<MatrixXd> es(Eval(c, w),
                                                 Eigen::EigenvaluesOnly);
      if (es.eigenvalues()(0) <= 0.0) return false;
      v -= es.eigenvalues().array().log().sum();
    }
    *phi = v;
    return std::isfinite(v);
  }

  void GradHess(const VectorXd& w, double t, VectorXd* g, MatrixXd* H) const {
    *g = VectorXd::Zero(dim_);
    (*g)(dim_ - 1) = -t;
    *H = MatrixXd::Zero(dim_, dim_);
    for (const auto& c : cons_) {
      Eigen::SelfAdjointEigenSolver<MatrixXd> es(Eval(c, w));
      const VectorXd isq = es.eigenvalues().array().rsqrt();
      const MatrixXd V = es.eigenvectors();
      std::vector<MatrixXd> T(dim_);
      for (int i = 0; i < dim_; ++i) {
        T[i] = isq.asDiagonal() * (V.transpose() * c.G[i] * V) *
               isq.asDiagonal();
        (*g)(i) -= T[i].trace();
      }
      for (int i = 0; i < dim_; ++i) {
        for (int k = 0; k <= i; ++k) {
          const double h = (T[i].array() * T[k].array()).sum();
          (*H)(i, k) += h;
          (*H)(k, i) = (*H)(i, k);
        }
      }
    }
  }

  // Returns true once the Newton decrement is negligible.
  bool Center(VectorXd* w, double t) const {
    double phi = 0.0;
    if (!Phi(*w, t, &phi)) return false;
    for (int it = 0; it < 200; ++it) {
      VectorXd g;
      MatrixXd H;
      GradHess(*w, t, &g, &H);
      // Jacobi scaling before the solve; the margin variable and theta live
      // on very different scales.
      const VectorXd D = H.diagonal().cwiseMax(1e-300).cwiseSqrt().cwiseInverse();
      const MatrixXd Hs = D.asDiagonal() * H * D.asDiagonal();
      const VectorXd dw =
          -(D.asDiagonal() * Hs.ldlt().solve(D.asDiagonal() * g)).eval();
      const double lambda2 = -g.dot(dw);
      if (!(lambda2 > 1e-12)) return true;
      double step = 1.0;
      while (step > 1e-14) {
        VectorXd trial = *w + step * dw;
        double pt = 0.0;
        if (Phi(trial, t, &pt) && pt <= phi - 0.25 * step * lambda2) {
          *w = std::move(trial);
          phi = pt;
          break;
        }
        step *= 0.5;
      }
      if (step <= 1e-14) return lambda2 < 1e-8;
    }
    return false;
  }

 private:
  std::vector<Constraint> cons_;
  int dim_;
};

class AlphaFeasibility {
 public:
  AlphaFeasibility(const LtiSystemd& sys, const MatrixXd& K) {
    const int n = static_cast<int>(sys.state_dim());
    const int m = static_cast<int>(sys.input_dim());
    layout_ = {n, m, n * (n + 1) / 2, m * (m + 1) / 2, n * m, n * (n + 1) / 2};
    const MatrixXd& A = sys.A();
    const MatrixXd& B = sys.B();

    // Linear map y -> (gain condition, Riccati condition), column by column.
    const int ny = layout_.size();
    MatrixXd C(m * n + n * n, ny);
    for (int j = 0; j < ny; ++j) {
      VectorXd e = VectorXd::Zero(ny);
      e(j) = 1.0;
      const Unpacked u = Unpack(layout_, e);
      const MatrixXd r1 = (u.R + B.transpose() * u.P * B) * K +
                          B.transpose() * u.P * A + u.S.transpose();
      const MatrixXd r2 = A.transpose() * u.P * A - u.P +
                          (A.transpose() * u.P * B + u.S) * K + u.Q;
      C.col(j) << Eigen::Map<const VectorXd>(r1.data(), r1.size()),
          Eigen::Map<const VectorXd>(r2.data(), r2.size());
    }
    Eigen::JacobiSVD<MatrixXd> svd(C, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    int rank = 0;
    for (int i = 0; i < sv.size(); ++i) {
      if (sv(i) > 1e-10 * sv(0)) ++rank;
    }
    null_ = svd.matrixV().rightCols(ny - rank);
    k_ = static_cast<int>(null_.cols());
    theta_ = VectorXd::Zero(k_);

    for (int i = 0; i < k_; ++i) {
      const Unpacked u = Unpack(layout_, null_.col(i));
      aug_.push_back(Augmented(u));
      p_.push_back(u.P);
    }
  }

  bool Feasible(double alpha) {
    const int d = layout_.n + layout_.m;
    const int n = layout_.n;
    const int dim = k_ + 1;
    Constraint lower{-MatrixXd::Identity(d, d), {}};
    Constraint upper{alpha * MatrixXd::Identity(d, d), {}};
    Constraint pos{MatrixXd::Zero(n, n), {}};
    for (int i = 0; i < k_; ++i) {
      lower.G.push_back(aug_[i]);
      upper.G.push_back(-aug_[i]);
      pos.G.push_back(p_[i]);
    }
    lower.G.push_back(-MatrixXd::Identity(d, d));
    upper.G.push_back(-MatrixXd::Identity(d, d));
    pos.G.push_back(-MatrixXd::Identity(n, n));
    const MarginProblem prob({lower, upper, pos}, dim);

    // M and P are homogeneous in theta, so the last feasible point can be
    // rescaled to put the spectrum of M in the middle of [1, alpha].
    VectorXd w = VectorXd::Zero(dim);
    if (theta_.norm() > 0.0) {
      MatrixXd M = MatrixXd::Zero(d, d);
      for (int i = 0; i < k_; ++i) M += theta_(i) * aug_[i];
      Eigen::SelfAdjointEigenSolver<MatrixXd> es((M + M.transpose()) / 2.0,
                                                 Eigen::EigenvaluesOnly);
      const double spread = es.eigenvalues()(0) + es.eigenvalues()(d - 1);
      if (es.eigenvalues()(0) > 0.0) {
        w.head(k_) = theta_ * ((1.0 + alpha) / spread);
      }
    }
    w(k_) = prob.MinEig(w) - 1.0;
    const double nu = prob.degree();
    double t = 1.0;
    int stalls = 0;
    for (int outer = 0; outer < 60 && t < 1e14; ++outer) {
      const bool centered = prob.Center(&w, t);
      if (w(k_) > 0.0) {
        theta_ = w.head(k_);
        return true;
      }
      // On the central path s* <= s + nu / t.
      if (centered && w(k_) + nu / t < 0.0) return false;
      // Repeated stalls mean the margin is zero to working precision.
      if (!centered && ++stalls > 3) return false;
      t *= 8.0;
    }
    return false;
  }

 private:
  Layout layout_{};
  MatrixXd null_;
  int k_ = 0;
  VectorXd theta_;
  std::vector<MatrixXd> aug_;
  std::vector<MatrixXd> p_;
};

}  // namespace

double min_alpha_oracle(const LtiSystemd& sys, const MatrixXd& K_hat,
                        double alpha_tol, double alpha_hi) {
  if (K_hat.rows() != sys.input_dim() || K_hat.cols() != sys.state_dim()) {
    internal::ThrowDimension("min_alpha_oracle: K_hat must be m x n");
  }
  if (!is_stabilizing(sys, K_hat)) {
    throw NotStabilizing("min_alpha_oracle: K_hat is not stabilizing");
  }
  AlphaFeasibility feas(sys, K_hat);
  if (!feas.Feasible(alpha_hi)) {
    throw Infeasible("min_alpha_oracle: infeasible at the upper bracket");
  }
  double lo = 1.0;
  double hi = alpha_hi;
  while (hi > lo * (1.0 + alpha_tol)) {
    const double mid = std::sqrt(lo * hi);
    if (feas.Feasible(mid)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

}  // namespace hbm
