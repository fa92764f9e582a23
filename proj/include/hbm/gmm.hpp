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
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "hbm/errors.hpp"
#include "hbm/lti.hpp"

namespace hbm {

template <typename Scalar = double>
struct GaussianComponent {
  VectorX<Scalar> mean;
  MatrixX<Scalar> cov;
};

/// Gaussian mixture with full covariances.
template <typename Scalar = double>
struct Gmm {
  VectorX<Scalar> weights;
  std::vector<GaussianComponent<Scalar>> components;

  Eigen::Index size() const { return weights.size(); }
  Eigen::Index dim() const {
    return components.empty() ? 0 : components.front().mean.size();
  }

  void validate() const {
    if (components.empty() ||
        static_cast<Eigen::Index>(components.size()) != weights.size()) {
      throw InvalidArgument("Gmm: need G >= 1 components and G weights");
    }
    if (std::abs(weights.sum() - Scalar(1)) > Scalar(1e-10) ||
        (weights.array() < Scalar(0)).any()) {
      throw InvalidArgument("Gmm: weights must be a probability vector");
    }
    for (const auto& c : components) {
      if (c.mean.size() != dim() || c.cov.rows() != dim() ||
          c.cov.cols() != dim()) {
        internal::ThrowDimension("Gmm: component dimension mismatch");
      }
    }
  }
};

template <typename Scalar = double>
struct ConditionalGaussian {
  VectorX<Scalar> mean;
  MatrixX<Scalar> cov;
};

using GaussianComponentd = GaussianComponent<double>;
using Gmmd = Gmm<double>;
using ConditionalGaussiand = ConditionalGaussian<double>;

namespace internal {

template <typename Scalar>
Scalar LogSumExp(const Eigen::Ref<const VectorX<Scalar>>& v) {
  const Scalar top = v.maxCoeff();
  if (!std::isfinite(top)) return top;
  return top + std::log((v.array() - top).exp().sum());
}

template <typename Scalar>
MatrixX<Scalar> SelectBlock(const MatrixX<Scalar>& M, std::span<const int> rows,
                            std::span<const int> cols) {
  MatrixX<Scalar> out(rows.size(), cols.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < cols.size(); ++j) out(i, j) = M(rows[i], cols[j]);
  }
  return out;
}

template <typename Scalar>
VectorX<Scalar> SelectRows(const VectorX<Scalar>& v, std::span<const int> idx) {
  VectorX<Scalar> out(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) out(i) = v(idx[i]);
  return out;
}

}  // namespace internal

/// Cholesky-backed evaluator of log N(. | mean, cov).
template <typename Scalar = double>
class GaussianLogDensity {
 public:
  GaussianLogDensity() = default;
  GaussianLogDensity(VectorX<Scalar> mean, const MatrixX<Scalar>& cov)
      : mean_(std::move(mean)), llt_(cov) {
    if (llt_.info() != Eigen::Success) {
      throw InvalidArgument("GaussianLogDensity: covariance is not SPD");
    }
    const VectorX<Scalar> d = llt_.matrixLLT().diagonal();
    log_norm_ = -Scalar(0.5) * Scalar(mean_.size()) *
                    std::log(Scalar(2) * std::numbers::pi_v<Scalar>) -
                d.array().log().sum();
  }

  Scalar operator()(const Eigen::Ref<const VectorX<Scalar>>& x) const {
    const VectorX<Scalar> z = llt_.matrixL().solve(x - mean_);
    return log_norm_ - Scalar(0.5) * z.squaredNorm();
  }

  /// Log densities of every column of `points`.
  VectorX<Scalar> columns(const MatrixX<Scalar>& points) const {
    MatrixX<Scalar> z = points.colwise() - mean_;
    llt_.matrixL().solveInPlace(z);
    return (log_norm_ - Scalar(0.5) * z.colwise().squaredNorm().array())
        .matrix()
        .transpose();
  }

  Scalar log_normalizer() const { return log_norm_; }
  const Eigen::LLT<MatrixX<Scalar>>& llt() const { return llt_; }

 private:
  VectorX<Scalar> mean_;
  Eigen::LLT<MatrixX<Scalar>> llt_;
  Scalar log_norm_ = Scalar(0);
};

/// Sum over the columns of `data` of log sum_i w_i N(x | mu_i, Sigma_i),
/// evaluated with log-sum-exp.
template <typename Scalar>
Scalar log_likelihood(const Gmm<Scalar>& gmm, const MatrixX<Scalar>& data) {
  gmm.validate();
  if (data.rows() != gmm.dim()) {
    internal::ThrowDimension("log_likelihood: data dimension mismatch");
  }
  const Eigen::Index G = gmm.size();
  MatrixX<Scalar> logp(G, data.cols());
  for (Eigen::Index i = 0; i < G; ++i) {
    const auto& c = gmm.components[i];
    logp.row(i) = GaussianLogDensity<Scalar>(c.mean, c.cov)
                      .columns(data)
                      .transpose()
                      .array() +
                  std::log(gmm.weights(i));
  }
  Scalar total = Scalar(0);
  for (Eigen::Index t = 0; t < data.cols(); ++t) {
    total += internal::LogSumExp<Scalar>(logp.col(t));
  }
  return total;
}

/// Per-query result of Gaussian mixture regression.
template <typename Scalar = double>
struct GmrQuery {
  VectorX<Scalar> weights;  // h^i(x), sums to one
  std::vector<ConditionalGaussian<Scalar>> conditionals;
  // All input marginals underflowed; weights fell back to uniform.
  bool far_field = false;
};

/// Log-density floor below which a query counts as far-field.
inline constexpr double kFarFieldLogDensity = -700.0;

/// Gaussian mixture regression with the per-component regression matrices
/// Sigma^{OI} (Sigma^I)^{-1} and conditional covariances computed once.
template <typename Scalar = double>
class GmrRegressor {
 public:
  struct Component {
    Scalar log_prior = Scalar(0);
    VectorX<Scalar> input_mean;
    VectorX<Scalar> output_mean;
    MatrixX<Scalar> gain;  // Sigma^{OI} (Sigma^I)^{-1}
    MatrixX<Scalar> cov;   // Sigma^O - gain Sigma^{IO}
    GaussianLogDensity<Scalar> input_density;
  };

  GmrRegressor() = default;
  GmrRegressor(const Gmm<Scalar>& gmm, std::vector<int> input_dims,
               std::vector<int> output_dims)
      : input_dims_(std::move(input_dims)), output_dims_(std::move(output_dims)) {
    gmm.validate();
    std::vector<bool> used(gmm.dim(), false);
    for (int idx : input_dims_) {
      if (idx < 0 || idx >= gmm.dim() || used[idx]) {
        throw InvalidArgument("GmrRegressor: bad input index set");
      }
      used[idx] = true;
    }
    for (int idx : output_dims_) {
      if (idx < 0 || idx >= gmm.dim() || used[idx]) {
        throw InvalidArgument("GmrRegressor: index sets must be disjoint");
      }
      used[idx] = true;
    }
    for (Eigen::Index i = 0; i < gmm.size(); ++i) {
      const auto& c = gmm.components[i];
      Component comp;
      comp.log_prior = gmm.weights(i) > Scalar(0)
                           ? std::log(gmm.weights(i))
                           : -std::numeric_limits<Scalar>::infinity();
      comp.input_mean = internal::SelectRows<Scalar>(c.mean, input_dims_);
      comp.output_mean = internal::SelectRows<Scalar>(c.mean, output_dims_);
      const MatrixX<Scalar> s_in =
          internal::SelectBlock<Scalar>(c.cov, input_dims_, input_dims_);
      const MatrixX<Scalar> s_oi =
          internal::SelectBlock<Scalar>(c.cov, output_dims_, input_dims_);
      const MatrixX<Scalar> s_out =
          internal::SelectBlock<Scalar>(c.cov, output_dims_, output_dims_);
      comp.input_density = GaussianLogDensity<Scalar>(comp.input_mean, s_in);
      comp.gain = comp.input_density.llt().solve(s_oi.transpose()).transpose();
      MatrixX<Scalar> cov = s_out - comp.gain * s_oi.transpose();
      comp.cov = (cov + cov.transpose()) / Scalar(2);
      components_.push_back(std::move(comp));
    }
  }

  GmrQuery<Scalar> condition(const Eigen::Ref<const VectorX<Scalar>>& x) const {
    if (x.size() != static_cast<Eigen::Index>(input_dims_.size())) {
      internal::ThrowDimension("gmr_condition: query has wrong dimension");
    }
    const Eigen::Index G = components_.size();
    GmrQuery<Scalar> q;
    VectorX<Scalar> logw(G);
    for (Eigen::Index i = 0; i < G; ++i) {
      logw(i) = components_[i].log_prior + components_[i].input_density(x);
    }
    if (!(logw.maxCoeff() >= Scalar(kFarFieldLogDensity))) {
      q.far_field = true;
      q.weights = VectorX<Scalar>::Constant(G, Scalar(1) / Scalar(G));
    } else {
      q.weights = (logw.array() - internal::LogSumExp<Scalar>(logw)).exp();
      q.weights /= q.weights.sum();
    }
    q.conditionals.reserve(G);
    for (const auto& c : components_) {
      q.conditionals.push_back(
          {c.output_mean + c.gain * (x - c.input_mean), c.cov});
    }
    return q;
  }

  const std::vector<Component>& components() const { return components_; }
  const std::vector<int>& input_dims() const { return input_dims_; }
  const std::vector<int>& output_dims() const { return output_dims_; }

 private:
  std::vector<int> input_dims_;
  std::vector<int> output_dims_;
  std::vector<Component> components_;
};

/// One-shot conditioning of `gmm` on x over the given index sets.
template <typename Scalar>
GmrQuery<Scalar> gmr_condition(const Gmm<Scalar>& gmm,
                               std::vector<int> input_dims,
                               std::vector<int> output_dims,
                               const VectorX<Scalar>& x) {
  return GmrRegressor<Scalar>(gmm, std::move(input_dims),
                              std::move(output_dims))
      .condition(x);
}

/// Collapses a weighted set of Gaussians to the single Gaussian with the
/// same first two moments.
template <typename Scalar>
ConditionalGaussian<Scalar> moment_merge(
    const VectorX<Scalar>& weights,
    const std::vector<ConditionalGaussian<Scalar>>& parts) {
  if (parts.empty() ||
      weights.size() != static_cast<Eigen::Index>(parts.size())) {
    internal::ThrowDimension("moment_merge: one weight per component");
  }
  const Eigen::Index d = parts.front().mean.size();
  ConditionalGaussian<Scalar> out{VectorX<Scalar>::Zero(d),
                                  MatrixX<Scalar>::Zero(d, d)};
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const auto& p = parts[i];
    if (p.mean.size() != d || p.cov.rows() != d || p.cov.cols() != d) {
      internal::ThrowDimension("moment_merge: component dimension mismatch");
    }
    out.mean += weights(i) * p.mean;
    out.cov += weights(i) * (p.cov + p.mean * p.mean.transpose());
  }
  out.cov -= out.mean * out.mean.transpose();
  out.cov = (out.cov + out.cov.transpose()) / Scalar(2);
  return out;
}

// ---------------------------------------------------------------------------
// Fitting (double precision).

struct KMeansResult {
  std::vector<int> labels;
  Eigen::MatrixXd centers;  // d x G
  double within_ssq = 0.0;
};

/// Lloyd's algorithm with farthest-point weighted (k-means++) seeding.
/// Data points are the columns of `data`. Deterministic for a given seed.
KMeansResult kmeans(const Eigen::MatrixXd& data, int G, std::uint64_t seed,
                    int restarts = 5, int max_iter = 300);

struct EmOptions {
  double reg = 1e-6;
  int max_iter = 200;
  double tol = 1e-6;
  std::uint64_t seed = 0;
  int kmeans_restarts = 5;
};

struct EmResult {
  Gmmd gmm;
  // Objective after every E-step; see fit_em().
  std::vector<double> loglik_history;
  bool degenerate = false;
  int iterations = 0;
};

/// EM fit of a G-component full-covariance mixture to the columns of `data`.
///
/// Every M-step adds reg * I to each covariance. The recorded history is
/// the log-likelihood of the regularized model, in which each component
/// density carries the factor exp(-reg/2 tr Sigma^{-1}); EM is an exact
/// ascent method for that objective, so the history never decreases.
/// `init_centers` (d x G) replaces the k-means initialization when given.
EmResult fit_em(const Eigen::MatrixXd& data, int G, const EmOptions& options = {},
                const std::optional<Eigen::MatrixXd>& init_centers = std::nullopt);

}  // namespace hbm
