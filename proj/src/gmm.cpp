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

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "em_engine.hpp"
#include "hbm/gmm.hpp"

namespace hbm {
namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

Index CountDistinctColumns(const MatrixXd& data, Index stop_at) {
  std::vector<Index> order(data.cols());
  for (Index t = 0; t < data.cols(); ++t) order[t] = t;
  auto less = [&](Index a, Index b) {
    for (Index r = 0; r < data.rows(); ++r) {
      if (data(r, a) != data(r, b)) return data(r, a) < data(r, b);
    }
    return false;
  };
  std::sort(order.begin(), order.end(), less);
  Index distinct = order.empty() ? 0 : 1;
  for (std::size_t k = 1; k < order.size() && distinct < stop_at; ++k) {
    if (less(order[k - 1], order[k])) ++distinct;
  }
  return distinct;
}

MatrixXd SquaredDistances(const MatrixXd& data, const MatrixXd& centers) {
  MatrixXd d2(centers.cols(), data.cols());
  for (Index t = 0; t < data.cols(); ++t) {
    for (Index g = 0; g < centers.cols(); ++g) {
      d2(g, t) = (data.col(t) - centers.col(g)).squaredNorm();
    }
  }
  return d2;
}

KMeansResult LloydFromSeeds(const MatrixXd& data, MatrixXd centers,
                            int max_iter) {
  const Index N = data.cols();
  const Index G = centers.cols();
  KMeansResult out;
  out.labels.assign(N, -1);
  VectorXd best(N);
  for (int iter = 0; iter < max_iter; ++iter) {
    const MatrixXd d2 = SquaredDistances(data, centers);
    bool changed = false;
    for (Index t = 0; t < N; ++t) {
      Index g = 0;
      best(t) = d2.col(t).minCoeff(&g);
      if (out.labels[t] != static_cast<int>(g)) {
        out.labels[t] = static_cast<int>(g);
        changed = true;
      }
    }
    // Empty clusters take the point currently worst served by its center.
    std::vector<Index> counts(G, 0);
    for (int l : out.labels) ++counts[l];
    for (Index g = 0; g < G; ++g) {
      if (counts[g] > 0) continue;
      Index far = 0;
      best.maxCoeff(&far);
      --counts[out.labels[far]];
      out.labels[far] = static_cast<int>(g);
      best(far) = 0.0;
      ++counts[g];
      changed = true;
    }
    centers.setZero();
    for (Index t = 0; t < N; ++t) centers.col(out.labels[t]) += data.col(t);
    for (Index g = 0; g < G; ++g) centers.col(g) /= double(counts[g]);
    if (!changed) break;
  }
  out.within_ssq = 0.0;
  for (Index t = 0; t < N; ++t) {
    out.within_ssq += (data.col(t) - centers.col(out.labels[t])).squaredNorm();
  }
  out.centers = std::move(centers);
  return out;
}

MatrixXd PlusPlusSeeds(const MatrixXd& data, Index G, std::mt19937_64& rng) {
  const Index N = data.cols();
  MatrixXd centers(data.rows(), G);
  std::uniform_int_distribution<Index> first(0, N - 1);
  centers.col(0) = data.col(first(rng));
  VectorXd d2(N);
  for (Index t = 0; t < N; ++t) {
    d2(t) = (data.col(t) - centers.col(0)).squaredNorm();
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (Index g = 1; g < G; ++g) {
    const double total = d2.sum();
    Index pick = N - 1;
    double target = unit(rng) * total;
    for (Index t = 0; t < N; ++t) {
      if (d2(t) <= 0.0) continue;
      target -= d2(t);
      if (target < 0.0) {
        pick = t;
        break;
      }
    }
    if (d2(pick) <= 0.0) d2.maxCoeff(&pick);
    centers.col(g) = data.col(pick);
    for (Index t = 0; t < N; ++t) {
      d2(t) = std::min(d2(t), (data.col(t) - centers.col(g)).squaredNorm());
    }
  }
  return centers;
}

bool AllColumnsEqual(const MatrixXd& data) {
  for (Index t = 1; t < data.cols(); ++t) {
    if (data.col(t) != data.col(0)) return false;
  }
  return true;
}

struct ViewParams {
  VectorXd weights;
  std::vector<std::vector<GaussianComponentd>> views;
};

// Weighted M-step. `resp` is G x N; empty components keep their previous
// parameters with zero weight.
void MaximizationStep(const std::vector<MatrixXd>& views, const MatrixXd& resp,
                      double reg, ViewParams& params) {
  const Index G = resp.rows();
  const double N = double(resp.cols());
  VectorXd mass = resp.rowwise().sum();
  params.weights = mass / N;
  params.weights /= params.weights.sum();
  for (std::size_t p = 0; p < views.size(); ++p) {
    const MatrixXd& Z = views[p];
    for (Index i = 0; i < G; ++i) {
      if (!(mass(i) > 1e-300)) continue;
      auto& comp = params.views[p][i];
      comp.mean = Z * resp.row(i).transpose() / mass(i);
      const MatrixXd diff = Z.colwise() - comp.mean;
      MatrixXd cov = diff * resp.row(i).asDiagonal() * diff.transpose() / mass(i);
      cov = (cov + cov.transpose()) / 2.0;
      cov.diagonal().array() += reg;
      comp.cov = std::move(cov);
    }
  }
}

}  // namespace

KMeansResult kmeans(const MatrixXd& data, int G, std::uint64_t seed,
                    int restarts, int max_iter) {
  if (G < 1) throw InvalidArgument("kmeans: G must be >= 1");
  if (restarts < 1 || max_iter < 1) {
    throw InvalidArgument("kmeans: restarts and max_iter must be >= 1");
  }
  if (data.cols() < G || CountDistinctColumns(data, G) < G) {
    throw InvalidArgument("kmeans: fewer distinct points than clusters");
  }
  KMeansResult best;
  best.within_ssq = std::numeric_limits<double>::infinity();
  for (int r = 0; r < restarts; ++r) {
    std::mt19937_64 rng(seed + 0x9E3779B97F4A7C15ULL * std::uint64_t(r + 1));
    KMeansResult run =
        LloydFromSeeds(data, PlusPlusSeeds(data, G, rng), max_iter);
    if (run.within_ssq < best.within_ssq) best = std::move(run);
  }
  return best;
}

namespace internal {

MultiViewFit FitMultiView(const std::vector<MatrixXd>& views, int G,
                          const EmOptions& options,
                          const std::optional<MatrixXd>& init_centers) {
  if (views.empty()) throw InvalidArgument("EM: at least one view");
  if (G < 1) throw InvalidArgument("EM: G must be >= 1");
  if (!(options.reg > 0.0)) throw InvalidArgument("EM: reg must be positive");
  const Index N = views.front().cols();
  Index D = 0;
  for (const auto& v : views) {
    if (v.cols() != N) internal::ThrowDimension("EM: views disagree on N");
    D += v.rows();
  }
  Index max_d = 0;
  for (const auto& v : views) max_d = std::max(max_d, v.rows());
  if (N < Index(G) * (max_d + 1)) {
    throw InsufficientData("EM: need at least G * (d + 1) points, got " +
                           std::to_string(N));
  }
  MatrixXd stacked(D, N);
  for (Index row = 0; const auto& v : views) {
    stacked.middleRows(row, v.rows()) = v;
    row += v.rows();
  }

  MultiViewFit out;
  out.views.resize(views.size());
  if (AllColumnsEqual(stacked)) {
    out.degenerate = true;
    out.weights = VectorXd::Constant(G, 1.0 / G);
    for (std::size_t p = 0; p < views.size(); ++p) {
      const Index d = views[p].rows();
      for (int i = 0; i < G; ++i) {
        out.views[p].push_back(
            {views[p].col(0), options.reg * MatrixXd::Identity(d, d)});
      }
    }
    return out;
  }

  std::vector<int> labels;
  if (init_centers) {
    if (init_centers->rows() != D || init_centers->cols() != G) {
      internal::ThrowDimension("EM: init centers must be (stacked d) x G");
    }
    const MatrixXd d2 = SquaredDistances(stacked, *init_centers);
    labels.resize(N);
    for (Index t = 0; t < N; ++t) {
      Index g = 0;
      d2.col(t).minCoeff(&g);
      labels[t] = static_cast<int>(g);
    }
  } else {
    labels = kmeans(stacked, G, options.seed, options.kmeans_restarts).labels;
  }

  // Hard-assignment M-step from the initial labels. Components that receive
  // no point start from the global moments.
  ViewParams params;
  params.views.resize(views.size());
  for (std::size_t p = 0; p < views.size(); ++p) {
    const VectorXd mean = views[p].rowwise().mean();
    const MatrixXd diff = views[p].colwise() - mean;
    MatrixXd cov = diff * diff.transpose() / double(N);
    cov.diagonal().array() += options.reg;
    params.views[p].assign(G, GaussianComponentd{mean, cov});
  }
  MatrixXd resp = MatrixXd::Zero(G, N);
  for (Index t = 0; t < N; ++t) resp(labels[t], t) = 1.0;
  MaximizationStep(views, resp, options.reg, params);

  double previous = -std::numeric_limits<double>::infinity();
  MatrixXd logp(G, N);
  for (int iter = 0;; ++iter) {
    for (int i = 0; i < G; ++i) {
      const double w = params.weights(i);
      logp.row(i).setConstant(w > 0.0 ? std::log(w)
                                      : -std::numeric_limits<double>::infinity());
      for (std::size_t p = 0; p < views.size(); ++p) {
        const auto& c = params.views[p][i];
        const GaussianLogDensity<double> density(c.mean, c.cov);
        const Index d = c.mean.size();
        const double penalty =
            0.5 * options.reg *
            density.llt().solve(MatrixXd::Identity(d, d)).trace();
        logp.row(i) += (density.columns(views[p]).array() - penalty)
                           .matrix()
                           .transpose();
      }
    }
    VectorXd lse(N);
    for (Index t = 0; t < N; ++t) lse(t) = LogSumExp<double>(logp.col(t));
    const double objective = lse.sum();
    out.history.push_back(objective);
    out.iterations = iter;
    if (iter >= options.max_iter) break;
    if (iter > 0 && objective - previous < options.tol) break;
    previous = objective;
    resp = (logp.rowwise() - lse.transpose()).array().exp();
    MaximizationStep(views, resp, options.reg, params);
  }
  out.weights = std::move(params.weights);
  out.views = std::move(params.views);
  return out;
}

}  // namespace internal

EmResult fit_em(const MatrixXd& data, int G, const EmOptions& options,
                const std::optional<MatrixXd>& init_centers) {
  internal::MultiViewFit fit =
      internal::FitMultiView({data}, G, options, init_centers);
  EmResult out;
  out.gmm.weights = std::move(fit.weights);
  out.gmm.components = std::move(fit.views.front());
  out.loglik_history = std::move(fit.history);
  out.degenerate = fit.degenerate;
  out.iterations = fit.iterations;
  return out;
}

}  // namespace hbm
