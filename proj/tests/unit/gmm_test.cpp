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
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "hbm/gmm.hpp"

namespace hbm {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

double NaiveGaussian(const VectorXd& x, const VectorXd& mu, const MatrixXd& S) {
  const double d = static_cast<double>(x.size());
  const VectorXd r = x - mu;
  return std::exp(-0.5 * r.dot(S.inverse() * r)) /
         std::sqrt(std::pow(2 * std::numbers::pi, d) * S.determinant());
}

MatrixXd SampleMixture(std::mt19937_64& rng, const Gmmd& gmm, int N) {
  std::discrete_distribution<int> pick(gmm.weights.data(),
                                       gmm.weights.data() + gmm.size());
  std::normal_distribution<double> normal(0.0, 1.0);
  MatrixXd out(gmm.dim(), N);
  for (int t = 0; t < N; ++t) {
    const auto& c = gmm.components[pick(rng)];
    VectorXd z(gmm.dim());
    for (auto& v : z) v = normal(rng);
    out.col(t) = c.mean + MatrixXd(c.cov.llt().matrixL()) * z;
  }
  return out;
}

Gmmd OneD(std::vector<double> w, std::vector<double> mu, std::vector<double> var) {
  Gmmd g;
  g.weights = Eigen::Map<VectorXd>(w.data(), w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    g.components.push_back({VectorXd::Constant(1, mu[i]), MatrixXd::Constant(1, 1, var[i])});
  }
  return g;
}

TEST(LogLikelihood, StandardNormalAtZero) {
  const Gmmd g = OneD({1.0}, {0.0}, {1.0});
  EXPECT_NEAR(log_likelihood(g, MatrixXd(MatrixXd::Zero(1, 1))), -0.9189385332, 1e-9);
}

TEST(LogLikelihood, MatchesNaiveSummation) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    const int d = 1 + trial % 3, G = 1 + trial % 4;
    Gmmd g;
    g.weights = VectorXd::Zero(G);
    for (int i = 0; i < G; ++i) {
      g.weights(i) = 0.2 + std::abs(normal(rng));
      MatrixXd L(d, d);
      for (int k = 0; k < L.size(); ++k) L.data()[k] = normal(rng);
      VectorXd mu(d);
      for (auto& v : mu) v = normal(rng);
      g.components.push_back({mu, L * L.transpose() + 0.5 * MatrixXd::Identity(d, d)});
    }
    g.weights /= g.weights.sum();
    MatrixXd x(d, 25);
    for (int k = 0; k < x.size(); ++k) x.data()[k] = 1.5 * normal(rng);
    double naive = 0.0;
    for (int t = 0; t < x.cols(); ++t) {
      double p = 0.0;
      for (int i = 0; i < G; ++i) {
        p += g.weights(i) * NaiveGaussian(x.col(t), g.components[i].mean, g.components[i].cov);
      }
      naive += std::log(p);
    }
    EXPECT_NEAR(log_likelihood(g, x), naive, 1e-9 * std::max(1.0, std::abs(naive)));
  }
}

TEST(Gmm, ValidateRejectsBadWeights) {
  Gmmd g = OneD({0.5, 0.6}, {0, 1}, {1, 1});
  EXPECT_THROW(g.validate(), InvalidArgument);
  g = OneD({1.5, -0.5}, {0, 1}, {1, 1});
  EXPECT_THROW(g.validate(), InvalidArgument);
}

TEST(GaussianLogDensity, RejectsIndefinite) {
  EXPECT_THROW(GaussianLogDensity<double>(VectorXd::Zero(1), -MatrixXd::Ones(1, 1)),
               InvalidArgument);
}

TEST(FitEm, SingleComponentIsSampleMoments) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> normal(0.0, 1.0);
  MatrixXd x(3, 200);
  for (int k = 0; k < x.size(); ++k) x.data()[k] = normal(rng) + (k % 3);
  EmOptions opt;
  const EmResult r = fit_em(x, 1, opt);
  const VectorXd mean = x.rowwise().mean();
  const MatrixXd centered = x.colwise() - mean;
  const MatrixXd cov = centered * centered.transpose() / 200.0 +
                       opt.reg * MatrixXd::Identity(3, 3);
  EXPECT_LE((r.gmm.components[0].mean - mean).norm(), 1e-10);
  EXPECT_LE((r.gmm.components[0].cov - cov).norm(), 1e-10);
  EXPECT_DOUBLE_EQ(r.gmm.weights(0), 1.0);
}

TEST(FitEm, RecoversTwoSeparatedComponents) {
  std::mt19937_64 rng(9);
  const Gmmd truth = OneD({0.5, 0.5}, {-3.0, 3.0}, {1.0, 1.0});
  const MatrixXd x = SampleMixture(rng, truth, 2000);
  const EmResult r = fit_em(x, 2, EmOptions{});
  int lo = r.gmm.components[0].mean(0) < r.gmm.components[1].mean(0) ? 0 : 1;
  EXPECT_NEAR(r.gmm.components[lo].mean(0), -3.0, 0.15);
  EXPECT_NEAR(r.gmm.components[1 - lo].mean(0), 3.0, 0.15);
  EXPECT_NEAR(r.gmm.components[lo].cov(0, 0), 1.0, 0.15);
  EXPECT_NEAR(r.gmm.components[1 - lo].cov(0, 0), 1.0, 0.15);
  EXPECT_NEAR(r.gmm.weights(lo), 0.5, 0.05);
  EXPECT_FALSE(r.degenerate);
}

TEST(FitEmProperty, ObjectiveHistoryIsMonotone) {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const int d = 1 + trial % 3, G = 1 + trial % 5;
    Gmmd truth;
    truth.weights = VectorXd::Constant(G, 1.0 / G);
    for (int i = 0; i < G; ++i) {
      VectorXd mu(d);
      for (auto& v : mu) v = 3.0 * normal(rng);
      truth.components.push_back({mu, (0.3 + 0.2 * i) * MatrixXd::Identity(d, d)});
    }
    const MatrixXd x = SampleMixture(rng, truth, 150 + 20 * trial);
    EmOptions opt;
    opt.seed = trial;
    opt.tol = 0.0;
    opt.max_iter = 60;
    const EmResult r = fit_em(x, G, opt);
    ASSERT_FALSE(r.loglik_history.empty());
    for (std::size_t k = 1; k < r.loglik_history.size(); ++k) {
      const double prev = r.loglik_history[k - 1];
      EXPECT_GE(r.loglik_history[k], prev - 1e-9 * std::abs(prev))
          << "trial " << trial << " iteration " << k;
    }
    EXPECT_NEAR(r.gmm.weights.sum(), 1.0, 1e-12);
    for (const auto& c : r.gmm.components) {
      EXPECT_GT(Eigen::SelfAdjointEigenSolver<MatrixXd>(c.cov).eigenvalues().minCoeff(), 0.0);
    }
  }
}

TEST(FitEm, DeterministicForSeed) {
  std::mt19937_64 rng(4);
  const MatrixXd x = SampleMixture(rng, OneD({0.3, 0.7}, {0, 4}, {1, 0.5}), 300);
  EmOptions opt;
  opt.seed = 17;
  const EmResult a = fit_em(x, 3, opt), b = fit_em(x, 3, opt);
  EXPECT_EQ(a.gmm.weights, b.gmm.weights);
  for (int i = 0; i < 3; ++i) {
    EXPECT_EQ(a.gmm.components[i].mean, b.gmm.components[i].mean);
    EXPECT_EQ(a.gmm.components[i].cov, b.gmm.components[i].cov);
  }
  EXPECT_EQ(a.loglik_history, b.loglik_history);
}

TEST(FitEm, InsufficientData) {
  EXPECT_THROW(fit_em(MatrixXd::Random(2, 5), 3, EmOptions{}), InsufficientData);
}

TEST(FitEm, IdenticalPointsAreFlaggedDegenerate) {
  const MatrixXd x = MatrixXd::Constant(2, 40, 1.5);
  const EmResult r = fit_em(x, 2, EmOptions{});
  EXPECT_TRUE(r.degenerate);
  ASSERT_EQ(r.gmm.size(), 2);
  EXPECT_LE((r.gmm.components[0].mean - VectorXd::Constant(2, 1.5)).norm(), 1e-12);
  EXPECT_NO_THROW(r.gmm.validate());
}

TEST(Gmr, SingleComponentIsGaussianConditioning) {
  MatrixXd L(3, 3);
  L << 1.0, 0, 0, 0.4, 0.8, 0, -0.3, 0.5, 0.7;
  Gmmd g;
  g.weights = VectorXd::Ones(1);
  VectorXd mu(3);
  mu << 0.5, -1.0, 2.0;
  g.components.push_back({mu, L * L.transpose()});
  const MatrixXd S = L * L.transpose();
  VectorXd x(2);
  x << 0.3, 0.1;
  // inputs {0, 2}, output {1}
  MatrixXd S_ii(2, 2), S_oi(1, 2);
  S_ii << S(0, 0), S(0, 2), S(2, 0), S(2, 2);
  S_oi << S(1, 0), S(1, 2);
  VectorXd mu_i(2);
  mu_i << mu(0), mu(2);
  const double mean = mu(1) + (S_oi * S_ii.inverse() * (x - mu_i))(0);
  const double var = S(1, 1) - (S_oi * S_ii.inverse() * S_oi.transpose())(0, 0);
  const GmrQuery<double> q = gmr_condition(g, {0, 2}, {1}, x);
  EXPECT_NEAR(q.conditionals[0].mean(0), mean, 1e-10);
  EXPECT_NEAR(q.conditionals[0].cov(0, 0), var, 1e-10);
  EXPECT_DOUBLE_EQ(q.weights(0), 1.0);
  EXPECT_FALSE(q.far_field);
}

TEST(Gmr, ResponsibilitiesFollowInputDensity) {
  Gmmd g;
  g.weights = VectorXd::Constant(2, 0.5);
  g.components.push_back({(VectorXd(2) << -20, 1).finished(), MatrixXd::Identity(2, 2)});
  g.components.push_back({(VectorXd(2) << 20, -1).finished(), MatrixXd::Identity(2, 2)});
  const GmrRegressor<double> reg(g, {0}, {1});
  auto q = reg.condition(VectorXd::Constant(1, 20.0));
  EXPECT_NEAR(q.weights(1), 1.0, 1e-12);
  q = reg.condition(VectorXd::Constant(1, -20.0));
  EXPECT_NEAR(q.weights(0), 1.0, 1e-12);
  q = reg.condition(VectorXd::Constant(1, 0.0));
  EXPECT_NEAR(q.weights(0), 0.5, 1e-12);
  const ConditionalGaussiand merged = moment_merge(q.weights, q.conditionals);
  EXPECT_NEAR(merged.mean(0), 0.0, 1e-12);
  EXPECT_NEAR(merged.cov(0, 0), 2.0, 1e-12);  // 1 + spread of means
}

TEST(Gmr, FarFieldFallsBackToUniformWeights) {
  Gmmd g;
  g.weights = (VectorXd(2) << 0.9, 0.1).finished();
  g.components.push_back({VectorXd::Zero(2), 0.01 * MatrixXd::Identity(2, 2)});
  g.components.push_back({VectorXd::Ones(2), 0.01 * MatrixXd::Identity(2, 2)});
  const GmrQuery<double> q = gmr_condition(g, {0}, {1}, VectorXd(VectorXd::Constant(1, 1e4)));
  EXPECT_TRUE(q.far_field);
  EXPECT_NEAR(q.weights(0), 0.5, 1e-15);
  EXPECT_TRUE(q.weights.allFinite());
}

TEST(Gmr, RejectsOverlappingIndexSets) {
  const Gmmd g = OneD({1.0}, {0.0}, {1.0});
  EXPECT_ANY_THROW(GmrRegressor<double>(g, {0}, {0}));
}

TEST(MomentMerge, ClosedForms) {
  std::vector<ConditionalGaussiand> parts = {
      {VectorXd::Constant(1, -1.0), MatrixXd::Constant(1, 1, 0.5)},
      {VectorXd::Constant(1, 3.0), MatrixXd::Constant(1, 1, 2.0)}};
  const VectorXd w = (VectorXd(2) << 0.25, 0.75).finished();
  const ConditionalGaussiand m = moment_merge(w, parts);
  EXPECT_NEAR(m.mean(0), 2.0, 1e-14);
  // E[var] + Var[mean] = (0.125 + 1.5) + (0.25*9 + 0.75*1)
  EXPECT_NEAR(m.cov(0, 0), 1.625 + 3.0, 1e-13);
  parts.pop_back();
  EXPECT_THROW(moment_merge(w, parts), DimensionMismatch);
}

TEST(KMeans, SeparatesClusters) {
  MatrixXd x(2, 6);
  x << 0, 0.1, -0.1, 10, 10.1, 9.9,  //
      0, 0.1, -0.1, 5, 5.1, 4.9;
  const KMeansResult r = kmeans(x, 2, 1);
  EXPECT_EQ(r.labels[0], r.labels[1]);
  EXPECT_EQ(r.labels[0], r.labels[2]);
  EXPECT_EQ(r.labels[3], r.labels[5]);
  EXPECT_NE(r.labels[0], r.labels[3]);
  EXPECT_NEAR(r.within_ssq, 4 * 0.02, 1e-12);
  const KMeansResult again = kmeans(x, 2, 1);
  EXPECT_EQ(r.labels, again.labels);
}

TEST(KMeans, NoEmptyClusters) {
  MatrixXd x(1, 8);
  x << 0, 0, 0, 0, 0, 1, 2, 3;
  const KMeansResult r = kmeans(x, 4, 3);
  std::vector<int> counts(4, 0);
  for (int l : r.labels) ++counts[l];
  for (int c : counts) EXPECT_GT(c, 0);
  EXPECT_NEAR(r.within_ssq, 0.0, 1e-12);
}

}  // namespace
}  // namespace hbm
