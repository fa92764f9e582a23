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

#include "hbm/tp_gmm.hpp"

#include <numeric>
#include <string>

#include "em_engine.hpp"

namespace hbm {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

TaskFrame TaskFrame::identity(Index dim) {
  return {MatrixXd::Identity(dim, dim), VectorXd::Zero(dim)};
}

void TaskFrame::validate(Index state_dim) const {
  if (T.rows() != T.cols() || b.size() != T.rows()) {
    internal::ThrowDimension("TaskFrame: T must be square and match b");
  }
  if (state_dim < 0 || state_dim > T.rows()) {
    internal::ThrowDimension("TaskFrame: state block larger than frame");
  }
  const Index rest = T.rows() - state_dim;
  if (state_dim > 0 && rest > 0 &&
      (!T.topRightCorner(state_dim, rest).isZero(0.0) ||
       !T.bottomLeftCorner(rest, state_dim).isZero(0.0))) {
    throw InvalidArgument("TaskFrame: state/input blocks must not mix");
  }
  const VectorXd sv = Eigen::JacobiSVD<MatrixXd>(T).singularValues();
  if (!(sv(sv.size() - 1) > 0.0) ||
      sv(0) / sv(sv.size() - 1) > kMaxFrameCondition) {
    throw InvalidArgument("TaskFrame: T is singular or badly conditioned");
  }
}

MatrixXd transform_to_frame(const MatrixXd& xi, const TaskFrame& frame) {
  frame.validate(0);
  if (xi.rows() != frame.T.rows()) {
    internal::ThrowDimension("transform_to_frame: dimension mismatch");
  }
  return frame.T.partialPivLu().solve(xi.colwise() - frame.b);
}

TpGmmFit fit_tp_gmm(const std::vector<MatrixXd>& xi,
                    const std::vector<std::vector<TaskFrame>>& frames, int G,
                    const TpGmmOptions& options) {
  if (xi.empty() || xi.size() != frames.size()) {
    throw InvalidArgument("fit_tp_gmm: one frame list per demonstration");
  }
  const std::size_t P = frames.front().size();
  if (P == 0) throw InvalidArgument("fit_tp_gmm: at least one frame");
  const Index D = xi.front().rows();
  Index N = 0;
  for (std::size_t j = 0; j < xi.size(); ++j) {
    if (frames[j].size() != P) {
      throw InvalidArgument("fit_tp_gmm: demonstrations disagree on P");
    }
    if (xi[j].rows() != D) {
      internal::ThrowDimension("fit_tp_gmm: joint dimension mismatch");
    }
    N += xi[j].cols();
  }
  std::vector<MatrixXd> views(P, MatrixXd(D, N));
  Index col = 0;
  for (std::size_t j = 0; j < xi.size(); ++j) {
    for (std::size_t p = 0; p < P; ++p) {
      views[p].middleCols(col, xi[j].cols()) =
          transform_to_frame(xi[j], frames[j][p]);
    }
    col += xi[j].cols();
  }

  TpGmmFit out;
  if (!options.independent_frames) {
    internal::MultiViewFit fit =
        internal::FitMultiView(views, G, options.em, std::nullopt);
    out.model.weights = std::move(fit.weights);
    out.model.per_frame = std::move(fit.views);
    out.loglik_history = std::move(fit.history);
    out.degenerate = fit.degenerate;
    return out;
  }
  for (std::size_t p = 0; p < P; ++p) {
    EmResult fit = fit_em(views[p], G, options.em);
    if (p == 0) {
      out.model.weights = fit.gmm.weights;
      out.loglik_history = fit.loglik_history;
    }
    out.degenerate = out.degenerate || fit.degenerate;
    out.model.per_frame.push_back(std::move(fit.gmm.components));
  }
  return out;
}

Gmmd merge_frames(const TpGmm& model, const std::vector<TaskFrame>& frames) {
  if (Index(frames.size()) != model.frames()) {
    throw InvalidArgument("merge_frames: frame count does not match model");
  }
  const Index D = model.dim();
  for (const auto& f : frames) {
    if (f.T.rows() != D) internal::ThrowDimension("merge_frames: frame dim");
  }
  Gmmd out;
  out.weights = model.weights;
  for (Index i = 0; i < model.size(); ++i) {
    MatrixXd precision = MatrixXd::Zero(D, D);
    VectorXd info = VectorXd::Zero(D);
    for (std::size_t p = 0; p < frames.size(); ++p) {
      const auto& c = model.per_frame[p][i];
      const MatrixXd& T = frames[p].T;
      MatrixXd cov = T * c.cov * T.transpose();
      cov = (cov + cov.transpose()) / 2.0;
      const Eigen::LLT<MatrixXd> llt(cov);
      if (llt.info() != Eigen::Success) {
        throw SolverFailure("merge_frames: transformed covariance not SPD");
      }
      const MatrixXd inv = llt.solve(MatrixXd::Identity(D, D));
      precision += inv;
      info += inv * (T * c.mean + frames[p].b);
    }
    precision = (precision + precision.transpose()) / 2.0;
    const Eigen::LLT<MatrixXd> llt(precision);
    MatrixXd cov = llt.solve(MatrixXd::Identity(D, D));
    cov = (cov + cov.transpose()) / 2.0;
    out.components.push_back({llt.solve(info), std::move(cov)});
  }
  return out;
}

std::vector<MatrixXd> extract_variability(const DemonstrationSetd& demos,
                                          const MatrixXd& K_hat) {
  std::vector<MatrixXd> out;
  out.reserve(demos.size());
  for (const auto& t : demos.trajectories) {
    t.validate();
    if (K_hat.cols() != t.state_dim() ||
        (t.steps() > 0 && K_hat.rows() != t.input_dim())) {
      internal::ThrowDimension("extract_variability: gain/trajectory shapes");
    }
    out.push_back(t.inputs - K_hat * t.states.leftCols(t.steps()));
  }
  return out;
}

std::vector<MatrixXd> joint_vectors(const DemonstrationSetd& demos,
                                    const std::vector<MatrixXd>& outputs) {
  if (outputs.size() != demos.size()) {
    internal::ThrowDimension("joint_vectors: one output block per demo");
  }
  std::vector<MatrixXd> out;
  out.reserve(demos.size());
  for (std::size_t j = 0; j < demos.size(); ++j) {
    const auto& t = demos.trajectories[j];
    if (outputs[j].cols() != t.steps()) {
      internal::ThrowDimension("joint_vectors: output length mismatch");
    }
    MatrixXd xi(t.state_dim() + outputs[j].rows(), t.steps());
    xi.topRows(t.state_dim()) = t.states.leftCols(t.steps());
    xi.bottomRows(outputs[j].rows()) = outputs[j];
    out.push_back(std::move(xi));
  }
  return out;
}

VariabilityModel::VariabilityModel(TpGmm tp, std::vector<TaskFrame> frames,
                                   Index state_dim)
    : tp_(std::move(tp)), frames_(std::move(frames)), state_dim_(state_dim) {
  for (const auto& f : frames_) f.validate(state_dim_);
  merged_ = merge_frames(tp_, frames_);
  const Index D = merged_.dim();
  if (state_dim_ <= 0 || state_dim_ >= D) {
    internal::ThrowDimension("VariabilityModel: state dim out of range");
  }
  std::vector<int> in(state_dim_), outd(D - state_dim_);
  std::iota(in.begin(), in.end(), 0);
  std::iota(outd.begin(), outd.end(), int(state_dim_));
  regressor_ = GmrRegressor<double>(merged_, std::move(in), std::move(outd));
}

VariabilityQuery VariabilityModel::query(const VectorXd& x) const {
  const GmrQuery<double> q = regressor_.condition(x);
  return {moment_merge(q.weights, q.conditionals), q.far_field};
}

}  // namespace hbm
