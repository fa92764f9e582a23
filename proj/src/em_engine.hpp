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
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "hbm/gmm.hpp"

namespace hbm::internal {

/// Joint EM over P views of the same points. Component i has one weight
/// and a Gaussian per view; a point's component likelihood is the product
/// of its per-view densities. P = 1 is ordinary mixture EM.
struct MultiViewFit {
  Eigen::VectorXd weights;
  // views[p][i]
  std::vector<std::vector<GaussianComponentd>> views;
  std::vector<double> history;
  bool degenerate = false;
  int iterations = 0;
};

/// `views[p]` is d_p x N. `init_centers`, when present, is (sum d_p) x G
/// over the stacked views.
MultiViewFit FitMultiView(const std::vector<Eigen::MatrixXd>& views, int G,
                          const EmOptions& options,
                          const std::optional<Eigen::MatrixXd>& init_centers);

}  // namespace hbm::internal
