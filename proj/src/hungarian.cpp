// Copyright 2026 The shvprobe Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "shvprobe/hungarian.hpp"

#include <algorithm>
#include <limits>

namespace shvprobe {

std::vector<Eigen::Index> MaxWeightAssignment(const Eigen::MatrixXd& profit) {
  const Eigen::Index rows = profit.rows();
  const Eigen::Index cols = profit.cols();
  const Eigen::Index n = std::max(rows, cols);
  if (n == 0) return {};

  Eigen::MatrixXd cost = Eigen::MatrixXd::Zero(n, n);
  const double top = profit.size() > 0 ? profit.maxCoeff() : 0.0;
  cost.topLeftCorner(rows, cols) = (top - profit.array()).matrix();
  if (rows != cols) {
    // Padding cells cost as much as a zero-profit real cell.
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        if (i >= rows || j >= cols) cost(i, j) = top;
      }
    }
  }

  // Potentials formulation with 1-based sentinel row/column 0.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<Eigen::Index> p(n + 1, 0), way(n + 1, 0);
  for (Eigen::Index i = 1; i <= n; ++i) {
    p[0] = i;
    Eigen::Index j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const Eigen::Index i0 = p[j0];
      double delta = inf;
      Eigen::Index j1 = 0;
      for (Eigen::Index j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (Eigen::Index j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const Eigen::Index j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<Eigen::Index> match(static_cast<std::size_t>(rows), -1);
  for (Eigen::Index j = 1; j <= n; ++j) {
    const Eigen::Index i = p[j] - 1;
    if (i < rows && j - 1 < cols) match[static_cast<std::size_t>(i)] = j - 1;
  }
  return match;
}

}  // namespace shvprobe
