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

#ifndef SHVPROBE_HUNGARIAN_HPP_
#define SHVPROBE_HUNGARIAN_HPP_

#include <Eigen/Dense>
#include <vector>

namespace shvprobe {

// Kuhn-Munkres on a rectangular profit matrix (padded to square with
// zeros). Returns, for each row, the matched column or -1 when the row was
// matched to padding. Maximizes the total profit.
std::vector<Eigen::Index> MaxWeightAssignment(const Eigen::MatrixXd& profit);

}  // namespace shvprobe

#endif  // SHVPROBE_HUNGARIAN_HPP_
