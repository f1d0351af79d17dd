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

#ifndef SHVPROBE_PRUNING_HPP_
#define SHVPROBE_PRUNING_HPP_

#include <Eigen/Dense>
#include <cstdint>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "shvprobe/clustering.hpp"
#include "shvprobe/evaluator.hpp"
#include "shvprobe/stats.hpp"
#include "shvprobe/topology.hpp"

namespace shvprobe {

enum class Ranking { kSigned, kAbsolute };

// Gates off the n heads with the largest SHV mean (or |mean|); ties go to
// the lower flat index.
GateMask TopNMask(const ShvVector& shv, std::size_t n, Ranking ranking = Ranking::kSigned);

// delta(m, e) = V(top-n mask of m, e) - V(all-on, e).
struct PruneMatrix {
  std::vector<std::string> paradigm_ids;
  Eigen::VectorXd baseline;
  Eigen::MatrixXd delta;  // rows: mask source, cols: evaluated paradigm

  Eigen::Index index_of(const std::string& paradigm_id) const;
};

struct PruneFailure {
  std::string mask_source;
  std::string evaluated;
  std::string message;
};

struct PruneMatrixResult {
  PruneMatrix matrix;  // failed cells are NaN
  std::vector<PruneFailure> failures;
};

PruneMatrixResult ComputePruneMatrix(Evaluator& evaluator, const ShvMatrix& shv, std::size_t n,
                                     Split split = Split::kAttribution,
                                     Ranking ranking = Ranking::kSigned);

struct ClusterImpact {
  std::string label;
  std::vector<std::string> members;
  std::vector<double> in_deltas;   // mask and evaluated paradigm both in the cluster
  std::vector<double> out_deltas;  // mask in the cluster, evaluated paradigm outside
};

// Throws InputError unless `clusters` covers exactly the matrix paradigms.
std::vector<ClusterImpact> ClusterImpacts(const PruneMatrix& matrix, const Partition& clusters,
                                          bool include_self = true);

ClusterImpact ImpactForMembers(const PruneMatrix& matrix, const std::vector<std::string>& members,
                               bool include_self = true);

struct ClusterTest {
  ClusterImpact impact;
  bool tested = false;  // false when either side has fewer than two deltas
  TTestResult test;
  bool significant = false;
};

struct ImpactAnalysis {
  std::vector<ClusterTest> clusters;
  std::size_t family_size = 0;
  double alpha = 0.001;
};

// Welch t per cluster, Bonferroni over the clusters that could be tested.
ImpactAnalysis AnalyzeImpact(const PruneMatrix& matrix, const Partition& clusters, double alpha,
                             bool include_self = true);

struct RandomClusterOutcome {
  std::size_t runs = 0;
  std::size_t significant = 0;
  std::vector<double> adjusted_p;
};

// Draws `runs` random clusters whose sizes cycle through `cluster_sizes`,
// tests each like a real cluster with Bonferroni family size
// cluster_sizes.size(), and counts those significant at alpha.
RandomClusterOutcome RandomClusterExperiment(const PruneMatrix& matrix,
                                             const std::vector<std::size_t>& cluster_sizes,
                                             std::size_t runs, double alpha, std::uint64_t seed,
                                             bool include_self = true);

nlohmann::ordered_json ImpactToJson(const ImpactAnalysis& analysis);

}  // namespace shvprobe

#endif  // SHVPROBE_PRUNING_HPP_
