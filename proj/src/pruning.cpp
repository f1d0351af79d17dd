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

#include "shvprobe/pruning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <span>

#include "shvprobe/errors.hpp"
#include "shvprobe/rng.hpp"

namespace shvprobe {

GateMask TopNMask(const ShvVector& shv, std::size_t n, Ranking ranking) {
  const std::size_t d = shv.estimates.size();
  if (n > d) {
    throw ConfigurationError("cannot prune " + std::to_string(n) + " of " + std::to_string(d) +
                             " heads");
  }
  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), 0);
  auto score = [&](std::size_t h) {
    const double m = shv.estimates[h].mean;
    return ranking == Ranking::kAbsolute ? std::abs(m) : m;
  };
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return score(a) > score(b); });
  std::vector<std::uint8_t> bits(d, 1);
  for (std::size_t i = 0; i < n; ++i) bits[order[i]] = 0;
  return GateMask::FromBits(std::move(bits));
}

Eigen::Index PruneMatrix::index_of(const std::string& paradigm_id) const {
  auto it = std::find(paradigm_ids.begin(), paradigm_ids.end(), paradigm_id);
  if (it == paradigm_ids.end()) return -1;
  return it - paradigm_ids.begin();
}

PruneMatrixResult ComputePruneMatrix(Evaluator& evaluator, const ShvMatrix& shv, std::size_t n,
                                     Split split, Ranking ranking) {
  const auto p = static_cast<Eigen::Index>(shv.rows.size());
  const double nan = std::numeric_limits<double>::quiet_NaN();
  PruneMatrixResult result;
  PruneMatrix& m = result.matrix;
  m.paradigm_ids = shv.paradigm_ids();
  m.baseline = Eigen::VectorXd::Constant(p, nan);
  m.delta = Eigen::MatrixXd::Constant(p, p, nan);

  for (const auto& id : m.paradigm_ids) {
    if (!evaluator.has_paradigm(id)) throw LookupError("evaluator does not serve '" + id + "'");
  }
  std::vector<GateMask> masks;
  masks.reserve(shv.rows.size());
  for (const auto& row : shv.rows) {
    GateMask mask = TopNMask(row, n, ranking);
    mask.check_topology(evaluator.topology());
    masks.push_back(std::move(mask));
  }

  const GateMask all_on = GateMask::AllOn(evaluator.topology());
  for (Eigen::Index e = 0; e < p; ++e) {
    const auto& eid = m.paradigm_ids[static_cast<std::size_t>(e)];
    try {
      m.baseline[e] = evaluator.evaluate(all_on, eid, split).accuracy;
    } catch (const EvaluationError& err) {
      result.failures.push_back({"", eid, err.what()});
    }
  }
  for (Eigen::Index r = 0; r < p; ++r) {
    for (Eigen::Index e = 0; e < p; ++e) {
      if (std::isnan(m.baseline[e])) continue;
      const auto& eid = m.paradigm_ids[static_cast<std::size_t>(e)];
      try {
        m.delta(r, e) =
            evaluator.evaluate(masks[static_cast<std::size_t>(r)], eid, split).accuracy -
            m.baseline[e];
      } catch (const EvaluationError& err) {
        result.failures.push_back({m.paradigm_ids[static_cast<std::size_t>(r)], eid, err.what()});
      }
    }
  }
  return result;
}

ClusterImpact ImpactForMembers(const PruneMatrix& matrix, const std::vector<std::string>& members,
                               bool include_self) {
  const auto p = static_cast<Eigen::Index>(matrix.paradigm_ids.size());
  std::vector<bool> inside(static_cast<std::size_t>(p), false);
  for (const auto& id : members) {
    const Eigen::Index i = matrix.index_of(id);
    if (i < 0) throw InputError("paradigm '" + id + "' is not in the prune matrix");
    inside[static_cast<std::size_t>(i)] = true;
  }
  ClusterImpact impact;
  impact.members = members;
  for (Eigen::Index r = 0; r < p; ++r) {
    if (!inside[static_cast<std::size_t>(r)]) continue;
    for (Eigen::Index e = 0; e < p; ++e) {
      const double v = matrix.delta(r, e);
      if (std::isnan(v)) continue;
      if (inside[static_cast<std::size_t>(e)]) {
        if (r != e || include_self) impact.in_deltas.push_back(v);
      } else {
        impact.out_deltas.push_back(v);
      }
    }
  }
  return impact;
}

std::vector<ClusterImpact> ClusterImpacts(const PruneMatrix& matrix, const Partition& clusters,
                                          bool include_self) {
  for (const auto& id : matrix.paradigm_ids) {
    if (!clusters.contains(id)) throw InputError("paradigm '" + id + "' has no cluster");
  }
  std::map<std::string, std::vector<std::string>> groups;
  for (const auto& [item, label] : clusters) {
    if (matrix.index_of(item) < 0) {
      throw InputError("clustered paradigm '" + item + "' is not in the prune matrix");
    }
    groups[label].push_back(item);
  }
  std::vector<ClusterImpact> out;
  for (auto& [label, members] : groups) {
    // Keep matrix order inside each cluster.
    std::sort(members.begin(), members.end(), [&](const auto& a, const auto& b) {
      return matrix.index_of(a) < matrix.index_of(b);
    });
    ClusterImpact impact = ImpactForMembers(matrix, members, include_self);
    impact.label = label;
    out.push_back(std::move(impact));
  }
  return out;
}

ImpactAnalysis AnalyzeImpact(const PruneMatrix& matrix, const Partition& clusters, double alpha,
                             bool include_self) {
  ImpactAnalysis analysis;
  analysis.alpha = alpha;
  for (auto& impact : ClusterImpacts(matrix, clusters, include_self)) {
    ClusterTest t;
    t.impact = std::move(impact);
    t.tested = t.impact.in_deltas.size() >= 2 && t.impact.out_deltas.size() >= 2;
    if (t.tested) {
      t.test = WelchT(t.impact.in_deltas, t.impact.out_deltas);
      ++analysis.family_size;
    }
    analysis.clusters.push_back(std::move(t));
  }
  for (auto& c : analysis.clusters) {
    if (!c.tested) continue;
    c.test.adjusted_p = Bonferroni(c.test.p_value, analysis.family_size);
    c.significant = c.test.adjusted_p <= alpha;
  }
  return analysis;
}

RandomClusterOutcome RandomClusterExperiment(const PruneMatrix& matrix,
                                             const std::vector<std::size_t>& cluster_sizes,
                                             std::size_t runs, double alpha, std::uint64_t seed,
                                             bool include_self) {
  RandomClusterOutcome outcome;
  outcome.runs = runs;
  if (runs == 0) return outcome;
  const std::size_t p = matrix.paradigm_ids.size();
  if (cluster_sizes.empty()) throw ConfigurationError("random clusters need a size profile");
  for (std::size_t s : cluster_sizes) {
    if (s == 0 || s > p) throw ConfigurationError("random cluster size outside [1, paradigms]");
  }
  Rng rng(seed);
  std::vector<std::string> ids = matrix.paradigm_ids;
  for (std::size_t i = 0; i < runs; ++i) {
    const std::size_t size = cluster_sizes[i % cluster_sizes.size()];
    rng.shuffle(std::span(ids));
    const std::vector<std::string> members(ids.begin(),
                                           ids.begin() + static_cast<std::ptrdiff_t>(size));
    const ClusterImpact impact = ImpactForMembers(matrix, members, include_self);
    double adjusted = 1.0;
    if (impact.in_deltas.size() >= 2 && impact.out_deltas.size() >= 2) {
      adjusted =
          Bonferroni(WelchT(impact.in_deltas, impact.out_deltas).p_value, cluster_sizes.size());
    }
    outcome.adjusted_p.push_back(adjusted);
    if (adjusted <= alpha) ++outcome.significant;
  }
  return outcome;
}

namespace {

nlohmann::ordered_json Finite(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return nullptr;
  return v > 0 ? "inf" : "-inf";
}

}  // namespace

nlohmann::ordered_json ImpactToJson(const ImpactAnalysis& analysis) {
  nlohmann::ordered_json j;
  j["alpha"] = analysis.alpha;
  j["family_size"] = analysis.family_size;
  nlohmann::ordered_json list = nlohmann::ordered_json::array();
  for (const auto& c : analysis.clusters) {
    nlohmann::ordered_json e;
    e["cluster"] = c.impact.label;
    e["members"] = c.impact.members;
    e["in_deltas"] = c.impact.in_deltas;
    e["out_deltas"] = c.impact.out_deltas;
    e["in_mean"] = SampleMean(c.impact.in_deltas);
    e["out_mean"] = SampleMean(c.impact.out_deltas);
    e["tested"] = c.tested;
    if (c.tested) {
      e["t_statistic"] = Finite(c.test.t_statistic);
      e["df"] = c.test.df;
      e["p_value"] = c.test.p_value;
      e["adjusted_p"] = c.test.adjusted_p;
      e["degenerate"] = c.test.degenerate;
      e["significant"] = c.significant;
    } else {
      e["reason"] = c.impact.out_deltas.empty() ? "no out-of-cluster paradigms"
                                                : "fewer than two deltas on one side";
    }
    list.push_back(std::move(e));
  }
  j["clusters"] = std::move(list);
  return j;
}

}  // namespace shvprobe
