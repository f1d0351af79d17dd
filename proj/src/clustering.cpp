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

#include "shvprobe/clustering.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "shvprobe/hungarian.hpp"

namespace shvprobe {

Partition MakePartition(const std::vector<std::string>& items,
                        const std::vector<Eigen::Index>& labels) {
  if (items.size() != labels.size()) {
    throw InputError("partition needs one label per item");
  }
  Partition p;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (!p.emplace(items[i], std::to_string(labels[i])).second) {
      throw InputError("duplicate item '" + items[i] + "' in partition");
    }
  }
  return p;
}

namespace {

struct Contingency {
  std::vector<std::string> row_labels;  // from a
  std::vector<std::string> col_labels;  // from b
  Eigen::MatrixXd counts;
};

Contingency Tabulate(const Partition& a, const Partition& b) {
  if (a.size() != b.size()) {
    throw InputError("partitions cover " + std::to_string(a.size()) + " and " +
                     std::to_string(b.size()) + " items");
  }
  std::set<std::string> rows, cols;
  for (const auto& [item, label] : a) {
    if (!b.contains(item)) throw InputError("item '" + item + "' missing from reference");
    rows.insert(label);
  }
  for (const auto& [item, label] : b) cols.insert(label);

  Contingency t;
  t.row_labels.assign(rows.begin(), rows.end());
  t.col_labels.assign(cols.begin(), cols.end());
  t.counts = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()),
                                   static_cast<Eigen::Index>(cols.size()));
  for (const auto& [item, label] : a) {
    const auto r =
        std::lower_bound(t.row_labels.begin(), t.row_labels.end(), label) - t.row_labels.begin();
    const auto& other = b.at(item);
    const auto c =
        std::lower_bound(t.col_labels.begin(), t.col_labels.end(), other) - t.col_labels.begin();
    t.counts(r, c) += 1.0;
  }
  return t;
}

Alignment AlignFromTable(const Contingency& t) {
  Alignment out;
  const auto match = MaxWeightAssignment(t.counts);
  double total = 0.0;
  for (std::size_t r = 0; r < match.size(); ++r) {
    if (match[r] < 0) continue;
    out.mapping[t.row_labels[r]] = t.col_labels[static_cast<std::size_t>(match[r])];
    total += t.counts(static_cast<Eigen::Index>(r), match[r]);
  }
  out.total_overlap = std::lround(total);
  return out;
}

}  // namespace

Alignment AlignClusters(const Partition& a, const Partition& b) {
  return AlignFromTable(Tabulate(a, b));
}

PurityReport Purity(const Partition& candidate, const Partition& reference) {
  if (candidate.empty()) throw InputError("purity of an empty partition is undefined");
  const Contingency t = Tabulate(candidate, reference);
  const double n = static_cast<double>(candidate.size());
  PurityReport r;
  r.purity = t.counts.rowwise().maxCoeff().sum() / n;
  r.reverse_purity = t.counts.colwise().maxCoeff().sum() / n;
  for (Eigen::Index i = 0; i < t.counts.rows(); ++i) {
    Eigen::Index j = 0;
    t.counts.row(i).maxCoeff(&j);
    r.majority[t.row_labels[static_cast<std::size_t>(i)]] =
        t.col_labels[static_cast<std::size_t>(j)];
  }
  const Alignment aligned = AlignFromTable(t);
  r.aligned_mapping = aligned.mapping;
  r.aligned_purity = static_cast<double>(aligned.total_overlap) / n;
  return r;
}

namespace {

std::pair<double, double> MeanAndSd(const std::vector<double>& v) {
  if (v.empty()) return {0.0, 0.0};
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  if (v.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(v.size() - 1))};
}

}  // namespace

BaselineStats RandomPartitionBaseline(const Partition& reference, std::size_t k, std::size_t runs,
                                      std::uint64_t seed) {
  if (k == 0 || k > reference.size()) {
    throw ConfigurationError("random baseline needs 1 <= k <= number of items");
  }
  std::vector<std::string> items;
  items.reserve(reference.size());
  for (const auto& [item, label] : reference) items.push_back(item);

  Rng rng(seed);
  BaselineStats stats;
  std::vector<double> aligned;
  std::vector<Eigen::Index> labels(items.size());
  for (std::size_t run = 0; run < runs; ++run) {
    std::vector<std::size_t> used;
    do {
      used.assign(k, 0);
      for (auto& l : labels) {
        l = static_cast<Eigen::Index>(rng.uniform_index(k));
        ++used[static_cast<std::size_t>(l)];
      }
    } while (std::find(used.begin(), used.end(), 0) != used.end());
    const PurityReport r = Purity(MakePartition(items, labels), reference);
    stats.purities.push_back(r.purity);
    aligned.push_back(r.aligned_purity);
  }
  std::tie(stats.mean_purity, stats.sd_purity) = MeanAndSd(stats.purities);
  std::tie(stats.mean_aligned, stats.sd_aligned) = MeanAndSd(aligned);
  return stats;
}

}  // namespace shvprobe
