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

#ifndef SHVPROBE_CLUSTERING_HPP_
#define SHVPROBE_CLUSTERING_HPP_

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "shvprobe/errors.hpp"
#include "shvprobe/rng.hpp"

namespace shvprobe {

template <typename Scalar>
using DenseMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

// Column-wise z-scores with the population standard deviation. Columns with
// zero spread become zeros.
template <typename Derived>
DenseMatrix<typename Derived::Scalar> Standardize(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  if (x.rows() < 2) throw InsufficientDataError("standardizing needs at least two rows");
  DenseMatrix<Scalar> out(x.rows(), x.cols());
  const Scalar n = static_cast<Scalar>(x.rows());
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    const Scalar mean = x.col(c).sum() / n;
    const auto centered = (x.col(c).array() - mean).eval();
    const Scalar sd = std::sqrt(centered.square().sum() / n);
    // Spread that is pure rounding noise relative to the column mean counts as zero.
    const Scalar floor =
        Scalar(64) * std::numeric_limits<Scalar>::epsilon() * std::max(Scalar(1), std::abs(mean));
    if (sd <= floor) {
      out.col(c).setZero();
    } else {
      out.col(c) = (centered / sd).matrix();
    }
  }
  return out;
}

template <typename Scalar>
struct ClusterModel {
  Eigen::Index k = 0;
  DenseMatrix<Scalar> centroids;          // k x d
  std::vector<Eigen::Index> assignments;  // one per row, in row order
  Scalar inertia = 0;
  std::size_t iterations = 0;
  std::size_t restart = 0;  // winning restart
};

namespace detail {

template <typename Derived, typename Scalar = typename Derived::Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> NearestSquaredDistance(const Eigen::MatrixBase<Derived>& x,
                                                                const DenseMatrix<Scalar>& centers,
                                                                Eigen::Index used) {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> best(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    Scalar b = std::numeric_limits<Scalar>::infinity();
    for (Eigen::Index c = 0; c < used; ++c) {
      b = std::min(b, (x.row(i) - centers.row(c)).squaredNorm());
    }
    best[i] = b;
  }
  return best;
}

template <typename Scalar>
Eigen::Index SampleProportional(const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& weights, Rng& rng) {
  const Scalar total = weights.sum();
  if (!(total > 0)) return static_cast<Eigen::Index>(rng.uniform_index(weights.size()));
  const Scalar target = static_cast<Scalar>(rng.uniform01()) * total;
  Scalar acc = 0;
  for (Eigen::Index i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    if (target < acc) return i;
  }
  return weights.size() - 1;
}

// Greedy D^2 seeding: each new center is the best of 2 + ln(k) candidates
// drawn proportionally to squared distance.
template <typename Derived, typename Scalar = typename Derived::Scalar>
DenseMatrix<Scalar> GreedySeeding(const Eigen::MatrixBase<Derived>& x, Eigen::Index k, Rng& rng) {
  DenseMatrix<Scalar> centers(k, x.cols());
  centers.row(0) = x.row(static_cast<Eigen::Index>(rng.uniform_index(x.rows())));
  auto closest = NearestSquaredDistance(x, centers, 1);
  const int trials = 2 + static_cast<int>(std::log(static_cast<double>(k)));
  for (Eigen::Index c = 1; c < k; ++c) {
    Eigen::Index best_candidate = -1;
    Scalar best_potential = std::numeric_limits<Scalar>::infinity();
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> best_closest;
    for (int t = 0; t < trials; ++t) {
      const Eigen::Index cand = SampleProportional(closest, rng);
      Eigen::Matrix<Scalar, Eigen::Dynamic, 1> updated(x.rows());
      for (Eigen::Index i = 0; i < x.rows(); ++i) {
        updated[i] = std::min(closest[i], (x.row(i) - x.row(cand)).squaredNorm());
      }
      const Scalar potential = updated.sum();
      if (potential < best_potential) {
        best_potential = potential;
        best_candidate = cand;
        best_closest = std::move(updated);
      }
    }
    centers.row(c) = x.row(best_candidate);
    closest = std::move(best_closest);
  }
  return centers;
}

template <typename Derived, typename Scalar = typename Derived::Scalar>
ClusterModel<Scalar> Lloyd(const Eigen::MatrixBase<Derived>& x, DenseMatrix<Scalar> centers,
                           std::size_t max_iterations) {
  const Eigen::Index n = x.rows();
  const Eigen::Index k = centers.rows();
  std::vector<Eigen::Index> assign(static_cast<std::size_t>(n), -1);
  std::size_t iter = 0;
  for (; iter < max_iterations; ++iter) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::Index best = 0;
      Scalar best_d = std::numeric_limits<Scalar>::infinity();
      for (Eigen::Index c = 0; c < k; ++c) {
        const Scalar dist = (x.row(i) - centers.row(c)).squaredNorm();
        if (dist < best_d) {
          best_d = dist;
          best = c;
        }
      }
      if (assign[static_cast<std::size_t>(i)] != best) {
        assign[static_cast<std::size_t>(i)] = best;
        changed = true;
      }
    }
    if (!changed) break;

    std::vector<Eigen::Index> counts(static_cast<std::size_t>(k), 0);
    for (auto a : assign) ++counts[static_cast<std::size_t>(a)];
    for (Eigen::Index c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) continue;
      // Empty cluster: take the point farthest from its own centroid.
      Eigen::Index far = -1;
      Scalar far_d = -1;
      for (Eigen::Index i = 0; i < n; ++i) {
        const auto a = assign[static_cast<std::size_t>(i)];
        if (counts[static_cast<std::size_t>(a)] < 2) continue;
        const Scalar dist = (x.row(i) - centers.row(a)).squaredNorm();
        if (dist > far_d) {
          far_d = dist;
          far = i;
        }
      }
      if (far < 0) break;
      --counts[static_cast<std::size_t>(assign[static_cast<std::size_t>(far)])];
      assign[static_cast<std::size_t>(far)] = c;
      ++counts[static_cast<std::size_t>(c)];
    }
    centers.setZero();
    for (Eigen::Index i = 0; i < n; ++i)
      centers.row(assign[static_cast<std::size_t>(i)]) += x.row(i);
    for (Eigen::Index c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) {
        centers.row(c) /= static_cast<Scalar>(counts[static_cast<std::size_t>(c)]);
      }
    }
  }

  ClusterModel<Scalar> model;
  model.k = k;
  model.centroids = std::move(centers);
  model.assignments = std::move(assign);
  model.iterations = iter;
  model.inertia = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    model.inertia +=
        (x.row(i) - model.centroids.row(model.assignments[static_cast<std::size_t>(i)]))
            .squaredNorm();
  }
  return model;
}

}  // namespace detail

inline constexpr std::size_t kMaxLloydIterations = 300;

// Lloyd's algorithm from greedy D^2 seeding; the best inertia over
// `restarts` seeded runs wins, ties going to the earlier restart.
template <typename Derived>
ClusterModel<typename Derived::Scalar> KMeans(const Eigen::MatrixBase<Derived>& x, Eigen::Index k,
                                              std::uint64_t seed, std::size_t restarts = 10) {
  using Scalar = typename Derived::Scalar;
  if (k < 1 || k > x.rows()) {
    throw ConfigurationError("k = " + std::to_string(k) + " must be in [1, " +
                             std::to_string(x.rows()) + "]");
  }
  if (restarts == 0) throw ConfigurationError("k-means needs at least one restart");
  ClusterModel<Scalar> best;
  bool have = false;
  for (std::size_t r = 0; r < restarts; ++r) {
    Rng rng(DeriveSeed(seed, static_cast<std::uint64_t>(r)));
    auto model = detail::Lloyd(x, detail::GreedySeeding(x, k, rng), kMaxLloydIterations);
    model.restart = r;
    if (!have || model.inertia < best.inertia) {
      best = std::move(model);
      have = true;
    }
  }
  return best;
}

template <typename Derived>
std::vector<std::pair<Eigen::Index, typename Derived::Scalar>> InertiaCurve(
    const Eigen::MatrixBase<Derived>& x, Eigen::Index k_min, Eigen::Index k_max, std::uint64_t seed,
    std::size_t restarts = 10) {
  if (k_min < 1 || k_max > x.rows() || k_min > k_max) {
    throw ConfigurationError("k range must lie within [1, " + std::to_string(x.rows()) + "]");
  }
  std::vector<std::pair<Eigen::Index, typename Derived::Scalar>> curve;
  for (Eigen::Index k = k_min; k <= k_max; ++k) {
    curve.emplace_back(
        k, KMeans(x, k, DeriveSeed(seed, static_cast<std::uint64_t>(k)), restarts).inertia);
  }
  return curve;
}

// k with the largest second difference of the inertia curve; needs three
// points, otherwise the smallest k.
template <typename Scalar>
Eigen::Index ElbowK(const std::vector<std::pair<Eigen::Index, Scalar>>& curve) {
  if (curve.empty()) throw InsufficientDataError("empty inertia curve");
  Eigen::Index best = curve.front().first;
  Scalar best_second = -std::numeric_limits<Scalar>::infinity();
  for (std::size_t i = 1; i + 1 < curve.size(); ++i) {
    const Scalar second = curve[i - 1].second - 2 * curve[i].second + curve[i + 1].second;
    if (second > best_second) {
      best_second = second;
      best = curve[i].first;
    }
  }
  return best;
}

// item -> label. Labels are opaque strings (cluster ids or categories).
using Partition = std::map<std::string, std::string>;

Partition MakePartition(const std::vector<std::string>& items,
                        const std::vector<Eigen::Index>& labels);

struct Alignment {
  std::map<std::string, std::string> mapping;  // label in a -> label in b
  long total_overlap = 0;
};

// One-to-one label matching maximizing shared items (Kuhn-Munkres on the
// overlap counts).
Alignment AlignClusters(const Partition& a, const Partition& b);

struct PurityReport {
  // Each candidate cluster is credited with its most frequent reference label.
  double purity = 0.0;
  // Same formula with the roles swapped.
  double reverse_purity = 0.0;
  // Items whose candidate label maps onto their reference label under the
  // one-to-one alignment, divided by N.
  double aligned_purity = 0.0;
  std::map<std::string, std::string> aligned_mapping;
  std::map<std::string, std::string> majority;  // candidate label -> reference label
};

// Throws InputError when the two partitions cover different items.
PurityReport Purity(const Partition& candidate, const Partition& reference);

struct BaselineStats {
  double mean_purity = 0.0;
  double sd_purity = 0.0;
  double mean_aligned = 0.0;
  double sd_aligned = 0.0;
  std::vector<double> purities;
};

// Uniform random k-label partitions of the reference items (redrawn while
// any label is unused), scored against the reference.
BaselineStats RandomPartitionBaseline(const Partition& reference, std::size_t k, std::size_t runs,
                                      std::uint64_t seed);

}  // namespace shvprobe

#endif  // SHVPROBE_CLUSTERING_HPP_
