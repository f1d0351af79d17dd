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

#ifndef SHVPROBE_TOPOLOGY_HPP_
#define SHVPROBE_TOPOLOGY_HPP_

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace shvprobe {

struct HeadId {
  std::size_t layer = 0;
  std::size_t head = 0;

  friend bool operator==(const HeadId&, const HeadId&) = default;
};

// Layer-major grid of gateable attention heads.
class ModelTopology {
 public:
  ModelTopology(std::size_t layers, std::size_t heads_per_layer);

  std::size_t layers() const { return layers_; }
  std::size_t heads_per_layer() const { return heads_per_layer_; }
  std::size_t total() const { return layers_ * heads_per_layer_; }

  // layer * heads_per_layer + head. Throws TopologyError when out of range.
  std::size_t head_index(HeadId id) const;
  HeadId head_at(std::size_t flat) const;

  // Canonical column label "L{layer}.H{head}".
  std::string label(std::size_t flat) const;

  friend bool operator==(const ModelTopology&, const ModelTopology&) = default;

 private:
  std::size_t layers_;
  std::size_t heads_per_layer_;
};

// Immutable on/off state for every head, in flat order.
class GateMask {
 public:
  static GateMask AllOn(const ModelTopology& topology);
  static GateMask AllOff(const ModelTopology& topology);
  // Throws TopologyError if any entry is not 0 or 1.
  static GateMask FromBits(std::vector<std::uint8_t> bits);

  std::size_t size() const { return bits_.size(); }
  bool active(std::size_t index) const { return bits_.at(index) != 0; }
  std::size_t popcount() const;
  double active_fraction() const;
  const std::vector<std::uint8_t>& bits() const { return bits_; }

  // Copy with bit `index` cleared (set). Idempotent.
  GateMask without(std::size_t index) const;
  GateMask with(std::size_t index) const;

  // SHA-256 over the '0'/'1' character string of the bits.
  std::string digest() const;
  // "1101" style string, used in logs and tests.
  std::string to_string() const;

  void check_topology(const ModelTopology& topology) const;

  friend bool operator==(const GateMask&, const GateMask&) = default;

 private:
  explicit GateMask(std::vector<std::uint8_t> bits) : bits_(std::move(bits)) {}

  std::vector<std::uint8_t> bits_;
};

struct ShvEstimate {
  double mean = 0.0;
  double variance = 0.0;
  std::size_t samples = 0;
  bool converged = false;
};

struct ShvVector {
  std::string paradigm_id;
  std::string category;
  std::vector<ShvEstimate> estimates;

  Eigen::VectorXd means() const;
};

// Rows are paradigms in input order, columns are flat head indices.
struct ShvMatrix {
  ModelTopology topology{1, 1};
  std::vector<ShvVector> rows;

  Eigen::MatrixXd means() const;
  std::vector<std::string> paradigm_ids() const;
};

}  // namespace shvprobe

#endif  // SHVPROBE_TOPOLOGY_HPP_
