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

#include "shvprobe/topology.hpp"

#include <algorithm>
#include <numeric>

#include "shvprobe/digest.hpp"
#include "shvprobe/errors.hpp"

namespace shvprobe {

ModelTopology::ModelTopology(std::size_t layers, std::size_t heads_per_layer)
    : layers_(layers), heads_per_layer_(heads_per_layer) {
  if (layers == 0 || heads_per_layer == 0) {
    throw TopologyError("topology needs at least one layer and one head per layer");
  }
}

std::size_t ModelTopology::head_index(HeadId id) const {
  if (id.layer >= layers_ || id.head >= heads_per_layer_) {
    throw TopologyError("head L" + std::to_string(id.layer) + ".H" + std::to_string(id.head) +
                        " outside " + std::to_string(layers_) + "x" +
                        std::to_string(heads_per_layer_) + " topology");
  }
  return id.layer * heads_per_layer_ + id.head;
}

HeadId ModelTopology::head_at(std::size_t flat) const {
  if (flat >= total()) {
    throw TopologyError("flat index " + std::to_string(flat) + " >= " + std::to_string(total()));
  }
  return {flat / heads_per_layer_, flat % heads_per_layer_};
}

std::string ModelTopology::label(std::size_t flat) const {
  const HeadId id = head_at(flat);
  return "L" + std::to_string(id.layer) + ".H" + std::to_string(id.head);
}

GateMask GateMask::AllOn(const ModelTopology& topology) {
  return GateMask(std::vector<std::uint8_t>(topology.total(), 1));
}

GateMask GateMask::AllOff(const ModelTopology& topology) {
  return GateMask(std::vector<std::uint8_t>(topology.total(), 0));
}

GateMask GateMask::FromBits(std::vector<std::uint8_t> bits) {
  for (std::uint8_t b : bits) {
    if (b > 1) throw TopologyError("gate bits must be 0 or 1");
  }
  return GateMask(std::move(bits));
}

std::size_t GateMask::popcount() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

double GateMask::active_fraction() const {
  if (bits_.empty()) return 0.0;
  return static_cast<double>(popcount()) / static_cast<double>(bits_.size());
}

GateMask GateMask::without(std::size_t index) const {
  if (index >= bits_.size()) {
    throw TopologyError("mask index " + std::to_string(index) +
                        " >= " + std::to_string(bits_.size()));
  }
  GateMask copy = *this;
  copy.bits_[index] = 0;
  return copy;
}

GateMask GateMask::with(std::size_t index) const {
  if (index >= bits_.size()) {
    throw TopologyError("mask index " + std::to_string(index) +
                        " >= " + std::to_string(bits_.size()));
  }
  GateMask copy = *this;
  copy.bits_[index] = 1;
  return copy;
}

std::string GateMask::to_string() const {
  std::string s(bits_.size(), '0');
  for (std::size_t i = 0; i < bits_.size(); ++i) {
    if (bits_[i]) s[i] = '1';
  }
  return s;
}

std::string GateMask::digest() const { return Sha256Hex(to_string()); }

void GateMask::check_topology(const ModelTopology& topology) const {
  if (bits_.size() != topology.total()) {
    throw TopologyError("mask has " + std::to_string(bits_.size()) + " gates, topology has " +
                        std::to_string(topology.total()));
  }
}

Eigen::VectorXd ShvVector::means() const {
  Eigen::VectorXd v(static_cast<Eigen::Index>(estimates.size()));
  for (std::size_t i = 0; i < estimates.size(); ++i)
    v[static_cast<Eigen::Index>(i)] = estimates[i].mean;
  return v;
}

Eigen::MatrixXd ShvMatrix::means() const {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()),
                    static_cast<Eigen::Index>(topology.total()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].estimates.size() != topology.total()) {
      throw TopologyError("SHV row '" + rows[r].paradigm_id + "' length does not match topology");
    }
    m.row(static_cast<Eigen::Index>(r)) = rows[r].means().transpose();
  }
  return m;
}

std::vector<std::string> ShvMatrix::paradigm_ids() const {
  std::vector<std::string> ids;
  ids.reserve(rows.size());
  for (const auto& r : rows) ids.push_back(r.paradigm_id);
  return ids;
}

}  // namespace shvprobe
