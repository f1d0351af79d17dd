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

#ifndef SHVPROBE_PLANTED_HPP_
#define SHVPROBE_PLANTED_HPP_

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <map>
#include <nlohmann/json.hpp>
#include <string>
#include <string_view>
#include <vector>

#include "shvprobe/dataset.hpp"
#include "shvprobe/evaluator.hpp"
#include "shvprobe/topology.hpp"

namespace shvprobe {

struct Synergy {
  std::size_t first = 0;
  std::size_t second = 0;
  double strength = 0.0;
};

// value(mask) = clamp(base + sum of active weights + sum of synergies whose
// two heads are both active, 0, 1).
struct PlantedGame {
  std::string paradigm_id;
  std::string category;
  double base = 0.5;
  Eigen::VectorXd weights;
  std::vector<Synergy> synergies;

  // Unclamped value; also used by the oracles in tests.
  double raw_value(const GateMask& mask) const;
  double value(const GateMask& mask) const;
};

struct PlantedGameSpec {
  ModelTopology topology{1, 1};
  std::vector<PlantedGame> games;

  const PlantedGame& game(std::string_view paradigm_id) const;
  // Checks weight lengths, synergy indices and unique ids.
  void validate() const;

  static PlantedGameSpec FromJson(const nlohmann::json& j);
  nlohmann::ordered_json to_json() const;
  static PlantedGameSpec Load(const std::filesystem::path& file);
  void save(const std::filesystem::path& file) const;
};

double PlantedValue(const PlantedGameSpec& spec, const GateMask& mask,
                    std::string_view paradigm_id);

// Closed-form backend; ignores the split and reports n_examples = 0.
class PlantedEvaluator : public Evaluator {
 public:
  explicit PlantedEvaluator(PlantedGameSpec spec);

  std::string backend_id() const override { return "planted:" + digest_.substr(0, 16); }
  const ModelTopology& topology() const override { return spec_.topology; }
  bool has_paradigm(std::string_view id) const override;
  EvaluationResult evaluate(const GateMask& mask, std::string_view paradigm_id,
                            Split split) override;

  const PlantedGameSpec& spec() const { return spec_; }

 private:
  PlantedGameSpec spec_;
  std::string digest_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

// Planted games for a corpus: each category owns a disjoint block of
// `support_size` heads carrying `support_mass` of weight; every other head
// gets small noise in [-noise, noise].
struct PlantOptions {
  std::size_t layers = 12;
  std::size_t heads_per_layer = 12;
  std::size_t support_size = 12;
  double base = 0.5;
  double support_mass = 0.4;
  double noise = 0.0005;
  std::size_t synergies_per_game = 0;
  double synergy_strength = 0.0;

  static PlantOptions FromJson(const nlohmann::json& j);
};

PlantedGameSpec PlantFromCorpus(const std::vector<Paradigm>& paradigms, const PlantOptions& options,
                                std::uint64_t seed);

// Random game for property tests: weights in [-w, w], `synergies` distinct
// random pairs with strength in [-s, s]. The base is 0.5 and the magnitudes
// are rescaled when needed so no mask reaches the clamp.
PlantedGame RandomPlantedGame(std::size_t heads, std::size_t synergies, double max_weight,
                              double max_synergy, std::uint64_t seed);

}  // namespace shvprobe

#endif  // SHVPROBE_PLANTED_HPP_
