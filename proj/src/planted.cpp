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

#include "shvprobe/planted.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>
#include <span>

#include "shvprobe/digest.hpp"
#include "shvprobe/errors.hpp"
#include "shvprobe/rng.hpp"

namespace shvprobe {

using nlohmann::json;
using nlohmann::ordered_json;

double PlantedGame::raw_value(const GateMask& mask) const {
  double v = base;
  const auto& bits = mask.bits();
  for (std::size_t h = 0; h < bits.size(); ++h) {
    if (bits[h]) v += weights[static_cast<Eigen::Index>(h)];
  }
  for (const auto& s : synergies) {
    if (bits[s.first] && bits[s.second]) v += s.strength;
  }
  return v;
}

double PlantedGame::value(const GateMask& mask) const {
  return std::clamp(raw_value(mask), 0.0, 1.0);
}

const PlantedGame& PlantedGameSpec::game(std::string_view paradigm_id) const {
  for (const auto& g : games) {
    if (g.paradigm_id == paradigm_id) return g;
  }
  throw LookupError("planted spec has no paradigm '" + std::string(paradigm_id) + "'");
}

void PlantedGameSpec::validate() const {
  std::set<std::string> seen;
  const auto d = static_cast<Eigen::Index>(topology.total());
  for (const auto& g : games) {
    if (!seen.insert(g.paradigm_id).second) {
      throw ValidationError("duplicate planted paradigm '" + g.paradigm_id + "'");
    }
    if (g.weights.size() != d) {
      throw TopologyError("planted paradigm '" + g.paradigm_id + "' has " +
                          std::to_string(g.weights.size()) + " weights, topology has " +
                          std::to_string(d));
    }
    for (const auto& s : g.synergies) {
      if (s.first >= topology.total() || s.second >= topology.total()) {
        throw TopologyError("synergy head out of range in '" + g.paradigm_id + "'");
      }
      if (s.first == s.second) {
        throw ValidationError("synergy pairs a head with itself in '" + g.paradigm_id + "'");
      }
    }
  }
}

PlantedGameSpec PlantedGameSpec::FromJson(const json& j) {
  try {
    PlantedGameSpec spec;
    spec.topology = ModelTopology(j.at("layers").get<std::size_t>(),
                                  j.at("heads_per_layer").get<std::size_t>());
    for (const auto& p : j.at("paradigms")) {
      PlantedGame g;
      g.paradigm_id = p.at("id").get<std::string>();
      g.category = p.value("category", std::string());
      g.base = p.value("base", 0.5);
      const auto w = p.at("weights").get<std::vector<double>>();
      g.weights = Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
      if (p.contains("synergies")) {
        for (const auto& s : p.at("synergies")) {
          g.synergies.push_back(
              {s.at(0).get<std::size_t>(), s.at(1).get<std::size_t>(), s.at(2).get<double>()});
        }
      }
      spec.games.push_back(std::move(g));
    }
    spec.validate();
    return spec;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("planted spec: ") + e.what());
  }
}

ordered_json PlantedGameSpec::to_json() const {
  ordered_json j;
  j["layers"] = topology.layers();
  j["heads_per_layer"] = topology.heads_per_layer();
  ordered_json list = ordered_json::array();
  for (const auto& g : games) {
    ordered_json p;
    p["id"] = g.paradigm_id;
    p["category"] = g.category;
    p["base"] = g.base;
    p["weights"] = std::vector<double>(g.weights.data(), g.weights.data() + g.weights.size());
    ordered_json syn = ordered_json::array();
    for (const auto& s : g.synergies) syn.push_back({s.first, s.second, s.strength});
    p["synergies"] = std::move(syn);
    list.push_back(std::move(p));
  }
  j["paradigms"] = std::move(list);
  return j;
}

PlantedGameSpec PlantedGameSpec::Load(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw InputError("cannot open planted spec " + file.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(file.string(), 0, e.what());
  }
  return FromJson(j);
}

void PlantedGameSpec::save(const std::filesystem::path& file) const {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw InputError("cannot write " + file.string());
  out << to_json().dump(1) << '\n';
}

double PlantedValue(const PlantedGameSpec& spec, const GateMask& mask,
                    std::string_view paradigm_id) {
  mask.check_topology(spec.topology);
  return spec.game(paradigm_id).value(mask);
}

PlantedEvaluator::PlantedEvaluator(PlantedGameSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  digest_ = Sha256Hex(spec_.to_json().dump());
  for (std::size_t i = 0; i < spec_.games.size(); ++i)
    index_.emplace(spec_.games[i].paradigm_id, i);
}

bool PlantedEvaluator::has_paradigm(std::string_view id) const { return index_.contains(id); }

EvaluationResult PlantedEvaluator::evaluate(const GateMask& mask, std::string_view paradigm_id,
                                            Split) {
  mask.check_topology(spec_.topology);
  auto it = index_.find(paradigm_id);
  if (it == index_.end()) {
    throw LookupError("unknown paradigm '" + std::string(paradigm_id) + "'");
  }
  return {spec_.games[it->second].value(mask), 0};
}

PlantOptions PlantOptions::FromJson(const json& j) {
  PlantOptions o;
  o.layers = j.value("layers", o.layers);
  o.heads_per_layer = j.value("heads_per_layer", o.heads_per_layer);
  o.support_size = j.value("support_size", o.support_size);
  o.base = j.value("base", o.base);
  o.support_mass = j.value("support_mass", o.support_mass);
  o.noise = j.value("noise", o.noise);
  o.synergies_per_game = j.value("synergies_per_game", o.synergies_per_game);
  o.synergy_strength = j.value("synergy_strength", o.synergy_strength);
  return o;
}

PlantedGameSpec PlantFromCorpus(const std::vector<Paradigm>& paradigms, const PlantOptions& options,
                                std::uint64_t seed) {
  PlantedGameSpec spec;
  spec.topology = ModelTopology(options.layers, options.heads_per_layer);
  const std::size_t d = spec.topology.total();

  std::vector<std::string> categories;
  for (const auto& p : paradigms) {
    if (std::find(categories.begin(), categories.end(), p.category) == categories.end()) {
      categories.push_back(p.category);
    }
  }
  if (options.support_size == 0 || categories.size() * options.support_size > d) {
    throw ConfigurationError(
        "cannot give " + std::to_string(categories.size()) + " categories disjoint supports of " +
        std::to_string(options.support_size) + " heads out of " + std::to_string(d));
  }
  const double worst_high =
      options.base + options.support_mass +
      static_cast<double>(d - options.support_size) * options.noise +
      static_cast<double>(options.synergies_per_game) * std::abs(options.synergy_strength);
  const double worst_low =
      options.base - static_cast<double>(d - options.support_size) * options.noise -
      static_cast<double>(options.synergies_per_game) * std::abs(options.synergy_strength);
  if (worst_high > 1.0 || worst_low < 0.0) {
    throw ConfigurationError("planted options can push values outside [0, 1]");
  }

  std::vector<std::size_t> heads(d);
  std::iota(heads.begin(), heads.end(), 0);
  Rng layout(DeriveSeed(seed, "plant/layout"));
  layout.shuffle(std::span(heads));

  for (const auto& p : paradigms) {
    const auto c = static_cast<std::size_t>(
        std::find(categories.begin(), categories.end(), p.category) - categories.begin());
    std::span<const std::size_t> support(heads.data() + c * options.support_size,
                                         options.support_size);
    Rng rng(DeriveSeed(seed, "plant/" + p.id));
    PlantedGame g;
    g.paradigm_id = p.id;
    g.category = p.category;
    g.base = options.base;
    g.weights = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
    for (std::size_t h = 0; h < d; ++h) {
      g.weights[static_cast<Eigen::Index>(h)] = rng.uniform(-options.noise, options.noise);
    }
    Eigen::VectorXd raw(static_cast<Eigen::Index>(support.size()));
    for (auto& x : raw) x = rng.uniform(0.5, 1.5);
    raw *= options.support_mass / raw.sum();
    for (std::size_t i = 0; i < support.size(); ++i) {
      g.weights[static_cast<Eigen::Index>(support[i])] = raw[static_cast<Eigen::Index>(i)];
    }
    for (std::size_t s = 0; s < options.synergies_per_game && support.size() >= 2; ++s) {
      const std::size_t a = rng.uniform_index(support.size());
      std::size_t b = rng.uniform_index(support.size() - 1);
      if (b >= a) ++b;
      g.synergies.push_back({support[a], support[b], options.synergy_strength});
    }
    spec.games.push_back(std::move(g));
  }
  return spec;
}

PlantedGame RandomPlantedGame(std::size_t heads, std::size_t synergies, double max_weight,
                              double max_synergy, std::uint64_t seed) {
  Rng rng(seed);
  PlantedGame g;
  g.paradigm_id = "random";
  g.base = 0.5;
  g.weights.resize(static_cast<Eigen::Index>(heads));
  for (auto& w : g.weights) w = rng.uniform(-max_weight, max_weight);
  std::set<std::pair<std::size_t, std::size_t>> used;
  const std::size_t max_pairs = heads * (heads - 1) / 2;
  while (g.synergies.size() < std::min(synergies, max_pairs)) {
    std::size_t a = rng.uniform_index(heads);
    std::size_t b = rng.uniform_index(heads);
    if (a == b) continue;
    if (a > b) std::swap(a, b);
    if (!used.insert({a, b}).second) continue;
    g.synergies.push_back({a, b, rng.uniform(-max_synergy, max_synergy)});
  }
  double spread = g.weights.cwiseAbs().sum();
  for (const auto& s : g.synergies) spread += std::abs(s.strength);
  if (spread > 0.49) {
    const double scale = 0.49 / spread;
    g.weights *= scale;
    for (auto& s : g.synergies) s.strength *= scale;
  }
  return g;
}

}  // namespace shvprobe
