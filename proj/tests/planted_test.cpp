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

#include <gtest/gtest.h>

#include <set>

#include "shvprobe/dataset.hpp"
#include "shvprobe/errors.hpp"
#include "shvprobe/rng.hpp"
#include "test_util.hpp"

namespace shvprobe {
namespace {

PlantedGameSpec TwoHeadSpec(double base, double w0, double w1,
                            std::vector<Synergy> synergies = {}) {
  PlantedGameSpec spec;
  spec.topology = ModelTopology(1, 2);
  PlantedGame g;
  g.paradigm_id = "p";
  g.category = "c";
  g.base = base;
  g.weights = Eigen::Vector2d(w0, w1);
  g.synergies = std::move(synergies);
  spec.games.push_back(g);
  return spec;
}

TEST(PlantedValueTest, AdditiveClosedForm) {
  const auto spec = TwoHeadSpec(0.5, 0.2, 0.3);
  EXPECT_DOUBLE_EQ(PlantedValue(spec, GateMask::FromBits({1, 0}), "p"), 0.7);
  EXPECT_DOUBLE_EQ(PlantedValue(spec, GateMask::FromBits({0, 1}), "p"), 0.8);
  EXPECT_DOUBLE_EQ(PlantedValue(spec, GateMask::FromBits({0, 0}), "p"), 0.5);
}

TEST(PlantedValueTest, PureSynergy) {
  const auto spec = TwoHeadSpec(0.3, 0.0, 0.0, {{0, 1, 0.4}});
  EXPECT_DOUBLE_EQ(PlantedValue(spec, GateMask::FromBits({1, 0}), "p"), 0.3);
  EXPECT_DOUBLE_EQ(PlantedValue(spec, GateMask::FromBits({1, 1}), "p"), 0.7);
}

TEST(PlantedValueTest, Clamps) {
  EXPECT_DOUBLE_EQ(PlantedValue(TwoHeadSpec(0.9, 0.1, 0.2), GateMask::FromBits({1, 1}), "p"), 1.0);
  EXPECT_DOUBLE_EQ(PlantedValue(TwoHeadSpec(0.1, -0.3, 0.0), GateMask::FromBits({1, 1}), "p"), 0.0);
}

TEST(PlantedValueTest, Errors) {
  const auto spec = TwoHeadSpec(0.5, 0.1, 0.1);
  EXPECT_THROW(PlantedValue(spec, GateMask::FromBits({1, 1, 1}), "p"), TopologyError);
  EXPECT_THROW(PlantedValue(spec, GateMask::FromBits({1, 1}), "q"), LookupError);
}

TEST(PlantedEvaluatorTest, AllOnAndAllOff) {
  PlantedGameSpec spec;
  spec.topology = ModelTopology(2, 2);
  PlantedGame g;
  g.paradigm_id = "p";
  g.base = 0.5;
  g.weights = Eigen::Vector4d(0.1, 0.1, 0.15, 0.05);
  spec.games.push_back(g);
  PlantedEvaluator ev(spec);
  EXPECT_DOUBLE_EQ(ev.evaluate(GateMask::AllOn(spec.topology), "p", Split::kDev).accuracy, 0.9);
  EXPECT_DOUBLE_EQ(ev.evaluate(GateMask::AllOff(spec.topology), "p", Split::kDev).accuracy, 0.5);
  EXPECT_TRUE(ev.has_paradigm("p"));
  EXPECT_FALSE(ev.has_paradigm("q"));
  EXPECT_THROW(ev.evaluate(GateMask::AllOn(spec.topology), "q", Split::kDev), LookupError);
  EXPECT_THROW(ev.evaluate(GateMask::FromBits({1}), "p", Split::kDev), TopologyError);
  EXPECT_EQ(ev.backend_id().rfind("planted:", 0), 0u);
}

TEST(PlantedEvaluatorTest, MonotoneInNonNegativeHeads) {
  Rng rng(2);
  PlantedGameSpec spec;
  spec.topology = ModelTopology(2, 4);
  PlantedGame g;
  g.paradigm_id = "p";
  g.base = 0.2;
  g.weights = Eigen::VectorXd(8);
  for (int i = 0; i < 8; ++i) g.weights[i] = rng.uniform(0.0, 0.08);
  g.synergies = {{0, 3, 0.05}, {2, 7, 0.02}};
  spec.games.push_back(g);
  for (unsigned m = 0; m < 256; ++m) {
    std::vector<std::uint8_t> bits(8);
    for (int i = 0; i < 8; ++i) bits[i] = (m >> i) & 1u;
    const auto mask = GateMask::FromBits(bits);
    for (std::size_t h = 0; h < 8; ++h) {
      EXPECT_GE(PlantedValue(spec, mask.with(h), "p"), PlantedValue(spec, mask, "p"));
    }
  }
}

TEST(PlantedGameSpecTest, JsonRoundTripAndValidation) {
  const auto spec = TwoHeadSpec(0.4, 0.125, -0.25, {{0, 1, 0.1}});
  const auto back = PlantedGameSpec::FromJson(nlohmann::json::parse(spec.to_json().dump()));
  EXPECT_EQ(back.to_json().dump(), spec.to_json().dump());
  EXPECT_EQ(back.games[0].synergies[0].strength, 0.1);

  auto bad = nlohmann::json::parse(spec.to_json().dump());
  bad["paradigms"][0]["weights"] = {0.1};
  EXPECT_THROW(PlantedGameSpec::FromJson(bad), TopologyError);
  bad = nlohmann::json::parse(spec.to_json().dump());
  bad["paradigms"][0]["synergies"] = {{0, 0, 0.1}};
  EXPECT_THROW(PlantedGameSpec::FromJson(bad), ValidationError);
  bad = nlohmann::json::parse(spec.to_json().dump());
  bad["paradigms"].push_back(bad["paradigms"][0]);
  EXPECT_THROW(PlantedGameSpec::FromJson(bad), ValidationError);
  bad = nlohmann::json::parse(spec.to_json().dump());
  bad.erase("layers");
  EXPECT_THROW(PlantedGameSpec::FromJson(bad), ValidationError);
}

TEST(PlantedGameSpecTest, SaveLoad) {
  testing::TempDir dir;
  const auto spec = TwoHeadSpec(0.4, 0.1, 0.2);
  spec.save(dir / "planted.json");
  EXPECT_EQ(PlantedGameSpec::Load(dir / "planted.json").to_json(), spec.to_json());
  EXPECT_THROW(PlantedGameSpec::Load(dir / "missing.json"), InputError);
}

TEST(PlantFromCorpusTest, DisjointCategorySupports) {
  SynthSpec s;
  s.categories = 3;
  s.paradigms_per_category = 4;
  s.pairs_per_paradigm = 10;
  const auto corpus = SynthParadigms(s, 1);
  PlantOptions o;
  const auto spec = PlantFromCorpus(corpus, o, 9);
  ASSERT_EQ(spec.games.size(), 12u);
  EXPECT_EQ(spec.topology.total(), 144u);
  std::map<std::string, std::set<Eigen::Index>> support;
  for (const auto& g : spec.games) {
    std::set<Eigen::Index> heads;
    double mass = 0;
    for (Eigen::Index h = 0; h < g.weights.size(); ++h) {
      if (std::abs(g.weights[h]) > o.noise) {
        heads.insert(h);
        mass += g.weights[h];
      } else {
        EXPECT_LE(std::abs(g.weights[h]), o.noise);
      }
    }
    EXPECT_EQ(heads.size(), o.support_size);
    EXPECT_NEAR(mass, o.support_mass, 1e-12);
    auto [it, inserted] = support.emplace(g.category, heads);
    if (!inserted) EXPECT_EQ(it->second, heads);
  }
  ASSERT_EQ(support.size(), 3u);
  std::set<Eigen::Index> all;
  for (const auto& [c, heads] : support) all.insert(heads.begin(), heads.end());
  EXPECT_EQ(all.size(), 3 * o.support_size);
  EXPECT_EQ(PlantFromCorpus(corpus, o, 9).to_json(), spec.to_json());
}

TEST(PlantFromCorpusTest, RejectsImpossibleOptions) {
  SynthSpec s;
  s.pairs_per_paradigm = 5;
  const auto corpus = SynthParadigms(s, 1);
  PlantOptions wide;
  wide.support_size = 60;
  EXPECT_THROW(PlantFromCorpus(corpus, wide, 1), ConfigurationError);
  PlantOptions heavy;
  heavy.support_mass = 0.7;
  EXPECT_THROW(PlantFromCorpus(corpus, heavy, 1), ConfigurationError);
}

TEST(RandomPlantedGameTest, StaysInsideUnitInterval) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto g = RandomPlantedGame(10, 6, 0.2, 0.1, seed);
    EXPECT_EQ(g.weights.size(), 10);
    EXPECT_EQ(g.synergies.size(), 6u);
    std::set<std::pair<std::size_t, std::size_t>> pairs;
    double total = std::abs(g.base - 0.5);
    for (const auto& s : g.synergies) {
      EXPECT_NE(s.first, s.second);
      EXPECT_TRUE(pairs.insert(std::minmax(s.first, s.second)).second);
      total += std::abs(s.strength);
    }
    total += g.weights.cwiseAbs().sum();
    EXPECT_LE(total, 0.5);
  }
}

}  // namespace
}  // namespace shvprobe
