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

#include "shvprobe/cli.hpp"

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <nlohmann/json.hpp>
#include <sstream>

#include "shvprobe/io.hpp"
#include "shvprobe/planted.hpp"
#include "test_util.hpp"

namespace shvprobe {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Run {
  int code;
  std::string out;
  std::string err;

  json error() const { return json::parse(err); }
};

Run Cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = RunCli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string P(const fs::path& p) { return p.string(); }

constexpr const char* kSynthSpec = R"({
  "categories": 3, "paradigms_per_category": 4, "pairs_per_paradigm": 20, "seed": 4,
  "planted": {"layers": 2, "heads_per_layer": 6, "support_size": 3, "noise": 0.001}
})";

constexpr const char* kRunConfig = R"({
  "seed": 1,
  "backend": {"type": "planted", "spec": "data/planted.json"},
  "estimator": {"max_permutations": 300},
  "clustering": {"k": 3},
  "pruning": {"n": 3, "random_clusters": 40},
  "output": "out"
})";

// Synthesizes a 3 x 4 planted corpus and runs the full pipeline once.
class PipelineTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new testing::TempDir;
    const auto& d = *dir_;
    testing::WriteFile(d / "synth.json", kSynthSpec);
    testing::WriteFile(d / "run.json", kRunConfig);
    ASSERT_EQ(Cli({"synth", "--spec", P(d / "synth.json"), "--out", P(d / "data")}).code, 0);
    ASSERT_EQ(Cli({"attribute", "--config", P(d / "run.json")}).code, 0);
    ASSERT_EQ(Cli({"cluster", "--shv", P(d / "out/shv.csv"), "--config", P(d / "run.json"), "--out",
                   P(d / "out")})
                  .code,
              0);
    ASSERT_EQ(Cli({"prune", "--config", P(d / "run.json"), "--shv", P(d / "out/shv.csv"),
                   "--clusters", P(d / "out/assignments.csv")})
                  .code,
              0);
  }
  static void TearDownTestSuite() {
    delete dir_;
    dir_ = nullptr;
  }
  static const testing::TempDir& dir() { return *dir_; }

  static testing::TempDir* dir_;
};

testing::TempDir* PipelineTest::dir_ = nullptr;

TEST_F(PipelineTest, SynthWritesCorpusAndPlantedSpec) {
  EXPECT_TRUE(fs::exists(dir() / "data/manifest.json"));
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(dir() / "data/corpus")) {
    files += e.path().extension() == ".jsonl";
  }
  EXPECT_EQ(files, 12u);
  const auto spec = PlantedGameSpec::Load(dir() / "data/planted.json");
  EXPECT_EQ(spec.topology, ModelTopology(2, 6));
  EXPECT_EQ(spec.games.size(), 12u);
}

TEST_F(PipelineTest, AttributeWritesMatrixAndSidecar) {
  const auto shv = ReadShvMatrix(dir() / "out/shv.csv");
  EXPECT_EQ(shv.rows.size(), 12u);
  EXPECT_EQ(shv.topology, ModelTopology(2, 6));
  EXPECT_FALSE(shv.rows[0].category.empty());
  const json side = ReadJsonFile(dir() / "out/shv.json");
  EXPECT_EQ(side["provenance"]["command"], "attribute");
  EXPECT_EQ(side["provenance"]["config_digest"].get<std::string>().size(), 64u);
  EXPECT_EQ(side["paradigms"].size(), 12u);
  EXPECT_TRUE(side["failures"].empty());
  EXPECT_EQ(side["estimator"]["max_permutations"], 300);
}

TEST_F(PipelineTest, ClusterRecoversCategories) {
  const json purity = ReadJsonFile(dir() / "out/purity.json");
  EXPECT_EQ(purity["k"], 3);
  EXPECT_EQ(purity["elbow_k"], 3);
  EXPECT_DOUBLE_EQ(purity["against_categories"]["purity"].get<double>(), 1.0);
  EXPECT_DOUBLE_EQ(purity["against_categories"]["aligned_purity"].get<double>(), 1.0);
  const auto a = ReadAssignments(dir() / "out/assignments.csv");
  EXPECT_EQ(a.clusters.size(), 12u);
  EXPECT_TRUE(fs::exists(dir() / "out/inertia.csv"));
  EXPECT_TRUE(fs::exists(dir() / "out/inertia.svg"));
}

TEST_F(PipelineTest, PruneFindsEveryClusterSignificant) {
  const json impact = ReadJsonFile(dir() / "out/impact.json");
  EXPECT_EQ(impact["n"], 3);
  EXPECT_EQ(impact["impact"]["family_size"], 3);
  for (const auto& c : impact["impact"]["clusters"]) {
    EXPECT_TRUE(c["significant"].get<bool>());
    EXPECT_LE(c["adjusted_p"].get<double>(), 0.001);
  }
  EXPECT_EQ(impact["random_clusters"]["runs"], 40);
  EXPECT_LE(impact["random_clusters"]["significant"].get<int>(), 4);
  const std::string csv = ReadTextFile(dir() / "out/prune_matrix.csv");
  EXPECT_EQ(csv.rfind("mask_source,baseline,", 0), 0u);
  EXPECT_TRUE(fs::exists(dir() / "out/impact.svg"));
}

TEST_F(PipelineTest, RerunIsByteIdentical) {
  const auto& d = dir();
  ASSERT_EQ(
      Cli({"attribute", "--config", P(d / "run.json"), "--out", P(d / "again"), "--workers", "3"})
          .code,
      0);
  ASSERT_EQ(Cli({"cluster", "--shv", P(d / "again/shv.csv"), "--config", P(d / "run.json"), "--out",
                 P(d / "again")})
                .code,
            0);
  ASSERT_EQ(Cli({"prune", "--config", P(d / "run.json"), "--shv", P(d / "again/shv.csv"),
                 "--clusters", P(d / "again/assignments.csv"), "--out", P(d / "again")})
                .code,
            0);
  for (const char* f : {"shv.csv", "assignments.csv", "inertia.csv", "prune_matrix.csv"}) {
    EXPECT_EQ(ReadTextFile(d / "out" / f), ReadTextFile(d / "again" / f)) << f;
  }
  const json a = ReadJsonFile(d / "out/purity.json");
  const json b = ReadJsonFile(d / "again/purity.json");
  EXPECT_EQ(a, b);
  const json ia = ReadJsonFile(d / "out/impact.json");
  json ib = ReadJsonFile(d / "again/impact.json");
  ib["provenance"]["inputs"] = ia["provenance"]["inputs"];
  EXPECT_EQ(ia, ib);
}

TEST_F(PipelineTest, ClusterWithKEqualRowsHasZeroInertia) {
  const auto& d = dir();
  ASSERT_EQ(
      Cli({"cluster", "--shv", P(d / "out/shv.csv"), "--k", "12", "--out", P(d / "k12")}).code, 0);
  EXPECT_DOUBLE_EQ(ReadJsonFile(d / "k12/purity.json")["inertia"].get<double>(), 0.0);
  const std::string curve = ReadTextFile(d / "k12/inertia.csv");
  EXPECT_NE(curve.find("\n12,0\n"), std::string::npos);
}

TEST_F(PipelineTest, ClusterPicksElbowFromRange) {
  const auto& d = dir();
  ASSERT_EQ(
      Cli({"cluster", "--shv", P(d / "out/shv.csv"), "--k-range", "1:8", "--out", P(d / "elbow")})
          .code,
      0);
  EXPECT_EQ(ReadJsonFile(d / "elbow/purity.json")["k"], 3);
}

TEST_F(PipelineTest, ClusterAgainstReference) {
  const auto& d = dir();
  std::string ref = "paradigm,label\n";
  const auto a = ReadAssignments(d / "out/assignments.csv");
  for (const auto& [id, cat] : a.categories) ref += id + "," + cat + "\n";
  testing::WriteFile(d / "ref.csv", ref);
  ASSERT_EQ(Cli({"cluster", "--shv", P(d / "out/shv.csv"), "--k", "3", "--reference",
                 P(d / "ref.csv"), "--out", P(d / "ref")})
                .code,
            0);
  EXPECT_DOUBLE_EQ(ReadJsonFile(d / "ref/purity.json")["against_reference"]["purity"].get<double>(),
                   1.0);
}

TEST_F(PipelineTest, PruneZeroHeadsHasNoEffect) {
  const auto& d = dir();
  ASSERT_EQ(Cli({"prune", "--config", P(d / "run.json"), "--shv", P(d / "out/shv.csv"),
                 "--clusters", P(d / "out/assignments.csv"), "--n", "0", "--out", P(d / "n0")})
                .code,
            0);
  const std::string csv = ReadTextFile(d / "n0/prune_matrix.csv");
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    const auto cells = SplitCsvLine(line);
    for (std::size_t c = 2; c < cells.size(); ++c) EXPECT_EQ(cells[c], "0") << line;
  }
  for (const auto& c : ReadJsonFile(d / "n0/impact.json")["impact"]["clusters"]) {
    EXPECT_FALSE(c["significant"].get<bool>());
  }
}

TEST_F(PipelineTest, PruneRejectsMismatchedInputs) {
  const auto& d = dir();
  testing::WriteFile(d / "partial.csv", "paradigm,category,cluster\nx,a,0\n");
  auto r = Cli({"prune", "--config", P(d / "run.json"), "--shv", P(d / "out/shv.csv"), "--clusters",
                P(d / "partial.csv"), "--out", P(d / "bad")});
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(r.error()["error"]["kind"], "validation");
  r = Cli({"prune", "--config", P(d / "run.json"), "--shv", P(d / "out/shv.csv"), "--clusters",
           P(d / "out/assignments.csv"), "--n", "13", "--out", P(d / "bad")});
  EXPECT_EQ(r.code, 2);
}

TEST_F(PipelineTest, RequireConvergenceExitsWithBudgetCode) {
  const auto& d = dir();
  const auto r = Cli({"attribute", "--config", P(d / "run.json"), "--out", P(d / "budget"),
                      "--max-permutations", "5", "--require-convergence"});
  EXPECT_EQ(r.code, 4);
  EXPECT_EQ(r.error()["error"]["kind"], "budget");
  EXPECT_EQ(r.error()["error"]["exit_code"], 4);
  EXPECT_TRUE(fs::exists(d / "budget/shv.csv"));
}

TEST_F(PipelineTest, IngestValidatesCorpus) {
  const auto& d = dir();
  auto r = Cli({"ingest", "--corpus", P(d / "data/corpus"), "--out", P(d / "ingest")});
  EXPECT_EQ(r.code, 0) << r.err;
  const json manifest = ReadJsonFile(d / "ingest/manifest.json");
  EXPECT_EQ(manifest["provenance"]["command"], "ingest");
  r = Cli({"ingest", "--corpus", P(d / "data/corpus"), "--out", P(d / "ingest"), "--strict"});
  EXPECT_EQ(r.code, 2);
  r = Cli({"ingest", "--corpus", P(d / "data/corpus"), "--out", P(d / "ingest"), "--strict",
           "--expected-pairs", "20"});
  EXPECT_EQ(r.code, 0) << r.err;
}

TEST_F(PipelineTest, ExternalBackendMatchesPlanted) {
  const auto& d = dir();
  const std::string host =
      std::string(SHVPROBE_FAKE_HOST) + " --planted " + P(d / "data/planted.json");
  json cfg = json::parse(kRunConfig);
  cfg["backend"] = {{"type", "external"}, {"corpus", "data/corpus"}, {"command", host}};
  cfg["output"] = "ext";
  testing::WriteFile(d / "ext.json", cfg.dump());
  const auto r = Cli({"attribute", "--config", P(d / "ext.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto ext = ReadShvMatrix(d / "ext/shv.csv");
  const auto local = ReadShvMatrix(d / "out/shv.csv");
  ASSERT_EQ(ext.rows.size(), local.rows.size());
  for (const auto& row : ext.rows) {
    const auto it = std::find_if(local.rows.begin(), local.rows.end(),
                                 [&](const auto& r) { return r.paradigm_id == row.paradigm_id; });
    ASSERT_NE(it, local.rows.end()) << row.paradigm_id;
    EXPECT_EQ(row.means(), it->means()) << row.paradigm_id;
  }
}

TEST_F(PipelineTest, HostFailureExitsWithBackendCode) {
  const auto& d = dir();
  const auto shv = ReadShvMatrix(d / "out/shv.csv");
  const std::string host = std::string(SHVPROBE_FAKE_HOST) + " --planted " +
                           P(d / "data/planted.json") + " --error-paradigm " +
                           shv.rows[0].paradigm_id;
  json cfg = json::parse(kRunConfig);
  cfg["backend"] = {{"type", "external"}, {"corpus", "data/corpus"}, {"command", host}};
  cfg["output"] = "hostfail";
  testing::WriteFile(d / "hostfail.json", cfg.dump());
  const auto r = Cli({"attribute", "--config", P(d / "hostfail.json")});
  EXPECT_EQ(r.code, 3);
  EXPECT_EQ(r.error()["error"]["exit_code"], 3);
  const json side = ReadJsonFile(d / "hostfail/shv.json");
  ASSERT_EQ(side["failures"].size(), 1u);
  EXPECT_EQ(side["failures"][0]["paradigm"], shv.rows[0].paradigm_id);
  EXPECT_EQ(side["paradigms"].size(), 11u);
}

TEST(CliTest, UsageErrors) {
  auto r = Cli({});
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(r.error()["error"]["kind"], "usage");
  r = Cli({"frobnicate"});
  EXPECT_EQ(r.code, 2);
  r = Cli({"cluster"});
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(Cli({"--version"}).out, std::string(kToolVersion) + "\n");
  EXPECT_EQ(Cli({"--help"}).code, 0);
}

TEST(CliTest, ConfigErrorsExitWithValidationCode) {
  testing::TempDir d;
  testing::WriteFile(d / "spec.json",
                     ReadTextFile(fs::path(SHVPROBE_TEST_DATA) / "planted_small.json"));
  const auto attempt = [&](const std::string& text) {
    testing::WriteFile(d / "run.json", text);
    return Cli({"attribute", "--config", P(d / "run.json"), "--out", P(d / "o")});
  };
  auto r = attempt(R"({"backend": {"type": "planted", "spec": "spec.json"}, "colour": 1})");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.error()["error"]["message"].get<std::string>().find("colour"), std::string::npos);
  EXPECT_EQ(attempt(R"({"backend": {"type": "planted", "spec": "nope.json"}})").code, 2);
  EXPECT_EQ(attempt(R"({"backend": {"type": "quantum"}})").code, 2);
  EXPECT_EQ(attempt(R"({"seed": 1})").code, 2);
  EXPECT_EQ(attempt(R"({"backend": {"type": "planted", "spec": "spec.json"},
                        "estimator": {"delta": 2}})")
                .code,
            2);
  EXPECT_EQ(attempt(R"({"backend": {"type": "planted", "spec": "spec.json"},
                        "pruning": {"alpha": 0}})")
                .code,
            2);
  EXPECT_EQ(attempt("{not json").code, 2);
  EXPECT_EQ(Cli({"attribute", "--config", P(d / "missing.json")}).code, 2);
  EXPECT_EQ(attempt(R"({"backend": {"type": "planted", "spec": "spec.json"}})").code, 0);
}

TEST(CliTest, OracleMatchesExactValues) {
  testing::TempDir d;
  const auto r =
      Cli({"oracle", "--planted", P(fs::path(SHVPROBE_TEST_DATA) / "planted_small.json"), "--out",
           P(d.path()), "--max-permutations", "4000", "--truncation-fraction", "0"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto exact = ReadShvMatrix(d / "oracle_shv.csv");
  // agr_1: additive weights plus a 0.0625 synergy split between heads 0 and 3.
  const std::vector<double> want{0.28125, 0.125, 0.0, 0.09375, -0.03125, 0.0};
  for (std::size_t h = 0; h < 6; ++h) {
    EXPECT_NEAR(exact.rows[0].estimates[h].mean, want[h], 1e-12) << h;
  }
  const json report = ReadJsonFile(d / "oracle.json");
  EXPECT_LE(report["max_abs_error"].get<double>(), 0.01);
  EXPECT_EQ(report["sign_failures"], 0);
  EXPECT_TRUE(fs::exists(d / "comparison.csv"));
}

TEST(CliTest, OracleRefusesLargeGames) {
  testing::TempDir d;
  PlantedGameSpec spec;
  spec.topology = ModelTopology(3, 7);
  PlantedGame g;
  g.paradigm_id = "big";
  g.weights = Eigen::VectorXd::Constant(21, 0.01);
  spec.games.push_back(g);
  spec.save(d / "big.json");
  const auto r = Cli({"oracle", "--planted", P(d / "big.json"), "--out", P(d.path())});
  EXPECT_EQ(r.code, 4);
  EXPECT_EQ(r.error()["error"]["kind"], "budget");
}

std::string FakeHost(const std::string& flags = "") {
  return std::string(SHVPROBE_FAKE_HOST) + " --planted " +
         P(fs::path(SHVPROBE_TEST_DATA) / "planted_small.json") + " " + flags;
}

TEST(ConformanceTest, FakeHostPassesGoldenTranscript) {
  testing::TempDir d;
  const auto r = Cli({"conformance", "--host-cmd", FakeHost(), "--paradigm", "agr_1",
                      "--transcript", P(fs::path(SHVPROBE_TEST_DATA) / "golden_transcript.jsonl"),
                      "--expect-layers", "2", "--expect-heads", "3", "--out", P(d.path())});
  EXPECT_EQ(r.code, 0) << r.out << r.err;
  EXPECT_EQ(r.out.find("[FAIL]"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("[PASS] golden_transcript (10/10 identical)"), std::string::npos) << r.out;
  const json report = ReadJsonFile(d / "conformance.json");
  EXPECT_EQ(report["checks"].size(), 8u);
}

TEST(ConformanceTest, ReorderingHostStillPasses) {
  const auto r = Cli({"conformance", "--host-cmd", FakeHost("--reorder"), "--paradigm", "isl_1"});
  EXPECT_EQ(r.code, 0) << r.out << r.err;
}

TEST(ConformanceTest, WrongTopologyFails) {
  const auto r = Cli(
      {"conformance", "--host-cmd", FakeHost(), "--paradigm", "agr_1", "--expect-layers", "12"});
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.out.find("[FAIL] topology"), std::string::npos) << r.out;
}

TEST(ConformanceTest, VersionMismatchFailsHandshake) {
  const auto r =
      Cli({"conformance", "--host-cmd", FakeHost("--protocol 7"), "--paradigm", "agr_1"});
  EXPECT_EQ(r.code, 3);
  EXPECT_EQ(r.error()["error"]["kind"], "protocol");
}

TEST(ConformanceTest, NeedsExactlyOneHost) {
  EXPECT_EQ(Cli({"conformance", "--paradigm", "p"}).code, 2);
  EXPECT_EQ(Cli({"conformance", "--paradigm", "p", "--host-cmd", "x", "--address", "h:1"}).code, 2);
  EXPECT_EQ(Cli({"conformance", "--paradigm", "p", "--address", "nohost"}).code, 2);
}

TEST(BinaryTest, ExitStatusPropagates) {
  const auto status = [](const std::string& args) {
    const int raw = std::system((std::string(SHVPROBE_CLI) + " " + args + " 2>/dev/null").c_str());
    return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  };
  EXPECT_EQ(status("--version >/dev/null"), 0);
  EXPECT_EQ(status("cluster --shv /nonexistent.csv --k 2"), 2);
  EXPECT_EQ(status("bogus"), 2);
}

}  // namespace
}  // namespace shvprobe
