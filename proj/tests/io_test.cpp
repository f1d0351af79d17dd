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

#include "shvprobe/io.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "shvprobe/errors.hpp"
#include "test_util.hpp"

namespace shvprobe {
namespace {

TEST(FormatDoubleTest, ShortestRoundTrip) {
  EXPECT_EQ(FormatDouble(0.1), "0.1");
  EXPECT_EQ(FormatDouble(-0.25), "-0.25");
  EXPECT_EQ(FormatDouble(0.0), "0");
  EXPECT_EQ(FormatDouble(1e-300), "1e-300");
  EXPECT_EQ(FormatDouble(std::nan("")), "nan");
  for (double v : {1.0 / 3.0, 2.0 / 7.0, -1e-17, 0.30000000000000004, 123456.789}) {
    EXPECT_EQ(std::stod(FormatDouble(v)), v);
  }
}

TEST(SplitCsvLineTest, HandlesQuotes) {
  EXPECT_EQ(SplitCsvLine("a,b,,c"), (std::vector<std::string>{"a", "b", "", "c"}));
  EXPECT_EQ(SplitCsvLine(R"("x,y","say ""hi""",z)"),
            (std::vector<std::string>{"x,y", "say \"hi\"", "z"}));
  EXPECT_EQ(SplitCsvLine("one\r"), std::vector<std::string>{"one"});
}

ShvMatrixResult SmallResult() {
  ShvMatrixResult r;
  r.matrix.topology = ModelTopology(2, 2);
  ShvVector a;
  a.paradigm_id = "alpha";
  a.category = "agr";
  a.estimates = {{0.1, 0.01, 30, true},
                 {-0.2, 0.02, 40, false},
                 {1.0 / 3.0, 0.0, 50, true},
                 {0.0, 0.0, 60, false}};
  ShvVector b = a;
  b.paradigm_id = "beta,quoted";
  b.category = "isl";
  b.estimates[0].mean = 2.0 / 7.0;
  r.matrix.rows = {a, b};
  r.reports.resize(2);
  r.reports[0].permutations = 60;
  r.reports[1].permutations = 61;
  r.failures.push_back({"gamma", "host went away"});
  return r;
}

TEST(ShvCsvTest, LayoutIsLayerMajor) {
  const auto r = SmallResult();
  const std::string csv = ShvCsv(r.matrix);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "paradigm,L0.H0,L0.H1,L1.H0,L1.H1");
  EXPECT_NE(csv.find("\nalpha,0.1,-0.2,0.3333333333333333,0\n"), std::string::npos);
  EXPECT_NE(csv.find("\n\"beta,quoted\",0.2857142857142857,"), std::string::npos);
}

TEST(ShvCsvTest, RoundTripWithSidecar) {
  testing::TempDir dir;
  const auto r = SmallResult();
  WriteTextFile(dir / "shv.csv", ShvCsv(r.matrix));
  const auto plain = ReadShvMatrix(dir / "shv.csv");
  EXPECT_EQ(plain.topology, ModelTopology(2, 2));
  ASSERT_EQ(plain.rows.size(), 2u);
  EXPECT_EQ(plain.rows[1].paradigm_id, "beta,quoted");
  EXPECT_EQ(plain.means(), r.matrix.means());
  EXPECT_EQ(plain.rows[0].category, "");
  EXPECT_EQ(plain.rows[0].estimates[0].samples, 0u);

  const auto side = ShvSidecar(r, EstimatorConfig{}, {{"tool", "shvprobe"}});
  EXPECT_EQ(side["paradigms"][1]["permutations"], 61);
  EXPECT_EQ(side["failures"][0]["message"], "host went away");
  WriteJsonFile(dir / "shv.json", side);
  const auto full = ReadShvMatrix(dir / "shv.csv");
  EXPECT_EQ(full.rows[1].category, "isl");
  EXPECT_EQ(full.rows[0].estimates[1].variance, 0.02);
  EXPECT_EQ(full.rows[0].estimates[3].samples, 60u);
  EXPECT_TRUE(full.rows[0].estimates[2].converged);
  EXPECT_FALSE(full.rows[0].estimates[1].converged);
}

TEST(ShvCsvTest, RejectsBadFiles) {
  testing::TempDir dir;
  const auto bad = [&](const std::string& text) {
    WriteTextFile(dir / "bad.csv", text);
    return ReadShvMatrix(dir / "bad.csv");
  };
  EXPECT_THROW(bad(""), ParseError);
  EXPECT_THROW(bad("id,L0.H0\n"), ParseError);
  EXPECT_THROW(bad("paradigm\n"), ParseError);
  EXPECT_THROW(bad("paradigm,head0\n"), ParseError);
  EXPECT_THROW(bad("paradigm,L0.H1,L0.H0\n"), ParseError);
  EXPECT_THROW(bad("paradigm,L0.H0,L1.H1\n"), ParseError);
  EXPECT_THROW(bad("paradigm,L0.H0\np,0.1,0.2\n"), ParseError);
  EXPECT_THROW(bad("paradigm,L0.H0\np,abc\n"), ParseError);
  EXPECT_THROW(bad("paradigm,L0.H0\np,0.1\np,0.2\n"), ParseError);
  EXPECT_THROW(ReadShvMatrix(dir / "missing.csv"), InputError);
  try {
    bad("paradigm,L0.H0\np,0.1\nq,x\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find(":3"), std::string::npos) << e.what();
  }
}

TEST(AssignmentsTest, RoundTrip) {
  testing::TempDir dir;
  const std::string csv = AssignmentsCsv({"p1", "p2", "p3"}, {{"p1", "a"}, {"p2", "b"}}, {0, 1, 0});
  EXPECT_EQ(csv, "paradigm,category,cluster\np1,a,0\np2,b,1\np3,,0\n");
  WriteTextFile(dir / "a.csv", csv);
  const auto a = ReadAssignments(dir / "a.csv");
  EXPECT_EQ(a.clusters, (Partition{{"p1", "0"}, {"p2", "1"}, {"p3", "0"}}));
  EXPECT_EQ(a.categories.at("p2"), "b");
}

TEST(AssignmentsTest, RejectsBadFiles) {
  testing::TempDir dir;
  const auto bad = [&](const std::string& text) {
    WriteTextFile(dir / "bad.csv", text);
    return ReadAssignments(dir / "bad.csv");
  };
  EXPECT_THROW(bad("paradigm,cluster\np,0\n"), ParseError);
  EXPECT_THROW(bad("paradigm,category,cluster\np,a\n"), ParseError);
  EXPECT_THROW(bad("paradigm,category,cluster\np,a,0\np,a,1\n"), ParseError);
}

TEST(PruneMatrixCsvTest, RowsAreMaskSources) {
  PruneMatrix m;
  m.paradigm_ids = {"x", "y"};
  m.baseline = Eigen::Vector2d(0.9, 0.8);
  m.delta.resize(2, 2);
  m.delta << -0.5, -0.125, std::numeric_limits<double>::quiet_NaN(), -0.25;
  EXPECT_EQ(PruneMatrixCsv(m),
            "mask_source,baseline,x,y\n"
            "x,0.9,-0.5,-0.125\n"
            "y,0.8,nan,-0.25\n");
}

TEST(InertiaTest, CsvAndSvg) {
  const std::vector<std::pair<Eigen::Index, double>> curve{{1, 10.0}, {2, 4.5}, {3, 0.0}};
  EXPECT_EQ(InertiaCsv(curve), "k,inertia\n1,10\n2,4.5\n3,0\n");
  const std::string svg = InertiaSvg(curve);
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_NE(svg.find("<polyline"), std::string::npos);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
  EXPECT_NE(InertiaSvg({}).find("</svg>"), std::string::npos);
}

TEST(ImpactSvgTest, MarksSignificantClusters) {
  ImpactAnalysis a;
  ClusterTest c;
  c.impact.label = "7";
  c.impact.in_deltas = {-0.4, -0.3, -0.35};
  c.impact.out_deltas = {0.0, 0.01, -0.01};
  c.significant = true;
  a.clusters.push_back(c);
  c.impact.label = "8";
  c.significant = false;
  a.clusters.push_back(c);
  const std::string svg = ImpactSvg(a);
  EXPECT_NE(svg.find(">7*</text>"), std::string::npos);
  EXPECT_NE(svg.find(">8</text>"), std::string::npos);
  EXPECT_NE(svg.find("<rect"), std::string::npos);
}

TEST(JsonFileTest, RoundTripAndErrors) {
  testing::TempDir dir;
  nlohmann::ordered_json j;
  j["b"] = 1;
  j["a"] = {1, 2};
  WriteJsonFile(dir / "sub" / "x.json", j);
  EXPECT_EQ(ReadTextFile(dir / "sub" / "x.json"),
            "{\n  \"b\": 1,\n  \"a\": [\n    1,\n    2\n  ]\n}\n");
  EXPECT_EQ(ReadJsonFile(dir / "sub" / "x.json")["a"][1], 2);
  WriteTextFile(dir / "bad.json", "{");
  EXPECT_THROW(ReadJsonFile(dir / "bad.json"), ParseError);
  EXPECT_THROW(ReadJsonFile(dir / "none.json"), InputError);
}

}  // namespace
}  // namespace shvprobe
