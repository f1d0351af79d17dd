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

#ifndef SHVPROBE_IO_HPP_
#define SHVPROBE_IO_HPP_

#include <filesystem>
#include <map>
#include <nlohmann/json.hpp>
#include <string>
#include <utility>
#include <vector>

#include "shvprobe/clustering.hpp"
#include "shvprobe/pruning.hpp"
#include "shvprobe/shapley.hpp"
#include "shvprobe/topology.hpp"

namespace shvprobe {

inline constexpr const char* kToolVersion = "0.1.0";

// Shortest text that parses back to the same double.
std::string FormatDouble(double v);

std::vector<std::string> SplitCsvLine(const std::string& line);

void WriteTextFile(const std::filesystem::path& file, const std::string& content);
std::string ReadTextFile(const std::filesystem::path& file);
nlohmann::json ReadJsonFile(const std::filesystem::path& file);
void WriteJsonFile(const std::filesystem::path& file, const nlohmann::ordered_json& j);

// "paradigm,L0.H0,...,L{n}.H{m}" followed by one row of means per paradigm.
std::string ShvCsv(const ShvMatrix& matrix);
// Variance, samples, convergence and estimator config for each row.
nlohmann::ordered_json ShvSidecar(const ShvMatrixResult& result, const EstimatorConfig& config,
                                  const nlohmann::ordered_json& provenance);
// Reads the CSV and, when present, the sidecar with the same stem (.json).
ShvMatrix ReadShvMatrix(const std::filesystem::path& csv);

// paradigm,category,cluster
std::string AssignmentsCsv(const std::vector<std::string>& ids,
                           const std::map<std::string, std::string>& categories,
                           const std::vector<Eigen::Index>& clusters);
struct Assignments {
  Partition clusters;
  std::map<std::string, std::string> categories;
};
Assignments ReadAssignments(const std::filesystem::path& csv);

// mask_source,baseline,<evaluated ids...>. Row m holds delta(m, e) for each
// column e; its baseline cell is V(all-on, m).
std::string PruneMatrixCsv(const PruneMatrix& matrix);

std::string InertiaCsv(const std::vector<std::pair<Eigen::Index, double>>& curve);
std::string InertiaSvg(const std::vector<std::pair<Eigen::Index, double>>& curve);
std::string ImpactSvg(const ImpactAnalysis& analysis);

}  // namespace shvprobe

#endif  // SHVPROBE_IO_HPP_
