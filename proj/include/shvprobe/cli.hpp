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

#ifndef SHVPROBE_CLI_HPP_
#define SHVPROBE_CLI_HPP_

#include <cstdint>
#include <filesystem>
#include <memory>
#include <nlohmann/json.hpp>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "shvprobe/errors.hpp"
#include "shvprobe/evaluator.hpp"
#include "shvprobe/external.hpp"
#include "shvprobe/native.hpp"
#include "shvprobe/pruning.hpp"
#include "shvprobe/shapley.hpp"

namespace shvprobe {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitBackend = 3;
inline constexpr int kExitBudget = 4;

int ExitCodeFor(ErrorKind kind);

struct BackendConfig {
  std::string type;  // planted | native | external
  std::string spec;  // planted game spec
  std::string corpus;
  ToyClassifierOptions classifier;
  std::string command;  // external host launched over stdio
  std::string address;  // external host at host:port
  ExternalOptions external;
};

struct ClusteringConfig {
  std::optional<std::size_t> k;
  std::size_t k_min = 0;  // 0: derived from the row count
  std::size_t k_max = 0;
  std::size_t restarts = 10;
  std::string reference;
};

struct PruningConfig {
  std::size_t n = 10;
  double alpha = 0.001;
  std::size_t random_clusters = 125;
  Ranking ranking = Ranking::kSigned;
  bool include_self = true;
  Split split = Split::kAttribution;
};

// One JSON file describing a whole run. Relative paths resolve against the
// directory holding the file.
struct RunConfig {
  std::filesystem::path base_dir;
  std::uint64_t seed = 0;
  BackendConfig backend;
  std::string cache;
  EstimatorConfig estimator;
  ClusteringConfig clustering;
  PruningConfig pruning;
  std::string output;

  static RunConfig FromJson(const nlohmann::json& j, const std::filesystem::path& base_dir);
  static RunConfig Load(const std::filesystem::path& file);

  std::filesystem::path resolve(const std::string& path) const;
  // Throws ValidationError for missing files or an ambiguous backend.
  void validate() const;
  // Effective settings without the output directory or worker count.
  nlohmann::ordered_json to_json() const;
  std::string digest() const;
};

std::shared_ptr<Evaluator> MakeEvaluator(const RunConfig& config);
std::vector<ParadigmRef> ConfiguredParadigms(const RunConfig& config);
std::string CorpusDigestFor(const RunConfig& config);

// Entry point shared by the binary and the tests. args excludes argv[0].
int RunCli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace shvprobe

#endif  // SHVPROBE_CLI_HPP_
