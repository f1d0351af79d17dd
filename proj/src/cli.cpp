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

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "shvprobe/clustering.hpp"
#include "shvprobe/dataset.hpp"
#include "shvprobe/digest.hpp"
#include "shvprobe/io.hpp"
#include "shvprobe/planted.hpp"

namespace shvprobe {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

int ExitCodeFor(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kEvaluation:
    case ErrorKind::kProtocol:
    case ErrorKind::kTraining:
      return kExitBackend;
    case ErrorKind::kBudget:
      return kExitBudget;
    default:
      return kExitValidation;
  }
}

namespace {

void CheckKeys(const json& j, std::initializer_list<const char*> allowed,
               const std::string& where) {
  if (!j.is_object()) throw ValidationError(where + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      throw ValidationError("unknown key '" + key + "' in " + where);
    }
  }
}

Ranking ParseRanking(const std::string& s) {
  if (s == "signed") return Ranking::kSigned;
  if (s == "absolute") return Ranking::kAbsolute;
  throw ValidationError("ranking must be 'signed' or 'absolute', got '" + s + "'");
}

const char* RankingName(Ranking r) { return r == Ranking::kSigned ? "signed" : "absolute"; }

std::pair<std::string, std::uint16_t> SplitAddress(const std::string& address) {
  const auto colon = address.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == address.size()) {
    throw ValidationError("address must be host:port, got '" + address + "'");
  }
  const std::string port = address.substr(colon + 1);
  if (port.find_first_not_of("0123456789") != std::string::npos || port.size() > 5 ||
      std::stoul(port) > 65535) {
    throw ValidationError("bad port in address '" + address + "'");
  }
  return {address.substr(0, colon), static_cast<std::uint16_t>(std::stoul(port))};
}

}  // namespace

RunConfig RunConfig::FromJson(const json& j, const fs::path& base_dir) {
  CheckKeys(j, {"seed", "backend", "cache", "estimator", "clustering", "pruning", "output"},
            "run config");
  RunConfig c;
  c.base_dir = base_dir;
  c.seed = j.value("seed", c.seed);
  if (!j.contains("backend")) throw ValidationError("run config has no backend");
  const json& b = j.at("backend");
  CheckKeys(
      b,
      {"type", "spec", "corpus", "classifier", "command", "address", "timeout_ms", "max_in_flight"},
      "backend");
  c.backend.type = b.value("type", std::string());
  c.backend.spec = b.value("spec", std::string());
  c.backend.corpus = b.value("corpus", std::string());
  if (b.contains("classifier")) {
    CheckKeys(b.at("classifier"), {"layers", "heads_per_layer", "epochs", "learning_rate", "l2"},
              "backend.classifier");
    c.backend.classifier = ToyClassifierOptions::FromJson(b.at("classifier"));
  }
  c.backend.command = b.value("command", std::string());
  c.backend.address = b.value("address", std::string());
  c.backend.external.timeout = std::chrono::milliseconds(
      b.value("timeout_ms", static_cast<std::int64_t>(c.backend.external.timeout.count())));
  c.backend.external.max_in_flight = b.value("max_in_flight", c.backend.external.max_in_flight);
  c.cache = j.value("cache", std::string());

  EstimatorConfig defaults;
  defaults.seed = c.seed;
  if (j.contains("estimator")) {
    CheckKeys(j.at("estimator"),
              {"R", "delta", "truncation_fraction", "min_samples_per_head", "max_permutations",
               "seed", "split", "workers"},
              "estimator");
    c.estimator = EstimatorConfig::FromJson(j.at("estimator"), defaults);
  } else {
    c.estimator = defaults;
  }

  if (j.contains("clustering")) {
    const json& k = j.at("clustering");
    CheckKeys(k, {"k", "k_range", "restarts", "reference"}, "clustering");
    if (k.contains("k")) c.clustering.k = k.at("k").get<std::size_t>();
    if (k.contains("k_range")) {
      const auto range = k.at("k_range").get<std::vector<std::size_t>>();
      if (range.size() != 2) throw ValidationError("clustering.k_range must be [min, max]");
      c.clustering.k_min = range[0];
      c.clustering.k_max = range[1];
    }
    c.clustering.restarts = k.value("restarts", c.clustering.restarts);
    c.clustering.reference = k.value("reference", std::string());
  }
  if (j.contains("pruning")) {
    const json& p = j.at("pruning");
    CheckKeys(p, {"n", "alpha", "random_clusters", "ranking", "include_self", "split"}, "pruning");
    c.pruning.n = p.value("n", c.pruning.n);
    c.pruning.alpha = p.value("alpha", c.pruning.alpha);
    c.pruning.random_clusters = p.value("random_clusters", c.pruning.random_clusters);
    if (p.contains("ranking")) c.pruning.ranking = ParseRanking(p.at("ranking").get<std::string>());
    c.pruning.include_self = p.value("include_self", c.pruning.include_self);
    if (p.contains("split")) c.pruning.split = ParseSplit(p.at("split").get<std::string>());
  }
  c.output = j.value("output", std::string());
  return c;
}

RunConfig RunConfig::Load(const fs::path& file) {
  if (!fs::exists(file)) throw ValidationError("config file not found: " + file.string());
  return FromJson(ReadJsonFile(file), file.parent_path());
}

fs::path RunConfig::resolve(const std::string& path) const {
  const fs::path p(path);
  return p.is_absolute() || base_dir.empty() ? p : base_dir / p;
}

void RunConfig::validate() const {
  const auto& b = backend;
  auto require_file = [&](const std::string& key, const std::string& value) {
    if (value.empty()) throw ValidationError("backend '" + b.type + "' needs '" + key + "'");
    if (!fs::exists(resolve(value))) {
      throw ValidationError(key + " not found: " + resolve(value).string());
    }
  };
  if (b.type == "planted") {
    require_file("spec", b.spec);
    if (!b.command.empty() || !b.address.empty()) {
      throw ValidationError("planted backend takes no host command or address");
    }
  } else if (b.type == "native") {
    require_file("corpus", b.corpus);
    if (!b.spec.empty() || !b.command.empty() || !b.address.empty()) {
      throw ValidationError("native backend takes only a corpus and classifier options");
    }
  } else if (b.type == "external") {
    require_file("corpus", b.corpus);
    if (b.command.empty() == b.address.empty()) {
      throw ValidationError("external backend needs exactly one of 'command' or 'address'");
    }
    if (!b.address.empty()) SplitAddress(b.address);
    if (b.external.max_in_flight == 0) throw ValidationError("max_in_flight must be positive");
    if (b.external.timeout.count() <= 0) throw ValidationError("timeout_ms must be positive");
  } else {
    throw ValidationError("backend.type must be planted, native or external, got '" + b.type + "'");
  }
  try {
    estimator.validate();
  } catch (const ConfigurationError& e) {
    throw ValidationError(e.what());
  }
  if (estimator.max_permutations == 0) throw ValidationError("max_permutations must be positive");
  if (clustering.k && *clustering.k == 0) throw ValidationError("clustering.k must be positive");
  if (clustering.k_max != 0 && (clustering.k_min == 0 || clustering.k_min > clustering.k_max)) {
    throw ValidationError("clustering.k_range must satisfy 1 <= min <= max");
  }
  if (clustering.restarts == 0) throw ValidationError("clustering.restarts must be positive");
  if (!clustering.reference.empty() && !fs::exists(resolve(clustering.reference))) {
    throw ValidationError("reference not found: " + resolve(clustering.reference).string());
  }
  if (!(pruning.alpha > 0.0 && pruning.alpha <= 1.0)) {
    throw ValidationError("pruning.alpha must lie in (0, 1]");
  }
}

ordered_json RunConfig::to_json() const {
  ordered_json j;
  j["seed"] = seed;
  ordered_json b;
  b["type"] = backend.type;
  if (!backend.spec.empty()) b["spec"] = backend.spec;
  if (!backend.corpus.empty()) b["corpus"] = backend.corpus;
  if (backend.type == "native") b["classifier"] = backend.classifier.to_json();
  if (!backend.command.empty()) b["command"] = backend.command;
  if (!backend.address.empty()) b["address"] = backend.address;
  if (backend.type == "external") {
    b["timeout_ms"] = backend.external.timeout.count();
    b["max_in_flight"] = backend.external.max_in_flight;
  }
  j["backend"] = std::move(b);
  j["estimator"] = estimator.to_json();
  ordered_json k;
  if (clustering.k) k["k"] = *clustering.k;
  if (clustering.k_max) k["k_range"] = {clustering.k_min, clustering.k_max};
  k["restarts"] = clustering.restarts;
  if (!clustering.reference.empty()) k["reference"] = clustering.reference;
  j["clustering"] = std::move(k);
  j["pruning"] = {{"n", pruning.n},
                  {"alpha", pruning.alpha},
                  {"random_clusters", pruning.random_clusters},
                  {"ranking", RankingName(pruning.ranking)},
                  {"include_self", pruning.include_self},
                  {"split", SplitName(pruning.split)}};
  return j;
}

std::string RunConfig::digest() const { return Sha256Hex(to_json().dump()); }

std::shared_ptr<Evaluator> MakeEvaluator(const RunConfig& config) {
  const auto& b = config.backend;
  std::shared_ptr<Evaluator> inner;
  if (b.type == "planted") {
    inner = std::make_shared<PlantedEvaluator>(PlantedGameSpec::Load(config.resolve(b.spec)));
  } else if (b.type == "native") {
    const auto corpus = LoadBlimp(config.resolve(b.corpus));
    inner = std::make_shared<NativeEvaluator>(corpus.paradigms, b.classifier,
                                              DeriveSeed(config.seed, "native"));
  } else if (b.type == "external") {
    std::unique_ptr<LineTransport> transport;
    std::string label;
    if (!b.command.empty()) {
      transport = ProcessTransport::Spawn(b.command);
      label = "cmd:" + Sha256Hex(b.command).substr(0, 12);
    } else {
      const auto [host, port] = SplitAddress(b.address);
      transport = TcpTransport::Connect(host, port);
      label = b.address;
    }
    inner = std::make_shared<ExternalEvaluator>(std::move(transport), b.external, label);
  } else {
    throw ValidationError("unknown backend type '" + b.type + "'");
  }
  std::shared_ptr<EvaluationCache> cache =
      config.cache.empty() ? std::make_shared<EvaluationCache>()
                           : std::make_shared<EvaluationCache>(config.resolve(config.cache));
  return std::make_shared<CachedEvaluator>(std::move(inner), std::move(cache));
}

std::vector<ParadigmRef> ConfiguredParadigms(const RunConfig& config) {
  std::vector<ParadigmRef> out;
  if (config.backend.type == "planted") {
    for (const auto& g : PlantedGameSpec::Load(config.resolve(config.backend.spec)).games) {
      out.push_back({g.paradigm_id, g.category});
    }
  } else {
    for (const auto& p : LoadBlimp(config.resolve(config.backend.corpus)).paradigms) {
      out.push_back({p.id, p.category});
    }
  }
  return out;
}

std::string CorpusDigestFor(const RunConfig& config) {
  if (config.backend.type == "planted") {
    return Sha256Hex(PlantedGameSpec::Load(config.resolve(config.backend.spec)).to_json().dump());
  }
  return CorpusDigest(LoadBlimp(config.resolve(config.backend.corpus)).paradigms);
}

namespace {

ordered_json Provenance(const std::string& command, const std::string& config_digest,
                        const std::string& corpus_digest) {
  ordered_json p;
  p["tool"] = "shvprobe";
  p["version"] = kToolVersion;
  p["command"] = command;
  p["config_digest"] = config_digest;
  p["corpus_digest"] = corpus_digest;
  return p;
}

std::string FileDigest(const fs::path& file) { return Sha256Hex(ReadTextFile(file)); }

fs::path OutputDir(const std::string& flag, const RunConfig* config) {
  if (!flag.empty()) return flag;
  if (config && !config->output.empty()) return config->resolve(config->output);
  throw ValidationError("no output directory: pass --out or set 'output' in the config");
}

void RequireFile(const std::string& what, const fs::path& file) {
  if (file.empty()) throw ValidationError("missing " + what);
  if (!fs::exists(file)) throw ValidationError(what + " not found: " + file.string());
}

// ---------------------------------------------------------------- ingest

struct IngestArgs {
  std::string corpus;
  std::string out;
  bool strict = false;
  std::size_t expected = 1000;
  std::uint64_t seed = 0;
};

int Ingest(const IngestArgs& a, std::ostream& out) {
  RequireFile("corpus directory", a.corpus);
  const auto result = LoadBlimp(a.corpus, {a.strict, a.expected});
  ordered_json manifest = CorpusManifest(result.paradigms, a.seed);
  const std::string corpus_digest = manifest["corpus_digest"];
  ordered_json settings = {{"strict", a.strict}, {"expected_pairs", a.expected}, {"seed", a.seed}};
  manifest["warnings"] = result.warnings;
  manifest["provenance"] = Provenance("ingest", Sha256Hex(settings.dump()), corpus_digest);
  WriteJsonFile(fs::path(a.out) / "manifest.json", manifest);
  out << "ingested " << result.paradigms.size() << " paradigms (" << result.warnings.size()
      << " warnings)\n";
  return kExitOk;
}

// ----------------------------------------------------------------- synth

struct SynthArgs {
  std::string spec;
  std::string out;
  std::optional<std::uint64_t> seed;
};

int Synth(const SynthArgs& a, std::ostream& out) {
  RequireFile("synth spec", a.spec);
  const json j = ReadJsonFile(a.spec);
  CheckKeys(j,
            {"family", "categories", "paradigms_per_category", "pairs_per_paradigm", "lexicon",
             "seed", "planted"},
            "synth spec");
  const SynthSpec spec = SynthSpec::FromJson(j);
  const std::uint64_t seed = a.seed ? *a.seed : j.value("seed", std::uint64_t{0});
  std::optional<PlantOptions> plant;
  if (j.contains("planted")) {
    CheckKeys(j.at("planted"),
              {"layers", "heads_per_layer", "support_size", "base", "support_mass", "noise",
               "synergies_per_game", "synergy_strength"},
              "planted");
    plant = PlantOptions::FromJson(j.at("planted"));
  }
  const auto paradigms = SynthParadigms(spec, seed);
  const fs::path dir(a.out);
  WriteBlimp(dir / "corpus", paradigms);
  ordered_json manifest = CorpusManifest(paradigms, seed);
  ordered_json settings = j;
  settings["seed"] = seed;
  manifest["provenance"] =
      Provenance("synth", Sha256Hex(settings.dump()), manifest["corpus_digest"].get<std::string>());
  WriteJsonFile(dir / "manifest.json", manifest);
  if (plant) {
    PlantFromCorpus(paradigms, *plant, DeriveSeed(seed, "planted")).save(dir / "planted.json");
  }
  out << "wrote " << paradigms.size() << " paradigms to " << (dir / "corpus").string() << "\n";
  return kExitOk;
}

// ------------------------------------------------------------- attribute

struct AttributeArgs {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> max_permutations;
  std::optional<double> truncation_fraction;
  std::optional<std::string> split;
  std::optional<std::size_t> workers;
  bool sequential = false;
  bool require_convergence = false;
};

int Attribute(const AttributeArgs& a, std::ostream& out, std::ostream& err) {
  RunConfig config = RunConfig::Load(a.config);
  if (a.seed) {
    config.seed = *a.seed;
    config.estimator.seed = *a.seed;
  }
  if (a.max_permutations) config.estimator.max_permutations = *a.max_permutations;
  if (a.truncation_fraction) config.estimator.truncation_fraction = *a.truncation_fraction;
  if (a.split) config.estimator.split = ParseSplit(*a.split);
  if (a.workers) config.estimator.workers = *a.workers;
  if (a.sequential) config.estimator.workers = 1;
  config.validate();
  const fs::path dir = OutputDir(a.out, &config);
  const auto paradigms = ConfiguredParadigms(config);
  if (paradigms.empty()) throw ValidationError("no paradigms to attribute");
  const std::string corpus_digest = CorpusDigestFor(config);

  auto evaluator = MakeEvaluator(config);
  for (const auto& p : paradigms) {
    if (!evaluator->has_paradigm(p.id)) {
      throw ValidationError("backend does not know paradigm '" + p.id + "'");
    }
  }
  const auto result = ComputeShvMatrix(*evaluator, paradigms, config.estimator);
  const auto provenance = Provenance("attribute", config.digest(), corpus_digest);
  WriteTextFile(dir / "shv.csv", ShvCsv(result.matrix));
  ordered_json sidecar = ShvSidecar(result, config.estimator, provenance);
  sidecar["config"] = config.to_json();
  WriteJsonFile(dir / "shv.json", sidecar);

  std::size_t unconverged = 0;
  for (const auto& r : result.reports) unconverged += r.all_converged ? 0 : 1;
  out << "attributed " << result.matrix.rows.size() << " paradigms over "
      << result.matrix.topology.total() << " heads; " << unconverged
      << " stopped at the permutation budget\n";
  if (!result.failures.empty()) {
    ordered_json e = {{"error",
                       {{"kind", "evaluation"},
                        {"exit_code", kExitBackend},
                        {"message", std::to_string(result.failures.size()) +
                                        " paradigm(s) failed: " + result.failures[0].message}}}};
    err << e.dump() << "\n";
    return kExitBackend;
  }
  if (a.require_convergence && unconverged > 0) {
    throw BudgetError(std::to_string(unconverged) +
                      " paradigm(s) exhausted max_permutations before every head converged");
  }
  return kExitOk;
}

// --------------------------------------------------------------- cluster

struct ClusterArgs {
  std::string shv;
  std::string out;
  std::string config;
  std::optional<std::size_t> k;
  std::string k_range;
  std::optional<std::size_t> restarts;
  std::optional<std::uint64_t> seed;
  std::string reference;
};

Partition ReadReference(const fs::path& csv) {
  std::istringstream in(ReadTextFile(csv));
  std::string line;
  std::getline(in, line);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = SplitCsvLine(line);
  if (header.size() < 2 || header[0] != "paradigm") {
    throw ParseError(csv.string(), 1, "reference header must start with 'paradigm'");
  }
  Partition p;
  std::size_t n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = SplitCsvLine(line);
    if (cells.size() != header.size()) throw ParseError(csv.string(), n, "wrong cell count");
    if (!p.emplace(cells[0], cells.back()).second) {
      throw ParseError(csv.string(), n, "duplicate paradigm '" + cells[0] + "'");
    }
  }
  return p;
}

ordered_json PurityJson(const PurityReport& r) {
  ordered_json j;
  j["purity"] = r.purity;
  j["reverse_purity"] = r.reverse_purity;
  j["aligned_purity"] = r.aligned_purity;
  j["aligned_mapping"] = r.aligned_mapping;
  j["majority"] = r.majority;
  return j;
}

int Cluster(const ClusterArgs& a, std::ostream& out) {
  std::optional<RunConfig> config;
  if (!a.config.empty()) {
    config = RunConfig::Load(a.config);
    config->validate();
  }
  ClusteringConfig c = config ? config->clustering : ClusteringConfig{};
  std::uint64_t seed = config ? config->seed : 0;
  if (a.k) c.k = *a.k;
  if (!a.k_range.empty()) {
    const auto colon = a.k_range.find(':');
    try {
      if (colon == std::string::npos) throw std::invalid_argument("no colon");
      c.k_min = std::stoul(a.k_range.substr(0, colon));
      c.k_max = std::stoul(a.k_range.substr(colon + 1));
    } catch (const std::logic_error&) {
      throw ValidationError("--k-range must look like MIN:MAX, got '" + a.k_range + "'");
    }
  }
  if (a.restarts) c.restarts = *a.restarts;
  if (a.seed) seed = *a.seed;
  fs::path reference;
  if (!a.reference.empty()) {
    reference = a.reference;
  } else if (config && !c.reference.empty()) {
    reference = config->resolve(c.reference);
  }
  RequireFile("SHV matrix", a.shv);
  if (!reference.empty()) RequireFile("reference", reference);
  if (c.restarts == 0) throw ValidationError("restarts must be positive");
  const fs::path dir = OutputDir(a.out, config ? &*config : nullptr);

  const ShvMatrix shv = ReadShvMatrix(a.shv);
  const auto rows = static_cast<std::size_t>(shv.rows.size());
  if (rows < 2) throw InsufficientDataError("clustering needs at least two paradigms");
  if (!c.k && c.k_max == 0) c.k = std::min<std::size_t>(10, rows);
  if (c.k && *c.k > rows) {
    throw ValidationError("k = " + std::to_string(*c.k) + " exceeds the " + std::to_string(rows) +
                          " paradigms");
  }
  if (c.k_max == 0) {
    c.k_min = 1;
    c.k_max = std::min(rows, std::max<std::size_t>(10, *c.k));
  }
  if (c.k_min == 0 || c.k_min > c.k_max || c.k_max > rows) {
    throw ValidationError("k range must lie within [1, " + std::to_string(rows) + "]");
  }

  const Eigen::MatrixXd x = Standardize(shv.means());
  const auto curve = InertiaCurve(x, static_cast<Eigen::Index>(c.k_min),
                                  static_cast<Eigen::Index>(c.k_max), seed, c.restarts);
  const Eigen::Index k = c.k ? static_cast<Eigen::Index>(*c.k) : ElbowK(curve);
  const auto model = KMeans(x, k, DeriveSeed(seed, static_cast<std::uint64_t>(k)), c.restarts);

  const auto ids = shv.paradigm_ids();
  std::map<std::string, std::string> categories;
  for (const auto& r : shv.rows) {
    if (!r.category.empty()) categories[r.paradigm_id] = r.category;
  }
  std::vector<Eigen::Index> labels(model.assignments.begin(), model.assignments.end());
  WriteTextFile(dir / "assignments.csv", AssignmentsCsv(ids, categories, labels));
  WriteTextFile(dir / "inertia.csv", InertiaCsv(curve));
  WriteTextFile(dir / "inertia.svg", InertiaSvg(curve));

  const Partition clusters = MakePartition(ids, labels);

  ordered_json report;
  ordered_json settings = {{"seed", seed},
                           {"k", k},
                           {"k_range", {c.k_min, c.k_max}},
                           {"restarts", c.restarts},
                           {"reference", reference.empty() ? "" : FileDigest(reference)}};
  report["provenance"] = Provenance("cluster", Sha256Hex(settings.dump()), FileDigest(a.shv));
  report["k"] = k;
  report["inertia"] = model.inertia;
  report["elbow_k"] = ElbowK(curve);
  if (categories.size() == rows) {
    report["against_categories"] = PurityJson(Purity(clusters, categories));
  }
  if (!reference.empty()) {
    report["against_reference"] = PurityJson(Purity(clusters, ReadReference(reference)));
  }
  WriteJsonFile(dir / "purity.json", report);
  out << "k = " << k << ", inertia " << FormatDouble(model.inertia) << "\n";
  return kExitOk;
}

// ----------------------------------------------------------------- prune

struct PruneArgs {
  std::string config;
  std::string shv;
  std::string clusters;
  std::string out;
  std::optional<std::size_t> n;
  std::optional<double> alpha;
  std::optional<std::size_t> random_clusters;
  std::optional<std::string> ranking;
  std::optional<std::uint64_t> seed;
  bool exclude_self = false;
};

int Prune(const PruneArgs& a, std::ostream& out) {
  RunConfig config = RunConfig::Load(a.config);
  if (a.n) config.pruning.n = *a.n;
  if (a.alpha) config.pruning.alpha = *a.alpha;
  if (a.random_clusters) config.pruning.random_clusters = *a.random_clusters;
  if (a.ranking) config.pruning.ranking = ParseRanking(*a.ranking);
  if (a.seed) config.seed = *a.seed;
  if (a.exclude_self) config.pruning.include_self = false;
  config.validate();
  RequireFile("SHV matrix", a.shv);
  RequireFile("cluster assignments", a.clusters);
  const fs::path dir = OutputDir(a.out, &config);

  const ShvMatrix shv = ReadShvMatrix(a.shv);
  const Assignments assignments = ReadAssignments(a.clusters);
  if (config.pruning.n > shv.topology.total()) {
    throw ValidationError("n = " + std::to_string(config.pruning.n) + " exceeds the " +
                          std::to_string(shv.topology.total()) + " heads");
  }
  std::set<std::string> shv_ids;
  for (const auto& r : shv.rows) shv_ids.insert(r.paradigm_id);
  for (const auto& [id, label] : assignments.clusters) {
    if (!shv_ids.count(id)) throw ValidationError("clustered paradigm '" + id + "' has no SHV row");
  }
  if (assignments.clusters.size() != shv_ids.size()) {
    throw ValidationError("assignments must cover every SHV paradigm");
  }

  auto evaluator = MakeEvaluator(config);
  if (evaluator->topology().total() != shv.topology.total()) {
    throw ValidationError("SHV matrix has " + std::to_string(shv.topology.total()) +
                          " heads but the backend has " +
                          std::to_string(evaluator->topology().total()));
  }
  const auto matrix = ComputePruneMatrix(*evaluator, shv, config.pruning.n, config.pruning.split,
                                         config.pruning.ranking);
  const auto analysis = AnalyzeImpact(matrix.matrix, assignments.clusters, config.pruning.alpha,
                                      config.pruning.include_self);
  std::vector<std::size_t> sizes;
  for (const auto& c : analysis.clusters) sizes.push_back(c.impact.members.size());
  const auto random = RandomClusterExperiment(
      matrix.matrix, sizes, config.pruning.random_clusters, config.pruning.alpha,
      DeriveSeed(config.seed, "random-clusters"), config.pruning.include_self);

  WriteTextFile(dir / "prune_matrix.csv", PruneMatrixCsv(matrix.matrix));
  ordered_json report;
  ordered_json inputs = {{"shv", FileDigest(a.shv)}, {"clusters", FileDigest(a.clusters)}};
  report["provenance"] = Provenance("prune", config.digest(), CorpusDigestFor(config));
  report["provenance"]["inputs"] = inputs;
  report["n"] = config.pruning.n;
  report["ranking"] = RankingName(config.pruning.ranking);
  report["split"] = SplitName(config.pruning.split);
  report["impact"] = ImpactToJson(analysis);
  report["random_clusters"] = {{"runs", random.runs},
                               {"significant", random.significant},
                               {"alpha", config.pruning.alpha},
                               {"family_size", sizes.size()},
                               {"sizes", sizes}};
  ordered_json failures = ordered_json::array();
  for (const auto& f : matrix.failures) {
    failures.push_back(
        {{"mask_source", f.mask_source}, {"evaluated", f.evaluated}, {"message", f.message}});
  }
  report["failures"] = failures;
  WriteJsonFile(dir / "impact.json", report);
  WriteTextFile(dir / "impact.svg", ImpactSvg(analysis));

  std::size_t significant = 0;
  for (const auto& c : analysis.clusters) significant += c.significant ? 1 : 0;
  out << significant << " of " << analysis.clusters.size() << " clusters significant; "
      << random.significant << " of " << random.runs << " random clusters significant\n";
  if (!matrix.failures.empty()) {
    throw EvaluationError(std::to_string(matrix.failures.size()) +
                          " prune evaluations failed: " + matrix.failures[0].message);
  }
  return kExitOk;
}

// ---------------------------------------------------------------- oracle

struct OracleArgs {
  std::string planted;
  std::string config;
  std::string out;
  std::vector<std::string> paradigms;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> max_permutations;
  std::optional<double> truncation_fraction;
  double sign_threshold = 0.02;
};

int Oracle(const OracleArgs& a, std::ostream& out) {
  EstimatorConfig est;
  std::string spec_file = a.planted;
  std::optional<RunConfig> config;
  if (!a.config.empty()) {
    config = RunConfig::Load(a.config);
    est = config->estimator;
    if (spec_file.empty() && config->backend.type == "planted") {
      spec_file = config->resolve(config->backend.spec).string();
    }
  }
  if (a.seed) est.seed = *a.seed;
  if (a.max_permutations) est.max_permutations = *a.max_permutations;
  if (a.truncation_fraction) est.truncation_fraction = *a.truncation_fraction;
  est.workers = 1;
  try {
    est.validate();
  } catch (const ConfigurationError& e) {
    throw ValidationError(e.what());
  }
  RequireFile("planted spec", spec_file);
  const fs::path dir = OutputDir(a.out, config ? &*config : nullptr);
  const PlantedGameSpec spec = PlantedGameSpec::Load(spec_file);
  if (spec.topology.total() > kMaxExactHeads) {
    throw BudgetError("exact oracle limited to " + std::to_string(kMaxExactHeads) +
                      " heads; spec has " + std::to_string(spec.topology.total()));
  }
  std::vector<ParadigmRef> refs;
  if (a.paradigms.empty()) {
    for (const auto& g : spec.games) refs.push_back({g.paradigm_id, g.category});
  } else {
    for (const auto& id : a.paradigms) refs.push_back({id, spec.game(id).category});
  }

  PlantedEvaluator evaluator(spec);
  ShvMatrix exact;
  exact.topology = spec.topology;
  for (const auto& r : refs) {
    auto row = ExactShv(evaluator, r.id, est.split);
    row.category = r.category;
    exact.rows.push_back(std::move(row));
  }
  const auto estimate = ComputeShvMatrix(evaluator, refs, est);
  if (!estimate.failures.empty()) throw EvaluationError(estimate.failures[0].message);

  std::string table = "paradigm,head,exact,estimate,abs_error,sign_checked,sign_agrees\n";
  ordered_json per = ordered_json::array();
  double worst = 0.0;
  std::size_t sign_failures = 0;
  for (std::size_t r = 0; r < refs.size(); ++r) {
    double row_worst = 0.0;
    for (std::size_t h = 0; h < spec.topology.total(); ++h) {
      const double x = exact.rows[r].estimates[h].mean;
      const double y = estimate.matrix.rows[r].estimates[h].mean;
      const double e = std::abs(x - y);
      const bool checked = std::abs(x) >= a.sign_threshold;
      const bool agrees = !checked || (x > 0) == (y > 0);
      sign_failures += agrees ? 0 : 1;
      row_worst = std::max(row_worst, e);
      table += refs[r].id + "," + spec.topology.label(h) + "," + FormatDouble(x) + "," +
               FormatDouble(y) + "," + FormatDouble(e) + "," + (checked ? "1" : "0") + "," +
               (agrees ? "1" : "0") + "\n";
    }
    worst = std::max(worst, row_worst);
    per.push_back({{"paradigm", refs[r].id},
                   {"max_abs_error", row_worst},
                   {"permutations", estimate.reports[r].permutations},
                   {"all_converged", estimate.reports[r].all_converged}});
  }
  WriteTextFile(dir / "oracle_shv.csv", ShvCsv(exact));
  WriteTextFile(dir / "estimate_shv.csv", ShvCsv(estimate.matrix));
  WriteTextFile(dir / "comparison.csv", table);
  ordered_json report;
  ordered_json settings = est.to_json();
  settings["sign_threshold"] = a.sign_threshold;
  report["provenance"] =
      Provenance("oracle", Sha256Hex(settings.dump()), Sha256Hex(spec.to_json().dump()));
  report["estimator"] = est.to_json();
  report["max_abs_error"] = worst;
  report["sign_threshold"] = a.sign_threshold;
  report["sign_failures"] = sign_failures;
  report["paradigms"] = per;
  WriteJsonFile(dir / "oracle.json", report);
  out << "max abs error " << FormatDouble(worst) << ", sign failures " << sign_failures << "\n";
  return kExitOk;
}

// ----------------------------------------------------------- conformance

struct ConformanceArgs {
  std::string command;
  std::string address;
  std::string paradigm;
  std::string transcript;
  std::string out;
  std::optional<std::size_t> expect_layers;
  std::optional<std::size_t> expect_heads;
  int timeout_ms = 30000;
};

class Conformance {
 public:
  Conformance(LineTransport& t, std::chrono::milliseconds timeout) : t_(t), timeout_(timeout) {}

  std::string exchange(const std::string& line) {
    t_.send_line(line);
    return receive();
  }
  std::string receive() {
    auto reply = t_.receive_line(timeout_);
    if (!reply) throw EvaluationError("host did not answer within the timeout");
    return *reply;
  }
  void check(const std::string& name, bool ok, const std::string& detail = "") {
    checks_.push_back({{"check", name}, {"pass", ok}, {"detail", detail}});
    failed_ += ok ? 0 : 1;
  }
  ordered_json report() const { return checks_; }
  std::size_t failed() const { return failed_; }

 private:
  LineTransport& t_;
  std::chrono::milliseconds timeout_;
  ordered_json checks_ = ordered_json::array();
  std::size_t failed_ = 0;
};

int RunConformance(const ConformanceArgs& a, std::ostream& out) {
  if (a.command.empty() == a.address.empty()) {
    throw ValidationError("pass exactly one of --host-cmd or --address");
  }
  if (a.paradigm.empty()) throw ValidationError("--paradigm is required");
  if (!a.transcript.empty()) RequireFile("transcript", a.transcript);
  if (a.timeout_ms <= 0) throw ValidationError("--timeout-ms must be positive");
  std::unique_ptr<LineTransport> transport;
  if (!a.command.empty()) {
    transport = ProcessTransport::Spawn(a.command);
  } else {
    const auto [host, port] = SplitAddress(a.address);
    transport = TcpTransport::Connect(host, port);
  }
  Conformance c(*transport, std::chrono::milliseconds(a.timeout_ms));
  using wire::DecodeResponse;

  std::uint64_t id = 0;
  const auto hello = DecodeResponse(c.exchange(wire::EncodeTopologyRequest(id)));
  const bool hello_ok = hello.id == id && !hello.error && hello.body.contains("layers") &&
                        hello.body.contains("heads_per_layer") &&
                        hello.body.value("protocol", -1) == wire::kProtocolVersion;
  c.check("handshake", hello_ok, hello_ok ? "" : "bad topology response");
  if (!hello_ok) throw ProtocolError("handshake failed; cannot continue");
  const ModelTopology topo(hello.body.at("layers").get<std::size_t>(),
                           hello.body.at("heads_per_layer").get<std::size_t>());
  if (a.expect_layers || a.expect_heads) {
    const bool ok = (!a.expect_layers || *a.expect_layers == topo.layers()) &&
                    (!a.expect_heads || *a.expect_heads == topo.heads_per_layer());
    c.check("topology", ok,
            std::to_string(topo.layers()) + "x" + std::to_string(topo.heads_per_layer()));
  }

  const GateMask on = GateMask::AllOn(topo);
  const std::string first =
      c.exchange(wire::EncodeEvaluateRequest(++id, on, a.paradigm, Split::kDev));
  const auto r1 = DecodeResponse(first);
  const bool eval_ok = r1.id == id && !r1.error && r1.body.contains("accuracy") &&
                       r1.body.at("accuracy").get<double>() >= 0.0 &&
                       r1.body.at("accuracy").get<double>() <= 1.0;
  c.check("evaluate_all_on", eval_ok, r1.error.value_or(""));

  const auto r2 =
      DecodeResponse(c.exchange(wire::EncodeEvaluateRequest(++id, on, a.paradigm, Split::kDev)));
  const bool same = eval_ok && r2.id == id && !r2.error &&
                    r2.body.value("accuracy", -1.0) == r1.body.value("accuracy", -1.0) &&
                    r2.body.value("n", json()) == r1.body.value("n", json());
  c.check("repeat_identical", same);

  std::set<std::uint64_t> sent, seen;
  const GateMask off = GateMask::AllOff(topo);
  for (int i = 0; i < 3; ++i) {
    ++id;
    sent.insert(id);
    transport->send_line(
        wire::EncodeEvaluateRequest(id, i % 2 ? off : on, a.paradigm, Split::kDev));
  }
  for (int i = 0; i < 3; ++i) seen.insert(DecodeResponse(c.receive()).id);
  c.check("pipelined_ids", sent == seen);

  const auto bad = DecodeResponse(
      c.exchange(wire::EncodeEvaluateRequest(++id, on, "__no_such_paradigm__", Split::kDev)));
  c.check("error_unknown_paradigm", bad.id == id && bad.error.has_value());

  const auto short_mask = DecodeResponse(c.exchange(wire::EncodeEvaluateRequest(
      ++id, GateMask::FromBits(std::vector<std::uint8_t>(topo.total() + 1, 1)), a.paradigm,
      Split::kDev)));
  c.check("error_mask_length", short_mask.id == id && short_mask.error.has_value());

  if (!a.transcript.empty()) {
    std::istringstream in(ReadTextFile(a.transcript));
    std::string line;
    std::size_t n = 0, mismatched = 0;
    std::string first_mismatch;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      ++n;
      const json entry = json::parse(line);
      const std::string got = c.exchange(entry.at("request").get<std::string>());
      if (got != entry.at("response").get<std::string>()) {
        if (mismatched++ == 0) first_mismatch = "line " + std::to_string(n) + ": " + got;
      }
    }
    c.check("golden_transcript", mismatched == 0,
            std::to_string(n - mismatched) + "/" + std::to_string(n) + " identical" +
                (first_mismatch.empty() ? "" : "; " + first_mismatch));
  }

  ordered_json report;
  report["provenance"] = Provenance("conformance", "", "");
  report["topology"] = {{"layers", topo.layers()}, {"heads_per_layer", topo.heads_per_layer()}};
  report["checks"] = c.report();
  report["failed"] = c.failed();
  if (!a.out.empty()) WriteJsonFile(fs::path(a.out) / "conformance.json", report);
  for (const auto& check : c.report()) {
    const auto detail = check["detail"].get<std::string>();
    out << (check["pass"].get<bool>() ? "[PASS] " : "[FAIL] ") << check["check"].get<std::string>()
        << (detail.empty() ? "" : " (" + detail + ")") << "\n";
  }
  return c.failed() == 0 ? kExitOk : kExitBackend;
}

void EmitError(std::ostream& err, const char* kind, int code, const std::string& message) {
  ordered_json e = {{"error", {{"kind", kind}, {"exit_code", code}, {"message", message}}}};
  err << e.dump() << "\n";
}

}  // namespace

int RunCli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Shapley head value attribution toolkit", "shvprobe"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  IngestArgs ingest;
  auto* ing = app.add_subcommand("ingest", "Validate a minimal-pair corpus and write its manifest");
  ing->add_option("--corpus", ingest.corpus, "Directory of paradigm .jsonl files")->required();
  ing->add_option("--out", ingest.out, "Output directory")->required();
  ing->add_flag("--strict", ingest.strict, "Fail when a paradigm has an unexpected pair count");
  ing->add_option("--expected-pairs", ingest.expected, "Expected pairs per paradigm");
  ing->add_option("--seed", ingest.seed, "Seed recorded for the split assignment");

  SynthArgs synth;
  auto* syn = app.add_subcommand("synth", "Generate a synthetic minimal-pair corpus");
  syn->add_option("--spec", synth.spec, "Synthetic corpus spec (JSON)")->required();
  syn->add_option("--out", synth.out, "Output directory")->required();
  syn->add_option("--seed", synth.seed, "Overrides the seed in the synth file");

  AttributeArgs attr;
  auto* att = app.add_subcommand("attribute", "Estimate the SHV matrix");
  att->add_option("--config", attr.config, "Run config (JSON)")->required();
  att->add_option("--out", attr.out, "Output directory (overrides config)");
  att->add_option("--seed", attr.seed, "Global seed");
  att->add_option("--max-permutations", attr.max_permutations, "Permutation budget per paradigm");
  att->add_option("--truncation-fraction", attr.truncation_fraction, "Truncation threshold");
  att->add_option("--split", attr.split, "Split evaluated during estimation");
  att->add_option("--workers", attr.workers, "Concurrent permutation walks");
  att->add_flag("--sequential", attr.sequential, "Evaluate one walk at a time");
  att->add_flag("--require-convergence", attr.require_convergence,
                "Exit 4 when a paradigm stops at the permutation budget");

  ClusterArgs clus;
  auto* clu = app.add_subcommand("cluster", "Cluster paradigms by their SHV profiles");
  clu->add_option("--shv", clus.shv, "SHV matrix CSV")->required();
  clu->add_option("--out", clus.out, "Output directory");
  clu->add_option("--config", clus.config, "Run config supplying clustering defaults");
  clu->add_option("--k", clus.k,
                  "Number of clusters (default: elbow of --k-range, else min(10, paradigms))");
  clu->add_option("--k-range", clus.k_range, "Inertia curve range MIN:MAX");
  clu->add_option("--restarts", clus.restarts, "k-means restarts");
  clu->add_option("--seed", clus.seed, "Seed");
  clu->add_option("--reference", clus.reference, "Reference partition CSV (paradigm,...,label)");

  PruneArgs prune;
  auto* pru = app.add_subcommand("prune", "Prune top heads and test cluster impact");
  pru->add_option("--config", prune.config, "Run config (JSON)")->required();
  pru->add_option("--shv", prune.shv, "SHV matrix CSV")->required();
  pru->add_option("--clusters", prune.clusters, "Cluster assignments CSV")->required();
  pru->add_option("--out", prune.out, "Output directory (overrides config)");
  pru->add_option("--n", prune.n, "Heads pruned per paradigm");
  pru->add_option("--alpha", prune.alpha, "Significance level after correction");
  pru->add_option("--random-clusters", prune.random_clusters, "Random clusters to test");
  pru->add_option("--ranking", prune.ranking, "signed or absolute");
  pru->add_option("--seed", prune.seed, "Seed");
  pru->add_flag("--exclude-self", prune.exclude_self,
                "Drop a paradigm's own mask from its in-cluster deltas");

  OracleArgs oracle;
  auto* ora = app.add_subcommand("oracle", "Exact SHV by enumeration and estimator comparison");
  ora->add_option("--planted", oracle.planted, "Planted game spec");
  ora->add_option("--config", oracle.config, "Run config supplying estimator settings");
  ora->add_option("--out", oracle.out, "Output directory");
  ora->add_option("--paradigm", oracle.paradigms, "Restrict to these paradigms");
  ora->add_option("--seed", oracle.seed, "Seed");
  ora->add_option("--max-permutations", oracle.max_permutations, "Permutation budget");
  ora->add_option("--truncation-fraction", oracle.truncation_fraction, "Truncation threshold");
  ora->add_option("--sign-threshold", oracle.sign_threshold,
                  "Exact values at least this large must match in sign");

  ConformanceArgs conf;
  auto* con = app.add_subcommand("conformance", "Check an evaluation host against the protocol");
  con->add_option("--host-cmd", conf.command, "Command that serves the protocol on stdio");
  con->add_option("--address", conf.address, "host:port of a TCP host");
  con->add_option("--paradigm", conf.paradigm, "Paradigm the host can evaluate");
  con->add_option("--transcript", conf.transcript, "Golden transcript (JSON lines)");
  con->add_option("--out", conf.out, "Directory for conformance.json");
  con->add_option("--expect-layers", conf.expect_layers, "Expected layer count");
  con->add_option("--expect-heads", conf.expect_heads, "Expected heads per layer");
  con->add_option("--timeout-ms", conf.timeout_ms, "Per-response timeout");

  std::vector<const char*> argv{"shvprobe"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << kToolVersion << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kExitOk;
    }
    EmitError(err, "usage", kExitValidation, e.what());
    return kExitValidation;
  }

  try {
    if (*ing) return Ingest(ingest, out);
    if (*syn) return Synth(synth, out);
    if (*att) return Attribute(attr, out, err);
    if (*clu) return Cluster(clus, out);
    if (*pru) return Prune(prune, out);
    if (*ora) return Oracle(oracle, out);
    if (*con) return RunConformance(conf, out);
  } catch (const Error& e) {
    const int code = ExitCodeFor(e.kind());
    EmitError(err, ErrorKindName(e.kind()), code, e.what());
    return code;
  } catch (const nlohmann::json::exception& e) {
    EmitError(err, "validation", kExitValidation, e.what());
    return kExitValidation;
  } catch (const fs::filesystem_error& e) {
    EmitError(err, "input", kExitValidation, e.what());
    return kExitValidation;
  } catch (const std::exception& e) {
    EmitError(err, "internal", 1, e.what());
    return 1;
  }
  return kExitValidation;
}

}  // namespace shvprobe
