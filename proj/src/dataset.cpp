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

#include "shvprobe/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <functional>
#include <numeric>
#include <span>
#include <sstream>

#include "shvprobe/digest.hpp"
#include "shvprobe/errors.hpp"
#include "shvprobe/rng.hpp"

namespace shvprobe {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

std::string_view SplitName(Split split) {
  switch (split) {
    case Split::kTrain:
      return "train";
    case Split::kDev:
      return "dev";
    case Split::kAttribution:
      return "attribution";
  }
  return "?";
}

Split ParseSplit(std::string_view name) {
  if (name == "train") return Split::kTrain;
  if (name == "dev") return Split::kDev;
  if (name == "attribution") return Split::kAttribution;
  throw InputError("unknown split '" + std::string(name) + "'");
}

namespace {

std::string RequireString(const json& record, const char* key, const std::string& file,
                          std::size_t line) {
  auto it = record.find(key);
  if (it == record.end() || !it->is_string()) {
    throw ParseError(file, line, std::string("missing string field '") + key + "'");
  }
  return it->get<std::string>();
}

}  // namespace

LoadResult LoadBlimp(const fs::path& directory, const LoadOptions& options) {
  if (!fs::is_directory(directory)) {
    throw InputError("corpus directory '" + directory.string() + "' does not exist");
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(directory)) {
    if (entry.is_regular_file() && entry.path().extension() == ".jsonl") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());

  LoadResult result;
  for (const auto& path : files) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path.string());
    const std::string file = path.filename().string();
    Paradigm paradigm;
    std::string text;
    std::size_t line_no = 0;
    while (std::getline(in, text)) {
      ++line_no;
      if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
      json record;
      try {
        record = json::parse(text);
      } catch (const json::parse_error& e) {
        throw ParseError(file, line_no, e.what());
      }
      if (!record.is_object()) throw ParseError(file, line_no, "record is not an object");
      SentencePair pair{RequireString(record, "sentence_good", file, line_no),
                        RequireString(record, "sentence_bad", file, line_no)};
      if (pair.good.empty() || pair.bad.empty()) {
        throw ParseError(file, line_no, "empty sentence");
      }
      if (pair.good == pair.bad) {
        throw ParseError(file, line_no, "grammatical and ungrammatical sentences are identical");
      }
      std::string uid = RequireString(record, "UID", file, line_no);
      std::string term = RequireString(record, "linguistics_term", file, line_no);
      if (paradigm.pairs.empty()) {
        paradigm.id = std::move(uid);
        paradigm.category = std::move(term);
      } else if (uid != paradigm.id) {
        throw ParseError(file, line_no, "UID '" + uid + "' differs from '" + paradigm.id + "'");
      }
      paradigm.pairs.push_back(std::move(pair));
    }
    if (paradigm.pairs.empty()) {
      result.warnings.push_back(file + ": no records, skipped");
      continue;
    }
    if (paradigm.pairs.size() != options.expected_pairs) {
      std::string message = file + ": paradigm '" + paradigm.id + "' has " +
                            std::to_string(paradigm.pairs.size()) + " pairs, expected " +
                            std::to_string(options.expected_pairs);
      if (options.strict) throw ValidationError(message);
      result.warnings.push_back(std::move(message));
    }
    result.paradigms.push_back(std::move(paradigm));
  }
  return result;
}

void WriteBlimp(const fs::path& directory, const std::vector<Paradigm>& paradigms) {
  fs::create_directories(directory);
  for (const auto& p : paradigms) {
    std::ofstream out(directory / (p.id + ".jsonl"), std::ios::binary);
    if (!out) throw InputError("cannot write " + (directory / (p.id + ".jsonl")).string());
    for (const auto& pair : p.pairs) {
      ordered_json record;
      record["sentence_good"] = pair.good;
      record["sentence_bad"] = pair.bad;
      record["UID"] = p.id;
      record["linguistics_term"] = p.category;
      out << record.dump() << '\n';
    }
  }
}

ParadigmSplits SplitParadigm(const Paradigm& paradigm, std::uint64_t seed) {
  const std::size_t n = paradigm.pairs.size();
  if (n < 3) {
    throw InsufficientDataError("paradigm '" + paradigm.id + "' has " + std::to_string(n) +
                                " pairs; at least 3 are needed to split");
  }
  std::vector<SentencePair> pairs = paradigm.pairs;
  Rng rng(seed);
  rng.shuffle(std::span(pairs));

  const std::size_t held = std::max<std::size_t>(1, n / 10);
  const std::size_t train = n - 2 * held;
  ParadigmSplits s;
  s.train.assign(pairs.begin(), pairs.begin() + static_cast<std::ptrdiff_t>(train));
  s.dev.assign(pairs.begin() + static_cast<std::ptrdiff_t>(train),
               pairs.begin() + static_cast<std::ptrdiff_t>(train + held));
  s.attribution.assign(pairs.begin() + static_cast<std::ptrdiff_t>(train + held), pairs.end());
  return s;
}

std::vector<SentencePair> DecouplePairs(std::vector<SentencePair> split, std::uint64_t seed) {
  std::vector<std::string> bad;
  bad.reserve(split.size());
  for (auto& p : split) bad.push_back(std::move(p.bad));
  Rng rng(seed);
  rng.shuffle(std::span(bad));
  for (std::size_t i = 0; i < split.size(); ++i) split[i].bad = std::move(bad[i]);
  return split;
}

std::vector<BinaryExample> ToBinaryExamples(const std::vector<SentencePair>& split,
                                            std::uint64_t seed) {
  Rng rng(seed);
  std::vector<BinaryExample> out;
  out.reserve(split.size());
  for (const auto& p : split) {
    if (rng.coin()) {
      out.push_back({p.bad, p.good, 1});
    } else {
      out.push_back({p.good, p.bad, 0});
    }
  }
  return out;
}

const std::vector<BinaryExample>& ParadigmExamples::split(Split s) const {
  switch (s) {
    case Split::kTrain:
      return train;
    case Split::kDev:
      return dev;
    case Split::kAttribution:
      return attribution;
  }
  return attribution;
}

ParadigmExamples PrepareParadigm(const Paradigm& paradigm, std::uint64_t seed) {
  const std::uint64_t base = DeriveSeed(seed, paradigm.id);
  ParadigmSplits s = SplitParadigm(paradigm, DeriveSeed(base, "split"));
  ParadigmExamples ex;
  ex.paradigm_id = paradigm.id;
  ex.category = paradigm.category;
  ex.train = ToBinaryExamples(DecouplePairs(std::move(s.train), DeriveSeed(base, "decouple/train")),
                              DeriveSeed(base, "label/train"));
  ex.dev = ToBinaryExamples(DecouplePairs(std::move(s.dev), DeriveSeed(base, "decouple/dev")),
                            DeriveSeed(base, "label/dev"));
  ex.attribution = ToBinaryExamples(s.attribution, DeriveSeed(base, "label/attribution"));
  return ex;
}

std::vector<BinaryExample> MergeTraining(const std::vector<ParadigmExamples>& paradigms,
                                         std::uint64_t seed) {
  std::vector<BinaryExample> merged;
  for (const auto& p : paradigms) merged.insert(merged.end(), p.train.begin(), p.train.end());
  Rng rng(DeriveSeed(seed, "merge"));
  rng.shuffle(std::span(merged));
  return merged;
}

std::vector<std::string> Tokenize(std::string_view sentence) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < sentence.size()) {
    while (i < sentence.size() && std::isspace(static_cast<unsigned char>(sentence[i]))) ++i;
    std::size_t j = i;
    while (j < sentence.size() && !std::isspace(static_cast<unsigned char>(sentence[j]))) ++j;
    if (j > i) tokens.emplace_back(sentence.substr(i, j - i));
    i = j;
  }
  return tokens;
}

// ---------------------------------------------------------------------------
// Synthetic corpus.

SynthLexicon SynthLexicon::Default() {
  SynthLexicon lex;
  lex.names = {"John", "Peter", "Carl", "Bill", "Mark", "Tom", "Alan", "Paul"};
  lex.adjectives = {"big", "old", "red", "small", "quiet", "happy"};
  lex.nouns = {{"dog", "dogs"},     {"cat", "cats"},         {"teacher", "teachers"},
               {"horse", "horses"}, {"student", "students"}, {"car", "cars"}};
  lex.verbs = {{"runs", "run"},
               {"sleeps", "sleep"},
               {"sings", "sing"},
               {"waits", "wait"},
               {"laughs", "laugh"}};
  lex.past = {{"ate", "eated"},
              {"took", "taked"},
              {"made", "maked"},
              {"found", "finded"},
              {"brought", "bringed"}};
  lex.vowel_nouns = {"apple", "egg", "owl", "actor", "island"};
  return lex;
}

namespace {

template <typename T>
void ReadList(const json& lex, const char* key, std::vector<T>& out) {
  if (lex.contains(key)) out = lex.at(key).get<std::vector<T>>();
}

}  // namespace

SynthSpec SynthSpec::FromJson(const json& j) {
  SynthSpec spec;
  spec.family = j.value("family", spec.family);
  spec.categories = j.value("categories", spec.categories);
  spec.paradigms_per_category = j.value("paradigms_per_category", spec.paradigms_per_category);
  spec.pairs_per_paradigm = j.value("pairs_per_paradigm", spec.pairs_per_paradigm);
  if (j.contains("lexicon")) {
    const json& lex = j.at("lexicon");
    ReadList(lex, "names", spec.lexicon.names);
    ReadList(lex, "adjectives", spec.lexicon.adjectives);
    ReadList(lex, "nouns", spec.lexicon.nouns);
    ReadList(lex, "verbs", spec.lexicon.verbs);
    ReadList(lex, "past", spec.lexicon.past);
    ReadList(lex, "vowel_nouns", spec.lexicon.vowel_nouns);
  }
  return spec;
}

const std::vector<std::string>& SynthPhenomena() {
  static const std::vector<std::string> kNames = {
      "subject_verb_agreement", "determiner_noun_agreement", "anaphor_agreement", "npi_licensing",
      "irregular_past",         "article_agreement"};
  return kNames;
}

namespace {

template <typename T>
const T& Pick(Rng& rng, const std::vector<T>& items) {
  return items[rng.uniform_index(items.size())];
}

struct Draft {
  std::vector<std::string> tokens;
  std::size_t slot = 0;  // index of the contrast token
  std::string good;
  std::string bad;
};

// Each phenomenon contrasts exactly one token between the two sentences.
Draft DraftPair(std::size_t phenomenon, std::size_t variant, Rng& rng, const SynthLexicon& lex) {
  Draft d;
  auto& t = d.tokens;
  auto noun_phrase = [&](const std::string& det, const std::string& noun) {
    t.push_back(det);
    if (variant == 1) t.push_back(Pick(rng, lex.adjectives));
    t.push_back(noun);
  };
  auto mark = [&](std::string good, std::string bad) {
    d.slot = t.size();
    d.good = std::move(good);
    d.bad = std::move(bad);
    t.emplace_back();
  };
  if (variant == 2) {
    t.insert(t.end(), {"we", "think", "that"});
  }
  switch (phenomenon) {
    case 0: {
      noun_phrase("the", Pick(rng, lex.nouns).first);
      const auto& v = Pick(rng, lex.verbs);
      mark(v.first, v.second);
      break;
    }
    case 1: {
      t.push_back(Pick(rng, lex.names));
      t.push_back("saw");
      t.push_back("this");
      if (variant == 1) t.push_back(Pick(rng, lex.adjectives));
      const auto& n = Pick(rng, lex.nouns);
      mark(n.first, n.second);
      break;
    }
    case 2: {
      t.push_back(Pick(rng, lex.names));
      if (variant == 1) t.push_back("quietly");
      t.push_back("praised");
      mark("himself", "herself");
      break;
    }
    case 3: {
      mark("no", "the");
      if (variant == 1) t.push_back(Pick(rng, lex.adjectives));
      t.push_back(Pick(rng, lex.nouns).first);
      t.push_back("ever");
      t.push_back(Pick(rng, lex.verbs).first);
      break;
    }
    case 4: {
      t.push_back(Pick(rng, lex.names));
      const auto& v = Pick(rng, lex.past);
      mark(v.first, v.second);
      noun_phrase("the", Pick(rng, lex.nouns).first);
      break;
    }
    case 5: {
      t.push_back(Pick(rng, lex.names));
      t.push_back("saw");
      mark("an", "a");
      if (variant == 1) t.push_back("old");
      t.push_back(Pick(rng, lex.vowel_nouns));
      break;
    }
    default:
      throw ConfigurationError("unknown phenomenon");
  }
  if (variant == 3) t.push_back("today");
  t.push_back(".");
  return d;
}

std::string Join(const std::vector<std::string>& tokens) {
  std::string s;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) s += ' ';
    s += tokens[i];
  }
  return s;
}

void RequireNonEmpty(bool empty, const char* what) {
  if (empty) throw ConfigurationError(std::string("synthetic lexicon: '") + what + "' is empty");
}

}  // namespace

std::vector<Paradigm> SynthParadigms(const SynthSpec& spec, std::uint64_t seed) {
  if (spec.family != "agreement") {
    throw ConfigurationError("unknown synthetic template family '" + spec.family + "'");
  }
  const auto& phenomena = SynthPhenomena();
  if (spec.categories == 0 || spec.categories > phenomena.size()) {
    throw ConfigurationError("categories must be in [1, " + std::to_string(phenomena.size()) + "]");
  }
  if (spec.paradigms_per_category == 0 || spec.pairs_per_paradigm == 0) {
    throw ConfigurationError("paradigm and pair counts must be positive");
  }
  const SynthLexicon& lex = spec.lexicon;
  RequireNonEmpty(lex.names.empty(), "names");
  RequireNonEmpty(lex.adjectives.empty(), "adjectives");
  RequireNonEmpty(lex.nouns.empty(), "nouns");
  RequireNonEmpty(lex.verbs.empty(), "verbs");
  RequireNonEmpty(lex.past.empty(), "past");
  RequireNonEmpty(lex.vowel_nouns.empty(), "vowel_nouns");

  std::vector<Paradigm> out;
  for (std::size_t c = 0; c < spec.categories; ++c) {
    for (std::size_t j = 0; j < spec.paradigms_per_category; ++j) {
      Paradigm p;
      p.category = phenomena[c];
      p.id = phenomena[c] + "_" + std::to_string(j + 1);
      Rng rng(DeriveSeed(seed, p.id));
      const std::size_t variant = j % 4;
      p.pairs.reserve(spec.pairs_per_paradigm);
      for (std::size_t k = 0; k < spec.pairs_per_paradigm; ++k) {
        Draft d = DraftPair(c, variant, rng, lex);
        d.tokens[d.slot] = d.good;
        std::string good = Join(d.tokens);
        d.tokens[d.slot] = d.bad;
        p.pairs.push_back({std::move(good), Join(d.tokens)});
      }
      out.push_back(std::move(p));
    }
  }
  return out;
}

std::string ParadigmDigest(const Paradigm& paradigm) {
  Sha256 h;
  h.update(paradigm.id);
  h.update("\n");
  h.update(paradigm.category);
  h.update("\n");
  for (const auto& pair : paradigm.pairs) {
    h.update(pair.good);
    h.update("\t");
    h.update(pair.bad);
    h.update("\n");
  }
  return h.hex_digest();
}

std::string CorpusDigest(const std::vector<Paradigm>& paradigms) {
  std::vector<std::pair<std::string, std::string>> digests;
  for (const auto& p : paradigms) digests.emplace_back(p.id, ParadigmDigest(p));
  std::sort(digests.begin(), digests.end());
  Sha256 h;
  for (const auto& [id, digest] : digests) {
    h.update(digest);
    h.update("\n");
  }
  return h.hex_digest();
}

ordered_json CorpusManifest(const std::vector<Paradigm>& paradigms, std::uint64_t seed) {
  ordered_json m;
  m["corpus_digest"] = CorpusDigest(paradigms);
  m["seed"] = seed;
  ordered_json list = ordered_json::array();
  for (const auto& p : paradigms) {
    ordered_json e;
    e["id"] = p.id;
    e["category"] = p.category;
    e["pairs"] = p.pairs.size();
    if (p.pairs.size() >= 3) {
      const ParadigmSplits s = SplitParadigm(p, DeriveSeed(DeriveSeed(seed, p.id), "split"));
      e["splits"] = {
          {"train", s.train.size()}, {"dev", s.dev.size()}, {"attribution", s.attribution.size()}};
    }
    e["digest"] = ParadigmDigest(p);
    list.push_back(std::move(e));
  }
  m["paradigms"] = std::move(list);
  return m;
}

}  // namespace shvprobe
