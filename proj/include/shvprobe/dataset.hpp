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

#ifndef SHVPROBE_DATASET_HPP_
#define SHVPROBE_DATASET_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <nlohmann/json.hpp>
#include <string>
#include <string_view>
#include <vector>

namespace shvprobe {

enum class Split { kTrain, kDev, kAttribution };

std::string_view SplitName(Split split);
// Throws InputError for anything but "train", "dev", "attribution".
Split ParseSplit(std::string_view name);

struct SentencePair {
  std::string good;
  std::string bad;

  friend bool operator==(const SentencePair&, const SentencePair&) = default;
};

struct Paradigm {
  std::string id;
  std::string category;
  std::vector<SentencePair> pairs;
};

// label is the index of the grammatical sentence: 0 means `first`.
struct BinaryExample {
  std::string first;
  std::string second;
  int label = 0;

  friend bool operator==(const BinaryExample&, const BinaryExample&) = default;
};

struct ParadigmSplits {
  std::vector<SentencePair> train;
  std::vector<SentencePair> dev;
  std::vector<SentencePair> attribution;
};

struct LoadOptions {
  bool strict = false;
  std::size_t expected_pairs = 1000;
};

struct LoadResult {
  std::vector<Paradigm> paradigms;
  std::vector<std::string> warnings;
};

// Reads every *.jsonl file in `directory` (sorted by file name), one
// paradigm per file. Records follow the public BLiMP release:
// sentence_good, sentence_bad, UID, linguistics_term; extra fields are
// ignored.
LoadResult LoadBlimp(const std::filesystem::path& directory, const LoadOptions& options = {});

// Writes paradigms back in the same record format, one file per paradigm.
void WriteBlimp(const std::filesystem::path& directory, const std::vector<Paradigm>& paradigms);

// Seed-shuffles the pairs, then cuts dev and attribution at n/10 each
// (at least one) with the remainder going to train.
ParadigmSplits SplitParadigm(const Paradigm& paradigm, std::uint64_t seed);

// Permutes the ungrammatical sentences across pairs. Both sentence
// multisets are preserved.
std::vector<SentencePair> DecouplePairs(std::vector<SentencePair> split, std::uint64_t seed);

// One example per pair; the grammatical sentence lands first or second by
// an independent fair coin.
std::vector<BinaryExample> ToBinaryExamples(const std::vector<SentencePair>& split,
                                            std::uint64_t seed);

// Train/dev/attribution examples for one paradigm. Train and dev are
// decoupled before labelling; attribution keeps its genuine minimal pairs.
struct ParadigmExamples {
  std::string paradigm_id;
  std::string category;
  std::vector<BinaryExample> train;
  std::vector<BinaryExample> dev;
  std::vector<BinaryExample> attribution;

  const std::vector<BinaryExample>& split(Split s) const;
};

ParadigmExamples PrepareParadigm(const Paradigm& paradigm, std::uint64_t seed);

// Concatenation of all train splits followed by a global seed-shuffle.
std::vector<BinaryExample> MergeTraining(const std::vector<ParadigmExamples>& paradigms,
                                         std::uint64_t seed);

// Whitespace tokenization used by the synthetic generator and the toy
// classifier.
std::vector<std::string> Tokenize(std::string_view sentence);

// Synthetic minimal-pair corpus for desk-scale runs.
struct SynthLexicon {
  std::vector<std::string> names;
  std::vector<std::string> adjectives;
  std::vector<std::pair<std::string, std::string>> nouns;  // singular, plural
  std::vector<std::pair<std::string, std::string>> verbs;  // 3sg, base
  std::vector<std::pair<std::string, std::string>> past;   // correct, overregularized
  std::vector<std::string> vowel_nouns;

  static SynthLexicon Default();
};

struct SynthSpec {
  std::string family = "agreement";
  std::size_t categories = 3;
  std::size_t paradigms_per_category = 4;
  std::size_t pairs_per_paradigm = 200;
  SynthLexicon lexicon = SynthLexicon::Default();

  static SynthSpec FromJson(const nlohmann::json& j);
};

// Names of the built-in phenomena, in the order categories are assigned.
const std::vector<std::string>& SynthPhenomena();

std::vector<Paradigm> SynthParadigms(const SynthSpec& spec, std::uint64_t seed);

// Content digest of one paradigm (id, category, pairs in order).
std::string ParadigmDigest(const Paradigm& paradigm);
// Independent of paradigm order.
std::string CorpusDigest(const std::vector<Paradigm>& paradigms);

// ids, categories, split sizes and digests.
nlohmann::ordered_json CorpusManifest(const std::vector<Paradigm>& paradigms, std::uint64_t seed);

}  // namespace shvprobe

#endif  // SHVPROBE_DATASET_HPP_
