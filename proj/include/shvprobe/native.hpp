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

#ifndef SHVPROBE_NATIVE_HPP_
#define SHVPROBE_NATIVE_HPP_

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <array>
#include <cstdint>
#include <map>
#include <nlohmann/json.hpp>
#include <string>
#include <unordered_map>
#include <vector>

#include "shvprobe/dataset.hpp"
#include "shvprobe/evaluator.hpp"
#include "shvprobe/topology.hpp"

namespace shvprobe {

struct ToyClassifierOptions {
  std::size_t layers = 2;
  std::size_t heads_per_layer = 6;
  std::size_t epochs = 400;
  double learning_rate = 0.5;
  double l2 = 1e-4;

  nlohmann::ordered_json to_json() const;
  static ToyClassifierOptions FromJson(const nlohmann::json& j);
};

// Gated multi-head bag-of-n-grams classifier for sentence pairs.
//
// Every unigram and bigram feature is routed to one head by a hash of its
// text. A head scores a sentence with a linear detector over its own
// features. The pair logit is
//   bias + sum_h gate_h * (score_h(second) - score_h(first)),
// and label 1 ("second is grammatical") is predicted when it is positive.
// A gate of 0 removes the head's contribution entirely.
class ToyClassifier {
 public:
  // Full-batch logistic regression with L2; deterministic. Throws
  // TrainingError if the loss stops being finite.
  static ToyClassifier Train(const std::vector<BinaryExample>& examples,
                             const ToyClassifierOptions& options);

  const ModelTopology& topology() const { return topology_; }
  double bias() const { return bias_; }
  std::size_t feature_count() const { return static_cast<std::size_t>(weights_.size()); }
  const std::vector<double>& loss_trace() const { return loss_trace_; }

  // Per-head score of one sentence.
  Eigen::VectorXd head_scores(const std::string& sentence) const;
  // n x heads matrix of second-minus-first head scores.
  Eigen::MatrixXd pair_contributions(const std::vector<BinaryExample>& examples) const;
  double logit(const BinaryExample& example, const GateMask& mask) const;

  // Head that owns a feature string such as "u:dog" or "b:the dog".
  std::size_t route(const std::string& feature) const;

  static std::vector<std::string> Features(const std::string& sentence);

 private:
  ToyClassifier(ModelTopology topology) : topology_(topology) {}

  ModelTopology topology_;
  std::unordered_map<std::string, Eigen::Index> feature_index_;
  std::vector<std::size_t> feature_head_;
  Eigen::VectorXd weights_;
  double bias_ = 0.0;
  std::vector<double> loss_trace_;
};

// Trains a ToyClassifier on the merged training split of a corpus and
// scores gated masks on any split of any paradigm.
class NativeEvaluator : public Evaluator {
 public:
  NativeEvaluator(const std::vector<Paradigm>& paradigms, const ToyClassifierOptions& options,
                  std::uint64_t seed);

  std::string backend_id() const override { return backend_id_; }
  const ModelTopology& topology() const override { return classifier_.topology(); }
  bool has_paradigm(std::string_view id) const override;
  EvaluationResult evaluate(const GateMask& mask, std::string_view paradigm_id,
                            Split split) override;

  const ToyClassifier& classifier() const { return classifier_; }
  const ParadigmExamples& examples(std::string_view paradigm_id) const;
  // Cached second-minus-first head contributions for a split.
  const Eigen::MatrixXd& contributions(std::string_view paradigm_id, Split split) const;

 private:
  struct Scored {
    Eigen::MatrixXd contributions;
    Eigen::VectorXi labels;
  };

  const Scored& scored(std::string_view paradigm_id, Split split) const;

  std::vector<ParadigmExamples> examples_;
  ToyClassifier classifier_;
  std::map<std::string, std::size_t, std::less<>> index_;
  std::vector<std::array<Scored, 3>> scored_;
  std::string backend_id_;
};

}  // namespace shvprobe

#endif  // SHVPROBE_NATIVE_HPP_
