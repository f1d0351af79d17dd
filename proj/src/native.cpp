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

#include "shvprobe/native.hpp"

#include <array>
#include <cmath>
#include <sstream>

#include "shvprobe/digest.hpp"
#include "shvprobe/errors.hpp"
#include "shvprobe/rng.hpp"

namespace shvprobe {

nlohmann::ordered_json ToyClassifierOptions::to_json() const {
  nlohmann::ordered_json j;
  j["layers"] = layers;
  j["heads_per_layer"] = heads_per_layer;
  j["epochs"] = epochs;
  j["learning_rate"] = learning_rate;
  j["l2"] = l2;
  return j;
}

ToyClassifierOptions ToyClassifierOptions::FromJson(const nlohmann::json& j) {
  ToyClassifierOptions o;
  o.layers = j.value("layers", o.layers);
  o.heads_per_layer = j.value("heads_per_layer", o.heads_per_layer);
  o.epochs = j.value("epochs", o.epochs);
  o.learning_rate = j.value("learning_rate", o.learning_rate);
  o.l2 = j.value("l2", o.l2);
  return o;
}

std::vector<std::string> ToyClassifier::Features(const std::string& sentence) {
  const auto tokens = Tokenize(sentence);
  std::vector<std::string> out;
  out.reserve(2 * tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    out.push_back("u:" + tokens[i]);
    if (i + 1 < tokens.size()) out.push_back("b:" + tokens[i] + " " + tokens[i + 1]);
  }
  return out;
}

std::size_t ToyClassifier::route(const std::string& feature) const {
  return static_cast<std::size_t>(SplitMix64(Fnv1a64(feature)) % topology_.total());
}

namespace {

using SparseRows = Eigen::SparseMatrix<double, Eigen::RowMajor>;

double Sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

ToyClassifier ToyClassifier::Train(const std::vector<BinaryExample>& examples,
                                   const ToyClassifierOptions& options) {
  ToyClassifier model(ModelTopology(options.layers, options.heads_per_layer));
  if (examples.empty()) throw TrainingError("no training examples", "");

  // Vocabulary in first-seen order over the (already shuffled) training set.
  std::vector<Eigen::Triplet<double>> triplets;
  const auto n = static_cast<Eigen::Index>(examples.size());
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& ex = examples[static_cast<std::size_t>(i)];
    y[i] = ex.label;
    auto add = [&](const std::string& sentence, double sign) {
      for (const auto& f : Features(sentence)) {
        auto [it, inserted] =
            model.feature_index_.emplace(f, static_cast<Eigen::Index>(model.feature_index_.size()));
        if (inserted) model.feature_head_.push_back(model.route(f));
        triplets.emplace_back(i, it->second, sign);
      }
    };
    add(ex.second, 1.0);
    add(ex.first, -1.0);
  }
  const auto f = static_cast<Eigen::Index>(model.feature_index_.size());
  SparseRows x(n, f);
  x.setFromTriplets(triplets.begin(), triplets.end());

  Eigen::VectorXd w = Eigen::VectorXd::Zero(f);
  Eigen::VectorXd velocity = Eigen::VectorXd::Zero(f);
  double b = 0.0, vb = 0.0;
  constexpr double kMomentum = 0.9;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    const Eigen::VectorXd z = (x * w).array() + b;
    Eigen::VectorXd residual(n);
    double loss = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double p = Sigmoid(z[i]);
      residual[i] = p - y[i];
      // log(1 + e^z) - y z, written stably.
      loss += std::max(z[i], 0.0) + std::log1p(std::exp(-std::abs(z[i]))) - y[i] * z[i];
    }
    loss = loss * inv_n + 0.5 * options.l2 * w.squaredNorm();
    model.loss_trace_.push_back(loss);
    if (!std::isfinite(loss)) {
      std::ostringstream trace;
      for (double l : model.loss_trace_) trace << l << ' ';
      throw TrainingError("toy classifier diverged at epoch " + std::to_string(epoch), trace.str());
    }
    const Eigen::VectorXd grad = (x.transpose() * residual) * inv_n + options.l2 * w;
    const double grad_b = residual.sum() * inv_n;
    velocity = kMomentum * velocity - options.learning_rate * grad;
    vb = kMomentum * vb - options.learning_rate * grad_b;
    w += velocity;
    b += vb;
  }
  model.weights_ = std::move(w);
  model.bias_ = b;
  return model;
}

Eigen::VectorXd ToyClassifier::head_scores(const std::string& sentence) const {
  Eigen::VectorXd s = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(topology_.total()));
  for (const auto& f : Features(sentence)) {
    auto it = feature_index_.find(f);
    if (it == feature_index_.end()) continue;
    s[static_cast<Eigen::Index>(feature_head_[static_cast<std::size_t>(it->second)])] +=
        weights_[it->second];
  }
  return s;
}

Eigen::MatrixXd ToyClassifier::pair_contributions(
    const std::vector<BinaryExample>& examples) const {
  Eigen::MatrixXd c(static_cast<Eigen::Index>(examples.size()),
                    static_cast<Eigen::Index>(topology_.total()));
  for (std::size_t i = 0; i < examples.size(); ++i) {
    c.row(static_cast<Eigen::Index>(i)) =
        (head_scores(examples[i].second) - head_scores(examples[i].first)).transpose();
  }
  return c;
}

double ToyClassifier::logit(const BinaryExample& example, const GateMask& mask) const {
  mask.check_topology(topology_);
  const Eigen::VectorXd c = head_scores(example.second) - head_scores(example.first);
  double z = bias_;
  for (std::size_t h = 0; h < mask.size(); ++h) {
    if (mask.active(h)) z += c[static_cast<Eigen::Index>(h)];
  }
  return z;
}

namespace {

std::vector<ParadigmExamples> PrepareAll(const std::vector<Paradigm>& paradigms,
                                         std::uint64_t seed) {
  std::vector<ParadigmExamples> out;
  out.reserve(paradigms.size());
  for (const auto& p : paradigms) out.push_back(PrepareParadigm(p, seed));
  return out;
}

}  // namespace

NativeEvaluator::NativeEvaluator(const std::vector<Paradigm>& paradigms,
                                 const ToyClassifierOptions& options, std::uint64_t seed)
    : examples_(PrepareAll(paradigms, seed)),
      classifier_(ToyClassifier::Train(MergeTraining(examples_, seed), options)) {
  for (std::size_t i = 0; i < examples_.size(); ++i) {
    if (!index_.emplace(examples_[i].paradigm_id, i).second) {
      throw ValidationError("duplicate paradigm '" + examples_[i].paradigm_id + "'");
    }
  }
  scored_.resize(examples_.size());
  for (std::size_t i = 0; i < examples_.size(); ++i) {
    for (Split s : {Split::kTrain, Split::kDev, Split::kAttribution}) {
      const auto& ex = examples_[i].split(s);
      Scored& out = scored_[i][static_cast<std::size_t>(s)];
      out.contributions = classifier_.pair_contributions(ex);
      out.labels.resize(static_cast<Eigen::Index>(ex.size()));
      for (std::size_t k = 0; k < ex.size(); ++k)
        out.labels[static_cast<Eigen::Index>(k)] = ex[k].label;
    }
  }
  Sha256 h;
  h.update(CorpusDigest(paradigms));
  h.update(options.to_json().dump());
  h.update(std::to_string(seed));
  backend_id_ = "native:" + h.hex_digest().substr(0, 16);
}

bool NativeEvaluator::has_paradigm(std::string_view id) const { return index_.contains(id); }

const ParadigmExamples& NativeEvaluator::examples(std::string_view paradigm_id) const {
  auto it = index_.find(paradigm_id);
  if (it == index_.end()) throw LookupError("unknown paradigm '" + std::string(paradigm_id) + "'");
  return examples_[it->second];
}

const NativeEvaluator::Scored& NativeEvaluator::scored(std::string_view paradigm_id,
                                                       Split split) const {
  auto it = index_.find(paradigm_id);
  if (it == index_.end()) throw LookupError("unknown paradigm '" + std::string(paradigm_id) + "'");
  return scored_[it->second][static_cast<std::size_t>(split)];
}

const Eigen::MatrixXd& NativeEvaluator::contributions(std::string_view paradigm_id,
                                                      Split split) const {
  return scored(paradigm_id, split).contributions;
}

EvaluationResult NativeEvaluator::evaluate(const GateMask& mask, std::string_view paradigm_id,
                                           Split split) {
  mask.check_topology(topology());
  const Scored& s = scored(paradigm_id, split);
  Eigen::VectorXd gate(static_cast<Eigen::Index>(mask.size()));
  for (std::size_t h = 0; h < mask.size(); ++h) gate[static_cast<Eigen::Index>(h)] = mask.active(h);
  const Eigen::VectorXd logits = (s.contributions * gate).array() + classifier_.bias();
  std::size_t correct = 0;
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    const int predicted = logits[i] > 0.0 ? 1 : 0;
    if (predicted == s.labels[i]) ++correct;
  }
  const std::size_t n = static_cast<std::size_t>(logits.size());
  return {n == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(n), n};
}

}  // namespace shvprobe
