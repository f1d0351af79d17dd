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

#include "shvprobe/evaluator.hpp"

#include <nlohmann/json.hpp>

#include "shvprobe/errors.hpp"

namespace shvprobe {

std::string EvaluationKey::to_string() const {
  std::string s = backend_id;
  s += '\x1f';
  s += paradigm_id;
  s += '\x1f';
  s += SplitName(split);
  s += '\x1f';
  s += mask_digest;
  return s;
}

EvaluationCache::EvaluationCache(const std::filesystem::path& file) {
  if (std::filesystem::exists(file)) {
    std::ifstream in(file);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      try {
        const auto j = nlohmann::json::parse(line);
        EvaluationKey key{j.at("backend").get<std::string>(), j.at("paradigm").get<std::string>(),
                          ParseSplit(j.at("split").get<std::string>()),
                          j.at("mask").get<std::string>()};
        entries_.emplace(key.to_string(), EvaluationResult{j.at("accuracy").get<double>(),
                                                           j.at("n").get<std::size_t>()});
      } catch (const nlohmann::json::exception& e) {
        throw ParseError(file.string(), line_no, e.what());
      }
    }
  }
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  journal_ = std::make_unique<std::ofstream>(file, std::ios::app);
  if (!*journal_) throw InputError("cannot open evaluation cache " + file.string());
}

bool EvaluationCache::lookup(const EvaluationKey& key, EvaluationResult& out) const {
  std::shared_lock lock(mutex_);
  auto it = entries_.find(key.to_string());
  if (it == entries_.end()) {
    ++misses_;
    return false;
  }
  ++hits_;
  out = it->second;
  return true;
}

void EvaluationCache::store(const EvaluationKey& key, const EvaluationResult& result) {
  std::unique_lock lock(mutex_);
  auto [it, inserted] = entries_.emplace(key.to_string(), result);
  if (inserted && journal_) {
    nlohmann::ordered_json j;
    j["backend"] = key.backend_id;
    j["paradigm"] = key.paradigm_id;
    j["split"] = SplitName(key.split);
    j["mask"] = key.mask_digest;
    j["accuracy"] = result.accuracy;
    j["n"] = result.n_examples;
    *journal_ << j.dump() << '\n';
    journal_->flush();
  }
}

std::size_t EvaluationCache::size() const {
  std::shared_lock lock(mutex_);
  return entries_.size();
}

std::size_t EvaluationCache::hits() const { return hits_.load(); }

std::size_t EvaluationCache::misses() const { return misses_.load(); }

CachedEvaluator::CachedEvaluator(std::shared_ptr<Evaluator> inner,
                                 std::shared_ptr<EvaluationCache> cache)
    : inner_(std::move(inner)), cache_(std::move(cache)) {}

EvaluationResult CachedEvaluator::evaluate(const GateMask& mask, std::string_view paradigm_id,
                                           Split split) {
  mask.check_topology(inner_->topology());
  EvaluationKey key{inner_->backend_id(), std::string(paradigm_id), split, mask.digest()};
  EvaluationResult result;
  if (cache_->lookup(key, result)) return result;
  result = inner_->evaluate(mask, paradigm_id, split);
  cache_->store(key, result);
  return result;
}

}  // namespace shvprobe
