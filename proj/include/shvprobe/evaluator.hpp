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

#ifndef SHVPROBE_EVALUATOR_HPP_
#define SHVPROBE_EVALUATOR_HPP_

#include <atomic>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <unordered_map>

#include "shvprobe/dataset.hpp"
#include "shvprobe/topology.hpp"

namespace shvprobe {

struct EvaluationResult {
  double accuracy = 0.0;
  std::size_t n_examples = 0;

  friend bool operator==(const EvaluationResult&, const EvaluationResult&) = default;
};

struct EvaluationKey {
  std::string backend_id;
  std::string paradigm_id;
  Split split = Split::kDev;
  std::string mask_digest;

  std::string to_string() const;
  friend bool operator==(const EvaluationKey&, const EvaluationKey&) = default;
};

inline constexpr std::size_t kUnboundedConcurrency = std::numeric_limits<std::size_t>::max();

// The characteristic function: accuracy of the gated model on one split of
// one paradigm. Implementations must be safe to call concurrently up to
// concurrency_limit() in-flight evaluations.
class Evaluator {
 public:
  virtual ~Evaluator() = default;

  virtual std::string backend_id() const = 0;
  virtual const ModelTopology& topology() const = 0;
  virtual bool has_paradigm(std::string_view paradigm_id) const = 0;
  virtual EvaluationResult evaluate(const GateMask& mask, std::string_view paradigm_id,
                                    Split split) = 0;
  virtual std::size_t concurrency_limit() const { return kUnboundedConcurrency; }
};

// Content-addressed store of evaluation results. Optionally backed by an
// append-only JSON-lines file that is replayed on open.
class EvaluationCache {
 public:
  EvaluationCache() = default;
  explicit EvaluationCache(const std::filesystem::path& file);

  bool lookup(const EvaluationKey& key, EvaluationResult& out) const;
  // First write wins; later writes for the same key are ignored.
  void store(const EvaluationKey& key, const EvaluationResult& result);

  std::size_t size() const;
  std::size_t hits() const;
  std::size_t misses() const;

 private:
  mutable std::shared_mutex mutex_;
  std::unordered_map<std::string, EvaluationResult> entries_;
  mutable std::atomic<std::size_t> hits_{0};
  mutable std::atomic<std::size_t> misses_{0};
  std::unique_ptr<std::ofstream> journal_;
};

// Decorator that answers repeated (backend, paradigm, split, mask) queries
// from the cache.
class CachedEvaluator : public Evaluator {
 public:
  CachedEvaluator(std::shared_ptr<Evaluator> inner, std::shared_ptr<EvaluationCache> cache);

  std::string backend_id() const override { return inner_->backend_id(); }
  const ModelTopology& topology() const override { return inner_->topology(); }
  bool has_paradigm(std::string_view id) const override { return inner_->has_paradigm(id); }
  EvaluationResult evaluate(const GateMask& mask, std::string_view paradigm_id,
                            Split split) override;
  std::size_t concurrency_limit() const override { return inner_->concurrency_limit(); }

  const EvaluationCache& cache() const { return *cache_; }

 private:
  std::shared_ptr<Evaluator> inner_;
  std::shared_ptr<EvaluationCache> cache_;
};

// Counts calls; used by tests and to report evaluation budgets.
class CountingEvaluator : public Evaluator {
 public:
  explicit CountingEvaluator(std::shared_ptr<Evaluator> inner) : inner_(std::move(inner)) {}

  std::string backend_id() const override { return inner_->backend_id(); }
  const ModelTopology& topology() const override { return inner_->topology(); }
  bool has_paradigm(std::string_view id) const override { return inner_->has_paradigm(id); }
  EvaluationResult evaluate(const GateMask& mask, std::string_view paradigm_id,
                            Split split) override {
    {
      std::lock_guard lock(mutex_);
      ++calls_;
    }
    return inner_->evaluate(mask, paradigm_id, split);
  }
  std::size_t concurrency_limit() const override { return inner_->concurrency_limit(); }

  std::size_t calls() const {
    std::lock_guard lock(mutex_);
    return calls_;
  }

 private:
  std::shared_ptr<Evaluator> inner_;
  mutable std::mutex mutex_;
  std::size_t calls_ = 0;
};

}  // namespace shvprobe

#endif  // SHVPROBE_EVALUATOR_HPP_
