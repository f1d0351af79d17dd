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

#ifndef SHVPROBE_SHAPLEY_HPP_
#define SHVPROBE_SHAPLEY_HPP_

#include <cstdint>
#include <functional>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "shvprobe/errors.hpp"
#include "shvprobe/evaluator.hpp"
#include "shvprobe/topology.hpp"

namespace shvprobe {

inline constexpr std::size_t kMaxExactHeads = 20;

struct EstimatorConfig {
  double range = 1.0;                // R in the Bernstein bound
  double delta = 0.1;                // failure probability of the bound
  double truncation_fraction = 0.5;  // 0 disables truncation
  std::size_t min_samples_per_head = 5;
  std::size_t max_permutations = 1000;
  std::uint64_t seed = 0;
  Split split = Split::kDev;
  // Permutation walks dispatched concurrently. Output does not depend on it.
  std::size_t workers = 1;

  void validate() const;
  nlohmann::ordered_json to_json() const;
  static EstimatorConfig FromJson(const nlohmann::json& j);
  static EstimatorConfig FromJson(const nlohmann::json& j, EstimatorConfig defaults);
};

// Running statistics for one head (Welford update, unbiased variance).
class HeadSampleState {
 public:
  void add(double marginal);

  std::size_t count() const { return count_; }
  double mean() const { return mean_; }
  // Sample variance with n - 1 in the denominator; 0 for fewer than two samples.
  double variance() const;
  double stddev() const;
  bool converged() const { return converged_; }
  void mark_converged() { converged_ = true; }

  ShvEstimate estimate() const { return {mean_, variance(), count_, converged_}; }

 private:
  std::size_t count_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
  bool converged_ = false;
};

// Empirical Bernstein half-width:
//   sigma * sqrt(2 ln(3 / delta) / t) + 3 R ln(3 / delta) / t.
// Throws DomainError for t == 0.
double BernsteinBound(double sigma, std::size_t t, double range, double delta);

// True once t >= min_samples and the bound excludes zero.
bool SignDetermined(const HeadSampleState& state, const EstimatorConfig& config);

// Brute force over all 2^d coalitions. Throws BudgetError when d > 20.
ShvVector ExactShv(Evaluator& evaluator, const std::string& paradigm_id, Split split = Split::kDev);

// One recorded marginal, reported to an optional observer.
struct MarginalRecord {
  std::size_t permutation = 0;
  std::size_t head = 0;
  std::size_t active_before = 0;
  std::size_t active_after = 0;
  double marginal = 0.0;
};
using MarginalObserver = std::function<void(const MarginalRecord&)>;

struct EstimateReport {
  std::size_t permutations = 0;
  bool all_converged = false;
  bool budget_exhausted = false;
};

// Thrown when the backend fails mid-run; carries the statistics merged so far.
class EstimationAborted : public EvaluationError {
 public:
  EstimationAborted(const std::string& message, std::uint64_t request_id, ShvVector partial,
                    std::size_t permutations)
      : EvaluationError(message, request_id),
        partial_(std::move(partial)),
        permutations_(permutations) {}

  const ShvVector& partial() const { return partial_; }
  std::size_t permutations() const { return permutations_; }

 private:
  ShvVector partial_;
  std::size_t permutations_;
};

// Truncated Monte Carlo permutation sampling with per-head empirical
// Bernstein stopping. Each permutation is walked from the all-on mask,
// removing one head at a time; the marginal of the removed head is
// V(before) - V(after). A walk stops before the active fraction would fall
// below truncation_fraction. Converged heads stay in the walks but stop
// accumulating. Output is a function of (config, backend) only.
ShvVector EstimateShv(Evaluator& evaluator, const std::string& paradigm_id,
                      const EstimatorConfig& config, EstimateReport* report = nullptr,
                      const MarginalObserver& observer = {});

struct ParadigmRef {
  std::string id;
  std::string category;
};

struct ShvRunFailure {
  std::string paradigm_id;
  std::string message;
};

struct ShvMatrixResult {
  ShvMatrix matrix;
  std::vector<EstimateReport> reports;  // parallel to matrix.rows
  std::vector<ShvRunFailure> failures;
};

// One independent estimator run per paradigm, seeded from
// (config.seed, paradigm id) so rows do not depend on input order.
ShvMatrixResult ComputeShvMatrix(Evaluator& evaluator, const std::vector<ParadigmRef>& paradigms,
                                 const EstimatorConfig& config);

}  // namespace shvprobe

#endif  // SHVPROBE_SHAPLEY_HPP_
