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

#include "shvprobe/shapley.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <future>
#include <numeric>
#include <span>

#include "shvprobe/rng.hpp"

namespace shvprobe {

using nlohmann::json;
using nlohmann::ordered_json;

void EstimatorConfig::validate() const {
  if (!(range > 0.0)) throw ConfigurationError("estimator range R must be positive");
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigurationError("estimator delta must be in (0, 1)");
  if (!(truncation_fraction >= 0.0 && truncation_fraction <= 1.0)) {
    throw ConfigurationError("truncation_fraction must be in [0, 1]");
  }
  if (max_permutations == 0) throw ConfigurationError("max_permutations must be positive");
  if (min_samples_per_head < 2) {
    throw ConfigurationError("min_samples_per_head must be at least 2");
  }
  if (workers == 0) throw ConfigurationError("workers must be positive");
}

ordered_json EstimatorConfig::to_json() const {
  ordered_json j;
  j["R"] = range;
  j["delta"] = delta;
  j["truncation_fraction"] = truncation_fraction;
  j["min_samples_per_head"] = min_samples_per_head;
  j["max_permutations"] = max_permutations;
  j["seed"] = seed;
  j["split"] = SplitName(split);
  return j;
}

EstimatorConfig EstimatorConfig::FromJson(const json& j) { return FromJson(j, EstimatorConfig()); }

EstimatorConfig EstimatorConfig::FromJson(const json& j, EstimatorConfig c) {
  c.range = j.value("R", c.range);
  c.delta = j.value("delta", c.delta);
  c.truncation_fraction = j.value("truncation_fraction", c.truncation_fraction);
  c.min_samples_per_head = j.value("min_samples_per_head", c.min_samples_per_head);
  c.max_permutations = j.value("max_permutations", c.max_permutations);
  c.seed = j.value("seed", c.seed);
  if (j.contains("split")) c.split = ParseSplit(j.at("split").get<std::string>());
  c.workers = j.value("workers", c.workers);
  return c;
}

void HeadSampleState::add(double marginal) {
  ++count_;
  const double d = marginal - mean_;
  mean_ += d / static_cast<double>(count_);
  m2_ += d * (marginal - mean_);
}

double HeadSampleState::variance() const {
  if (count_ < 2) return 0.0;
  return std::max(0.0, m2_ / static_cast<double>(count_ - 1));
}

double HeadSampleState::stddev() const { return std::sqrt(variance()); }

double BernsteinBound(double sigma, std::size_t t, double range, double delta) {
  if (t == 0) throw DomainError("Bernstein bound needs at least one sample");
  const double log_term = std::log(3.0 / delta);
  const double n = static_cast<double>(t);
  return sigma * std::sqrt(2.0 * log_term / n) + 3.0 * range * log_term / n;
}

bool SignDetermined(const HeadSampleState& state, const EstimatorConfig& config) {
  if (state.count() < config.min_samples_per_head) return false;
  return BernsteinBound(state.stddev(), state.count(), config.range, config.delta) <
         std::abs(state.mean());
}

ShvVector ExactShv(Evaluator& evaluator, const std::string& paradigm_id, Split split) {
  const ModelTopology& topology = evaluator.topology();
  const std::size_t n = topology.total();
  if (n > kMaxExactHeads) {
    throw BudgetError("exact Shapley values need 2^" + std::to_string(n) +
                      " evaluations; use the Monte Carlo estimator for more than " +
                      std::to_string(kMaxExactHeads) + " heads");
  }
  if (!evaluator.has_paradigm(paradigm_id)) {
    throw LookupError("unknown paradigm '" + paradigm_id + "'");
  }
  const std::size_t coalitions = std::size_t{1} << n;
  std::vector<double> value(coalitions);
  std::vector<std::uint8_t> bits(n);
  for (std::size_t s = 0; s < coalitions; ++s) {
    for (std::size_t h = 0; h < n; ++h) bits[h] = (s >> h) & 1U;
    value[s] = evaluator.evaluate(GateMask::FromBits(bits), paradigm_id, split).accuracy;
  }

  // weight(k) = k! (n - k - 1)! / n! = 1 / (n * C(n - 1, k)).
  std::vector<double> weight(n);
  double binom = 1.0;
  for (std::size_t k = 0; k < n; ++k) {
    weight[k] = 1.0 / (static_cast<double>(n) * binom);
    binom = binom * static_cast<double>(n - 1 - k) / static_cast<double>(k + 1);
  }

  ShvVector out;
  out.paradigm_id = paradigm_id;
  out.estimates.resize(n);
  for (std::size_t h = 0; h < n; ++h) {
    const std::size_t bit = std::size_t{1} << h;
    double phi = 0.0;
    for (std::size_t s = 0; s < coalitions; ++s) {
      if (s & bit) continue;
      phi += weight[static_cast<std::size_t>(std::popcount(s))] * (value[s | bit] - value[s]);
    }
    out.estimates[h] = {phi, 0.0, 0, true};
  }
  return out;
}

namespace {

struct WalkStep {
  std::size_t head;
  std::size_t active_before;
  double marginal;
};

// Number of leading positions in a walk over d heads whose marginals are
// recorded: removal k (0-based) leaves d - k - 1 heads active.
std::size_t RecordablePrefix(std::size_t d, double truncation_fraction) {
  std::size_t k = 0;
  while (k < d && static_cast<double>(d - k - 1) >= truncation_fraction * static_cast<double>(d)) {
    ++k;
  }
  return k;
}

std::vector<WalkStep> Walk(Evaluator& evaluator, const std::string& paradigm_id, Split split,
                           const std::vector<std::size_t>& order, std::size_t steps,
                           double full_value) {
  std::vector<WalkStep> out;
  out.reserve(steps);
  GateMask mask = GateMask::AllOn(evaluator.topology());
  double previous = full_value;
  const std::size_t d = order.size();
  for (std::size_t k = 0; k < steps; ++k) {
    mask = mask.without(order[k]);
    const double current = evaluator.evaluate(mask, paradigm_id, split).accuracy;
    out.push_back({order[k], d - k, previous - current});
    previous = current;
  }
  return out;
}

ShvVector Snapshot(const std::string& paradigm_id, const std::vector<HeadSampleState>& states) {
  ShvVector v;
  v.paradigm_id = paradigm_id;
  v.estimates.reserve(states.size());
  for (const auto& s : states) v.estimates.push_back(s.estimate());
  return v;
}

}  // namespace

ShvVector EstimateShv(Evaluator& evaluator, const std::string& paradigm_id,
                      const EstimatorConfig& config, EstimateReport* report,
                      const MarginalObserver& observer) {
  config.validate();
  if (!evaluator.has_paradigm(paradigm_id)) {
    throw LookupError("unknown paradigm '" + paradigm_id + "'");
  }
  const std::size_t d = evaluator.topology().total();
  const std::size_t recordable = RecordablePrefix(d, config.truncation_fraction);
  const std::size_t workers =
      std::max<std::size_t>(1, std::min(config.workers, evaluator.concurrency_limit()));

  std::vector<HeadSampleState> states(d);
  std::size_t unconverged = d;
  std::size_t merged = 0;
  Rng rng(config.seed);
  std::vector<std::size_t> base_order(d);
  std::iota(base_order.begin(), base_order.end(), 0);

  auto fail = [&](const Error& e) -> EstimationAborted {
    const auto* eval = dynamic_cast<const EvaluationError*>(&e);
    return EstimationAborted(std::string("estimation aborted for '") + paradigm_id + "' after " +
                                 std::to_string(merged) + " permutations: " + e.what(),
                             eval ? eval->request_id() : 0, Snapshot(paradigm_id, states), merged);
  };

  double full_value = 0.0;
  try {
    full_value =
        evaluator.evaluate(GateMask::AllOn(evaluator.topology()), paradigm_id, config.split)
            .accuracy;
  } catch (const EvaluationError& e) {
    throw fail(e);
  }

  while (merged < config.max_permutations && unconverged > 0 && recordable > 0) {
    const std::size_t batch = std::min(workers, config.max_permutations - merged);
    std::vector<std::vector<std::size_t>> orders(batch, base_order);
    std::vector<std::size_t> steps(batch, 0);
    for (std::size_t b = 0; b < batch; ++b) {
      rng.shuffle(std::span(orders[b]));
      // Walk only as far as the last head that can still record a marginal.
      for (std::size_t k = recordable; k > 0; --k) {
        if (!states[orders[b][k - 1]].converged()) {
          steps[b] = k;
          break;
        }
      }
    }

    std::vector<std::vector<WalkStep>> walks(batch);
    try {
      if (batch == 1) {
        walks[0] = Walk(evaluator, paradigm_id, config.split, orders[0], steps[0], full_value);
      } else {
        std::vector<std::future<std::vector<WalkStep>>> pending;
        pending.reserve(batch);
        for (std::size_t b = 0; b < batch; ++b) {
          pending.push_back(std::async(std::launch::async, [&, b] {
            return Walk(evaluator, paradigm_id, config.split, orders[b], steps[b], full_value);
          }));
        }
        std::exception_ptr first_error;
        for (std::size_t b = 0; b < batch; ++b) {
          try {
            walks[b] = pending[b].get();
          } catch (...) {
            if (!first_error) first_error = std::current_exception();
          }
        }
        if (first_error) std::rethrow_exception(first_error);
      }
    } catch (const EvaluationError& e) {
      throw fail(e);
    }

    // Merge in stream order so the result is independent of completion order.
    for (std::size_t b = 0; b < batch && unconverged > 0; ++b) {
      for (const WalkStep& step : walks[b]) {
        HeadSampleState& state = states[step.head];
        if (state.converged()) continue;
        state.add(step.marginal);
        if (observer) {
          observer({merged, step.head, step.active_before, step.active_before - 1, step.marginal});
        }
        if (SignDetermined(state, config)) {
          state.mark_converged();
          --unconverged;
        }
      }
      ++merged;
    }
  }

  if (report) {
    report->permutations = merged;
    report->all_converged = unconverged == 0;
    report->budget_exhausted = unconverged > 0;
  }
  return Snapshot(paradigm_id, states);
}

ShvMatrixResult ComputeShvMatrix(Evaluator& evaluator, const std::vector<ParadigmRef>& paradigms,
                                 const EstimatorConfig& config) {
  config.validate();
  ShvMatrixResult result;
  result.matrix.topology = evaluator.topology();
  for (const auto& p : paradigms) {
    EstimatorConfig local = config;
    local.seed = DeriveSeed(config.seed, p.id);
    EstimateReport report;
    try {
      ShvVector row = EstimateShv(evaluator, p.id, local, &report);
      row.category = p.category;
      result.matrix.rows.push_back(std::move(row));
      result.reports.push_back(report);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kEvaluation && e.kind() != ErrorKind::kLookup) throw;
      result.failures.push_back({p.id, e.what()});
    }
  }
  return result;
}

}  // namespace shvprobe
