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

#ifndef SHVPROBE_STATS_HPP_
#define SHVPROBE_STATS_HPP_

#include <cstddef>
#include <span>
#include <vector>

namespace shvprobe {

struct TTestResult {
  double t_statistic = 0.0;
  double p_value = 1.0;
  double df = 0.0;
  double adjusted_p = 1.0;
  // Both samples have zero variance; t is 0 or +-inf and p is 1 or 0.
  bool degenerate = false;
};

double SampleMean(std::span<const double> x);
// n - 1 denominator.
double SampleVariance(std::span<const double> x);

// Welch's unequal-variance t-test, two-sided p from the Student-t tail with
// Welch-Satterthwaite degrees of freedom. Requires at least two values per
// sample (InsufficientDataError otherwise). adjusted_p equals p_value until
// a correction is applied.
TTestResult WelchT(std::span<const double> a, std::span<const double> b);

// min(1, p * m) with m the family size.
double Bonferroni(double p, std::size_t family_size);
std::vector<double> Bonferroni(std::span<const double> p_values);

}  // namespace shvprobe

#endif  // SHVPROBE_STATS_HPP_
