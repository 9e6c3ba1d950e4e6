// Copyright 2026 The weakguide Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef WEAKGUIDE_STATS_HPP_
#define WEAKGUIDE_STATS_HPP_

#include <cstdint>
#include <span>
#include <vector>

namespace weakguide::stats {

struct Interval {
  double low = 0.0;
  double high = 1.0;
};

enum class Alternative { kTwoSided, kGreater, kLess };

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

double normal_cdf(double z);
double normal_quantile(double p);

// Exact binomial interval.
Interval clopper_pearson(std::int64_t k, std::int64_t n, double confidence);
// Normal-approximation interval around p = k / n.
Interval wald_interval(std::int64_t k, std::int64_t n, double confidence);

// Pooled two-proportion z test; kGreater tests p1 > p2.
TestResult two_proportion_test(std::int64_t k1, std::int64_t n1, std::int64_t k2,
                               std::int64_t n2, Alternative alt);

// Cochran-Armitage test for an increasing trend in proportions.
TestResult cochran_armitage(std::span<const std::int64_t> successes,
                            std::span<const std::int64_t> totals,
                            std::span<const double> scores);

// Jonckheere-Terpstra test for increasing location across ordered groups,
// normal approximation.
TestResult jonckheere_terpstra(const std::vector<std::vector<double>>& groups);

// Page's test for an increasing trend across k ordered treatments measured
// on the same blocks. values[b][j] is block b under treatment j; ties get
// midranks and the exact conditional variance.
TestResult page_trend_test(const std::vector<std::vector<double>>& values);

// Exact sign test on discordant paired outcomes. kGreater tests that
// `up` changes are more likely than `down` changes.
TestResult sign_test(std::int64_t up, std::int64_t down, Alternative alt);

// Paired t test on a[i] - b[i]; kGreater tests mean(a - b) > 0.
TestResult paired_t_test(std::span<const double> a, std::span<const double> b, Alternative alt);

// Welch test on means, Student t reference; kGreater tests mean(a) > mean(b).
TestResult welch_test(std::span<const double> a, std::span<const double> b,
                      Alternative alt);

// Pearson chi-square test of equal cell probabilities.
TestResult chi_square_uniform(std::span<const std::int64_t> counts);

double mean(std::span<const double> v);
double variance(std::span<const double> v);

}  // namespace weakguide::stats

#endif  // WEAKGUIDE_STATS_HPP_
