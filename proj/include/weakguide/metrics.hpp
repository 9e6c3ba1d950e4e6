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

#ifndef WEAKGUIDE_METRICS_HPP_
#define WEAKGUIDE_METRICS_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "weakguide/codec.hpp"
#include "weakguide/rng.hpp"
#include "weakguide/types.hpp"
#include "weakguide/world.hpp"

namespace weakguide {

// One sample per row.
using Samples = RowMatrix;

struct RatioReport {
  std::string context;
  std::string family;
  std::vector<std::string> attributes;
  std::vector<std::int64_t> counts;
  std::vector<double> ratios;
  std::int64_t n = 0;

  int index_of(std::string_view attribute) const;
  double ratio(std::string_view attribute) const { return ratios[index_of(attribute)]; }
  std::int64_t count(std::string_view attribute) const { return counts[index_of(attribute)]; }
};

struct DiscrepancyReport {
  double value = 0.0;
  std::vector<double> deviations;
};

RatioReport make_ratio_report(std::string context, std::string family,
                              std::vector<std::string> attributes,
                              std::vector<std::int64_t> counts);

// Tallies Bayes labels of family slot `slot`.
RatioReport attribute_ratio(const World& world, const Samples& samples,
                            std::string_view context, int slot = 0);

// Mean over reports of |ratio - 0.5| for binary attribute sets.
double avg_delta(std::span<const RatioReport> reports);

DiscrepancyReport discrepancy(const RatioReport& report);

double compliance(const World& world, const Samples& samples, std::string_view context,
                  std::string_view specified);

// Per-sample log density under the mixture of the literal prompt.
std::vector<double> alignment_values(const World& world, const Samples& samples,
                                     const PromptSpec& prompt);
double alignment_score(const World& world, const Samples& samples,
                       const PromptSpec& prompt);

// 2 E|a - b| - E|a - a'| - E|b - b'| with all pairs averaged (V-statistic),
// so the value is >= 0 and zero for identical sets.
double energy_distance(const Samples& a, const Samples& b);

struct PermutationResult {
  double statistic = 0.0;
  // 95% quantile of the permutation distribution.
  double threshold = 0.0;
  double p_value = 1.0;
  int permutations = 0;
};

struct PermutationOptions {
  int permutations = 199;
  // Each side is subsampled without replacement to at most this many rows.
  int max_per_side = 1000;
};

// Energy permutation test. With several pairs the statistic is the sum of the
// per-pair distances and labels are permuted within each pair.
PermutationResult energy_permutation_test(
    std::span<const std::pair<const Samples*, const Samples*>> pairs, Rng& rng,
    PermutationOptions options = {});
PermutationResult energy_permutation_test(const Samples& a, const Samples& b, Rng& rng,
                                          PermutationOptions options = {});

}  // namespace weakguide

#endif  // WEAKGUIDE_METRICS_HPP_
