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
#include <cmath>
#include <vector>

#include "doctest.h"
#include "weakguide/error.hpp"
#include "weakguide/metrics.hpp"
#include "weakguide/world.hpp"

using namespace weakguide;
using doctest::Approx;

namespace {

const World& world() {
  static const World w = World::with_codec(default_world_spec());
  return w;
}

RatioReport binary(std::int64_t first, std::int64_t second) {
  return make_ratio_report("ctx", "gender", {"female", "male"}, {first, second});
}

Samples column(std::vector<double> v) {
  Samples s(static_cast<Eigen::Index>(v.size()), 1);
  for (std::size_t i = 0; i < v.size(); ++i) s(static_cast<Eigen::Index>(i), 0) = v[i];
  return s;
}

Samples gaussian(int n, double shift, Rng& rng) {
  Samples s(n, 2);
  for (int i = 0; i < n; ++i) {
    s(i, 0) = rng.normal() + shift;
    s(i, 1) = rng.normal();
  }
  return s;
}

}  // namespace

TEST_CASE("ratio reports") {
  const auto r = binary(500, 500);
  CHECK(r.n == 1000);
  CHECK(r.ratio("female") == 0.5);
  CHECK(r.count("male") == 500);
  CHECK_THROWS_AS(r.index_of("purple"), InvalidArgument);
  CHECK_THROWS_AS(binary(0, 0), InvalidArgument);
}

TEST_CASE("avg delta") {
  const std::vector<RatioReport> even = {binary(5, 5)};
  CHECK(avg_delta(even) == 0.0);
  const std::vector<RatioReport> extremes = {binary(1, 0), binary(0, 1)};
  CHECK(avg_delta(extremes) == 0.5);
  const std::vector<RatioReport> three = {
      make_ratio_report("c", "f", {"a", "b", "c"}, {1, 1, 1})};
  CHECK_THROWS_AS(avg_delta(three), InvalidArgument);
}

TEST_CASE("default profession priors give a vanilla Avg delta of 0.403") {
  std::vector<RatioReport> reports;
  for (const auto& ctx : world().spec().contexts) {
    if (ctx.families.size() != 1) continue;
    const Vector p = ctx.prior_logits[0].array().exp();
    const auto scaled = [&](Eigen::Index k) {
      return static_cast<std::int64_t>(std::llround(1e6 * p[k] / p.sum()));
    };
    reports.push_back(make_ratio_report(ctx.name, "gender", {"female", "male"},
                                        {scaled(0), scaled(1)}));
  }
  CHECK(reports.size() == 8u);
  CHECK(avg_delta(reports) == Approx(0.403).epsilon(0.0025));
}

TEST_CASE("discrepancy") {
  CHECK(discrepancy(binary(3, 3)).value == 0.0);
  CHECK(discrepancy(binary(1, 0)).value == 0.5);
  const auto five = make_ratio_report("c", "f", {"a", "b", "c", "d", "e"}, {7, 0, 0, 0, 0});
  const auto d = discrepancy(five);
  CHECK(d.value == Approx(0.32));
  CHECK(d.deviations.size() == 5u);
  CHECK(d.deviations[0] == Approx(0.8));
}

TEST_CASE("attribute ratios and compliance from labelled points") {
  const auto& ctx = world().spec().context("lawyer");
  // 3 points at the (female, white) component and 1 at (male, asian).
  Samples s(4, 2);
  int fw = -1;
  int ma = -1;
  for (std::size_t k = 0; k < ctx.components.size(); ++k) {
    const auto& a = ctx.components[k].attributes;
    if (a[0] == 0 && a[1] == 0) fw = static_cast<int>(k);
    if (a[0] == 1 && a[1] == 2) ma = static_cast<int>(k);
  }
  REQUIRE(fw >= 0);
  REQUIRE(ma >= 0);
  for (int i = 0; i < 3; ++i) s.row(i) = ctx.components[fw].mean.transpose();
  s.row(3) = ctx.components[ma].mean.transpose();

  const auto gender = attribute_ratio(world(), s, "lawyer", 0);
  CHECK(gender.ratio("female") == 0.75);
  const auto race = attribute_ratio(world(), s, "lawyer", 1);
  CHECK(race.family == "race");
  CHECK(race.counts == std::vector<std::int64_t>{3, 0, 1, 0});
  CHECK(compliance(world(), s, "lawyer", "male") == 0.25);
  CHECK(compliance(world(), s, "lawyer", "white") == 0.75);

  CHECK_THROWS_AS(attribute_ratio(world(), s, "car"), NoAttributeError);
  CHECK_THROWS_AS(attribute_ratio(world(), s, "lawyer", 2), InvalidArgument);
  CHECK_THROWS_AS(compliance(world(), s, "ceo", "white"), NoAttributeError);
}

TEST_CASE("alignment is the prompt's log density") {
  PromptSpec p;
  p.context = "dog";
  Rng rng(8);
  const Samples s = gaussian(20, 0.5, rng);
  const auto v = alignment_values(world(), s, p);
  const CondEmbedding c = world().codec().encode(p);
  double mean = 0.0;
  for (int i = 0; i < 20; ++i) {
    const double expect = world().log_density(s.row(i).transpose(), c, "dog");
    CHECK(v[i] == Approx(expect).epsilon(1e-12));
    mean += expect / 20.0;
  }
  CHECK(alignment_score(world(), s, p) == Approx(mean).epsilon(1e-12));
}

TEST_CASE("energy distance") {
  CHECK(energy_distance(column({0}), column({1})) == Approx(2.0));
  // Cross mean 1, within-a mean 1 (V-statistic), within-b 0.
  CHECK(energy_distance(column({0, 2}), column({1})) == Approx(1.0));
  const Samples same = column({0.1, 0.7, -2.0});
  CHECK(energy_distance(same, same) == 0.0);
  CHECK_THROWS_AS(energy_distance(column({}), same), InvalidArgument);
}

TEST_CASE("energy permutation test") {
  Rng rng(21);
  const Samples a = gaussian(300, 0.0, rng);
  const Samples b = gaussian(300, 0.0, rng);
  const Samples far = gaussian(300, 0.6, rng);

  Rng t1(1);
  const auto null = energy_permutation_test(a, b, t1);
  CHECK(null.permutations == 199);
  CHECK(null.p_value > 0.05);
  CHECK(null.statistic < null.threshold);
  CHECK(null.statistic == Approx(energy_distance(a, b)).epsilon(1e-10));

  Rng t2(1);
  const auto shifted = energy_permutation_test(a, far, t2);
  CHECK(shifted.p_value == Approx(1.0 / 200.0));
  CHECK(shifted.statistic > shifted.threshold);

  SUBCASE("subsampling caps each side") {
    PermutationOptions small;
    small.max_per_side = 100;
    small.permutations = 99;
    Rng t3(2);
    const auto r = energy_permutation_test(a, far, t3, small);
    CHECK(r.permutations == 99);
    CHECK(r.p_value <= 0.05);
  }
  SUBCASE("pairs combine by summing statistics") {
    const std::vector<std::pair<const Samples*, const Samples*>> pairs = {{&a, &b}, {&a, &far}};
    Rng t4(3);
    const auto r = energy_permutation_test(pairs, t4);
    CHECK(r.statistic ==
          Approx(energy_distance(a, b) + energy_distance(a, far)).epsilon(1e-10));
    CHECK(r.p_value < 0.05);
  }
  Rng t5(4);
  PermutationOptions few;
  few.permutations = 5;
  CHECK_THROWS_AS(energy_permutation_test(a, b, t5, few), InvalidArgument);
}

TEST_CASE("energy test false-alarm rate") {
  // Under the null the 95% threshold should be exceeded about 5% of the time.
  Rng rng(33);
  int rejections = 0;
  const int trials = 200;
  PermutationOptions opt;
  opt.permutations = 99;
  for (int i = 0; i < trials; ++i) {
    const Samples a = gaussian(40, 0.0, rng);
    const Samples b = gaussian(40, 0.0, rng);
    rejections += energy_permutation_test(a, b, rng, opt).p_value <= 0.05;
  }
  // Binomial(200, 0.05): mean 10, sd about 3.1.
  CHECK(rejections <= 22);
}
