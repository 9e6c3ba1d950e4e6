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

#include "weakguide/stats.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/distributions/beta.hpp>
#include <boost/math/distributions/binomial.hpp>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "weakguide/error.hpp"

namespace weakguide::stats {

namespace {

double p_from_z(double z, Alternative alt) {
  switch (alt) {
    case Alternative::kGreater:
      return 1.0 - normal_cdf(z);
    case Alternative::kLess:
      return normal_cdf(z);
    case Alternative::kTwoSided:
      break;
  }
  return 2.0 * (1.0 - normal_cdf(std::abs(z)));
}

}  // namespace

double normal_cdf(double z) {
  return 0.5 * std::erfc(-z / std::sqrt(2.0));
}

double normal_quantile(double p) {
  return boost::math::quantile(boost::math::normal(), p);
}

Interval clopper_pearson(std::int64_t k, std::int64_t n, double confidence) {
  if (n < 1 || k < 0 || k > n) throw InvalidArgument("binomial interval needs 0 <= k <= n, n >= 1");
  const double tail = (1.0 - confidence) / 2.0;
  Interval out;
  const auto kd = static_cast<double>(k);
  const auto nd = static_cast<double>(n);
  out.low = k == 0 ? 0.0
                   : boost::math::quantile(boost::math::beta_distribution<>(kd, nd - kd + 1.0),
                                           tail);
  out.high = k == n ? 1.0
                    : boost::math::quantile(
                          boost::math::beta_distribution<>(kd + 1.0, nd - kd), 1.0 - tail);
  return out;
}

Interval wald_interval(std::int64_t k, std::int64_t n, double confidence) {
  if (n < 1 || k < 0 || k > n) throw InvalidArgument("binomial interval needs 0 <= k <= n, n >= 1");
  const double p = static_cast<double>(k) / n;
  const double half = normal_quantile(0.5 + confidence / 2.0) * std::sqrt(p * (1.0 - p) / n);
  return {std::max(0.0, p - half), std::min(1.0, p + half)};
}

TestResult two_proportion_test(std::int64_t k1, std::int64_t n1, std::int64_t k2,
                               std::int64_t n2, Alternative alt) {
  if (n1 < 1 || n2 < 1) throw InvalidArgument("proportion test needs n >= 1");
  const double p1 = static_cast<double>(k1) / n1;
  const double p2 = static_cast<double>(k2) / n2;
  const double pooled = static_cast<double>(k1 + k2) / (n1 + n2);
  const double se = std::sqrt(pooled * (1.0 - pooled) * (1.0 / n1 + 1.0 / n2));
  TestResult out;
  if (se == 0.0) {
    out.statistic = 0.0;
    out.p_value = 1.0;
    return out;
  }
  out.statistic = (p1 - p2) / se;
  out.p_value = p_from_z(out.statistic, alt);
  return out;
}

TestResult cochran_armitage(std::span<const std::int64_t> successes,
                            std::span<const std::int64_t> totals,
                            std::span<const double> scores) {
  const auto g = successes.size();
  if (g < 2 || totals.size() != g || scores.size() != g) {
    throw InvalidArgument("trend test needs matching groups, at least two");
  }
  double n = 0.0;
  double r = 0.0;
  for (std::size_t i = 0; i < g; ++i) {
    n += static_cast<double>(totals[i]);
    r += static_cast<double>(successes[i]);
  }
  const double p = r / n;
  double t = 0.0;
  double s1 = 0.0;
  double s2 = 0.0;
  for (std::size_t i = 0; i < g; ++i) {
    const auto ni = static_cast<double>(totals[i]);
    t += scores[i] * (static_cast<double>(successes[i]) - ni * p);
    s1 += ni * scores[i] * scores[i];
    s2 += ni * scores[i];
  }
  const double var = p * (1.0 - p) * (s1 - s2 * s2 / n);
  TestResult out;
  if (var <= 0.0) return out;
  out.statistic = t / std::sqrt(var);
  out.p_value = p_from_z(out.statistic, Alternative::kGreater);
  return out;
}

TestResult jonckheere_terpstra(const std::vector<std::vector<double>>& groups) {
  if (groups.size() < 2) throw InvalidArgument("trend test needs at least two groups");
  double j = 0.0;
  double n = 0.0;
  double sum_sq = 0.0;
  std::vector<std::vector<double>> sorted = groups;
  for (auto& g : sorted) {
    if (g.empty()) throw InvalidArgument("trend test group is empty");
    std::sort(g.begin(), g.end());
    const auto ni = static_cast<double>(g.size());
    n += ni;
    sum_sq += ni * ni * (2.0 * ni + 3.0);
  }
  // Mann-Whitney counts of later-group values above earlier-group values.
  for (std::size_t a = 0; a < sorted.size(); ++a) {
    for (std::size_t b = a + 1; b < sorted.size(); ++b) {
      const auto& lo = sorted[a];
      for (double y : sorted[b]) {
        const auto below = std::lower_bound(lo.begin(), lo.end(), y) - lo.begin();
        const auto not_above = std::upper_bound(lo.begin(), lo.end(), y) - lo.begin();
        j += static_cast<double>(below) + 0.5 * static_cast<double>(not_above - below);
      }
    }
  }
  double mean_j = n * n;
  for (const auto& g : sorted) mean_j -= static_cast<double>(g.size() * g.size());
  mean_j /= 4.0;
  const double var = (n * n * (2.0 * n + 3.0) - sum_sq) / 72.0;
  TestResult out;
  out.statistic = (j - mean_j) / std::sqrt(var);
  out.p_value = p_from_z(out.statistic, Alternative::kGreater);
  return out;
}

double mean(std::span<const double> v) {
  if (v.empty()) throw InvalidArgument("mean of an empty sample");
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double variance(std::span<const double> v) {
  if (v.size() < 2) throw InvalidArgument("variance needs at least two values");
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

TestResult welch_test(std::span<const double> a, std::span<const double> b,
                      Alternative alt) {
  const auto na = static_cast<double>(a.size());
  const auto nb = static_cast<double>(b.size());
  const double va = variance(a) / na;
  const double vb = variance(b) / nb;
  TestResult out;
  const double se = std::sqrt(va + vb);
  if (se == 0.0) return out;
  out.statistic = (mean(a) - mean(b)) / se;
  const double df = (va + vb) * (va + vb) / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
  const boost::math::students_t dist(df);
  const double upper = boost::math::cdf(boost::math::complement(dist, out.statistic));
  switch (alt) {
    case Alternative::kGreater:
      out.p_value = upper;
      break;
    case Alternative::kLess:
      out.p_value = boost::math::cdf(dist, out.statistic);
      break;
    case Alternative::kTwoSided:
      out.p_value =
          2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(out.statistic)));
      break;
  }
  return out;
}

TestResult page_trend_test(const std::vector<std::vector<double>>& values) {
  if (values.empty()) throw InvalidArgument("trend test needs at least one block");
  const std::size_t k = values.front().size();
  if (k < 2) throw InvalidArgument("trend test needs at least two treatments");
  const double c_mean = (static_cast<double>(k) + 1.0) / 2.0;
  double c_ss = 0.0;
  for (std::size_t j = 0; j < k; ++j) c_ss += (j + 1.0 - c_mean) * (j + 1.0 - c_mean);

  double l = 0.0;
  double expected = 0.0;
  double var = 0.0;
  std::vector<std::size_t> order(k);
  std::vector<double> ranks(k);
  for (const auto& block : values) {
    if (block.size() != k) throw InvalidArgument("blocks differ in treatment count");
    for (std::size_t j = 0; j < k; ++j) order[j] = j;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return block[a] < block[b]; });
    for (std::size_t i = 0; i < k;) {
      std::size_t e = i;
      while (e + 1 < k && block[order[e + 1]] == block[order[i]]) ++e;
      const double mid = (static_cast<double>(i + e) + 2.0) / 2.0;
      for (std::size_t q = i; q <= e; ++q) ranks[order[q]] = mid;
      i = e + 1;
    }
    double r_ss = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      l += (j + 1.0) * ranks[j];
      r_ss += (ranks[j] - c_mean) * (ranks[j] - c_mean);
    }
    expected += c_mean * c_mean * static_cast<double>(k);
    var += c_ss * r_ss / (static_cast<double>(k) - 1.0);
  }
  TestResult out;
  if (var <= 0.0) return out;
  out.statistic = (l - expected) / std::sqrt(var);
  out.p_value = p_from_z(out.statistic, Alternative::kGreater);
  return out;
}

TestResult sign_test(std::int64_t up, std::int64_t down, Alternative alt) {
  if (up < 0 || down < 0) throw InvalidArgument("sign test counts must be >= 0");
  TestResult out;
  const std::int64_t n = up + down;
  out.statistic = static_cast<double>(up - down);
  if (n == 0) return out;
  const boost::math::binomial dist(static_cast<double>(n), 0.5);
  const double upper = up == 0 ? 1.0 : boost::math::cdf(boost::math::complement(dist, up - 1.0));
  const double lower = boost::math::cdf(dist, static_cast<double>(up));
  switch (alt) {
    case Alternative::kGreater:
      out.p_value = upper;
      break;
    case Alternative::kLess:
      out.p_value = lower;
      break;
    case Alternative::kTwoSided:
      out.p_value = std::min(1.0, 2.0 * std::min(upper, lower));
      break;
  }
  return out;
}

TestResult paired_t_test(std::span<const double> a, std::span<const double> b, Alternative alt) {
  if (a.size() != b.size() || a.size() < 2) {
    throw InvalidArgument("paired test needs two equal-length samples of size >= 2");
  }
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  TestResult out;
  const double se = std::sqrt(variance(d) / static_cast<double>(d.size()));
  if (se == 0.0) return out;
  out.statistic = mean(d) / se;
  const boost::math::students_t dist(static_cast<double>(d.size() - 1));
  const double upper = boost::math::cdf(boost::math::complement(dist, out.statistic));
  switch (alt) {
    case Alternative::kGreater:
      out.p_value = upper;
      break;
    case Alternative::kLess:
      out.p_value = boost::math::cdf(dist, out.statistic);
      break;
    case Alternative::kTwoSided:
      out.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(out.statistic)));
      break;
  }
  return out;
}

TestResult chi_square_uniform(std::span<const std::int64_t> counts) {
  if (counts.size() < 2) throw InvalidArgument("chi-square test needs two cells");
  double n = 0.0;
  for (auto c : counts) n += static_cast<double>(c);
  if (n <= 0.0) throw InvalidArgument("chi-square test needs observations");
  const double expected = n / static_cast<double>(counts.size());
  TestResult out;
  for (auto c : counts) {
    const double d = static_cast<double>(c) - expected;
    out.statistic += d * d / expected;
  }
  const boost::math::chi_squared dist(static_cast<double>(counts.size() - 1));
  out.p_value = boost::math::cdf(boost::math::complement(dist, out.statistic));
  return out;
}

}  // namespace weakguide::stats
