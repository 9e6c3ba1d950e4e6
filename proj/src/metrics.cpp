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

#include "weakguide/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "weakguide/error.hpp"

namespace weakguide {

int RatioReport::index_of(std::string_view attribute) const {
  for (std::size_t i = 0; i < attributes.size(); ++i) {
    if (attributes[i] == attribute) return static_cast<int>(i);
  }
  throw InvalidArgument("attribute '" + std::string(attribute) + "' not in report for '" +
                        context + "'");
}

RatioReport make_ratio_report(std::string context, std::string family,
                              std::vector<std::string> attributes,
                              std::vector<std::int64_t> counts) {
  if (attributes.size() != counts.size()) throw InvalidArgument("counts do not match attributes");
  RatioReport r;
  r.context = std::move(context);
  r.family = std::move(family);
  r.attributes = std::move(attributes);
  r.counts = std::move(counts);
  r.n = std::accumulate(r.counts.begin(), r.counts.end(), std::int64_t{0});
  if (r.n < 1) throw InvalidArgument("ratio report needs at least one sample");
  for (auto c : r.counts) r.ratios.push_back(static_cast<double>(c) / r.n);
  return r;
}

RatioReport attribute_ratio(const World& world, const Samples& samples,
                            std::string_view context, int slot) {
  if (samples.rows() < 1) throw InvalidArgument("ratio needs at least one sample");
  const ContextSpec& ctx = world.spec().context(context);
  if (ctx.is_object()) throw NoAttributeError(ctx.name);
  if (slot < 0 || slot >= static_cast<int>(ctx.families.size())) {
    throw InvalidArgument("context '" + ctx.name + "' has no family slot " + std::to_string(slot));
  }
  const auto& family = world.spec().families[ctx.families[slot]];
  std::vector<std::int64_t> counts(family.attributes.size(), 0);
  for (Eigen::Index i = 0; i < samples.rows(); ++i) {
    const Vector x = samples.row(i).transpose();
    ++counts[world.classify(x, context, slot).attribute];
  }
  return make_ratio_report(ctx.name, family.name, family.attributes, std::move(counts));
}

double avg_delta(std::span<const RatioReport> reports) {
  if (reports.empty()) throw InvalidArgument("avg_delta needs at least one report");
  double s = 0.0;
  for (const auto& r : reports) {
    if (r.ratios.size() != 2) throw InvalidArgument("avg_delta needs binary attribute sets");
    s += std::abs(r.ratios[0] - 0.5);
  }
  return s / static_cast<double>(reports.size());
}

DiscrepancyReport discrepancy(const RatioReport& report) {
  const auto k = report.ratios.size();
  if (k < 2) throw InvalidArgument("discrepancy needs at least two attributes");
  DiscrepancyReport out;
  const double target = 1.0 / static_cast<double>(k);
  for (double r : report.ratios) {
    out.deviations.push_back(std::abs(r - target));
    out.value += out.deviations.back();
  }
  out.value /= static_cast<double>(k);
  return out;
}

double compliance(const World& world, const Samples& samples, std::string_view context,
                  std::string_view specified) {
  if (samples.rows() < 1) throw InvalidArgument("compliance of an empty sample set");
  const ContextSpec& ctx = world.spec().context(context);
  const auto [family, _] = world.spec().locate_attribute(specified);
  const auto it = std::find(ctx.families.begin(), ctx.families.end(), family);
  if (it == ctx.families.end()) throw NoAttributeError(ctx.name);
  const int slot = static_cast<int>(it - ctx.families.begin());
  return attribute_ratio(world, samples, context, slot).ratio(specified);
}

std::vector<double> alignment_values(const World& world, const Samples& samples,
                                     const PromptSpec& prompt) {
  const MixtureParams m = world.mixture_for(world.codec().encode(prompt), prompt.context);
  std::vector<double> out(samples.rows());
  for (Eigen::Index i = 0; i < samples.rows(); ++i) {
    out[i] = m.log_density(samples.row(i).transpose());
  }
  return out;
}

double alignment_score(const World& world, const Samples& samples,
                       const PromptSpec& prompt) {
  if (samples.rows() < 1) throw InvalidArgument("alignment of an empty sample set");
  const auto v = alignment_values(world, samples, prompt);
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

namespace {

double mean_cross_distance(const Samples& a, const Samples& b) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < b.rows(); ++j) s += (a.row(i) - b.row(j)).norm();
  }
  return s / (static_cast<double>(a.rows()) * static_cast<double>(b.rows()));
}

double mean_self_distance(const Samples& a) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < a.rows(); ++j) s += (a.row(i) - a.row(j)).norm();
  }
  const auto n = static_cast<double>(a.rows());
  return 2.0 * s / (n * n);
}

Samples subsample(const Samples& s, int max_rows, Rng& rng) {
  if (s.rows() <= max_rows) return s;
  std::vector<Eigen::Index> idx(s.rows());
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng.engine());
  Samples out(max_rows, s.cols());
  for (int i = 0; i < max_rows; ++i) out.row(i) = s.row(idx[i]);
  return out;
}

// Energy statistic of every permutation of one pair, index 0 being the
// observed labelling.
std::vector<double> permutation_energies(const Samples& a, const Samples& b, int perms,
                                         Rng& rng) {
  const Eigen::Index n = a.rows();
  const Eigen::Index m = b.rows();
  const Eigen::Index total = n + m;
  Samples pooled(total, a.cols());
  pooled << a, b;
  Matrix dist(total, total);
  for (Eigen::Index i = 0; i < total; ++i) {
    dist(i, i) = 0.0;
    for (Eigen::Index j = i + 1; j < total; ++j) {
      dist(i, j) = dist(j, i) = (pooled.row(i) - pooled.row(j)).norm();
    }
  }
  const Vector row_sums = dist.rowwise().sum();
  const double all = row_sums.sum();

  std::vector<Eigen::Index> order(total);
  std::iota(order.begin(), order.end(), 0);
  Vector in_a(total);
  std::vector<double> out;
  out.reserve(perms + 1);
  const auto nd = static_cast<double>(n);
  const auto md = static_cast<double>(m);
  for (int p = 0; p <= perms; ++p) {
    if (p > 0) std::shuffle(order.begin(), order.end(), rng.engine());
    in_a.setZero();
    for (Eigen::Index i = 0; i < n; ++i) in_a[order[i]] = 1.0;
    const Vector d_a = dist * in_a;
    const double s_aa = in_a.dot(d_a);
    // Sum over a-rows of distances to every point, minus the a-a block.
    const double s_ab = in_a.dot(row_sums) - s_aa;
    const double s_bb = all - s_aa - 2.0 * s_ab;
    out.push_back(2.0 * s_ab / (nd * md) - s_aa / (nd * nd) - s_bb / (md * md));
  }
  return out;
}

}  // namespace

double energy_distance(const Samples& a, const Samples& b) {
  if (a.rows() < 1 || b.rows() < 1) throw InvalidArgument("energy distance needs samples");
  if (a.cols() != b.cols()) throw InvalidArgument("energy distance dimension mismatch");
  const double e = 2.0 * mean_cross_distance(a, b) - mean_self_distance(a) -
                   mean_self_distance(b);
  return std::max(0.0, e);
}

PermutationResult energy_permutation_test(
    std::span<const std::pair<const Samples*, const Samples*>> pairs, Rng& rng,
    PermutationOptions options) {
  if (pairs.empty()) throw InvalidArgument("permutation test needs a sample pair");
  if (options.permutations < 19) throw InvalidArgument("permutation test needs >= 19 permutations");
  std::vector<double> totals(options.permutations + 1, 0.0);
  for (const auto& [a, b] : pairs) {
    if (a->rows() < 1 || b->rows() < 1) throw InvalidArgument("energy test needs samples");
    const Samples sa = subsample(*a, options.max_per_side, rng);
    const Samples sb = subsample(*b, options.max_per_side, rng);
    const auto e = permutation_energies(sa, sb, options.permutations, rng);
    for (std::size_t i = 0; i < e.size(); ++i) totals[i] += e[i];
  }
  PermutationResult out;
  out.permutations = options.permutations;
  out.statistic = totals[0];
  std::vector<double> null(totals.begin() + 1, totals.end());
  std::sort(null.begin(), null.end());
  const auto q = static_cast<std::size_t>(
      std::ceil(0.95 * static_cast<double>(null.size() + 1))) - 1;
  out.threshold = null[std::min(q, null.size() - 1)];
  const auto at_least = std::count_if(null.begin(), null.end(),
                                      [&](double v) { return v >= out.statistic; });
  out.p_value = static_cast<double>(at_least + 1) / static_cast<double>(null.size() + 1);
  return out;
}

PermutationResult energy_permutation_test(const Samples& a, const Samples& b, Rng& rng,
                                          PermutationOptions options) {
  const std::pair<const Samples*, const Samples*> pair{&a, &b};
  return energy_permutation_test(std::span(&pair, 1), rng, options);
}

}  // namespace weakguide
