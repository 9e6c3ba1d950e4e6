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
// Acceptance suite: one PASS/FAIL line per criterion.
//
// Usage: weakguide_acceptance [--known-failure N]...
// Exit status is 0 only when the failing criteria are exactly the listed
// known failures; an unexpected pass of a listed criterion also exits 1.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/core.h>

#include "weakguide/cli.hpp"
#include "weakguide/codec.hpp"
#include "weakguide/config.hpp"
#include "weakguide/experiments.hpp"
#include "weakguide/metrics.hpp"
#include "weakguide/stats.hpp"
#include "weakguide/world.hpp"

namespace fs = std::filesystem;
using namespace weakguide;

namespace {

const fs::path kConfig = fs::path(WEAKGUIDE_SOURCE_DIR) / "configs" / "default.toml";

struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;

  void require(bool ok, const std::string& what) {
    if (!ok) pass = false;
    notes.push_back((ok ? "ok: " : "FAILED: ") + what);
  }
};

class Rows {
 public:
  explicit Rows(std::vector<ResultRow> rows) : rows_(std::move(rows)) {}

  double get(const std::string& context, const std::string& method, const std::string& param,
             const std::string& metric) const {
    for (const auto& r : rows_) {
      if (r.context == context && r.method == method && r.param_value == param &&
          r.metric == metric) {
        return r.value;
      }
    }
    throw std::runtime_error(
        fmt::format("missing row {}/{}/{}/{}", context, method, param, metric));
  }

  const ResultRow& row(const std::string& context, const std::string& method,
                       const std::string& param, const std::string& metric) const {
    for (const auto& r : rows_) {
      if (r.context == context && r.method == method && r.param_value == param &&
          r.metric == metric) {
        return r;
      }
    }
    throw std::runtime_error(
        fmt::format("missing row {}/{}/{}/{}", context, method, param, metric));
  }

  const std::vector<ResultRow>& all() const { return rows_; }

 private:
  std::vector<ResultRow> rows_;
};

Rows experiment(const std::string& kind, const ExperimentConfig& config) {
  return Rows(run_experiment(kind, config).rows);
}

PromptSpec random_prompt(const World& world, const std::string& context, Rng& rng) {
  PromptSpec p;
  p.context = context;
  const auto& ctx = world.spec().context(context);
  if (!ctx.is_object() && rng.uniform() < 0.5) {
    const auto& fam = world.spec().families[ctx.families[rng.index(ctx.families.size())]];
    p.qualifier = fam.attributes[rng.index(fam.attributes.size())];
  }
  const auto& fill = world.spec().filler_tokens;
  const std::size_t extra = rng.index(3);
  for (std::size_t i = 0; i < extra; ++i) p.extra_tokens.push_back(fill[rng.index(fill.size())]);
  return p;
}

// 1. Analytic score against central differences of the diffused log density.
Outcome score_exactness(const ExperimentConfig& config) {
  Outcome o;
  const Lab lab = Lab::from_config(config);
  const World& world = lab.world();
  Rng rng(mix_seed(config.seed, 0xa11));
  const int dim = world.spec().dim;
  const double h = 1e-5;
  double worst = 0.0;
  for (int probe = 0; probe < 1000; ++probe) {
    const auto& ctx = world.spec().contexts[rng.index(world.spec().contexts.size())];
    const PromptSpec prompt = random_prompt(world, ctx.name, rng);
    const CondEmbedding c = world.codec().encode(prompt);
    const int t = 1 + static_cast<int>(rng.index(lab.schedule().steps()));
    const double abar = lab.schedule().abar(t);
    Vector z(dim);
    for (int i = 0; i < dim; ++i) z[i] = 4.0 * rng.normal();
    const MixtureParams m = diffused_mixture(world.mixture_for(c, ctx.name), abar);
    Vector fd(dim);
    for (int i = 0; i < dim; ++i) {
      Vector up = z;
      Vector down = z;
      up[i] += h;
      down[i] -= h;
      fd[i] = (m.log_density(up) - m.log_density(down)) / (2.0 * h);
    }
    const Vector s = world.score(z, abar, c, ctx.name);
    worst = std::max(worst, (s - fd).norm() / std::max(fd.norm(), 1e-12));
  }
  o.require(worst < 1e-4, fmt::format("max relative error {:.3g} over 1000 probes", worst));
  return o;
}

// 2. Vanilla sampling reproduces the prompt's mixture.
Outcome sampler_fidelity(const ExperimentConfig& config) {
  Outcome o;
  const int n = 5000;
  const Lab lab = Lab::from_config(config);
  const World& world = lab.world();
  std::vector<CellResult> sampled;
  std::vector<CellResult> oracle;
  int outside = 0;
  int checked = 0;
  for (const auto& ctx : world.spec().contexts) {
    CellSpec spec;
    spec.method = "vanilla";
    spec.prompt = make_prompt(ctx.name, config.prompt_extras);
    spec.guidance = guidance::Vanilla{};
    sampled.push_back(lab.sample_cell(spec, n));
    oracle.push_back(lab.oracle_cell(spec.prompt, n));
    if (ctx.is_object()) continue;
    // Exact marginal attribute probabilities of the prompt's mixture.
    const MixtureParams m = world.mixture_for(world.codec().encode(spec.prompt), ctx.name);
    for (std::size_t slot = 0; slot < ctx.families.size(); ++slot) {
      const auto& report = sampled.back().ratios[slot];
      std::vector<double> truth(report.attributes.size(), 0.0);
      for (std::size_t k = 0; k < ctx.components.size(); ++k) {
        truth[ctx.components[k].attributes[slot]] += m.weights[static_cast<Eigen::Index>(k)];
      }
      for (std::size_t a = 0; a < truth.size(); ++a) {
        const auto ci = stats::clopper_pearson(report.counts[a], report.n, 0.99);
        ++checked;
        if (truth[a] < ci.low || truth[a] > ci.high) {
          ++outside;
          o.notes.push_back(fmt::format("{} {}: {:.4f} outside [{:.4f}, {:.4f}]", ctx.name,
                                        report.attributes[a], truth[a], ci.low, ci.high));
        }
      }
    }
  }
  o.require(outside == 0,
            fmt::format("{} of {} attribute frequencies inside their 99% CI", checked - outside,
                        checked));
  std::vector<std::pair<const Samples*, const Samples*>> pairs;
  for (std::size_t i = 0; i < sampled.size(); ++i) {
    pairs.emplace_back(&sampled[i].samples, &oracle[i].samples);
  }
  Rng rng(mix_seed(config.seed, 0xf1d));
  PermutationOptions options;
  options.permutations = config.permutations;
  const auto test = energy_permutation_test(pairs, rng, options);
  o.require(test.statistic < test.threshold,
            fmt::format("combined energy {:.4g} < 95% threshold {:.4g} over {} contexts",
                        test.statistic, test.threshold, pairs.size()));
  return o;
}

// 3. Mode test.
Outcome mode_test(const ExperimentConfig& config) {
  Outcome o;
  const Rows rows = experiment("mode-test", config);
  const Lab lab = Lab::from_config(config);
  const int steps = lab.schedule().steps();
  const std::string mid = fmt::format("{}", static_cast<int>(std::lround(0.6 * steps)));
  for (const std::string ctx : {"ceo", "nurse"}) {
    const std::string minor = lab.minor_attribute(ctx);
    const double p = rows.get(ctx, "test", mid, "p_minor_above_vanilla");
    o.require(p < 0.01, fmt::format("{}: minor ratio above vanilla at t* = {}, p = {:.3g}", ctx,
                                    mid, p));
    const double r0 = rows.get(ctx, "mode_test", "0", "ratio:" + minor);
    o.require(r0 >= 0.99, fmt::format("{}: t* = 0 minor ratio {:.4f}", ctx, r0));
    const double pn = rows.get(ctx, "test", fmt::format("{}", steps), "p_minor_differs");
    o.require(pn >= 0.01, fmt::format("{}: t* = N vs vanilla, two-sided p = {:.3g}", ctx, pn));
  }
  return o;
}

// 4. CFG trend.
Outcome cfg_trend(const ExperimentConfig& config) {
  Outcome o;
  const Rows rows = experiment("sweep-cfg", config);
  const std::string ctx = config.sweep_cfg.context;
  const double pm = rows.get(ctx, "test", "", "p_trend_major");
  const double pa = rows.get(ctx, "test", "", "p_trend_alignment");
  const double dm = rows.get(ctx, "test", "", "min_p_adjacent_decrease_major");
  const double da = rows.get(ctx, "test", "", "min_p_adjacent_decrease_alignment");
  o.require(pm < 0.01, fmt::format("major ratio increasing trend p = {:.3g}", pm));
  o.require(dm >= 0.01, fmt::format("no significant adjacent decrease in major ratio, min p = {:.3g}", dm));
  o.require(pa < 0.01, fmt::format("alignment increasing trend p = {:.3g}", pa));
  o.require(da >= 0.01,
            fmt::format("no significant adjacent decrease in alignment, min p = {:.3g}", da));
  return o;
}

// 5. CADS trade-off.
Outcome cads_tradeoff(const ExperimentConfig& config) {
  Outcome o;
  ExperimentConfig c = config;
  c.sweep_cads.noise_scales = {0.0, 0.25};
  c.sweep_cads.tau1 = {0.6};
  c.sweep_cads.tau2 = 0.9;
  const Rows rows = experiment("sweep-cads", c);
  const std::string ctx = c.sweep_cads.context;
  const double pm = rows.get(ctx, "test", "0.25/0.6", "p_major_below_vanilla");
  const double pa = rows.get(ctx, "test", "0.25/0.6", "p_alignment_below_vanilla");
  const double p0m = rows.get(ctx, "test", "0/0.6", "p_major_differs");
  const double p0a = rows.get(ctx, "test", "0/0.6", "p_alignment_below_vanilla");
  o.require(pm < 0.01, fmt::format("s = 0.25: major ratio below vanilla p = {:.3g}", pm));
  o.require(pa < 0.01, fmt::format("s = 0.25: alignment below vanilla p = {:.3g}", pa));
  o.require(p0m >= 0.01 && p0a >= 0.01,
            fmt::format("s = 0: indistinguishable from vanilla (p = {:.3g}, {:.3g})", p0m, p0a));
  return o;
}

// 6. Swap monotonicity.
Outcome swap_monotone(const ExperimentConfig& config) {
  Outcome o;
  ExperimentConfig c = config;
  c.sweep_swap.grid = {0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
  const Rows rows = experiment("sweep-swap", c);
  const Lab lab = Lab::from_config(c);
  const std::string ctx = c.sweep_swap.context;
  const std::string minor =
      c.sweep_swap.attribute.empty() ? lab.minor_attribute(ctx) : c.sweep_swap.attribute;
  const double pt = rows.get(ctx, "test", "", "p_trend_attribute");
  const double pd = rows.get(ctx, "test", "", "min_p_adjacent_decrease");
  o.require(pt < 0.01, fmt::format("increasing trend p = {:.3g}", pt));
  o.require(pd >= 0.01, fmt::format("no significant adjacent decrease, min p = {:.3g}", pd));
  const auto& vanilla = rows.row(ctx, "vanilla", "0", "ratio:" + minor);
  const double r0 = rows.get(ctx, "swap", "0", "ratio:" + minor);
  o.require(r0 >= vanilla.ci_low && r0 <= vanilla.ci_high,
            fmt::format("fraction 0 ratio {:.4f} inside vanilla CI [{:.4f}, {:.4f}]", r0,
                        vanilla.ci_low, vanilla.ci_high));
  const double r1 = rows.get(ctx, "swap", "1", "ratio:" + minor);
  o.require(r1 >= 0.95, fmt::format("fraction 1 ratio {:.4f}", r1));
  return o;
}

// 7 and 9 share one debias run.
Outcome debiasing(const Rows& rows, const ExperimentConfig& config) {
  Outcome o;
  const std::size_t contexts = config.debias.contexts.size() + config.debias.multi_contexts.size();
  o.require(contexts >= 4, fmt::format("{} biased contexts", contexts));
  for (const std::string metric : {"avg_delta", "mean_discrepancy"}) {
    const double v = rows.get("all", "vanilla", "", metric);
    const double w = rows.get("all", "weak", "", metric);
    o.require(w <= 0.5 * v, fmt::format("{}: weak {:.4f} vs vanilla {:.4f}", metric, w, v));
  }
  return o;
}

Outcome versatility(const Rows& rows, const ExperimentConfig& config) {
  Outcome o;
  o.require(config.debias.object_contexts.size() >= 3,
            fmt::format("{} object contexts", config.debias.object_contexts.size()));
  for (const auto& ctx : config.debias.object_contexts) {
    const double d = rows.get(ctx, "test", "", "alignment_relative_difference");
    o.require(std::abs(d) <= 0.01, fmt::format("{}: alignment difference {:.4g}", ctx, d));
  }
  const double stat = rows.get("objects", "test", "", "energy_statistic");
  const double thr = rows.get("objects", "test", "", "energy_threshold_95");
  o.require(stat < thr, fmt::format("combined energy {:.4g} < threshold {:.4g}", stat, thr));
  return o;
}

// 8. Compliance with explicit qualifiers.
Outcome compliance_check(const ExperimentConfig& config) {
  Outcome o;
  const Rows rows = experiment("compliance", config);
  double lo_vanilla = 1.0;
  double lo_weak = 1.0;
  double hi_every = 0.0;
  int cells = 0;
  for (const auto& r : rows.all()) {
    if (r.metric != "compliance") continue;
    ++cells;
    if (r.method == "vanilla") lo_vanilla = std::min(lo_vanilla, r.value);
    if (r.method == "weak") lo_weak = std::min(lo_weak, r.value);
    if (r.method == "every_position") hi_every = std::max(hi_every, r.value);
  }
  o.require(cells > 0, fmt::format("{} compliance cells", cells));
  o.require(lo_vanilla >= 0.95, fmt::format("vanilla min compliance {:.4f}", lo_vanilla));
  o.require(lo_weak >= 0.95, fmt::format("weak (eos masked) min compliance {:.4f}", lo_weak));
  o.require(hi_every < 0.5, fmt::format("every_position max compliance {:.4f}", hi_every));
  return o;
}

// 10. Embedding edits over randomized cases.
Outcome embedding_edits(const ExperimentConfig& config) {
  Outcome o;
  const Lab lab = Lab::from_config(config);
  const World& world = lab.world();
  const Codec& codec = world.codec();
  const auto attributes = world.spec().attribute_tokens();
  Rng rng(mix_seed(config.seed, 0xed17));
  int locality = 0;
  double norm_err = 0.0;
  double moment_err = 0.0;
  int noop = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto& ctx = world.spec().contexts[rng.index(world.spec().contexts.size())];
    const CondEmbedding c = codec.encode(random_prompt(world, ctx.name, rng));
    const auto dir = codec.attribute_direction(attributes[rng.index(attributes.size())]);
    const auto mask = eos_mask(c);
    const CondEmbedding e = apply_weak(c, dir, MaskMode::kEosMasked);
    bool local = true;
    for (int i = 0; i < c.length(); ++i) {
      if (!mask[i] && e.matrix.row(i) != c.matrix.row(i)) local = false;
      norm_err = std::max(norm_err, std::abs(e.matrix.row(i).norm() - c.matrix.row(i).norm()));
    }
    locality += local;

    CadsParams params;
    params.noise_scale = 0.05 + rng.uniform();
    params.tau1 = 0.1 + 0.4 * rng.uniform();
    params.tau2 = params.tau1 + 0.05 + 0.4 * rng.uniform();
    const double active = params.tau1 + (params.tau2 - params.tau1) * rng.uniform();
    const CondEmbedding p = cads_perturb(c, active, params, rng);
    const double mean0 = c.matrix.mean();
    const double mean1 = p.matrix.mean();
    const auto sd = [](const RowMatrix& m) {
      const double mu = m.mean();
      return std::sqrt((m.array() - mu).square().sum() / static_cast<double>(m.size()));
    };
    moment_err = std::max({moment_err, std::abs(mean1 - mean0), std::abs(sd(p.matrix) - sd(c.matrix))});
    const double quiet = params.tau1 * rng.uniform();
    noop += cads_perturb(c, quiet, params, rng).matrix == c.matrix;
  }
  o.require(locality == 1000, fmt::format("mask locality in {}/1000 cases", locality));
  o.require(norm_err < 1e-9, fmt::format("max row-norm change {:.3g}", norm_err));
  o.require(moment_err < 1e-6, fmt::format("max CADS moment error {:.3g}", moment_err));
  o.require(noop == 1000, fmt::format("CADS no-op region exact in {}/1000 cases", noop));
  return o;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// 11. Byte-identical CSV across runs and worker counts.
Outcome reproducibility() {
  Outcome o;
  const fs::path root = fs::temp_directory_path() / "weakguide_acceptance";
  fs::remove_all(root);
  for (const auto& kind : kExperimentKinds) {
    std::vector<std::string> outputs;
    for (const auto& [run, workers] : std::vector<std::pair<int, int>>{{0, 1}, {1, 1}, {2, 4}}) {
      const fs::path dir = root / fmt::format("{}_{}", kind, run);
      std::ostringstream out;
      std::ostringstream err;
      const int rc = main_cli({"weakguide", kind, "--config", kConfig.string(), "--seed", "11",
                               "--n", "300", "--workers", std::to_string(workers), "--out",
                               dir.string()},
                              out, err);
      if (rc != 0) o.notes.push_back(fmt::format("{} exit {}: {}", kind, rc, err.str()));
      outputs.push_back(slurp(dir / "results.csv"));
    }
    const bool same = !outputs[0].empty() && outputs[0] == outputs[1] && outputs[0] == outputs[2];
    o.require(same, fmt::format("{}: {} bytes, identical across runs and workers {{1, 4}}", kind,
                                outputs[0].size()));
  }
  fs::remove_all(root);
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> known;
  for (int i = 1; i < argc; ++i) {
    if (std::string(argv[i]) == "--known-failure" && i + 1 < argc) {
      known.insert(std::stoi(argv[++i]));
    } else {
      std::cerr << "usage: weakguide_acceptance [--known-failure N]...\n";
      return 2;
    }
  }
  const ExperimentConfig config = load_config(kConfig);
  Rows debias_rows({});
  bool debias_ran = false;
  const auto debias = [&]() -> const Rows& {
    if (!debias_ran) {
      debias_rows = experiment("debias", config);
      debias_ran = true;
    }
    return debias_rows;
  };
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"1 score exactness", [&] { return score_exactness(config); }},
      {"2 sampler fidelity", [&] { return sampler_fidelity(config); }},
      {"3 mode test", [&] { return mode_test(config); }},
      {"4 cfg trend", [&] { return cfg_trend(config); }},
      {"5 cads trade-off", [&] { return cads_tradeoff(config); }},
      {"6 swap monotonicity", [&] { return swap_monotone(config); }},
      {"7 de-biasing", [&] { return debiasing(debias(), config); }},
      {"8 compliance", [&] { return compliance_check(config); }},
      {"9 versatility", [&] { return versatility(debias(), config); }},
      {"10 embedding edits", [&] { return embedding_edits(config); }},
      {"11 reproducibility", [] { return reproducibility(); }},
  };
  int failed = 0;
  bool as_expected = true;
  int index = 0;
  for (const auto& [name, run] : criteria) {
    ++index;
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = run();
    } catch (const std::exception& e) {
      outcome.require(false, std::string("exception: ") + e.what());
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failed += !outcome.pass;
    const bool listed = known.count(index) > 0;
    as_expected = as_expected && (outcome.pass != listed);
    std::cout << fmt::format("{} criterion {} ({:.1f} s){}\n", outcome.pass ? "PASS" : "FAIL",
                             name, secs,
                             listed ? (outcome.pass ? " [listed as known failure: now passes]"
                                                    : " [known failure]")
                                    : "");
    for (const auto& note : outcome.notes) std::cout << "    " << note << "\n";
    std::cout.flush();
  }
  std::cout << fmt::format("{} of {} criteria passed\n", criteria.size() - failed,
                           criteria.size());
  return as_expected ? 0 : 1;
}
