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

#include "weakguide/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <fmt/format.h>

#include "weakguide/error.hpp"
#include "weakguide/parallel.hpp"
#include "weakguide/stats.hpp"

namespace weakguide {

namespace {

std::string short_number(double v) { return fmt::format("{:g}", v); }

GuidanceSpec plain(double alpha) {
  if (alpha == 0.0) return guidance::Vanilla{};
  return guidance::Cfg{alpha};
}

// Attribute sets to steer toward in a context: every family it has, or the
// first world family for object contexts.
std::vector<std::vector<std::string>> steering_sets(const World& world,
                                                   const std::string& context) {
  const ContextSpec& ctx = world.spec().context(context);
  std::vector<std::vector<std::string>> sets;
  if (ctx.is_object()) {
    if (!world.spec().families.empty()) sets.push_back(world.spec().families[0].attributes);
    return sets;
  }
  for (int f : ctx.families) sets.push_back(world.spec().families[f].attributes);
  return sets;
}

}  // namespace

double CellResult::alignment_mean() const { return stats::mean(alignment); }

const RatioReport& CellResult::report(std::string_view family) const {
  if (ratios.empty()) throw NoAttributeError(context);
  if (family.empty()) return ratios.front();
  for (const auto& r : ratios) {
    if (r.family == family) return r;
  }
  throw InvalidArgument("no report for family '" + std::string(family) + "'");
}

PromptSpec make_prompt(const std::string& context, const std::vector<std::string>& extras,
                       std::optional<std::string> qualifier) {
  PromptSpec p;
  p.context = context;
  p.qualifier = std::move(qualifier);
  p.extra_tokens = extras;
  return p;
}

Lab::Lab(World world, Schedule schedule, std::uint64_t seed, int workers, SamplerMode mode)
    : world_(std::move(world)),
      schedule_(std::move(schedule)),
      seed_(seed),
      workers_(workers),
      mode_(mode) {}

Lab Lab::from_config(const ExperimentConfig& config) {
  return Lab(World::with_codec(config.world, config.codec), Schedule::linear(config.steps),
             config.seed, config.workers, config.mode);
}

CellResult Lab::finish_cell(const CellSpec& spec, Samples samples,
                            std::vector<std::vector<std::string>> targets,
                            double seconds) const {
  CellResult cell;
  cell.context = spec.prompt.context;
  cell.method = spec.method;
  cell.param_name = spec.param_name;
  cell.param_value = spec.param_value;
  cell.param_label =
      spec.param_label.empty() ? short_number(spec.param_value) : spec.param_label;
  cell.prompt = spec.prompt;
  cell.guidance = spec.guidance;
  const ContextSpec& ctx = world_.spec().context(cell.context);
  for (std::size_t f = 0; f < ctx.families.size(); ++f) {
    cell.ratios.push_back(attribute_ratio(world_, samples, cell.context, static_cast<int>(f)));
  }
  cell.alignment = alignment_values(world_, samples, spec.prompt);
  cell.samples = std::move(samples);
  cell.targets = std::move(targets);
  cell.wall_seconds = seconds;
  return cell;
}

CellResult Lab::sample_cell(const CellSpec& spec, int n, const StartFn& start) const {
  if (n < 1) throw InvalidArgument("cell needs at least one chain");
  validate(spec.guidance);
  const auto t0 = std::chrono::steady_clock::now();
  const Sampler sampler(world_, schedule_, spec.prompt.context, mode_);
  Samples samples(n, world_.spec().dim);
  std::vector<std::vector<std::string>> targets(n);
  parallel_for(static_cast<std::size_t>(n), workers_, [&](std::size_t i) {
    Rng guidance_rng = Rng::for_chain(seed_, i, Stream::kGuidance);
    Rng diffusion_rng = Rng::for_chain(seed_, i, Stream::kDiffusion);
    GuidanceDriver driver = make_driver(spec.guidance, spec.prompt, world_.codec(), guidance_rng);
    const ChainStart s = start ? start(static_cast<int>(i)) : ChainStart::fresh();
    samples.row(static_cast<Eigen::Index>(i)) =
        sampler.run_chain(driver, s, diffusion_rng, guidance_rng).transpose();
    targets[i] = driver.targets();
  });
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return finish_cell(spec, std::move(samples), std::move(targets), seconds);
}

CellResult Lab::oracle_cell(const PromptSpec& prompt, int n) const {
  if (n < 1) throw InvalidArgument("cell needs at least one sample");
  const auto t0 = std::chrono::steady_clock::now();
  Samples samples(n, world_.spec().dim);
  parallel_for(static_cast<std::size_t>(n), workers_, [&](std::size_t i) {
    Rng rng = Rng::for_chain(seed_, i, Stream::kOracle);
    samples.row(static_cast<Eigen::Index>(i)) =
        world_.sample_oracle(prompt, 1, rng).front().x.transpose();
  });
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CellSpec spec;
  spec.method = "oracle";
  spec.prompt = prompt;
  return finish_cell(spec, std::move(samples), {}, seconds);
}

namespace {

Vector first_family_marginal(const World& world, const std::string& context) {
  const ContextSpec& ctx = world.spec().context(context);
  if (ctx.is_object()) throw NoAttributeError(context);
  const Vector w = world.log_weights(world.codec().encode(make_prompt(context)), context)
                       .array()
                       .exp();
  Vector m = Vector::Zero(static_cast<Eigen::Index>(
      world.spec().families[ctx.families[0]].attributes.size()));
  for (std::size_t k = 0; k < ctx.components.size(); ++k) {
    m[ctx.components[k].attributes[0]] += w[static_cast<Eigen::Index>(k)];
  }
  return m;
}

}  // namespace

std::string Lab::major_attribute(const std::string& context) const {
  const Vector m = first_family_marginal(world_, context);
  Eigen::Index best = 0;
  m.maxCoeff(&best);
  const ContextSpec& ctx = world_.spec().context(context);
  return world_.spec().families[ctx.families[0]].attributes[best];
}

std::string Lab::minor_attribute(const std::string& context) const {
  const Vector m = first_family_marginal(world_, context);
  Eigen::Index worst = 0;
  m.minCoeff(&worst);
  const ContextSpec& ctx = world_.spec().context(context);
  return world_.spec().families[ctx.families[0]].attributes[worst];
}

CellResult run_mode_test(const Lab& lab, const std::string& context, const std::string& minor,
                         int t_star, int n, double alpha,
                         const std::vector<std::string>& extras) {
  const int steps = lab.schedule().steps();
  if (t_star < 0 || t_star > steps) {
    throw InvalidArgument(fmt::format("t* = {} outside [0, {}]", t_star, steps));
  }
  const PromptSpec qualified = make_prompt(context, extras, minor);
  (void)lab.world().spec().locate_attribute(minor);
  const World& world = lab.world();
  const Schedule& schedule = lab.schedule();
  const std::uint64_t seed = lab.seed();
  StartFn start = [&](int chain) {
    Rng oracle_rng = Rng::for_chain(seed, static_cast<std::uint64_t>(chain), Stream::kOracle);
    Rng forward_rng = Rng::for_chain(seed, static_cast<std::uint64_t>(chain), Stream::kForward);
    const Vector x0 = world.sample_oracle(qualified, 1, oracle_rng).front().x;
    return ChainStart::from_latent(forward_noise(x0, t_star, schedule, forward_rng), t_star);
  };
  CellSpec spec;
  spec.method = "mode_test";
  spec.param_name = "t_star";
  spec.param_value = t_star;
  spec.prompt = make_prompt(context, extras);
  spec.guidance = plain(alpha);
  return lab.sample_cell(spec, n, start);
}

std::vector<CellResult> sweep_cfg(const Lab& lab, const std::string& context,
                                  const std::vector<double>& grid, int n,
                                  const std::vector<std::string>& extras) {
  std::vector<CellResult> out;
  for (double alpha : grid) {
    CellSpec spec;
    spec.method = "cfg";
    spec.param_name = "alpha";
    spec.param_value = alpha;
    spec.prompt = make_prompt(context, extras);
    spec.guidance = guidance::Cfg{alpha};
    out.push_back(lab.sample_cell(spec, n));
  }
  return out;
}

std::vector<CellResult> sweep_cads(const Lab& lab, const std::string& context,
                                   const std::vector<std::pair<double, double>>& cells,
                                   double tau2, double alpha, int n,
                                   const std::vector<std::string>& extras) {
  std::vector<CellResult> out;
  CellSpec base;
  base.method = "vanilla";
  base.param_name = "alpha";
  base.param_value = alpha;
  base.prompt = make_prompt(context, extras);
  base.guidance = plain(alpha);
  out.push_back(lab.sample_cell(base, n));
  for (const auto& [s, tau1] : cells) {
    CellSpec spec;
    spec.method = "cads";
    spec.param_name = "s/tau1";
    spec.param_value = s;
    spec.param_label = fmt::format("{:g}/{:g}", s, tau1);
    spec.prompt = make_prompt(context, extras);
    guidance::Cads g;
    g.alpha = alpha;
    g.params = CadsParams{s, tau1, tau2};
    spec.guidance = g;
    out.push_back(lab.sample_cell(spec, n));
  }
  return out;
}

std::vector<CellResult> sweep_swap(const Lab& lab, const std::string& context,
                                   const std::string& attribute,
                                   const std::vector<double>& fractions, double alpha, int n,
                                   const std::vector<std::string>& extras) {
  std::vector<CellResult> out;
  CellSpec base;
  base.method = "vanilla";
  base.param_name = "alpha";
  base.param_value = alpha;
  base.prompt = make_prompt(context, extras);
  base.guidance = plain(alpha);
  out.push_back(lab.sample_cell(base, n));
  for (double f : fractions) {
    CellSpec spec;
    spec.method = "swap";
    spec.param_name = "fraction";
    spec.param_value = f;
    spec.prompt = make_prompt(context, extras);
    spec.guidance = guidance::Swap{alpha, f, attribute};
    out.push_back(lab.sample_cell(spec, n));
  }
  return out;
}

std::vector<CellResult> run_debias(const Lab& lab, const std::vector<std::string>& contexts,
                                   const std::vector<std::string>& methods, double tau,
                                   double alpha, int n,
                                   const std::vector<std::string>& extras) {
  std::vector<CellResult> out;
  for (const auto& context : contexts) {
    const auto sets = steering_sets(lab.world(), context);
    for (const auto& method : methods) {
      CellSpec spec;
      spec.method = method;
      spec.param_name = "tau";
      spec.param_value = tau;
      spec.prompt = make_prompt(context, extras);
      if (method == "vanilla") {
        spec.param_name = "alpha";
        spec.param_value = alpha;
        spec.guidance = plain(alpha);
      } else if (method == "weak" || method == "every_position") {
        spec.guidance = guidance::Weak{alpha, tau, sets,
                                       method == "weak" ? MaskMode::kEosMasked
                                                        : MaskMode::kEveryPosition};
      } else if (method == "prompt_append") {
        spec.param_name = "alpha";
        spec.param_value = alpha;
        spec.guidance = guidance::PromptAppend{alpha, sets.at(0)};
      } else {
        throw InvalidArgument("unknown debias method '" + method + "'");
      }
      out.push_back(lab.sample_cell(spec, n));
    }
  }
  return out;
}

std::vector<CellResult> run_compliance(const Lab& lab, const std::vector<std::string>& contexts,
                                       double tau, double alpha, int n,
                                       const std::vector<std::string>& extras) {
  std::vector<CellResult> out;
  const World& world = lab.world();
  for (const auto& context : contexts) {
    const ContextSpec& ctx = world.spec().context(context);
    if (ctx.is_object()) throw NoAttributeError(context);
    const auto& attrs = world.spec().families[ctx.families[0]].attributes;
    for (const auto& specified : attrs) {
      std::vector<std::string> others;
      for (const auto& a : attrs) {
        if (a != specified) others.push_back(a);
      }
      const PromptSpec prompt = make_prompt(context, extras, specified);
      const std::pair<std::string, GuidanceSpec> methods[] = {
          {"vanilla", plain(alpha)},
          {"weak", guidance::Weak{alpha, tau, {others}, MaskMode::kEosMasked}},
          {"every_position", guidance::Weak{alpha, tau, {others}, MaskMode::kEveryPosition}}};
      for (const auto& [name, g] : methods) {
        CellSpec spec;
        spec.method = name;
        spec.param_name = "specified";
        spec.param_label = specified;
        spec.prompt = prompt;
        spec.guidance = g;
        out.push_back(lab.sample_cell(spec, n));
      }
    }
  }
  return out;
}

namespace {

double gaussian_kl_to_standard(const Vector& mean, const Matrix& cov) {
  const auto d = static_cast<double>(mean.size());
  Eigen::LLT<Matrix> llt(cov);
  const Matrix l = llt.matrixL();
  const double log_det = 2.0 * l.diagonal().array().log().sum();
  return 0.5 * (cov.trace() + mean.squaredNorm() - d - log_det);
}

double marginal(const World& world, const ContextSpec& ctx, const Vector& weights, int slot,
                int attribute) {
  double s = 0.0;
  for (std::size_t k = 0; k < ctx.components.size(); ++k) {
    if (ctx.components[k].attributes[slot] == attribute) s += weights[static_cast<Eigen::Index>(k)];
  }
  (void)world;
  return s;
}

}  // namespace

std::vector<Check> validate_world(const Lab& lab, int n) {
  const World& world = lab.world();
  const WorldSpec& spec = world.spec();
  const Schedule& schedule = lab.schedule();
  const Codec& codec = world.codec();
  std::vector<Check> out;

  {
    bool ok = true;
    for (int t = 1; t <= schedule.steps(); ++t) ok = ok && schedule.abar(t) < schedule.abar(t - 1);
    const double last = schedule.abar(schedule.steps());
    out.push_back({"schedule_monotone", ok && last < 1e-4,
                   fmt::format("abar_N = {:.3e}", last)});
  }

  {
    double worst = 0.0;
    for (const auto& ctx : spec.contexts) {
      std::vector<PromptSpec> prompts = {make_prompt(ctx.name), PromptSpec{}};
      for (const auto& a : spec.attribute_tokens()) prompts.push_back(make_prompt(ctx.name, {}, a));
      for (const auto& p : prompts) {
        const Vector w = world.log_weights(codec.encode(p), ctx.name).array().exp();
        worst = std::max(worst, std::abs(w.sum() - 1.0));
        if ((w.array() < 0.0).any()) worst = 1.0;
      }
    }
    out.push_back({"weights_on_simplex", worst < 1e-12, fmt::format("max |sum - 1| = {:.2e}", worst)});
  }

  {
    double ratio = INFINITY;
    for (const auto& ctx : spec.contexts) {
      for (std::size_t i = 0; i < ctx.components.size(); ++i) {
        for (std::size_t j = i + 1; j < ctx.components.size(); ++j) {
          const auto& a = ctx.components[i];
          const auto& b = ctx.components[j];
          const double sa = std::sqrt(Eigen::SelfAdjointEigenSolver<Matrix>(a.cov).eigenvalues().maxCoeff());
          const double sb = std::sqrt(Eigen::SelfAdjointEigenSolver<Matrix>(b.cov).eigenvalues().maxCoeff());
          ratio = std::min(ratio, (a.mean - b.mean).norm() / std::max(sa, sb));
        }
      }
    }
    out.push_back({"component_separation", ratio >= 4.0,
                   fmt::format("min separation {:.2f} sigma", ratio)});
  }

  {
    bool ok = true;
    for (const auto& ctx : spec.contexts) {
      for (const auto& comp : ctx.components) {
        for (int t = 0; t <= schedule.steps(); ++t) {
          const double a = schedule.abar(t);
          const Matrix cov = a * comp.cov + (1.0 - a) * Matrix::Identity(spec.dim, spec.dim);
          ok = ok && Eigen::LLT<Matrix>(cov).info() == Eigen::Success;
        }
      }
    }
    out.push_back({"diffused_covariances_spd", ok, "all steps, all components"});
  }

  {
    double worst = 0.0;
    const double a = schedule.abar(schedule.steps());
    for (const auto& ctx : spec.contexts) {
      const Vector w = world.log_weights(codec.encode(make_prompt(ctx.name)), ctx.name).array().exp();
      double bound = 0.0;
      for (std::size_t k = 0; k < ctx.components.size(); ++k) {
        const auto& comp = ctx.components[k];
        bound += w[static_cast<Eigen::Index>(k)] *
                 gaussian_kl_to_standard(std::sqrt(a) * comp.mean,
                                         a * comp.cov + (1.0 - a) * Matrix::Identity(spec.dim, spec.dim));
      }
      worst = std::max(worst, bound);
    }
    out.push_back({"terminal_kl", worst < 1e-3,
                   fmt::format("max KL bound to N(0, I) = {:.2e}", worst)});
  }

  {
    double worst_compliance = 1.0;
    for (const auto& ctx : spec.contexts) {
      for (std::size_t f = 0; f < ctx.families.size(); ++f) {
        const auto& attrs = spec.families[ctx.families[f]].attributes;
        for (std::size_t a = 0; a < attrs.size(); ++a) {
          const Vector w = world.log_weights(codec.encode(make_prompt(ctx.name, {}, attrs[a])), ctx.name)
                               .array()
                               .exp();
          worst_compliance = std::min(
              worst_compliance, marginal(world, ctx, w, static_cast<int>(f), static_cast<int>(a)));
        }
      }
    }
    out.push_back({"qualifier_weight", worst_compliance >= 0.99,
                   fmt::format("min qualified weight {:.4f}", worst_compliance)});
  }

  {
    double worst = 1.0;
    for (const auto& ctx : spec.contexts) {
      if (ctx.is_object()) continue;
      Rng rng(mix_seed(lab.seed(), fnv1a(ctx.name)));
      const auto samples = world.sample_oracle(make_prompt(ctx.name), n, rng);
      for (std::size_t f = 0; f < ctx.families.size(); ++f) {
        int correct = 0;
        for (const auto& s : samples) {
          correct += world.classify(s.x, ctx.name, static_cast<int>(f)).attribute == s.attributes[f];
        }
        worst = std::min(worst, static_cast<double>(correct) / n);
      }
    }
    out.push_back({"classifier_accuracy", worst >= 0.99, fmt::format("min accuracy {:.4f}", worst)});
  }

  {
    Rng rng(mix_seed(lab.seed(), 0xfdULL));
    double worst = 0.0;
    const int probes = 200;
    for (int p = 0; p < probes; ++p) {
      const auto& ctx = spec.contexts[rng.index(spec.contexts.size())];
      const int t = 1 + static_cast<int>(rng.index(static_cast<std::size_t>(schedule.steps())));
      const double a = schedule.abar(t);
      const MixtureParams m = diffused_mixture(world.mixture_for(codec.encode(make_prompt(ctx.name)), ctx.name), a);
      Vector z(spec.dim);
      for (int i = 0; i < spec.dim; ++i) z[i] = 3.0 * rng.normal();
      const Vector g = m.score(z);
      Vector fd(spec.dim);
      const double h = 1e-5;
      for (int i = 0; i < spec.dim; ++i) {
        Vector up = z;
        Vector down = z;
        up[i] += h;
        down[i] -= h;
        fd[i] = (m.log_density(up) - m.log_density(down)) / (2.0 * h);
      }
      worst = std::max(worst, (g - fd).norm() / std::max(1.0, g.norm()));
    }
    out.push_back({"score_finite_difference", worst < 1e-4,
                   fmt::format("max relative error {:.2e} over {} probes", worst, probes)});
  }

  {
    bool ok = true;
    WorldSpec permuted = spec;
    for (auto& ctx : permuted.contexts) {
      for (auto& p : ctx.prior_logits) p.reverseInPlace();
    }
    const World other(permuted, world.codec_ptr());
    Rng rng(mix_seed(lab.seed(), 0x9fULL));
    for (const auto& ctx : spec.contexts) {
      if (ctx.is_object()) continue;
      for (int i = 0; i < 100; ++i) {
        Vector x(spec.dim);
        for (int j = 0; j < spec.dim; ++j) x[j] = 4.0 * rng.normal();
        for (std::size_t f = 0; f < ctx.families.size(); ++f) {
          ok = ok && world.classify(x, ctx.name, static_cast<int>(f)).attribute ==
                         other.classify(x, ctx.name, static_cast<int>(f)).attribute;
        }
      }
    }
    out.push_back({"classifier_prior_free", ok, "argmax unchanged under permuted priors"});
  }
  return out;
}

std::vector<ResultRow> cell_rows(const std::string& experiment, const CellResult& cell) {
  std::vector<ResultRow> rows;
  auto base = [&] {
    ResultRow r;
    r.experiment = experiment;
    r.context = cell.context;
    r.method = cell.method;
    r.param_name = cell.param_name;
    r.param_value = cell.param_label;
    return r;
  };
  for (const auto& report : cell.ratios) {
    for (std::size_t a = 0; a < report.attributes.size(); ++a) {
      ResultRow r = base();
      r.metric = "ratio:" + report.attributes[a];
      r.value = report.ratios[a];
      r.n = report.n;
      const auto ci = stats::clopper_pearson(report.counts[a], report.n, 0.95);
      r.ci_low = ci.low;
      r.ci_high = ci.high;
      rows.push_back(r);
    }
    ResultRow d = base();
    d.metric = "discrepancy:" + report.family;
    d.value = discrepancy(report).value;
    d.n = report.n;
    d.ci_low = d.ci_high = d.value;
    rows.push_back(d);
  }
  ResultRow al = base();
  al.metric = "alignment";
  al.value = cell.alignment_mean();
  al.n = static_cast<std::int64_t>(cell.alignment.size());
  const double se = cell.alignment.size() > 1
                        ? std::sqrt(stats::variance(cell.alignment) / cell.alignment.size())
                        : 0.0;
  al.ci_low = al.value - 1.959963984540054 * se;
  al.ci_high = al.value + 1.959963984540054 * se;
  rows.push_back(al);
  return rows;
}

namespace {

ResultRow test_row(const std::string& experiment, const std::string& context,
                   const std::string& metric, double value, std::int64_t n) {
  ResultRow r;
  r.experiment = experiment;
  r.context = context;
  r.method = "test";
  r.metric = metric;
  r.value = value;
  r.n = n;
  r.ci_low = r.ci_high = value;
  return r;
}

void add_cells(ExperimentResult& result, std::vector<CellResult> cells) {
  for (auto& c : cells) {
    auto rows = cell_rows(result.kind, c);
    result.rows.insert(result.rows.end(), rows.begin(), rows.end());
    result.cells.push_back(std::move(c));
  }
}

// Per-chain indicator that the first-family label equals `attribute`.
std::vector<double> indicator(const World& world, const CellResult& cell,
                              const std::string& attribute) {
  std::vector<double> out(cell.samples.rows());
  for (Eigen::Index i = 0; i < cell.samples.rows(); ++i) {
    out[i] = world.classify(cell.samples.row(i).transpose(), cell.context, 0).name == attribute;
  }
  return out;
}

// Chains are blocks: cell j of chain i shares its random numbers with every
// other cell of chain i.
std::vector<std::vector<double>> blocks(const std::vector<std::vector<double>>& per_cell) {
  std::vector<std::vector<double>> out(per_cell.front().size(),
                                       std::vector<double>(per_cell.size()));
  for (std::size_t j = 0; j < per_cell.size(); ++j) {
    for (std::size_t i = 0; i < per_cell[j].size(); ++i) out[i][j] = per_cell[j][i];
  }
  return out;
}

stats::TestResult paired_label_test(const std::vector<double>& after,
                                    const std::vector<double>& before, stats::Alternative alt) {
  std::int64_t up = 0;
  std::int64_t down = 0;
  for (std::size_t i = 0; i < after.size(); ++i) {
    up += after[i] > before[i];
    down += after[i] < before[i];
  }
  return stats::sign_test(up, down, alt);
}

// Smallest paired one-sided p-value that a cell is below its predecessor.
double min_adjacent_decrease_p(const std::vector<std::vector<double>>& per_cell, bool binary) {
  double p = 1.0;
  for (std::size_t j = 1; j < per_cell.size(); ++j) {
    const auto t = binary ? paired_label_test(per_cell[j], per_cell[j - 1], stats::Alternative::kLess)
                          : stats::paired_t_test(per_cell[j], per_cell[j - 1],
                                                 stats::Alternative::kLess);
    p = std::min(p, t.p_value);
  }
  return p;
}

}  // namespace

ExperimentResult run_experiment(const std::string& kind, const ExperimentConfig& config) {
  config.validate();
  const Lab lab = Lab::from_config(config);
  const int n = config.n;
  const double alpha = config.cfg_scale;
  const auto& extras = config.prompt_extras;
  ExperimentResult result;
  result.kind = kind;

  if (kind == "mode-test") {
    const int steps = lab.schedule().steps();
    for (const auto& context : config.mode_test.contexts) {
      const std::string minor = lab.minor_attribute(context);
      CellSpec base;
      base.method = "vanilla";
      base.param_name = "alpha";
      base.param_value = alpha;
      base.prompt = make_prompt(context, extras);
      base.guidance = plain(alpha);
      CellResult vanilla = lab.sample_cell(base, n);
      const auto& vr = vanilla.report();
      std::vector<CellResult> cells;
      for (double frac : config.mode_test.t_star) {
        const int t_star = static_cast<int>(std::lround(frac * steps));
        CellResult cell = run_mode_test(lab, context, minor, t_star, n, alpha, extras);
        const auto& mr = cell.report();
        const auto greater = stats::two_proportion_test(mr.count(minor), mr.n, vr.count(minor),
                                                        vr.n, stats::Alternative::kGreater);
        const auto two = stats::two_proportion_test(mr.count(minor), mr.n, vr.count(minor), vr.n,
                                                    stats::Alternative::kTwoSided);
        ResultRow g = test_row(kind, context, "p_minor_above_vanilla", greater.p_value, 2 * n);
        g.param_name = "t_star";
        g.param_value = std::to_string(t_star);
        ResultRow d = g;
        d.metric = "p_minor_differs";
        d.value = d.ci_low = d.ci_high = two.p_value;
        result.rows.push_back(g);
        result.rows.push_back(d);
        result.summary.push_back(fmt::format(
            "{}: minor '{}' vanilla {:.4f}, mode test t*={} {:.4f} (one-sided p = {:.3g})", context,
            minor, vr.ratio(minor), t_star, mr.ratio(minor), greater.p_value));
        cells.push_back(std::move(cell));
      }
      add_cells(result, {std::move(vanilla)});
      add_cells(result, std::move(cells));
    }
  } else if (kind == "sweep-cfg") {
    const auto& context = config.sweep_cfg.context;
    auto cells = sweep_cfg(lab, context, config.sweep_cfg.grid, n, extras);
    const std::string major = lab.major_attribute(context);
    std::vector<std::vector<double>> labels;
    std::vector<std::vector<double>> align;
    for (const auto& c : cells) {
      labels.push_back(indicator(lab.world(), c, major));
      align.push_back(c.alignment);
      result.summary.push_back(fmt::format("alpha {:g}: major '{}' {:.4f}, alignment {:.4f}",
                                           c.param_value, major, c.report().ratio(major),
                                           c.alignment_mean()));
    }
    if (cells.size() >= 2) {
      const auto tr = stats::page_trend_test(blocks(labels));
      const auto ta = stats::page_trend_test(blocks(align));
      const auto total = static_cast<std::int64_t>(cells.size()) * n;
      result.rows.push_back(test_row(kind, context, "p_trend_major", tr.p_value, total));
      result.rows.push_back(test_row(kind, context, "p_trend_alignment", ta.p_value, total));
      result.rows.push_back(test_row(kind, context, "min_p_adjacent_decrease_major",
                                     min_adjacent_decrease_p(labels, true), total));
      result.rows.push_back(test_row(kind, context, "min_p_adjacent_decrease_alignment",
                                     min_adjacent_decrease_p(align, false), total));
      result.summary.push_back(fmt::format("Page trend p: major {:.3g}, alignment {:.3g}",
                                           tr.p_value, ta.p_value));
    }
    add_cells(result, std::move(cells));
  } else if (kind == "sweep-cads") {
    const auto& c = config.sweep_cads;
    std::vector<std::pair<double, double>> grid;
    for (double s : c.noise_scales) {
      for (double t1 : c.tau1) grid.emplace_back(s, t1);
    }
    auto cells = sweep_cads(lab, c.context, grid, c.tau2, alpha, n, extras);
    const std::string major = lab.major_attribute(c.context);
    const auto& base = cells.front();
    const auto& br = base.report();
    for (std::size_t i = 1; i < cells.size(); ++i) {
      const auto& cell = cells[i];
      const auto& r = cell.report();
      const auto mine = indicator(lab.world(), cell, major);
      const auto theirs = indicator(lab.world(), base, major);
      const auto lower = paired_label_test(mine, theirs, stats::Alternative::kLess);
      const auto differs = paired_label_test(mine, theirs, stats::Alternative::kTwoSided);
      const auto align =
          stats::paired_t_test(cell.alignment, base.alignment, stats::Alternative::kLess);
      for (auto [metric, value] : {std::pair{"p_major_below_vanilla", lower.p_value},
                                   std::pair{"p_major_differs", differs.p_value},
                                   std::pair{"p_alignment_below_vanilla", align.p_value}}) {
        ResultRow row = test_row(kind, c.context, metric, value, 2 * n);
        row.param_name = cell.param_name;
        row.param_value = cell.param_label;
        result.rows.push_back(row);
      }
      result.summary.push_back(fmt::format(
          "s/tau1 {}: major {:.4f} vs {:.4f} (p = {:.3g}), alignment {:.4f} vs {:.4f} (p = {:.3g})",
          cell.param_label, r.ratio(major), br.ratio(major), lower.p_value, cell.alignment_mean(),
          base.alignment_mean(), align.p_value));
    }
    add_cells(result, std::move(cells));
  } else if (kind == "sweep-swap") {
    const auto& c = config.sweep_swap;
    const std::string attribute = c.attribute.empty() ? lab.minor_attribute(c.context) : c.attribute;
    auto cells = sweep_swap(lab, c.context, attribute, c.grid, alpha, n, extras);
    std::vector<std::vector<double>> labels;
    for (std::size_t i = 1; i < cells.size(); ++i) {
      labels.push_back(indicator(lab.world(), cells[i], attribute));
      result.summary.push_back(fmt::format("fraction {:g}: '{}' ratio {:.4f}", cells[i].param_value,
                                           attribute, cells[i].report().ratio(attribute)));
    }
    const auto total = static_cast<std::int64_t>(labels.size()) * n;
    if (labels.size() >= 2) {
      const auto tr = stats::page_trend_test(blocks(labels));
      result.rows.push_back(test_row(kind, c.context, "p_trend_attribute", tr.p_value, total));
      result.rows.push_back(test_row(kind, c.context, "min_p_adjacent_decrease",
                                     min_adjacent_decrease_p(labels, true), total));
      result.summary.push_back(fmt::format("trend p = {:.3g}", tr.p_value));
    }
    add_cells(result, std::move(cells));
  } else if (kind == "debias") {
    const auto& d = config.debias;
    auto cells = run_debias(lab, d.contexts, d.methods, d.tau, alpha, n, extras);
    for (const auto& method : d.methods) {
      std::vector<RatioReport> reports;
      double total_d = 0.0;
      for (const auto& c : cells) {
        if (c.method != method) continue;
        reports.push_back(c.report());
        total_d += discrepancy(c.report()).value;
      }
      if (reports.empty()) continue;
      ResultRow a = test_row(kind, "all", "avg_delta", avg_delta(reports),
                             static_cast<std::int64_t>(reports.size()) * n);
      a.method = method;
      ResultRow m = a;
      m.metric = "mean_discrepancy";
      m.value = m.ci_low = m.ci_high = total_d / static_cast<double>(reports.size());
      result.rows.push_back(a);
      result.rows.push_back(m);
      result.summary.push_back(
          fmt::format("{}: avg delta {:.4f}, mean D {:.4f}", method, a.value, m.value));
    }
    add_cells(result, std::move(cells));

    if (!d.multi_contexts.empty()) {
      auto multi = run_debias(lab, d.multi_contexts, {"vanilla", "weak"}, d.tau, alpha, n, extras);
      for (const auto& c : multi) {
        for (const auto& r : c.ratios) {
          result.summary.push_back(fmt::format("{} {} [{}]: D {:.4f}", c.context, c.method,
                                               r.family, discrepancy(r).value));
        }
      }
      add_cells(result, std::move(multi));
    }

    if (!d.object_contexts.empty()) {
      auto objects = run_debias(lab, d.object_contexts, {"vanilla", "weak"}, d.tau, alpha, n, extras);
      std::vector<std::pair<const Samples*, const Samples*>> pairs;
      for (std::size_t i = 0; i + 1 < objects.size(); i += 2) {
        const auto& v = objects[i];
        const auto& w = objects[i + 1];
        pairs.emplace_back(&w.samples, &v.samples);
        const double rel = std::abs(w.alignment_mean() - v.alignment_mean()) /
                           std::abs(v.alignment_mean());
        result.rows.push_back(test_row(kind, v.context, "alignment_relative_difference", rel, 2 * n));
        result.rows.push_back(test_row(kind, v.context, "energy_distance",
                                       energy_distance(w.samples, v.samples), 2 * n));
        result.summary.push_back(fmt::format("{}: alignment {:.4f} weak vs {:.4f} vanilla", v.context,
                                             w.alignment_mean(), v.alignment_mean()));
      }
      Rng rng(mix_seed(config.seed, static_cast<std::uint64_t>(Stream::kAuxiliary)));
      const auto test = energy_permutation_test(pairs, rng, {config.permutations, 1000});
      result.rows.push_back(test_row(kind, "objects", "energy_statistic", test.statistic, 0));
      result.rows.push_back(test_row(kind, "objects", "energy_threshold_95", test.threshold, 0));
      result.rows.push_back(test_row(kind, "objects", "energy_p_value", test.p_value, 0));
      result.summary.push_back(fmt::format("objects: energy {:.3g} vs 95% threshold {:.3g}",
                                           test.statistic, test.threshold));
      add_cells(result, std::move(objects));
    }
  } else if (kind == "compliance") {
    const auto& c = config.compliance;
    auto cells = run_compliance(lab, c.contexts, c.tau, alpha, n, extras);
    for (const auto& cell : cells) {
      ResultRow row = test_row(kind, cell.context, "compliance",
                               compliance(lab.world(), cell.samples, cell.context, cell.param_label),
                               n);
      row.method = cell.method;
      row.param_name = cell.param_name;
      row.param_value = cell.param_label;
      result.rows.push_back(row);
      result.summary.push_back(fmt::format("{} specified '{}' {}: compliance {:.4f}", cell.context,
                                           cell.param_label, cell.method, row.value));
    }
    add_cells(result, std::move(cells));
  } else if (kind == "validate-world") {
    result.checks = validate_world(lab, std::max(n, 10000));
    for (const auto& check : result.checks) {
      ResultRow r = test_row(kind, "world", "check:" + check.name, check.pass ? 1.0 : 0.0, 0);
      result.rows.push_back(r);
      result.summary.push_back(
          fmt::format("{} {}: {}", check.pass ? "PASS" : "FAIL", check.name, check.detail));
    }
  } else {
    throw InvalidArgument("unknown experiment '" + kind + "'");
  }
  return result;
}

}  // namespace weakguide
