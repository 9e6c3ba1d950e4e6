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

#ifndef WEAKGUIDE_EXPERIMENTS_HPP_
#define WEAKGUIDE_EXPERIMENTS_HPP_

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "weakguide/config.hpp"
#include "weakguide/diffusion.hpp"
#include "weakguide/guidance.hpp"
#include "weakguide/metrics.hpp"
#include "weakguide/world.hpp"

namespace weakguide {

struct CellSpec {
  std::string method;
  std::string param_name;
  double param_value = 0.0;
  // Printed parameter value; the formatted number when empty.
  std::string param_label;
  // Also the literal prompt that alignment is scored against.
  PromptSpec prompt;
  GuidanceSpec guidance;
};

struct CellResult {
  std::string context;
  std::string method;
  std::string param_name;
  double param_value = 0.0;
  std::string param_label;
  PromptSpec prompt;
  GuidanceSpec guidance;
  Samples samples;
  // One report per attribute family of the context; empty for objects.
  std::vector<RatioReport> ratios;
  std::vector<double> alignment;
  // Per chain, the attributes drawn by the driver.
  std::vector<std::vector<std::string>> targets;
  double wall_seconds = 0.0;

  double alignment_mean() const;
  const RatioReport& report(std::string_view family = {}) const;
};

// Start of chain i; fresh when empty.
using StartFn = std::function<ChainStart(int chain)>;

// Shared state of a run: the world, schedule, seed and worker count. Chain i
// of every cell draws from the streams of (seed, i), so cells share common
// random numbers and results do not depend on the worker count.
class Lab {
 public:
  Lab(World world, Schedule schedule, std::uint64_t seed, int workers = 1,
      SamplerMode mode = SamplerMode::kAncestral);
  static Lab from_config(const ExperimentConfig& config);

  const World& world() const { return world_; }
  const Schedule& schedule() const { return schedule_; }
  std::uint64_t seed() const { return seed_; }
  int workers() const { return workers_; }
  void set_workers(int workers) { workers_ = workers; }

  CellResult sample_cell(const CellSpec& spec, int n, const StartFn& start = {}) const;
  // Ground-truth samples of the prompt's mixture.
  CellResult oracle_cell(const PromptSpec& prompt, int n) const;

  // Attribute of the first family with the largest / smallest neutral weight.
  std::string major_attribute(const std::string& context) const;
  std::string minor_attribute(const std::string& context) const;

 private:
  CellResult finish_cell(const CellSpec& spec, Samples samples,
                         std::vector<std::vector<std::string>> targets, double seconds) const;

  World world_;
  Schedule schedule_;
  std::uint64_t seed_;
  int workers_;
  SamplerMode mode_;
};

PromptSpec make_prompt(const std::string& context, const std::vector<std::string>& extras = {},
                       std::optional<std::string> qualifier = std::nullopt);

// Minority samples from the oracle, forward-noised to t_star, then denoised
// with the neutral prompt.
CellResult run_mode_test(const Lab& lab, const std::string& context, const std::string& minor,
                         int t_star, int n, double alpha = 0.0,
                         const std::vector<std::string>& extras = {});

std::vector<CellResult> sweep_cfg(const Lab& lab, const std::string& context,
                                  const std::vector<double>& grid, int n,
                                  const std::vector<std::string>& extras = {});

// The first cell is the CFG baseline at `alpha`; then one cell per (s, tau1).
std::vector<CellResult> sweep_cads(const Lab& lab, const std::string& context,
                                   const std::vector<std::pair<double, double>>& cells,
                                   double tau2, double alpha, int n,
                                   const std::vector<std::string>& extras = {});

std::vector<CellResult> sweep_swap(const Lab& lab, const std::string& context,
                                   const std::string& attribute,
                                   const std::vector<double>& fractions, double alpha, int n,
                                   const std::vector<std::string>& extras = {});

// Methods: vanilla, weak, every_position, prompt_append. Weak variants draw
// uniformly from every attribute family of the context.
std::vector<CellResult> run_debias(const Lab& lab, const std::vector<std::string>& contexts,
                                   const std::vector<std::string>& methods, double tau,
                                   double alpha, int n,
                                   const std::vector<std::string>& extras = {});

// Per context and specified attribute: vanilla, weak and every_position, the
// latter two steering toward the other attributes of the family.
std::vector<CellResult> run_compliance(const Lab& lab, const std::vector<std::string>& contexts,
                                       double tau, double alpha, int n,
                                       const std::vector<std::string>& extras = {});

struct Check {
  std::string name;
  bool pass = false;
  std::string detail;
};

// Invariant suite of the world and schedule.
std::vector<Check> validate_world(const Lab& lab, int n);

struct ResultRow {
  std::string experiment;
  std::string context;
  std::string method;
  std::string param_name;
  std::string param_value;
  std::string metric;
  double value = 0.0;
  std::int64_t n = 0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};

struct ExperimentResult {
  std::string kind;
  std::vector<CellResult> cells;
  std::vector<ResultRow> rows;
  std::vector<std::string> summary;
  std::vector<Check> checks;
};

// Metric rows of one cell: per-attribute ratios with 95% Clopper-Pearson
// intervals, discrepancy per family and mean alignment.
std::vector<ResultRow> cell_rows(const std::string& experiment, const CellResult& cell);

inline const std::vector<std::string> kExperimentKinds = {
    "mode-test", "sweep-cfg", "sweep-cads", "sweep-swap", "debias", "compliance",
    "validate-world"};

// Runs one experiment kind as configured, including its statistical tests.
ExperimentResult run_experiment(const std::string& kind, const ExperimentConfig& config);

}  // namespace weakguide

#endif  // WEAKGUIDE_EXPERIMENTS_HPP_
