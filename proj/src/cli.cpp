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

#include "weakguide/cli.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "weakguide/config.hpp"
#include "weakguide/error.hpp"
#include "weakguide/experiments.hpp"
#include "weakguide/report.hpp"

namespace weakguide {

namespace {

std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> out;
  std::stringstream s(text);
  std::string item;
  while (std::getline(s, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("--grid", "'" + item + "' is not a number");
    }
  }
  if (out.empty()) throw ConfigError("--grid", "empty grid");
  return out;
}

void apply_grid(ExperimentConfig& config, const std::string& kind, const std::vector<double>& grid) {
  if (kind == "mode-test") {
    config.mode_test.t_star = grid;
  } else if (kind == "sweep-cfg") {
    config.sweep_cfg.grid = grid;
  } else if (kind == "sweep-cads") {
    config.sweep_cads.noise_scales = grid;
  } else if (kind == "sweep-swap") {
    config.sweep_swap.grid = grid;
  } else {
    throw ConfigError("--grid", "not supported by " + kind);
  }
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write '" + path.string() + "'");
  f << content;
}

}  // namespace

int main_cli(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err) {
  CLI::App app("Gaussian-mixture laboratory for attribute guidance in diffusion sampling",
               "weakguide");
  app.require_subcommand(1, 1);
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "out";
  std::optional<int> workers;
  std::optional<int> n;
  std::string grid;
  app.add_option("--config", config_path, "TOML experiment config");
  app.add_option("--seed", seed, "Master seed");
  app.add_option("--out", out_dir, "Output directory");
  app.add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--n", n, "Chains per cell")->check(CLI::PositiveNumber);
  app.add_option("--grid", grid, "Comma-separated grid override for the subcommand");
  const std::map<std::string, std::string> help = {
      {"mode-test", "Minor-attribute ratio after re-noising oracle samples to t*"},
      {"sweep-cfg", "Major ratio and alignment over CFG scales"},
      {"sweep-cads", "CADS noise cells against vanilla"},
      {"sweep-swap", "Attribute-prompt swap over the swap fraction"},
      {"debias", "Avg delta, discrepancy and object parity per guidance method"},
      {"compliance", "Explicit-qualifier compliance under vanilla and weak guidance"},
      {"validate-world", "Numerical checks of the world and schedule"},
  };
  for (const auto& kind : kExperimentKinds) app.add_subcommand(kind, help.at(kind))->fallthrough();

  std::vector<const char*> cargs;
  for (const auto& a : argv) cargs.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(cargs.size()), cargs.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitConfigError;
  }
  const std::string kind = app.get_subcommands().front()->get_name();

  ExperimentConfig config;
  try {
    if (!config_path.empty()) config = load_config(config_path);
    if (seed) config.seed = *seed;
    if (workers) config.workers = *workers;
    if (n) config.n = *n;
    if (!grid.empty()) apply_grid(config, kind, parse_grid(grid));
    config.validate();
  } catch (const Error& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfigError;
  }

  try {
    const ExperimentResult result = run_experiment(kind, config);
    const World world = World::with_codec(config.world, config.codec);
    const Schedule schedule = Schedule::linear(config.steps);
    const RunInfo info{config.seed, world.hash(), schedule.hash(), config.steps};

    std::filesystem::create_directories(out_dir);
    std::ostringstream csv;
    write_results_csv(csv, result.rows);
    write_file(std::filesystem::path(out_dir) / "results.csv", csv.str());
    std::ostringstream records;
    write_records_jsonl(records, result, info);
    write_file(std::filesystem::path(out_dir) / "records.jsonl", records.str());
    std::ostringstream summary;
    write_summary(summary, result, info);
    write_file(std::filesystem::path(out_dir) / "summary.txt", summary.str());
    out << summary.str();

    for (const auto& check : result.checks) {
      if (!check.pass) return kExitRuntimeError;
    }
    return kExitOk;
  } catch (const std::exception& e) {
    err << "runtime error: " << e.what() << '\n';
    return kExitRuntimeError;
  }
}

}  // namespace weakguide
