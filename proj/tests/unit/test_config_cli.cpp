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
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "weakguide/cli.hpp"
#include "weakguide/config.hpp"
#include "weakguide/error.hpp"
#include "weakguide/report.hpp"

namespace fs = std::filesystem;
using namespace weakguide;

namespace {

const fs::path kConfigs = fs::path(WEAKGUIDE_SOURCE_DIR) / "configs";

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun cli(std::vector<std::string> args) {
  args.insert(args.begin(), "weakguide");
  std::ostringstream out;
  std::ostringstream err;
  const int code = main_cli(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("weakguide_unit_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("world file matches the built-in world") {
  const WorldSpec file = load_world(kConfigs / "default_world.toml");
  const WorldSpec code = default_world_spec();
  CHECK(file.dim == code.dim);
  CHECK(file.coupling == code.coupling);
  CHECK(file.filler_tokens == code.filler_tokens);
  REQUIRE(file.families.size() == code.families.size());
  for (std::size_t f = 0; f < code.families.size(); ++f) {
    CHECK(file.families[f].name == code.families[f].name);
    CHECK(file.families[f].attributes == code.families[f].attributes);
  }
  REQUIRE(file.contexts.size() == code.contexts.size());
  for (std::size_t i = 0; i < code.contexts.size(); ++i) {
    const auto& a = file.contexts[i];
    const auto& b = code.contexts[i];
    CAPTURE(b.name);
    CHECK(a.name == b.name);
    CHECK(a.families == b.families);
    REQUIRE(a.prior_logits.size() == b.prior_logits.size());
    for (std::size_t f = 0; f < b.prior_logits.size(); ++f) {
      CHECK((a.prior_logits[f] - b.prior_logits[f]).norm() < 1e-12);
    }
    REQUIRE(a.components.size() == b.components.size());
    for (std::size_t k = 0; k < b.components.size(); ++k) {
      CHECK((a.components[k].mean - b.components[k].mean).norm() < 1e-12);
      CHECK((a.components[k].cov - b.components[k].cov).norm() < 1e-12);
      CHECK(a.components[k].attributes == b.components[k].attributes);
    }
  }
}

TEST_CASE("default config matches the built-in defaults") {
  const ExperimentConfig file = load_config(kConfigs / "default.toml");
  const ExperimentConfig code;
  CHECK(file.steps == code.steps);
  CHECK(file.seed == code.seed);
  CHECK(file.n == code.n);
  CHECK(file.permutations == code.permutations);
  CHECK(file.cfg_scale == code.cfg_scale);
  CHECK(file.codec.seed == code.codec.seed);
  CHECK(file.codec.post_eos_weight == code.codec.post_eos_weight);
  CHECK(file.codec.summary_strength == code.codec.summary_strength);
  CHECK(file.mode_test.contexts == code.mode_test.contexts);
  CHECK(file.mode_test.t_star == code.mode_test.t_star);
  CHECK(file.sweep_cfg.grid == code.sweep_cfg.grid);
  CHECK(file.sweep_cads.noise_scales == code.sweep_cads.noise_scales);
  CHECK(file.sweep_cads.tau2 == code.sweep_cads.tau2);
  CHECK(file.sweep_swap.grid.size() == 6u);
  CHECK(file.debias.contexts == code.debias.contexts);
  CHECK(file.debias.object_contexts == code.debias.object_contexts);
  CHECK(file.compliance.contexts == code.compliance.contexts);
}

TEST_CASE("config errors name the offending key") {
  auto key_of = [](const std::string& text) -> std::string {
    try {
      parse_config(text);
    } catch (const ConfigError& e) {
      return e.key();
    }
    return "<no error>";
  };
  CHECK(key_of("[experiment]\nsede = 3\n") == "experiment.sede");
  CHECK(key_of("[experiment]\nn = \"many\"\n") == "experiment.n");
  CHECK(key_of("[schedule]\nmode = \"sideways\"\n") == "schedule.mode");
  CHECK(key_of("[experiment.sweep_cfg]\ncontext = \"astronaut\"\n") != "<no error>");
  CHECK(key_of("[bogus]\nx = 1\n") == "bogus");
  CHECK_THROWS_AS(parse_config("not toml = = ="), ConfigError);
  CHECK_NOTHROW(parse_config("[experiment]\nseed = 3\n"));
  CHECK(parse_config("[experiment]\nseed = 3\n").seed == 3u);
}

TEST_CASE("world parsing errors") {
  CHECK_THROWS_AS(parse_world("dim = 2\n[[contexts]]\nname = \"x\"\n"), Error);
  CHECK_THROWS_AS(load_world(kConfigs / "does_not_exist.toml"), ConfigError);
}

TEST_CASE("results csv header is stable") {
  CHECK(results_csv_header() ==
        "schema_version,experiment,context,method,param_name,param_value,metric,value,n,"
        "ci_low,ci_high");
  ResultRow r{"sweep-cfg", "teacher", "cfg", "alpha", "2", "alignment", 0.1, 2000, -1.0, 1.0};
  std::ostringstream out;
  write_results_csv(out, std::span<const ResultRow>(&r, 1));
  CHECK(out.str() == results_csv_header() +
                         "\n1,sweep-cfg,teacher,cfg,alpha,2,alignment,0.10000000000000001,2000,"
                         "-1,1\n");
}

TEST_CASE("cli exit codes") {
  const std::string config = (kConfigs / "default.toml").string();
  CHECK(cli({"launch"}).code == kExitConfigError);
  CHECK(cli({"mode-test", "--config", "/nonexistent.toml"}).code == kExitConfigError);
  CHECK(cli({"debias", "--config", config, "--grid", "1,2"}).code == kExitConfigError);
  CHECK(cli({"mode-test", "--config", config, "--n", "0"}).code == kExitConfigError);
  CHECK(cli({"--help"}).code == kExitOk);
}

TEST_CASE("cli output is identical across runs and worker counts") {
  const std::string config = (kConfigs / "default.toml").string();
  std::vector<std::string> csv;
  for (const auto& [tag, workers] : std::vector<std::pair<std::string, std::string>>{
           {"a", "1"}, {"b", "1"}, {"c", "4"}}) {
    const fs::path dir = scratch("repro_" + tag);
    const auto run = cli({"sweep-swap", "--config", config, "--n", "150", "--workers", workers,
                          "--grid", "0,0.5,1", "--out", dir.string()});
    REQUIRE(run.code == kExitOk);
    CHECK(fs::exists(dir / "records.jsonl"));
    CHECK(fs::exists(dir / "summary.txt"));
    csv.push_back(slurp(dir / "results.csv"));
    fs::remove_all(dir);
  }
  CHECK(csv[0].rfind(results_csv_header(), 0) == 0);
  CHECK(csv[0] == csv[1]);
  CHECK(csv[0] == csv[2]);
}

TEST_CASE("validate-world passes on the default world") {
  const fs::path dir = scratch("validate");
  const auto run = cli({"validate-world", "--config", (kConfigs / "default.toml").string(),
                        "--out", dir.string()});
  CHECK(run.code == kExitOk);
  const std::string csv = slurp(dir / "results.csv");
  CHECK(csv.find("classifier_accuracy") != std::string::npos);
  fs::remove_all(dir);
}
