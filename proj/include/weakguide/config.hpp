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

#ifndef WEAKGUIDE_CONFIG_HPP_
#define WEAKGUIDE_CONFIG_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "weakguide/codec.hpp"
#include "weakguide/diffusion.hpp"
#include "weakguide/world.hpp"

namespace weakguide {

struct ModeTestConfig {
  std::vector<std::string> contexts = {"ceo", "nurse"};
  // Noising depths as fractions of N.
  std::vector<double> t_star = {0.0, 0.6, 1.0};
};

struct CfgSweepConfig {
  std::string context = "teacher";
  std::vector<double> grid = {1, 2, 4, 6, 8};
};

struct CadsSweepConfig {
  std::string context = "teacher";
  std::vector<double> noise_scales = {0.0, 0.25};
  std::vector<double> tau1 = {0.6};
  double tau2 = 0.9;
};

struct SwapSweepConfig {
  std::string context = "ceo";
  // Empty picks the minor attribute of the context.
  std::string attribute;
  std::vector<double> grid = {0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
};

struct DebiasConfig {
  std::vector<std::string> contexts = {"ceo",     "doctor",           "pilot",
                                       "technician", "fashion_designer", "librarian",
                                       "teacher", "nurse"};
  std::vector<std::string> multi_contexts = {"firefighter", "lawyer"};
  std::vector<std::string> object_contexts = {"car", "chair", "dog"};
  std::vector<std::string> methods = {"vanilla", "weak", "every_position", "prompt_append"};
  double tau = 0.9;
};

struct ComplianceConfig {
  std::vector<std::string> contexts = {"ceo", "doctor", "nurse", "teacher"};
  double tau = 0.9;
};

struct ExperimentConfig {
  WorldSpec world = default_world_spec();
  CodecParams codec;
  int steps = 1000;
  SamplerMode mode = SamplerMode::kAncestral;
  std::uint64_t seed = 7;
  int n = 2000;
  int workers = 1;
  double cfg_scale = 0.0;
  int permutations = 199;
  std::vector<std::string> prompt_extras;
  ModeTestConfig mode_test;
  CfgSweepConfig sweep_cfg;
  CadsSweepConfig sweep_cads;
  SwapSweepConfig sweep_swap;
  DebiasConfig debias;
  ComplianceConfig compliance;

  // Checks ranges and that every referenced context or attribute exists.
  void validate() const;
};

// World definition file. Errors are ConfigError naming the key.
WorldSpec parse_world(std::string_view toml_text);
WorldSpec load_world(const std::filesystem::path& path);

// Relative world paths resolve against `base_dir`.
ExperimentConfig parse_config(std::string_view toml_text,
                              const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace weakguide

#endif  // WEAKGUIDE_CONFIG_HPP_
