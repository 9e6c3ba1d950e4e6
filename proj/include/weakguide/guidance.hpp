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

#ifndef WEAKGUIDE_GUIDANCE_HPP_
#define WEAKGUIDE_GUIDANCE_HPP_

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "weakguide/codec.hpp"
#include "weakguide/diffusion.hpp"
#include "weakguide/rng.hpp"

namespace weakguide::guidance {

struct Vanilla {};

struct Cfg {
  double alpha = 0.0;
};

struct Cads {
  double alpha = 0.0;
  CadsParams params;
};

// Attribute-qualified prompt for the first ceil(fraction * N) reverse steps.
struct Swap {
  double alpha = 0.0;
  double fraction = 0.0;
  std::string attribute;
};

// Appends one attribute, drawn per chain, as the last prefix token.
struct PromptAppend {
  double alpha = 0.0;
  std::vector<std::string> attribute_set;
};

// One target drawn per chain from each attribute set; the directions of all
// targets are summed into a single edit.
struct Weak {
  double alpha = 0.0;
  double tau = 0.9;
  std::vector<std::vector<std::string>> attribute_sets;
  MaskMode mask = MaskMode::kEosMasked;
};

}  // namespace weakguide::guidance

namespace weakguide {

using GuidanceSpec = std::variant<guidance::Vanilla, guidance::Cfg, guidance::Cads,
                                  guidance::Swap, guidance::PromptAppend, guidance::Weak>;

void validate(const GuidanceSpec& spec);
double guidance_alpha(const GuidanceSpec& spec);
// Short method label, e.g. "weak" or "every_position".
std::string method_name(const GuidanceSpec& spec);
// Single-line JSON object with every field of the guidance variant.
std::string describe(const GuidanceSpec& spec);

class GuidanceDriver final : public ConditionSource {
 public:
  GuidanceDriver(GuidanceSpec spec, CondEmbedding base, CondEmbedding uncond,
                 CondEmbedding alternate, std::vector<std::string> targets);

  StepCondition condition_at(int t, int steps, Rng& rng) override;

  const GuidanceSpec& spec() const { return spec_; }
  const CondEmbedding& base() const { return base_; }
  const CondEmbedding& uncond() const { return uncond_; }
  // The edited, qualified or appended embedding; equals base() otherwise.
  const CondEmbedding& alternate() const { return alternate_; }
  // Attributes drawn for this chain (Weak and PromptAppend).
  const std::vector<std::string>& targets() const { return targets_; }

  // Whether the reverse step at t uses alternate() (or the CADS perturbed
  // condition, which is always true inside its active window).
  bool uses_alternate_at(int t, int steps) const;

 private:
  GuidanceSpec spec_;
  CondEmbedding base_;
  CondEmbedding uncond_;
  CondEmbedding alternate_;
  CondEmbedding perturbed_;
  std::vector<std::string> targets_;
  std::uint64_t fresh_key_ = 1000;
};

// Resolves per-chain state. Draws targets from `rng` (Weak, PromptAppend).
GuidanceDriver make_driver(const GuidanceSpec& spec, const PromptSpec& prompt,
                           const Codec& codec, Rng& rng);

// Number of leading reverse steps covered by a fraction of N.
int leading_steps(double fraction, int steps);

}  // namespace weakguide

#endif  // WEAKGUIDE_GUIDANCE_HPP_
