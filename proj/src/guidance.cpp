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

#include "weakguide/guidance.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "weakguide/error.hpp"

namespace weakguide {

namespace {

constexpr std::uint64_t kUncondKey = 1;
constexpr std::uint64_t kBaseKey = 2;
constexpr std::uint64_t kAlternateKey = 3;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};

void check_alpha(double alpha) {
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
    throw InvalidArgument("guidance scale must be finite and >= 0");
  }
}

void check_unit(double v, const char* what) {
  if (!(v >= 0.0 && v <= 1.0)) {
    throw InvalidArgument(std::string(what) + " must lie in [0, 1]");
  }
}

const char* mask_name(MaskMode mode) {
  return mode == MaskMode::kEosMasked ? "eos_masked" : "every_position";
}

}  // namespace

int leading_steps(double fraction, int steps) {
  return static_cast<int>(std::ceil(fraction * steps - 1e-9));
}

void validate(const GuidanceSpec& spec) {
  std::visit(Overloaded{
                 [](const guidance::Vanilla&) {},
                 [](const guidance::Cfg& g) { check_alpha(g.alpha); },
                 [](const guidance::Cads& g) {
                   check_alpha(g.alpha);
                   g.params.validate();
                 },
                 [](const guidance::Swap& g) {
                   check_alpha(g.alpha);
                   check_unit(g.fraction, "swap fraction");
                   if (g.attribute.empty()) throw InvalidArgument("swap needs an attribute");
                 },
                 [](const guidance::PromptAppend& g) {
                   check_alpha(g.alpha);
                   if (g.attribute_set.empty()) {
                     throw InvalidArgument("prompt-append attribute set is empty");
                   }
                 },
                 [](const guidance::Weak& g) {
                   check_alpha(g.alpha);
                   check_unit(g.tau, "tau");
                   if (g.attribute_sets.empty()) {
                     throw InvalidArgument("weak guidance needs an attribute set");
                   }
                   for (const auto& set : g.attribute_sets) {
                     if (set.empty()) throw InvalidArgument("weak attribute set is empty");
                   }
                 },
             },
             spec);
}

double guidance_alpha(const GuidanceSpec& spec) {
  return std::visit(Overloaded{
                        [](const guidance::Vanilla&) { return 0.0; },
                        [](const auto& g) { return g.alpha; },
                    },
                    spec);
}

std::string method_name(const GuidanceSpec& spec) {
  return std::visit(Overloaded{
                        [](const guidance::Vanilla&) { return std::string("vanilla"); },
                        [](const guidance::Cfg&) { return std::string("cfg"); },
                        [](const guidance::Cads&) { return std::string("cads"); },
                        [](const guidance::Swap&) { return std::string("swap"); },
                        [](const guidance::PromptAppend&) {
                          return std::string("prompt_append");
                        },
                        [](const guidance::Weak& g) {
                          return std::string(g.mask == MaskMode::kEosMasked
                                                 ? "weak"
                                                 : "every_position");
                        },
                    },
                    spec);
}

std::string describe(const GuidanceSpec& spec) {
  nlohmann::ordered_json j;
  j["method"] = method_name(spec);
  std::visit(Overloaded{
                 [](const guidance::Vanilla&) {},
                 [&](const guidance::Cfg& g) { j["alpha"] = g.alpha; },
                 [&](const guidance::Cads& g) {
                   j["alpha"] = g.alpha;
                   j["s"] = g.params.noise_scale;
                   j["tau1"] = g.params.tau1;
                   j["tau2"] = g.params.tau2;
                 },
                 [&](const guidance::Swap& g) {
                   j["alpha"] = g.alpha;
                   j["fraction"] = g.fraction;
                   j["attribute"] = g.attribute;
                 },
                 [&](const guidance::PromptAppend& g) {
                   j["alpha"] = g.alpha;
                   j["attribute_set"] = g.attribute_set;
                 },
                 [&](const guidance::Weak& g) {
                   j["alpha"] = g.alpha;
                   j["tau"] = g.tau;
                   j["attribute_sets"] = g.attribute_sets;
                   j["mask"] = mask_name(g.mask);
                 },
             },
             spec);
  return j.dump();
}

GuidanceDriver::GuidanceDriver(GuidanceSpec spec, CondEmbedding base,
                               CondEmbedding uncond, CondEmbedding alternate,
                               std::vector<std::string> targets)
    : spec_(std::move(spec)),
      base_(std::move(base)),
      uncond_(std::move(uncond)),
      alternate_(std::move(alternate)),
      targets_(std::move(targets)) {}

bool GuidanceDriver::uses_alternate_at(int t, int steps) const {
  // Reverse step index, 1 at the first (noisiest) step.
  const int j = steps - t + 1;
  return std::visit(
      Overloaded{
          [](const guidance::Vanilla&) { return false; },
          [](const guidance::Cfg&) { return false; },
          [&](const guidance::Cads& g) {
            return cads_gamma(static_cast<double>(t) / steps, g.params) < 1.0 &&
                   g.params.noise_scale != 0.0;
          },
          [&](const guidance::Swap& g) { return j <= leading_steps(g.fraction, steps); },
          [](const guidance::PromptAppend&) { return true; },
          [&](const guidance::Weak& g) {
            const int exclusive = leading_steps(g.tau, steps);
            if (j <= exclusive) return true;
            return (j - exclusive - 1) % 2 == 0;
          },
      },
      spec_);
}

StepCondition GuidanceDriver::condition_at(int t, int steps, Rng& rng) {
  if (t < 1 || t > steps) throw InvalidArgument("guidance step outside [1, N]");
  StepCondition out;
  out.uncond = &uncond_;
  out.uncond_key = kUncondKey;
  out.alpha = guidance_alpha(spec_);
  out.cond = &base_;
  out.cond_key = kBaseKey;

  if (const auto* cads = std::get_if<guidance::Cads>(&spec_)) {
    const double time = static_cast<double>(t) / steps;
    if (cads_gamma(time, cads->params) < 1.0 && cads->params.noise_scale != 0.0) {
      perturbed_ = cads_perturb(base_, time, cads->params, rng);
      out.cond = &perturbed_;
      out.cond_key = ++fresh_key_;
    }
    return out;
  }
  if (uses_alternate_at(t, steps)) {
    out.cond = &alternate_;
    out.cond_key = kAlternateKey;
  }
  return out;
}

GuidanceDriver make_driver(const GuidanceSpec& spec, const PromptSpec& prompt,
                           const Codec& codec, Rng& rng) {
  validate(spec);
  CondEmbedding base = codec.encode(prompt);
  CondEmbedding uncond = codec.empty();
  auto require_attribute = [&](const std::string& a) {
    if (!codec.is_attribute(a)) throw VocabularyError(a);
  };

  return std::visit(
      Overloaded{
          [&](const guidance::Swap& g) {
            require_attribute(g.attribute);
            CondEmbedding alt = codec.encode(prompt.with_qualifier(g.attribute));
            return GuidanceDriver(spec, std::move(base), std::move(uncond), std::move(alt),
                                  {});
          },
          [&](const guidance::PromptAppend& g) {
            for (const auto& a : g.attribute_set) require_attribute(a);
            const std::string& target = g.attribute_set[rng.index(g.attribute_set.size())];
            CondEmbedding alt = codec.encode(prompt.with_appended(target));
            return GuidanceDriver(spec, std::move(base), std::move(uncond), std::move(alt),
                                  {target});
          },
          [&](const guidance::Weak& g) {
            std::vector<std::string> targets;
            std::vector<AttributeDirection> dirs;
            for (const auto& set : g.attribute_sets) {
              for (const auto& a : set) require_attribute(a);
              targets.push_back(set[rng.index(set.size())]);
              dirs.push_back(codec.attribute_direction(targets.back()));
            }
            CondEmbedding alt = apply_weak(base, dirs, g.mask);
            return GuidanceDriver(spec, std::move(base), std::move(uncond), std::move(alt),
                                  std::move(targets));
          },
          [&](const auto&) {
            CondEmbedding alt = base;
            return GuidanceDriver(spec, std::move(base), std::move(uncond), std::move(alt),
                                  {});
          },
      },
      spec);
}

}  // namespace weakguide
