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

#ifndef WEAKGUIDE_WORLD_HPP_
#define WEAKGUIDE_WORLD_HPP_

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "weakguide/codec.hpp"
#include "weakguide/rng.hpp"
#include "weakguide/types.hpp"

namespace weakguide {

struct AttributeFamily {
  std::string name;
  std::vector<std::string> attributes;
};

struct ComponentSpec {
  Vector mean;
  Matrix cov;
  // One attribute index per family of the owning context (empty for objects).
  std::vector<int> attributes;
};

struct ContextSpec {
  std::string name;
  // Indices into WorldSpec::families. Empty for object contexts.
  std::vector<int> families;
  // Prior log-weights, one vector per listed family.
  std::vector<Vector> prior_logits;
  std::vector<ComponentSpec> components;

  bool is_object() const { return families.empty(); }
};

struct WorldSpec {
  int dim = 2;
  double coupling = 100.0;
  std::vector<AttributeFamily> families;
  std::vector<ContextSpec> contexts;
  // Prompt filler tokens known to the codec.
  std::vector<std::string> filler_tokens;

  void validate() const;
  const ContextSpec& context(std::string_view name) const;
  bool has_context(std::string_view name) const;
  int family_index(std::string_view name) const;
  // (family, attribute) of an attribute token; throws if unknown.
  std::pair<int, int> locate_attribute(std::string_view attribute) const;
  std::vector<std::string> attribute_tokens() const;
  CodecParams codec_params(CodecParams base) const;
  std::string hash() const;
};

// Components laid out evenly on a circle in the first two coordinates.
std::vector<ComponentSpec> circle_components(int dim, int count, double radius,
                                             double angle, double sigma);

WorldSpec default_world_spec();

struct GaussianComponent {
  Vector mean;
  Matrix cov;
  Matrix precision;
  // -(D/2) ln(2 pi) - ln det(cov) / 2
  double log_norm = 0.0;

  GaussianComponent() = default;
  GaussianComponent(Vector mean, Matrix cov);
  double log_pdf(const Vector& x) const;
};

struct MixtureParams {
  Vector weights;
  std::vector<GaussianComponent> components;

  double log_density(const Vector& x) const;
  Vector score(const Vector& x) const;
  Vector sample(Rng& rng) const;
  // Index of the component drawn by sample().
  int sample_component(Rng& rng) const;
};

MixtureParams diffused_mixture(const MixtureParams& m, double abar);

struct BayesLabel {
  int attribute = 0;
  std::string name;
  Vector posterior;
};

struct OracleSample {
  Vector x;
  // Attribute index per family of the context.
  std::vector<int> attributes;
};

class World {
 public:
  World(WorldSpec spec, std::shared_ptr<const Codec> codec);
  // Builds a codec whose vocabulary covers the world.
  static World with_codec(WorldSpec spec, CodecParams params = {});

  const WorldSpec& spec() const { return spec_; }
  const Codec& codec() const { return *codec_; }
  std::shared_ptr<const Codec> codec_ptr() const { return codec_; }

  // clamp(max_{i < eos} <c_i, e_context>, 0, 1); zero for the empty prompt.
  double context_gate(const CondEmbedding& c, std::string_view context) const;
  // Log mixture weights, normalized.
  Vector log_weights(const CondEmbedding& c, std::string_view context) const;
  MixtureParams mixture_for(const CondEmbedding& c, std::string_view context) const;

  Vector score(const Vector& z, double abar, const CondEmbedding& c,
               std::string_view context) const;
  Vector eps_pred(const Vector& z, double abar, const CondEmbedding& c,
                  std::string_view context) const;

  std::vector<OracleSample> sample_oracle(const PromptSpec& prompt, int n,
                                          Rng& rng) const;
  // Uniform-prior posterior over the attributes of family slot `slot`.
  BayesLabel classify(const Vector& x, std::string_view context,
                      int slot = 0) const;
  double log_density(const Vector& x, const CondEmbedding& c,
                     std::string_view context) const;

  // Undiffused components of a context, as precomputed Gaussians.
  const std::vector<GaussianComponent>& components(std::string_view context) const;
  int context_index(std::string_view context) const;
  std::string hash() const;

 private:
  WorldSpec spec_;
  std::shared_ptr<const Codec> codec_;
  std::vector<std::vector<GaussianComponent>> components_;
};

}  // namespace weakguide

#endif  // WEAKGUIDE_WORLD_HPP_
