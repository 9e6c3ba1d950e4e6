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

// Synthetic token-structured text encoder and the edits applied to its
// output: masked attribute addition and condition-annealed (CADS) noise.

#ifndef WEAKGUIDE_CODEC_HPP_
#define WEAKGUIDE_CODEC_HPP_

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "weakguide/rng.hpp"
#include "weakguide/types.hpp"

namespace weakguide {

inline constexpr std::string_view kEosToken = "<eos>";
inline constexpr std::string_view kPadToken = "<pad>";

// Structured prompt: [context][qualifier][extra tokens...].
// An empty context with no other tokens is the empty prompt "".
struct PromptSpec {
  std::string context;
  std::optional<std::string> qualifier;
  std::vector<std::string> extra_tokens;

  std::vector<std::string> tokens() const;
  // Same prompt with `token` as the last prefix token.
  PromptSpec with_appended(const std::string& token) const;
  PromptSpec with_qualifier(const std::string& attribute) const;
  std::string text() const;
};

// L x d condition matrix. Rows [0, eos_index) hold prompt tokens, row
// eos_index the [EOS] token, later rows padding.
struct CondEmbedding {
  RowMatrix matrix;
  int eos_index = 0;

  int length() const { return static_cast<int>(matrix.rows()); }
  int dim() const { return static_cast<int>(matrix.cols()); }
  Vector row_norms() const { return matrix.rowwise().norm(); }
};

struct AttributeDirection {
  std::string attribute;
  RowMatrix matrix;
};

// m_i = 1 iff i >= eos_index.
using EosMask = std::vector<std::uint8_t>;

enum class MaskMode { kEosMasked, kEveryPosition };

struct CadsParams {
  double noise_scale = 0.25;
  double tau1 = 0.6;
  double tau2 = 0.9;

  void validate() const;
};

// Annealing coefficient: 1 on [0, tau1], linear on (tau1, tau2), 0 on
// [tau2, 1].
double cads_gamma(double t, const CadsParams& params);

struct CodecParams {
  int length = 16;
  int dim = 32;
  // Readout weight of rows at and after [EOS] relative to prompt rows.
  double post_eos_weight = 0.25;
  // How strongly rows from [EOS] onward carry a summary of the prompt.
  double summary_strength = 0.2;
  std::uint64_t seed = 0x5eed;
  // Attribute tokens get mutually orthonormal embeddings; every other token
  // is orthogonal to their span.
  std::vector<std::string> attribute_tokens;
  std::vector<std::string> tokens;
};

class Codec {
 public:
  explicit Codec(CodecParams params);

  const CodecParams& params() const { return params_; }
  int length() const { return params_.length; }
  int dim() const { return params_.dim; }

  bool has_token(std::string_view token) const;
  bool is_attribute(std::string_view token) const;
  // Unit-norm embedding of a single token. Throws VocabularyError.
  const Vector& token_embedding(std::string_view token) const;

  CondEmbedding encode(const PromptSpec& prompt) const;
  CondEmbedding encode_tokens(std::span<const std::string> tokens) const;
  CondEmbedding empty() const { return encode_tokens({}); }

  // encode(k) - encode(""). An empty attribute gives the zero direction.
  AttributeDirection attribute_direction(std::string_view attribute) const;

  // Row average with weight 1 before [EOS] and post_eos_weight after.
  Vector readout(const CondEmbedding& c) const;

  // Fingerprint of the parameters and vocabulary.
  std::string hash() const;

 private:
  CodecParams params_;
  std::map<std::string, Vector, std::less<>> embeddings_;
};

EosMask eos_mask(const CondEmbedding& c);

// c + m (.) a with rows renormalized to their original norm. In
// kEveryPosition mode every row is edited. Throws DegenerateRowError when a
// zero row would receive a nonzero edit.
CondEmbedding apply_weak(const CondEmbedding& c, const AttributeDirection& a,
                         MaskMode mode);
// Several directions summed before the edit (multi-attribute guidance).
CondEmbedding apply_weak(const CondEmbedding& c,
                         std::span<const AttributeDirection> directions,
                         MaskMode mode);

// sqrt(gamma) c + s sqrt(1 - gamma) n, then rescaled so the scalar mean and
// standard deviation of all entries match those of c.
CondEmbedding cads_perturb(const CondEmbedding& c, double t,
                           const CadsParams& params, Rng& rng);

// CSV rows "position,dim,value".
void write_embedding_csv(std::ostream& out, const CondEmbedding& c);

}  // namespace weakguide

#endif  // WEAKGUIDE_CODEC_HPP_
