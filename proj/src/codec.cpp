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

#include "weakguide/codec.hpp"

#include <cmath>
#include <sstream>

#include <fmt/format.h>

#include "weakguide/error.hpp"

namespace weakguide {

std::vector<std::string> PromptSpec::tokens() const {
  std::vector<std::string> out;
  if (!context.empty()) out.push_back(context);
  if (qualifier) out.push_back(*qualifier);
  out.insert(out.end(), extra_tokens.begin(), extra_tokens.end());
  return out;
}

PromptSpec PromptSpec::with_appended(const std::string& token) const {
  PromptSpec out = *this;
  out.extra_tokens.push_back(token);
  return out;
}

PromptSpec PromptSpec::with_qualifier(const std::string& attribute) const {
  PromptSpec out = *this;
  out.qualifier = attribute;
  return out;
}

std::string PromptSpec::text() const {
  std::string out;
  for (const auto& t : tokens()) {
    if (!out.empty()) out += ' ';
    out += t;
  }
  return out;
}

void CadsParams::validate() const {
  if (!std::isfinite(noise_scale) || noise_scale < 0.0) {
    throw InvalidArgument("CADS noise scale must be finite and >= 0");
  }
  if (!(0.0 <= tau1 && tau1 < tau2 && tau2 <= 1.0)) {
    throw InvalidArgument("CADS requires 0 <= tau1 < tau2 <= 1");
  }
}

double cads_gamma(double t, const CadsParams& params) {
  if (t <= params.tau1) return 1.0;
  if (t >= params.tau2) return 0.0;
  return (params.tau2 - t) / (params.tau2 - params.tau1);
}

namespace {

Vector hashed_unit_vector(std::string_view token, std::uint64_t seed,
                          int dim) {
  Rng rng(mix_seed(seed, fnv1a(token)));
  Vector v(dim);
  for (int i = 0; i < dim; ++i) v[i] = rng.normal();
  return v.normalized();
}

}  // namespace

Codec::Codec(CodecParams params) : params_(std::move(params)) {
  const int d = params_.dim;
  if (params_.length < 2 || d < 1) {
    throw InvalidArgument("codec needs length >= 2 and dim >= 1");
  }
  if (!(params_.post_eos_weight > 0.0) || !std::isfinite(params_.post_eos_weight)) {
    throw InvalidArgument("post-EOS readout weight must be positive");
  }
  if (static_cast<int>(params_.attribute_tokens.size()) >= d) {
    throw InvalidArgument("more attribute tokens than embedding dimensions");
  }

  // Gram-Schmidt over attribute tokens in declaration order.
  std::vector<Vector> basis;
  for (const auto& token : params_.attribute_tokens) {
    if (embeddings_.count(token)) continue;
    Vector v = hashed_unit_vector(token, params_.seed, d);
    for (const auto& q : basis) v -= q.dot(v) * q;
    const double norm = v.norm();
    if (norm < 1e-8) throw InvalidArgument("degenerate attribute token " + token);
    v /= norm;
    basis.push_back(v);
    embeddings_.emplace(token, v);
  }

  auto add_plain = [&](std::string_view token) {
    if (embeddings_.find(token) != embeddings_.end()) return;
    Vector v = hashed_unit_vector(token, params_.seed, d);
    for (const auto& q : basis) v -= q.dot(v) * q;
    embeddings_.emplace(std::string(token), v.normalized());
  };
  add_plain(kEosToken);
  add_plain(kPadToken);
  for (const auto& token : params_.tokens) add_plain(token);
}

bool Codec::has_token(std::string_view token) const {
  return embeddings_.find(token) != embeddings_.end();
}

bool Codec::is_attribute(std::string_view token) const {
  for (const auto& a : params_.attribute_tokens) {
    if (a == token) return true;
  }
  return false;
}

const Vector& Codec::token_embedding(std::string_view token) const {
  auto it = embeddings_.find(token);
  if (it == embeddings_.end()) throw VocabularyError(std::string(token));
  return it->second;
}

CondEmbedding Codec::encode(const PromptSpec& prompt) const {
  const auto tokens = prompt.tokens();
  return encode_tokens(tokens);
}

CondEmbedding Codec::encode_tokens(std::span<const std::string> tokens) const {
  const int L = params_.length;
  const int prefix = static_cast<int>(tokens.size());
  if (prefix > L - 1) {
    throw InvalidArgument(fmt::format("prompt of {} tokens does not fit length {}",
                                      prefix, L));
  }
  CondEmbedding out;
  out.matrix.resize(L, params_.dim);
  out.eos_index = prefix;

  Vector summary = Vector::Zero(params_.dim);
  for (int i = 0; i < prefix; ++i) {
    const auto& e = token_embedding(tokens[i]);
    out.matrix.row(i) = e.transpose();
    summary += e;
  }
  if (prefix > 0) summary /= prefix;

  const Vector& eos = token_embedding(kEosToken);
  const Vector& pad = token_embedding(kPadToken);
  for (int i = prefix; i < L; ++i) {
    Vector row = (i == prefix ? eos : pad) + params_.summary_strength * summary;
    const double norm = row.norm();
    out.matrix.row(i) = (norm > 1e-12 ? Vector(row / norm) : (i == prefix ? eos : pad))
                            .transpose();
  }
  return out;
}

AttributeDirection Codec::attribute_direction(std::string_view attribute) const {
  AttributeDirection out;
  out.attribute = std::string(attribute);
  const CondEmbedding base = empty();
  if (attribute.empty()) {
    out.matrix = RowMatrix::Zero(base.length(), base.dim());
    return out;
  }
  const std::string token(attribute);
  const CondEmbedding with = encode_tokens(std::span<const std::string>(&token, 1));
  out.matrix = with.matrix - base.matrix;
  return out;
}

Vector Codec::readout(const CondEmbedding& c) const {
  const double lambda = params_.post_eos_weight;
  Vector sum = Vector::Zero(c.dim());
  double total = 0.0;
  for (int i = 0; i < c.length(); ++i) {
    const double w = i < c.eos_index ? 1.0 : lambda;
    sum += w * c.matrix.row(i).transpose();
    total += w;
  }
  return sum / total;
}

std::string Codec::hash() const {
  std::ostringstream s;
  s << params_.length << ',' << params_.dim << ',' << params_.post_eos_weight
    << ',' << params_.summary_strength << ',' << params_.seed;
  for (const auto& [token, _] : embeddings_) s << ',' << token;
  return fmt::format("{:016x}", fnv1a(s.str()));
}

EosMask eos_mask(const CondEmbedding& c) {
  EosMask m(c.length(), 0);
  for (int i = std::max(0, c.eos_index); i < c.length(); ++i) m[i] = 1;
  return m;
}

CondEmbedding apply_weak(const CondEmbedding& c, const AttributeDirection& a,
                         MaskMode mode) {
  return apply_weak(c, std::span<const AttributeDirection>(&a, 1), mode);
}

CondEmbedding apply_weak(const CondEmbedding& c,
                         std::span<const AttributeDirection> directions,
                         MaskMode mode) {
  RowMatrix edit = RowMatrix::Zero(c.length(), c.dim());
  for (const auto& a : directions) {
    if (a.matrix.rows() != c.matrix.rows() || a.matrix.cols() != c.matrix.cols()) {
      throw InvalidArgument("attribute direction shape does not match condition");
    }
    edit += a.matrix;
  }
  CondEmbedding out = c;
  const int first = mode == MaskMode::kEosMasked ? c.eos_index : 0;
  for (int i = std::max(0, first); i < c.length(); ++i) {
    if (edit.row(i).isZero(0.0)) continue;
    const double original = c.matrix.row(i).norm();
    if (original == 0.0) throw DegenerateRowError(i);
    const auto edited = (c.matrix.row(i) + edit.row(i)).eval();
    const double norm = edited.norm();
    if (norm == 0.0) throw DegenerateRowError(i);
    out.matrix.row(i) = edited * (original / norm);
  }
  return out;
}

CondEmbedding cads_perturb(const CondEmbedding& c, double t,
                           const CadsParams& params, Rng& rng) {
  if (!(t >= 0.0 && t <= 1.0)) throw InvalidArgument("CADS time must lie in [0, 1]");
  params.validate();
  const double gamma = cads_gamma(t, params);
  if (gamma >= 1.0 || params.noise_scale == 0.0) return c;

  const double keep = std::sqrt(gamma);
  const double noise = params.noise_scale * std::sqrt(1.0 - gamma);
  CondEmbedding out;
  out.eos_index = c.eos_index;
  out.matrix.resize(c.length(), c.dim());
  for (Eigen::Index i = 0; i < out.matrix.size(); ++i) {
    out.matrix.data()[i] = keep * c.matrix.data()[i] + noise * rng.normal();
  }

  const auto n = static_cast<double>(c.matrix.size());
  const double mean_c = c.matrix.mean();
  const double std_c = std::sqrt((c.matrix.array() - mean_c).square().sum() / n);
  const double mean_p = out.matrix.mean();
  const double std_p = std::sqrt((out.matrix.array() - mean_p).square().sum() / n);
  if (std_p == 0.0) return c;
  out.matrix = ((out.matrix.array() - mean_p) * (std_c / std_p) + mean_c).matrix();
  return out;
}

void write_embedding_csv(std::ostream& out, const CondEmbedding& c) {
  out << "position,dim,value\n";
  for (int i = 0; i < c.length(); ++i) {
    for (int j = 0; j < c.dim(); ++j) {
      out << fmt::format("{},{},{:.17g}\n", i, j, c.matrix(i, j));
    }
  }
}

}  // namespace weakguide
