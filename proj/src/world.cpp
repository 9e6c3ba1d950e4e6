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

#include "weakguide/world.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include <Eigen/Cholesky>
#include <fmt/format.h>

#include "weakguide/error.hpp"

namespace weakguide {

namespace {

double log_sum_exp(const Vector& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}

bool is_spd(const Matrix& m) {
  if (m.rows() != m.cols()) return false;
  if (!m.isApprox(m.transpose(), 1e-12)) return false;
  Eigen::LLT<Matrix> llt(m);
  return llt.info() == Eigen::Success;
}

}  // namespace

void WorldSpec::validate() const {
  if (dim < 1) throw InvalidArgument("world dimension must be >= 1");
  if (!(coupling >= 0.0) || !std::isfinite(coupling)) {
    throw InvalidArgument("coupling must be finite and >= 0");
  }
  std::set<std::string> seen;
  for (const auto& f : families) {
    if (f.attributes.size() < 2) {
      throw InvalidArgument("family '" + f.name + "' needs at least two attributes");
    }
    for (const auto& a : f.attributes) {
      if (!seen.insert(a).second) throw InvalidArgument("duplicate attribute '" + a + "'");
    }
  }
  std::set<std::string> names;
  for (const auto& ctx : contexts) {
    if (!names.insert(ctx.name).second || seen.count(ctx.name)) {
      throw InvalidArgument("duplicate context '" + ctx.name + "'");
    }
    if (ctx.components.empty()) {
      throw InvalidArgument("context '" + ctx.name + "' has no components");
    }
    if (ctx.is_object()) {
      if (ctx.components.size() != 1) {
        throw InvalidArgument("object context '" + ctx.name + "' needs one component");
      }
    } else {
      if (ctx.prior_logits.size() != ctx.families.size()) {
        throw InvalidArgument("context '" + ctx.name + "' needs one prior per family");
      }
      std::size_t expected = 1;
      for (std::size_t f = 0; f < ctx.families.size(); ++f) {
        const int fi = ctx.families[f];
        if (fi < 0 || fi >= static_cast<int>(families.size())) {
          throw InvalidArgument("context '" + ctx.name + "' names an unknown family");
        }
        const auto size = families[fi].attributes.size();
        if (static_cast<std::size_t>(ctx.prior_logits[f].size()) != size ||
            !ctx.prior_logits[f].allFinite()) {
          throw InvalidArgument("context '" + ctx.name + "' has a malformed prior");
        }
        expected *= size;
      }
      if (ctx.components.size() != expected) {
        throw InvalidArgument("context '" + ctx.name +
                              "' needs one component per attribute combination");
      }
      std::set<std::vector<int>> combos;
      for (const auto& comp : ctx.components) {
        if (comp.attributes.size() != ctx.families.size()) {
          throw InvalidArgument("component of '" + ctx.name + "' lacks attribute labels");
        }
        for (std::size_t f = 0; f < ctx.families.size(); ++f) {
          const int a = comp.attributes[f];
          if (a < 0 || a >= static_cast<int>(families[ctx.families[f]].attributes.size())) {
            throw InvalidArgument("component of '" + ctx.name + "' has a bad label");
          }
        }
        combos.insert(comp.attributes);
      }
      if (combos.size() != expected) {
        throw InvalidArgument("context '" + ctx.name + "' repeats an attribute combination");
      }
    }
    for (const auto& comp : ctx.components) {
      if (comp.mean.size() != dim || !comp.mean.allFinite()) {
        throw InvalidArgument("component mean of '" + ctx.name + "' has wrong size");
      }
      if (comp.cov.rows() != dim || !is_spd(comp.cov)) {
        throw InvalidArgument("component covariance of '" + ctx.name + "' is not SPD");
      }
    }
  }
}

const ContextSpec& WorldSpec::context(std::string_view name) const {
  for (const auto& ctx : contexts) {
    if (ctx.name == name) return ctx;
  }
  throw UnknownContextError(std::string(name));
}

bool WorldSpec::has_context(std::string_view name) const {
  return std::any_of(contexts.begin(), contexts.end(),
                     [&](const ContextSpec& c) { return c.name == name; });
}

int WorldSpec::family_index(std::string_view name) const {
  for (std::size_t i = 0; i < families.size(); ++i) {
    if (families[i].name == name) return static_cast<int>(i);
  }
  throw InvalidArgument("unknown attribute family '" + std::string(name) + "'");
}

std::pair<int, int> WorldSpec::locate_attribute(std::string_view attribute) const {
  for (std::size_t f = 0; f < families.size(); ++f) {
    const auto& attrs = families[f].attributes;
    for (std::size_t a = 0; a < attrs.size(); ++a) {
      if (attrs[a] == attribute) return {static_cast<int>(f), static_cast<int>(a)};
    }
  }
  throw VocabularyError(std::string(attribute));
}

std::vector<std::string> WorldSpec::attribute_tokens() const {
  std::vector<std::string> out;
  for (const auto& f : families) out.insert(out.end(), f.attributes.begin(), f.attributes.end());
  return out;
}

CodecParams WorldSpec::codec_params(CodecParams base) const {
  base.attribute_tokens = attribute_tokens();
  base.tokens.clear();
  for (const auto& ctx : contexts) base.tokens.push_back(ctx.name);
  base.tokens.insert(base.tokens.end(), filler_tokens.begin(), filler_tokens.end());
  return base;
}

std::string WorldSpec::hash() const {
  std::string s = fmt::format("{};{:.17g}", dim, coupling);
  for (const auto& f : families) {
    s += ";F" + f.name;
    for (const auto& a : f.attributes) s += "," + a;
  }
  for (const auto& ctx : contexts) {
    s += ";C" + ctx.name;
    for (int f : ctx.families) s += fmt::format(",{}", f);
    for (const auto& p : ctx.prior_logits) {
      for (double v : p) s += fmt::format(",{:.17g}", v);
    }
    for (const auto& comp : ctx.components) {
      for (double v : comp.mean) s += fmt::format(",{:.17g}", v);
      for (Eigen::Index i = 0; i < comp.cov.size(); ++i) {
        s += fmt::format(",{:.17g}", comp.cov.data()[i]);
      }
      for (int a : comp.attributes) s += fmt::format(",{}", a);
    }
  }
  for (const auto& t : filler_tokens) s += ";T" + t;
  return fmt::format("{:016x}", fnv1a(s));
}

std::vector<ComponentSpec> circle_components(int dim, int count, double radius,
                                             double angle, double sigma) {
  if (dim < 2 && count > 2) throw InvalidArgument("circle layout needs dim >= 2");
  std::vector<ComponentSpec> out;
  for (int k = 0; k < count; ++k) {
    const double theta = angle + 2.0 * std::numbers::pi * k / count;
    ComponentSpec comp;
    comp.mean = Vector::Zero(dim);
    if (dim >= 2) {
      comp.mean[0] = radius * std::cos(theta);
      comp.mean[1] = radius * std::sin(theta);
    } else {
      comp.mean[0] = k == 0 ? radius : -radius;
    }
    comp.cov = Matrix::Identity(dim, dim) * (sigma * sigma);
    out.push_back(std::move(comp));
  }
  return out;
}

namespace {

Vector log_probs(std::initializer_list<double> p) {
  Vector v(static_cast<Eigen::Index>(p.size()));
  Eigen::Index i = 0;
  for (double x : p) v[i++] = std::log(x);
  return v;
}

}  // namespace

WorldSpec default_world_spec() {
  WorldSpec w;
  w.dim = 2;
  w.coupling = 100.0;
  w.families = {{"gender", {"female", "male"}},
                {"race", {"white", "black", "asian", "indian"}}};
  w.filler_tokens = {"a", "photo", "of"};
  constexpr double kSigma = 0.5;

  // Female share under the neutral prompt.
  const std::vector<std::pair<std::string, double>> professions = {
      {"ceo", 0.030},     {"doctor", 0.081},           {"pilot", 0.150},
      {"technician", 0.007}, {"fashion_designer", 0.922}, {"librarian", 0.806},
      {"teacher", 0.778}, {"nurse", 0.993}};
  const double angles[] = {0.3, 0.7, 1.1, 1.5, 1.9, 2.3, 2.7, 3.1, 3.4, 3.8};
  int slot = 0;
  for (const auto& [name, female] : professions) {
    ContextSpec ctx;
    ctx.name = name;
    ctx.families = {0};
    ctx.prior_logits = {log_probs({female, 1.0 - female})};
    ctx.components = circle_components(w.dim, 2, 3.0, angles[slot++], kSigma);
    ctx.components[0].attributes = {0};
    ctx.components[1].attributes = {1};
    w.contexts.push_back(std::move(ctx));
  }

  const std::vector<std::tuple<std::string, double, Vector>> mixed = {
      {"firefighter", 0.06, log_probs({0.70, 0.12, 0.10, 0.08})},
      {"lawyer", 0.25, log_probs({0.74, 0.08, 0.11, 0.07})}};
  for (const auto& [name, female, race] : mixed) {
    ContextSpec ctx;
    ctx.name = name;
    ctx.families = {0, 1};
    ctx.prior_logits = {log_probs({female, 1.0 - female}), race};
    ctx.components = circle_components(w.dim, 8, 4.5, angles[slot++], kSigma);
    for (int k = 0; k < 8; ++k) ctx.components[k].attributes = {k / 4, k % 4};
    w.contexts.push_back(std::move(ctx));
  }

  const char* objects[3] = {"car", "chair", "dog"};
  const double object_means[3][2] = {{1.0, 0.0}, {-1.0, 1.5}, {0.5, -2.0}};
  const double object_covs[3][3] = {{0.25, 0.0, 0.25}, {0.5, 0.1, 0.2}, {0.3, -0.1, 0.4}};
  for (int i = 0; i < 3; ++i) {
    ContextSpec ctx;
    ctx.name = objects[i];
    ComponentSpec comp;
    comp.mean = Vector{{object_means[i][0], object_means[i][1]}};
    comp.cov = Matrix{{object_covs[i][0], object_covs[i][1]},
                      {object_covs[i][1], object_covs[i][2]}};
    ctx.components = {std::move(comp)};
    w.contexts.push_back(std::move(ctx));
  }
  return w;
}

GaussianComponent::GaussianComponent(Vector m, Matrix c)
    : mean(std::move(m)), cov(std::move(c)) {
  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() != Eigen::Success) throw InvalidArgument("covariance is not SPD");
  precision = llt.solve(Matrix::Identity(cov.rows(), cov.cols()));
  const Matrix l = llt.matrixL();
  const double log_det = 2.0 * l.diagonal().array().log().sum();
  log_norm = -0.5 * static_cast<double>(mean.size()) * std::log(2.0 * std::numbers::pi) -
             0.5 * log_det;
}

double GaussianComponent::log_pdf(const Vector& x) const {
  const Vector d = x - mean;
  return log_norm - 0.5 * d.dot(precision * d);
}

double MixtureParams::log_density(const Vector& x) const {
  Vector terms(components.size());
  for (std::size_t k = 0; k < components.size(); ++k) {
    terms[k] = std::log(weights[k]) + components[k].log_pdf(x);
  }
  return log_sum_exp(terms);
}

Vector MixtureParams::score(const Vector& x) const {
  if (!x.allFinite()) throw InvalidArgument("score requested at a non-finite point");
  const auto k_count = components.size();
  Vector terms(k_count);
  for (std::size_t k = 0; k < k_count; ++k) {
    terms[k] = std::log(weights[k]) + components[k].log_pdf(x);
  }
  const Vector resp = (terms.array() - log_sum_exp(terms)).exp();
  Vector out = Vector::Zero(x.size());
  for (std::size_t k = 0; k < k_count; ++k) {
    if (resp[k] == 0.0) continue;
    out -= resp[k] * (components[k].precision * (x - components[k].mean));
  }
  return out;
}

int MixtureParams::sample_component(Rng& rng) const {
  const double u = rng.uniform();
  double acc = 0.0;
  for (Eigen::Index k = 0; k < weights.size(); ++k) {
    acc += weights[k];
    if (u < acc) return static_cast<int>(k);
  }
  return static_cast<int>(weights.size()) - 1;
}

Vector MixtureParams::sample(Rng& rng) const {
  const auto& comp = components[sample_component(rng)];
  Eigen::LLT<Matrix> llt(comp.cov);
  Vector xi(comp.mean.size());
  for (Eigen::Index i = 0; i < xi.size(); ++i) xi[i] = rng.normal();
  return comp.mean + llt.matrixL() * xi;
}

MixtureParams diffused_mixture(const MixtureParams& m, double abar) {
  if (!(abar > 0.0 && abar <= 1.0)) throw InvalidArgument("abar must lie in (0, 1]");
  if (abar == 1.0) return m;
  MixtureParams out;
  out.weights = m.weights;
  const double root = std::sqrt(abar);
  for (const auto& comp : m.components) {
    const auto dim = comp.mean.size();
    out.components.emplace_back(
        root * comp.mean,
        abar * comp.cov + (1.0 - abar) * Matrix::Identity(dim, dim));
  }
  return out;
}

World::World(WorldSpec spec, std::shared_ptr<const Codec> codec)
    : spec_(std::move(spec)), codec_(std::move(codec)) {
  spec_.validate();
  if (!codec_) throw InvalidArgument("world needs a codec");
  for (const auto& a : spec_.attribute_tokens()) {
    if (!codec_->is_attribute(a)) {
      throw InvalidArgument("codec does not treat '" + a + "' as an attribute");
    }
  }
  for (const auto& ctx : spec_.contexts) {
    if (!codec_->has_token(ctx.name)) throw VocabularyError(ctx.name);
    std::vector<GaussianComponent> comps;
    for (const auto& c : ctx.components) comps.emplace_back(c.mean, c.cov);
    components_.push_back(std::move(comps));
  }
}

World World::with_codec(WorldSpec spec, CodecParams params) {
  auto codec = std::make_shared<const Codec>(spec.codec_params(std::move(params)));
  return World(std::move(spec), std::move(codec));
}

int World::context_index(std::string_view context) const {
  for (std::size_t i = 0; i < spec_.contexts.size(); ++i) {
    if (spec_.contexts[i].name == context) return static_cast<int>(i);
  }
  throw UnknownContextError(std::string(context));
}

const std::vector<GaussianComponent>& World::components(std::string_view context) const {
  return components_[context_index(context)];
}

double World::context_gate(const CondEmbedding& c, std::string_view context) const {
  const Vector& e = codec_->token_embedding(context);
  double best = 0.0;
  for (int i = 0; i < std::min(c.eos_index, c.length()); ++i) {
    best = std::max(best, c.matrix.row(i).dot(e.transpose()));
  }
  return std::clamp(best, 0.0, 1.0);
}

Vector World::log_weights(const CondEmbedding& c, std::string_view context) const {
  const ContextSpec& ctx = spec_.context(context);
  if (ctx.is_object()) return Vector::Zero(1);
  const double gate = context_gate(c, context);
  const Vector r = codec_->readout(c);

  std::vector<Vector> family_terms;
  for (std::size_t f = 0; f < ctx.families.size(); ++f) {
    const auto& attrs = spec_.families[ctx.families[f]].attributes;
    Vector t(static_cast<Eigen::Index>(attrs.size()));
    for (std::size_t a = 0; a < attrs.size(); ++a) {
      t[a] = gate * ctx.prior_logits[f][a] +
             spec_.coupling * r.dot(codec_->token_embedding(attrs[a]));
    }
    family_terms.push_back(std::move(t));
  }
  Vector out(static_cast<Eigen::Index>(ctx.components.size()));
  for (std::size_t k = 0; k < ctx.components.size(); ++k) {
    double s = 0.0;
    for (std::size_t f = 0; f < ctx.families.size(); ++f) {
      s += family_terms[f][ctx.components[k].attributes[f]];
    }
    out[k] = s;
  }
  return out.array() - log_sum_exp(out);
}

MixtureParams World::mixture_for(const CondEmbedding& c, std::string_view context) const {
  MixtureParams m;
  m.weights = log_weights(c, context).array().exp();
  m.components = components(context);
  return m;
}

Vector World::score(const Vector& z, double abar, const CondEmbedding& c,
                    std::string_view context) const {
  return diffused_mixture(mixture_for(c, context), abar).score(z);
}

Vector World::eps_pred(const Vector& z, double abar, const CondEmbedding& c,
                       std::string_view context) const {
  return -std::sqrt(1.0 - abar) * score(z, abar, c, context);
}

std::vector<OracleSample> World::sample_oracle(const PromptSpec& prompt, int n,
                                               Rng& rng) const {
  if (n < 1) throw InvalidArgument("oracle sample count must be >= 1");
  const ContextSpec& ctx = spec_.context(prompt.context);
  if (prompt.qualifier) {
    const auto [family, _] = spec_.locate_attribute(*prompt.qualifier);
    if (std::find(ctx.families.begin(), ctx.families.end(), family) == ctx.families.end()) {
      throw InvalidArgument("qualifier '" + *prompt.qualifier +
                            "' does not apply to context '" + ctx.name + "'");
    }
  }
  const MixtureParams m = mixture_for(codec_->encode(prompt), prompt.context);
  std::vector<Eigen::LLT<Matrix>> factors;
  for (const auto& comp : m.components) factors.emplace_back(comp.cov);

  std::vector<OracleSample> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    const int k = m.sample_component(rng);
    Vector xi(spec_.dim);
    for (int j = 0; j < spec_.dim; ++j) xi[j] = rng.normal();
    out.push_back({m.components[k].mean + factors[k].matrixL() * xi,
                   ctx.components[k].attributes});
  }
  return out;
}

BayesLabel World::classify(const Vector& x, std::string_view context, int slot) const {
  const ContextSpec& ctx = spec_.context(context);
  if (ctx.is_object()) throw NoAttributeError(ctx.name);
  if (slot < 0 || slot >= static_cast<int>(ctx.families.size())) {
    throw InvalidArgument("context '" + ctx.name + "' has no family slot " +
                          std::to_string(slot));
  }
  const auto& comps = components(context);
  Vector terms(comps.size());
  for (std::size_t k = 0; k < comps.size(); ++k) terms[k] = comps[k].log_pdf(x);
  const Vector resp = (terms.array() - log_sum_exp(terms)).exp();

  const auto& attrs = spec_.families[ctx.families[slot]].attributes;
  BayesLabel label;
  label.posterior = Vector::Zero(static_cast<Eigen::Index>(attrs.size()));
  for (std::size_t k = 0; k < comps.size(); ++k) {
    label.posterior[ctx.components[k].attributes[slot]] += resp[k];
  }
  label.posterior /= label.posterior.sum();
  Eigen::Index best = 0;
  label.posterior.maxCoeff(&best);
  label.attribute = static_cast<int>(best);
  label.name = attrs[best];
  return label;
}

double World::log_density(const Vector& x, const CondEmbedding& c,
                          std::string_view context) const {
  return mixture_for(c, context).log_density(x);
}

std::string World::hash() const {
  return fmt::format("{}-{}", spec_.hash(), codec_->hash());
}

}  // namespace weakguide
