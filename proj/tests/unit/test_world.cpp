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
#include <cmath>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "weakguide/error.hpp"
#include "weakguide/stats.hpp"
#include "weakguide/world.hpp"

using namespace weakguide;
using doctest::Approx;

namespace {

PromptSpec prompt(std::string ctx, std::optional<std::string> q = std::nullopt) {
  PromptSpec p;
  p.context = std::move(ctx);
  p.qualifier = std::move(q);
  return p;
}

const World& default_world() {
  static const World w = World::with_codec(default_world_spec());
  return w;
}

Vector vec2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

}  // namespace

TEST_CASE("gaussian component closed forms") {
  GaussianComponent g(Vector::Zero(2), Matrix::Identity(2, 2));
  CHECK(g.log_pdf(Vector::Zero(2)) == Approx(-std::log(2.0 * std::numbers::pi)));
  // N(mu, diag(4, 1)) at mu + (2, 0): one standard deviation along x.
  Matrix cov = Matrix::Identity(2, 2);
  cov(0, 0) = 4.0;
  GaussianComponent h(vec2(1, 1), cov);
  CHECK(h.log_pdf(vec2(3, 1)) ==
        Approx(-std::log(2.0 * std::numbers::pi) - 0.5 * std::log(4.0) - 0.5));
  CHECK_THROWS_AS(GaussianComponent(Vector::Zero(2), -Matrix::Identity(2, 2)), InvalidArgument);
}

TEST_CASE("diffused mixture") {
  MixtureParams m;
  m.weights = Vector::Ones(1);
  m.components.emplace_back(vec2(2, -4), Matrix::Identity(2, 2));
  const MixtureParams d = diffused_mixture(m, 0.25);
  CHECK((d.components[0].mean - vec2(1, -2)).norm() < 1e-15);
  CHECK((d.components[0].cov - Matrix::Identity(2, 2)).norm() < 1e-15);
  CHECK_THROWS_AS(diffused_mixture(m, 0.0), InvalidArgument);
}

TEST_CASE("mixture density integrates to one") {
  const World& w = default_world();
  for (const char* ctx : {"ceo", "lawyer", "chair"}) {
    const MixtureParams m = w.mixture_for(w.codec().encode(prompt(ctx)), ctx);
    const double h = 0.05;
    double total = 0.0;
    for (double x = -9.0; x <= 9.0; x += h) {
      for (double y = -9.0; y <= 9.0; y += h) total += std::exp(m.log_density(vec2(x, y)));
    }
    CHECK(total * h * h == Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("score matches finite differences and eps is its rescaling") {
  const World& w = default_world();
  Rng rng(5);
  for (int probe = 0; probe < 200; ++probe) {
    const auto& ctx = w.spec().contexts[rng.index(w.spec().contexts.size())];
    const CondEmbedding c = w.codec().encode(prompt(ctx.name));
    const double abar = 1e-4 + (1.0 - 1e-4) * rng.uniform();
    const Vector z = vec2(5.0 * rng.normal(), 5.0 * rng.normal());
    const MixtureParams m = diffused_mixture(w.mixture_for(c, ctx.name), abar);
    Vector fd(2);
    for (int i = 0; i < 2; ++i) {
      Vector up = z;
      Vector dn = z;
      up[i] += 1e-5;
      dn[i] -= 1e-5;
      fd[i] = (m.log_density(up) - m.log_density(dn)) / 2e-5;
    }
    const Vector s = w.score(z, abar, c, ctx.name);
    CHECK((s - fd).norm() <= 1e-5 * std::max(1.0, fd.norm()));
    const Vector eps = w.eps_pred(z, abar, c, ctx.name);
    CHECK((eps + std::sqrt(1.0 - abar) * s).norm() < 1e-12);
  }
}

TEST_CASE("context weights") {
  const World& w = default_world();
  const Codec& codec = w.codec();

  SUBCASE("neutral prompts reproduce the prior") {
    for (const auto& ctx : w.spec().contexts) {
      if (ctx.is_object()) continue;
      const Vector lw = w.log_weights(codec.encode(prompt(ctx.name)), ctx.name);
      CHECK(lw.array().exp().sum() == Approx(1.0).epsilon(1e-12));
      for (std::size_t k = 0; k < ctx.components.size(); ++k) {
        double prior = 0.0;
        for (std::size_t f = 0; f < ctx.families.size(); ++f) {
          prior += ctx.prior_logits[f][ctx.components[k].attributes[f]];
        }
        double norm = 0.0;
        for (std::size_t j = 0; j < ctx.components.size(); ++j) {
          double lj = 0.0;
          for (std::size_t f = 0; f < ctx.families.size(); ++f) {
            lj += ctx.prior_logits[f][ctx.components[j].attributes[f]];
          }
          norm += std::exp(lj);
        }
        CHECK(std::exp(lw[static_cast<Eigen::Index>(k)]) ==
              Approx(std::exp(prior) / norm).epsilon(1e-10));
      }
    }
    const Vector ceo = w.log_weights(codec.encode(prompt("ceo")), "ceo").array().exp();
    CHECK(ceo[0] == Approx(0.030).epsilon(1e-9));
  }
  SUBCASE("the empty prompt is ungated and uniform") {
    CHECK(w.context_gate(codec.empty(), "ceo") == 0.0);
    CHECK(w.context_gate(codec.encode(prompt("ceo")), "ceo") == Approx(1.0));
    const Vector u = w.log_weights(codec.empty(), "firefighter").array().exp();
    for (Eigen::Index k = 0; k < u.size(); ++k) CHECK(u[k] == Approx(1.0 / 8.0));
  }
  SUBCASE("qualifiers and weak edits raise the named attribute") {
    const Vector base = w.log_weights(codec.encode(prompt("ceo")), "ceo");
    const Vector q = w.log_weights(codec.encode(prompt("ceo", "female")), "ceo");
    const auto edited = apply_weak(codec.encode(prompt("ceo")),
                                   codec.attribute_direction("female"), MaskMode::kEosMasked);
    const Vector e = w.log_weights(edited, "ceo");
    CHECK(std::exp(q[0]) > 0.99);
    CHECK(e[0] > base[0]);
  }
  SUBCASE("objects have one component whatever the condition") {
    const auto edited = apply_weak(codec.encode(prompt("dog")),
                                   codec.attribute_direction("male"), MaskMode::kEveryPosition);
    CHECK(w.log_weights(edited, "dog").size() == 1);
    CHECK(w.log_weights(edited, "dog")[0] == 0.0);
  }
  CHECK_THROWS_AS(w.log_weights(codec.empty(), "astronaut"), UnknownContextError);
}

TEST_CASE("oracle sampling") {
  const World& w = default_world();
  Rng rng(17);
  const int n = 20000;

  SUBCASE("object mean within three standard errors") {
    const auto s = w.sample_oracle(prompt("chair"), n, rng);
    Vector mean = Vector::Zero(2);
    for (const auto& o : s) mean += o.x;
    mean /= n;
    const auto& comp = w.spec().context("chair").components[0];
    for (int i = 0; i < 2; ++i) {
      CHECK(std::abs(mean[i] - comp.mean[i]) < 3.0 * std::sqrt(comp.cov(i, i) / n));
    }
    CHECK(s[0].attributes.empty());
  }
  SUBCASE("attribute frequencies inside a 99.9% interval") {
    const auto s = w.sample_oracle(prompt("lawyer"), n, rng);
    std::vector<std::int64_t> race(4, 0);
    for (const auto& o : s) ++race[o.attributes[1]];
    const std::vector<double> truth = {0.74, 0.08, 0.11, 0.07};
    for (int a = 0; a < 4; ++a) {
      const auto ci = stats::clopper_pearson(race[a], n, 0.999);
      CHECK(truth[a] >= ci.low);
      CHECK(truth[a] <= ci.high);
    }
  }
  CHECK_THROWS_AS(w.sample_oracle(prompt("car", "female"), 10, rng), InvalidArgument);
  CHECK_THROWS_AS(w.sample_oracle(prompt("ceo"), 0, rng), InvalidArgument);
}

TEST_CASE("classification") {
  const World& w = default_world();
  for (const char* name : {"nurse", "firefighter"}) {
    const auto& ctx = w.spec().context(name);
    for (std::size_t slot = 0; slot < ctx.families.size(); ++slot) {
      for (const auto& comp : ctx.components) {
        const auto label = w.classify(comp.mean, name, static_cast<int>(slot));
        CHECK(label.attribute == comp.attributes[slot]);
        CHECK(label.posterior[comp.attributes[slot]] == Approx(1.0).epsilon(1e-3));
      }
    }
  }
  CHECK_THROWS_AS(w.classify(vec2(0, 0), "car"), NoAttributeError);
}

TEST_CASE("world spec validation") {
  WorldSpec spec = default_world_spec();
  CHECK_NOTHROW(spec.validate());
  CHECK(spec.locate_attribute("male") == std::pair<int, int>{0, 1});
  CHECK_THROWS_AS(spec.locate_attribute("purple"), VocabularyError);

  WorldSpec dup = spec;
  dup.contexts.push_back(dup.contexts.front());
  CHECK_THROWS_AS(dup.validate(), InvalidArgument);

  WorldSpec bad_cov = spec;
  bad_cov.contexts.front().components.front().cov(0, 0) = -1.0;
  CHECK_THROWS_AS(bad_cov.validate(), InvalidArgument);

  WorldSpec neg = spec;
  neg.coupling = -1.0;
  CHECK_THROWS_AS(neg.validate(), InvalidArgument);

  CHECK(spec.hash() == default_world_spec().hash());
  CHECK(neg.hash() != spec.hash());
}
