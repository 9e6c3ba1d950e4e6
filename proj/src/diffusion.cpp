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

#include "weakguide/diffusion.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "weakguide/error.hpp"

namespace weakguide {

Schedule::Schedule(std::vector<double> betas) : betas_(std::move(betas)) {
  if (betas_.empty()) throw InvalidArgument("schedule needs at least one step");
  abar_.reserve(betas_.size() + 1);
  abar_.push_back(1.0);
  for (double b : betas_) {
    if (!(b > 0.0 && b < 1.0)) {
      throw InvalidArgument(fmt::format("beta {} outside (0, 1)", b));
    }
    abar_.push_back(abar_.back() * (1.0 - b));
  }
  if (abar_.back() >= 1e-4) {
    throw InvalidArgument(fmt::format(
        "terminal abar {:.3g} is not below 1e-4; the chain would not start from noise",
        abar_.back()));
  }
}

Schedule Schedule::linear(int steps) {
  if (steps < 1) throw InvalidArgument("schedule needs at least one step");
  const double scale = 1000.0 / steps;
  const double lo = 1e-4 * scale;
  const double hi = 0.02 * scale;
  std::vector<double> betas(steps);
  for (int i = 0; i < steps; ++i) {
    betas[i] = steps == 1 ? lo : lo + (hi - lo) * i / (steps - 1);
  }
  return Schedule(std::move(betas));
}

double Schedule::sigma2(int t) const {
  return beta(t) * (1.0 - abar(t - 1)) / (1.0 - abar(t));
}

std::string Schedule::hash() const {
  std::string s;
  for (double b : betas_) s += fmt::format("{:.17g},", b);
  return fmt::format("{:016x}", fnv1a(s));
}

Vector forward_noise(const Vector& x0, int t, const Schedule& schedule, Rng& rng) {
  if (t < 0 || t > schedule.steps()) {
    throw InvalidArgument(fmt::format("step {} outside [0, {}]", t, schedule.steps()));
  }
  const double a = schedule.abar(t);
  Vector z(x0.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    z[i] = std::sqrt(a) * x0[i] + std::sqrt(1.0 - a) * rng.normal();
  }
  return z;
}

Vector cfg_combine(const Vector& eps_c, const Vector& eps_u, double alpha) {
  if (eps_c.size() != eps_u.size()) throw InvalidArgument("eps shapes differ");
  if (!(alpha >= 0.0)) throw InvalidArgument("guidance scale must be >= 0");
  return (1.0 + alpha) * eps_c - alpha * eps_u;
}

ChainState reverse_step(const Schedule& schedule, const ChainState& state,
                        const Vector& eps, SamplerMode mode, Rng& rng) {
  const int t = state.t;
  if (t <= 0) throw StepUnderflowError();
  if (t > schedule.steps()) throw InvalidArgument("step beyond schedule");
  const double b = schedule.beta(t);
  const double coef = b / std::sqrt(1.0 - schedule.abar(t));
  const double inv = 1.0 / std::sqrt(1.0 - b);
  ChainState next;
  next.t = t - 1;
  next.z = (state.z - coef * eps) * inv;
  if (mode == SamplerMode::kAncestral) {
    const double sigma = std::sqrt(schedule.sigma2(t));
    for (Eigen::Index i = 0; i < next.z.size(); ++i) next.z[i] += sigma * rng.normal();
  }
  return next;
}

Sampler::Sampler(const World& world, const Schedule& schedule, std::string context,
                 SamplerMode mode)
    : world_(world), schedule_(schedule), context_(std::move(context)), mode_(mode) {
  const auto& comps = world_.components(context_);
  dim_ = world_.spec().dim;
  components_ = static_cast<int>(comps.size());
  const int n = schedule_.steps();
  const auto stride = static_cast<std::size_t>(components_);
  means_.resize((n + 1) * stride * dim_);
  precisions_.resize((n + 1) * stride * dim_ * dim_);
  log_norms_.resize((n + 1) * stride);
  for (int t = 0; t <= n; ++t) {
    const double a = schedule_.abar(t);
    for (int k = 0; k < components_; ++k) {
      const GaussianComponent g(std::sqrt(a) * comps[k].mean,
                                a * comps[k].cov +
                                    (1.0 - a) * Matrix::Identity(dim_, dim_));
      const std::size_t idx = t * stride + k;
      for (int i = 0; i < dim_; ++i) {
        means_[idx * dim_ + i] = g.mean[i];
        for (int j = 0; j < dim_; ++j) {
          precisions_[(idx * dim_ + i) * dim_ + j] = g.precision(i, j);
        }
      }
      log_norms_[idx] = g.log_norm;
    }
  }
}

void Sampler::eps_at(int t, const double* z, const Vector& log_weights,
                     double* out) const {
  // Small fixed buffers keep the per-step path allocation-free.
  constexpr int kMaxComponents = 64;
  constexpr int kMaxDim = 16;
  if (components_ > kMaxComponents || dim_ > kMaxDim) {
    throw InvalidArgument("sampler supports at most 64 components and 16 dimensions");
  }
  double logit[kMaxComponents];
  double grad[kMaxComponents][kMaxDim];
  const std::size_t base = static_cast<std::size_t>(t) * components_;
  double best = -INFINITY;
  for (int k = 0; k < components_; ++k) {
    const double* mu = &means_[(base + k) * dim_];
    const double* prec = &precisions_[(base + k) * dim_ * dim_];
    double diff[kMaxDim];
    for (int i = 0; i < dim_; ++i) diff[i] = z[i] - mu[i];
    double quad = 0.0;
    for (int i = 0; i < dim_; ++i) {
      double row = 0.0;
      for (int j = 0; j < dim_; ++j) row += prec[i * dim_ + j] * diff[j];
      grad[k][i] = row;
      quad += diff[i] * row;
    }
    logit[k] = log_weights[k] + log_norms_[base + k] - 0.5 * quad;
    best = std::max(best, logit[k]);
  }
  double total = 0.0;
  for (int i = 0; i < dim_; ++i) out[i] = 0.0;
  for (int k = 0; k < components_; ++k) {
    const double r = std::exp(logit[k] - best);
    total += r;
    for (int i = 0; i < dim_; ++i) out[i] += r * grad[k][i];
  }
  // eps = -sqrt(1 - abar) * score and score = -sum_k r_k P_k (z - mu_k).
  const double factor = std::sqrt(1.0 - schedule_.abar(t)) / total;
  for (int i = 0; i < dim_; ++i) out[i] *= factor;
}

namespace {

struct WeightCache {
  std::vector<std::pair<std::uint64_t, Vector>> entries;

  const Vector& get(const World& world, const std::string& context,
                    const CondEmbedding& c, std::uint64_t key, Vector& scratch) {
    if (key != 0) {
      for (const auto& [k, w] : entries) {
        if (k == key) return w;
      }
      entries.emplace_back(key, world.log_weights(c, context));
      return entries.back().second;
    }
    scratch = world.log_weights(c, context);
    return scratch;
  }
};

}  // namespace

Vector Sampler::run_chain(ConditionSource& source, const ChainStart& start,
                          Rng& diffusion_rng, Rng& guidance_rng,
                          std::vector<TracePoint>* trace) const {
  const int n = schedule_.steps();
  int t = start.latent ? start.t : n;
  if (t < 0 || t > n) throw InvalidArgument(fmt::format("start step {} outside [0, {}]", t, n));
  Vector z(dim_);
  if (start.latent) {
    if (start.latent->size() != dim_) throw InvalidArgument("latent has wrong dimension");
    z = *start.latent;
  } else {
    for (int i = 0; i < dim_; ++i) z[i] = diffusion_rng.normal();
  }
  if (trace) trace->push_back({t, z});

  WeightCache cache;
  Vector scratch_c;
  Vector scratch_u;
  Vector eps_c(dim_);
  Vector eps_u(dim_);
  for (; t >= 1; --t) {
    const StepCondition step = source.condition_at(t, n, guidance_rng);
    const Vector& wc = cache.get(world_, context_, *step.cond, step.cond_key, scratch_c);
    eps_at(t, z.data(), wc, eps_c.data());
    if (step.alpha != 0.0) {
      const Vector& wu =
          cache.get(world_, context_, *step.uncond, step.uncond_key, scratch_u);
      eps_at(t, z.data(), wu, eps_u.data());
      for (int i = 0; i < dim_; ++i) {
        eps_c[i] = (1.0 + step.alpha) * eps_c[i] - step.alpha * eps_u[i];
      }
    }
    const double b = schedule_.beta(t);
    const double coef = b / std::sqrt(1.0 - schedule_.abar(t));
    const double inv = 1.0 / std::sqrt(1.0 - b);
    const double sigma =
        mode_ == SamplerMode::kAncestral ? std::sqrt(schedule_.sigma2(t)) : 0.0;
    for (int i = 0; i < dim_; ++i) {
      z[i] = (z[i] - coef * eps_c[i]) * inv;
      if (mode_ == SamplerMode::kAncestral) z[i] += sigma * diffusion_rng.normal();
    }
    if (trace) trace->push_back({t - 1, z});
  }
  return z;
}

Vector run_chain(const Schedule& schedule, const World& world,
                 const std::string& context, ConditionSource& source,
                 const ChainStart& start, Rng& diffusion_rng, Rng& guidance_rng,
                 SamplerMode mode) {
  return Sampler(world, schedule, context, mode)
      .run_chain(source, start, diffusion_rng, guidance_rng);
}

void write_trace_csv(std::ostream& out, int chain_id,
                     const std::vector<TracePoint>& trace, bool header) {
  if (trace.empty()) return;
  if (header) {
    out << "chain_id,step";
    for (Eigen::Index i = 0; i < trace.front().z.size(); ++i) out << ",z" << i;
    out << '\n';
  }
  for (const auto& p : trace) {
    out << chain_id << ',' << p.step;
    for (double v : p.z) out << fmt::format(",{:.17g}", v);
    out << '\n';
  }
}

}  // namespace weakguide
