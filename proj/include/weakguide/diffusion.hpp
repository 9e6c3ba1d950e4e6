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

#ifndef WEAKGUIDE_DIFFUSION_HPP_
#define WEAKGUIDE_DIFFUSION_HPP_

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "weakguide/codec.hpp"
#include "weakguide/rng.hpp"
#include "weakguide/types.hpp"
#include "weakguide/world.hpp"

namespace weakguide {

class Schedule {
 public:
  // betas[t - 1] for t = 1..N.
  explicit Schedule(std::vector<double> betas);
  // Linear betas from 1e-4 * 1000 / N to 0.02 * 1000 / N.
  static Schedule linear(int steps);

  int steps() const { return static_cast<int>(betas_.size()); }
  double beta(int t) const { return betas_.at(t - 1); }
  // abar(0) = 1.
  double abar(int t) const { return abar_.at(t); }
  // Variance of the ancestral noise at step t.
  double sigma2(int t) const;
  std::string hash() const;

 private:
  std::vector<double> betas_;
  std::vector<double> abar_;
};

// z_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) xi.
Vector forward_noise(const Vector& x0, int t, const Schedule& schedule, Rng& rng);

// (1 + alpha) eps_c - alpha eps_u.
Vector cfg_combine(const Vector& eps_c, const Vector& eps_u, double alpha);

enum class SamplerMode { kAncestral, kDeterministic };

struct ChainState {
  Vector z;
  int t = 0;
};

ChainState reverse_step(const Schedule& schedule, const ChainState& state,
                        const Vector& eps, SamplerMode mode, Rng& rng);

// Conditions used by the denoiser at one reverse step. Pointers stay valid
// until the next call on the same source. Equal nonzero keys promise equal
// embeddings within one chain, so the sampler may reuse mixture weights.
struct StepCondition {
  const CondEmbedding* cond = nullptr;
  std::uint64_t cond_key = 0;
  const CondEmbedding* uncond = nullptr;
  std::uint64_t uncond_key = 0;
  double alpha = 0.0;
};

class ConditionSource {
 public:
  virtual ~ConditionSource() = default;
  // t counts down from `steps` to 1.
  virtual StepCondition condition_at(int t, int steps, Rng& rng) = 0;
};

struct ChainStart {
  std::optional<Vector> latent;
  int t = -1;

  static ChainStart fresh() { return {}; }
  static ChainStart from_latent(Vector z, int t) { return {std::move(z), t}; }
};

struct TracePoint {
  int step = 0;
  Vector z;
};

// Exact-score sampler for one context, with the diffused components of every
// step precomputed.
class Sampler {
 public:
  Sampler(const World& world, const Schedule& schedule, std::string context,
          SamplerMode mode = SamplerMode::kAncestral);

  const Schedule& schedule() const { return schedule_; }
  const std::string& context() const { return context_; }

  Vector run_chain(ConditionSource& source, const ChainStart& start,
                   Rng& diffusion_rng, Rng& guidance_rng,
                   std::vector<TracePoint>* trace = nullptr) const;

  // eps of the diffused mixture at step t with normalized log weights.
  void eps_at(int t, const double* z, const Vector& log_weights, double* out) const;

 private:
  const World& world_;
  Schedule schedule_;
  std::string context_;
  SamplerMode mode_;
  int dim_ = 0;
  int components_ = 0;
  // Per step and component: mean (D), precision (D x D), log normalizer.
  std::vector<double> means_;
  std::vector<double> precisions_;
  std::vector<double> log_norms_;
};

Vector run_chain(const Schedule& schedule, const World& world,
                 const std::string& context, ConditionSource& source,
                 const ChainStart& start, Rng& diffusion_rng, Rng& guidance_rng,
                 SamplerMode mode = SamplerMode::kAncestral);

// Rows of (chain_id, step, z_0, z_1, ...).
void write_trace_csv(std::ostream& out, int chain_id,
                     const std::vector<TracePoint>& trace, bool header);

}  // namespace weakguide

#endif  // WEAKGUIDE_DIFFUSION_HPP_
