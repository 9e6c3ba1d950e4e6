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

#ifndef WEAKGUIDE_RNG_HPP_
#define WEAKGUIDE_RNG_HPP_

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>

namespace weakguide {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  return splitmix64(a ^ splitmix64(b));
}

// FNV-1a, used to seed token embeddings and to fingerprint configs.
inline std::uint64_t fnv1a(std::string_view bytes,
                           std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Independent purposes a single chain draws randomness for. Keeping them on
// separate streams means e.g. a Weak driver's attribute draw does not shift
// the diffusion noise of the same chain.
enum class Stream : std::uint64_t {
  kDiffusion = 1,
  kGuidance = 2,
  kOracle = 3,
  kForward = 4,
  kAuxiliary = 5,
};

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

  // Stream for (master seed, chain index, purpose). Chains are therefore
  // reproducible one by one and independent of scheduling order.
  static Rng for_chain(std::uint64_t master, std::uint64_t chain,
                       Stream stream) {
    return Rng(mix_seed(mix_seed(master, chain),
                        static_cast<std::uint64_t>(stream)));
  }

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  std::size_t index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }
  std::uint64_t bits() { return engine_(); }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
  std::uniform_real_distribution<double> uniform_;
};

}  // namespace weakguide

#endif  // WEAKGUIDE_RNG_HPP_
