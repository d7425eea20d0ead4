// Copyright 2025 The upldp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef UPLDP_RNG_HPP_
#define UPLDP_RNG_HPP_

#include <bit>
#include <cmath>
#include <cstdint>
#include <random>

namespace upldp {

// All randomness in the library flows through this wrapper rather than the
// std <random> distributions: the standard distributions are
// implementation-defined (draw counts and outputs vary across stdlibs), which
// would break the bit-reproducibility guarantees (same seed => same dataset
// bytes, same fit trajectory, same bench CSV at any thread count). Every
// sampler below consumes a fixed, documented number of engine draws.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1), 53-bit resolution. One engine draw.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // One engine draw.
  bool bernoulli(double p) { return uniform() < p; }

  // Laplace(scale) via inverse CDF on a single uniform, as required for the
  // reproducibility contract. One engine draw.
  double laplace(double scale) {
    double t = uniform() - 0.5;  // [-0.5, 0.5)
    // Clamp the log argument away from 0 so the tail stays finite.
    double a = 1.0 - 2.0 * std::abs(t);
    if (a < 0x1.0p-53) a = 0x1.0p-53;
    double s = (t < 0.0) ? -1.0 : 1.0;
    return -scale * s * std::log(a);
  }

  // Standard normal via the trigonometric Box-Muller transform. Pairs are
  // generated eagerly and cached, so consumption is exactly two engine draws
  // per two variates regardless of call pattern.
  double normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 0x1.0p-53) u1 = 0x1.0p-53;
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;  // 2*pi*u2
    cached_ = r * std::sin(a);
    have_cached_ = true;
    return r * std::cos(a);
  }

  double normal(double mean, double std) { return mean + std * normal(); }

  // Uniform integer in [0, bound) by rejection; used for shuffles.
  std::uint64_t below(std::uint64_t bound) {
    // Rejection keeps the distribution exact; the expected draw count is < 2.
    std::uint64_t threshold = (~bound + 1) % bound;  // 2^64 mod bound
    for (;;) {
      std::uint64_t r = engine_();
      if (r >= threshold) return r % bound;
    }
  }

 private:
  std::mt19937_64 engine_;
  bool have_cached_ = false;
  double cached_ = 0.0;
};

// splitmix64 step; the de-facto standard 64-bit mixer.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Order-sensitive stable hash used to derive per-cell / per-rep seeds. Stable
// across platforms and thread counts by construction (pure integer mixing).
inline std::uint64_t stable_hash(std::uint64_t h) { return mix64(h); }

template <typename... Rest>
inline std::uint64_t stable_hash(std::uint64_t h, std::uint64_t v, Rest... rest) {
  return stable_hash(mix64(h ^ mix64(v)), rest...);
}

inline std::uint64_t hash_double(double v) {
  return std::bit_cast<std::uint64_t>(v);
}

}  // namespace upldp

#endif  // UPLDP_RNG_HPP_
