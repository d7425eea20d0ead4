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

#ifndef UPLDP_DATA_GEN_HPP_
#define UPLDP_DATA_GEN_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "upldp/model.hpp"
#include "upldp/rng.hpp"

namespace upldp {

struct GenConfig {
  int n = 0;  // users
  int m = 0;  // comparisons per user (identical across users by construction)
  int d = 0;
  double B = 1.0;
  double L = 1.0;
  int K = 2;  // 2 = pairwise items; >= 3 = ranked K-wise items
  std::uint64_t seed = 0;

  void validate() const;
  ModelConfig model() const { return ModelConfig{d, B, L, K}; }
};

// One user's m comparisons, stored flat for cache friendliness.
// Pairwise mode fills xs/ys; K-wise mode fills features/perms.
struct UserRecord {
  std::vector<double> xs;          // m*d, item j at xs[j*d .. j*d+d)
  std::vector<unsigned char> ys;   // m labels in {0,1}
  std::vector<double> features;    // m*K*d
  std::vector<int> perms;          // m*K; perm[j*K + r] = action ranked r-th of item j
};

struct Dataset {
  GenConfig config;
  std::vector<double> theta_star;  // ground truth used by the benchmark harness
  std::vector<UserRecord> users;

  bool kwise() const { return config.K >= 3; }
  long long item_count() const {
    return static_cast<long long>(config.n) * config.m;
  }
};

// theta* = B * u with u uniform on the unit sphere of the centered subspace
// { v : <1, v> = 0 }; requires d >= 2. Consumes d normals per attempt.
std::vector<double> sample_theta_star(int d, double B, Rng& rng);

// x uniform on the radius-L sphere (so E[x x^T] = (L^2/d) I). Writes d values.
void sample_feature(int d, double L, Rng& rng, std::span<double> out);

// y ~ Bernoulli(sigmoid(<x, theta>)). One uniform.
int sample_label(std::span<const double> theta, std::span<const double> x, Rng& rng);

// Sequential choice without replacement with softmax(reward) weights over the
// remaining actions; fills perm (length K) with action indices, best first.
// Consumes exactly K-1 uniforms. At theta = 0 the ranking is uniform over K!.
void sample_ranking(std::span<const double> theta, std::span<const double> features,
                    int d, int K, Rng& rng, std::span<int> perm);

// Draws theta*, then users in order; within a user, items in order (features
// before label/ranking). Identical config (incl. seed) gives an identical
// Dataset, and therefore identical serialized bytes.
Dataset generate(const GenConfig& config);

// lambda_min of the empirical second-moment matrix (1/nm) sum x x^T, computed
// with a deterministic cyclic Jacobi sweep (off-diagonal tolerance 1e-10).
// Pairwise datasets only; requires nm >= d.
double coverage_check(const Dataset& data);

// Symmetric eigen-spectrum helper used by coverage_check; exposed for tests.
// a is d*d row-major and symmetric; returns eigenvalues in ascending order.
std::vector<double> jacobi_eigenvalues(std::vector<double> a, int d);

// --- serialization (schema version "upldp-1")

std::string dataset_to_json(const Dataset& data);
Dataset dataset_from_json(const std::string& text);
void save_dataset(const Dataset& data, const std::string& path);
Dataset load_dataset(const std::string& path);

}  // namespace upldp

#endif  // UPLDP_DATA_GEN_HPP_
