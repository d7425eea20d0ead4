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

#ifndef UPLDP_AUP_HPP_
#define UPLDP_AUP_HPP_

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "upldp/data_gen.hpp"
#include "upldp/estimators.hpp"
#include "upldp/mechanisms.hpp"
#include "upldp/rng.hpp"

namespace upldp {

// Computes the average gradient of one user's items at theta, writing d
// doubles into out. The adaptive optimizer touches user data only through
// this callback, which makes "no access after an early halt" testable.
using UserGradFn =
    std::function<void(const std::vector<double>&, std::size_t, std::span<double>)>;

// Number of optimization stages: ceil(ln ln (m n)), at least 1.
int auto_stage_count(long long n, int m);

// Splits user indices 0..n-1 into k disjoint groups of sizes
// floor(n / 2^(k+1-i)) for i = 1..k-1, with all leftovers in the last
// group, after a uniform shuffle. Requires n >= 2^k so no group is empty.
std::vector<std::vector<int>> partition_users(int n, int k, Rng& rng);

// Neighbor count per gradient at the given radius, self included, so every
// entry is in [1, len]. Non-decreasing in the radius.
std::vector<long long> neighbor_counts(const std::vector<std::vector<double>>& grads,
                                       double radius);

// Average neighbor count at radius tau: ordered near pairs, self pairs
// included, divided by the batch length. Ranges over [1, len]; errors on
// an empty batch.
double concentration_score(const std::vector<std::vector<double>>& grads, double tau);

// Keep probability per gradient from its neighbor count f_i at radius
// 2*tau (self included): 0 below n_batch/2, 1 at or above 2*n_batch/3,
// linear in between. Cutoffs use the nominal batch size. Empty input
// yields an empty result.
std::vector<double> outlier_keep_probs(const std::vector<std::vector<double>>& grads,
                                       double tau, int n_batch);

struct StageParams {
  int n_users = 0;  // population this stage draws from
  int n_batch = 0;  // expected Poisson batch size, <= n_users
  int T = 1;
  double eta = 0.0;
  double tau = 0.0;
  double B = 0.0;
  PrivacyBudget budget;  // whole budget for the stage; the screening half
                         // is reserved inside, callers do not pre-split
  std::optional<double> sigma_override;
};

struct AdapResult {
  std::vector<double> theta_hat;  // average of post-update iterates,
                                  // theta0 if the first step already halted
  int iterations_done = 0;
  bool halted_early = false;
  double effective_noise_std = 0.0;  // per-coordinate std added to the mean
};

// One private optimization stage: Poisson-sample users, screen the batch by
// its concentration score through an AboveThreshold gate (budget eps/2),
// drop outliers probabilistically, and step along the noisy filtered mean.
// A failed screen halts the stage permanently; grad_fn is never called
// again after that.
AdapResult adap_user_priv_sgd(const std::vector<double>& theta0, int n_users,
                              const UserGradFn& grad_fn, const StageParams& params,
                              Rng& rng, const IterateObserver& observer = nullptr);

struct StageSchedule {
  int T = 1;
  double eta = 0.0;
  double tau = 0.0;
};

// Per-stage defaults from the problem size: T_i caps the information-based
// iteration count at t_cap/k, eta_i balances the privacy noise against the
// optimization horizon, tau_i is the high-probability gradient spread.
StageSchedule compute_stage_schedule(int n_stage, int m, int d, double B, double L,
                                     const PrivacyBudget& budget, int t_cap, int k);

struct AupConfig {
  int k = 0;         // stage count; 0 picks auto_stage_count capped so that
                     // 2^k <= n, an explicit value must satisfy n >= 2^k
  int t_cap = 2000;  // total iteration budget across stages
  std::uint64_t seed = 0;
  std::optional<int> T;       // per-stage overrides, applied to every stage
  std::optional<double> eta;
  std::optional<double> tau;
  std::optional<double> sigma;  // replaces the accounted noise multiplier
  IterateObserver observer;     // called with a global step index
};

// Multi-stage driver: shuffle-partition users into k doubling groups, run
// one stage per group with warm starts, and return the last stage's
// iterate average. Each stage runs on disjoint users and therefore gets
// the whole budget; the reported spend is the maximum, not the sum.
FitResult aup_rlhf_fit(const Dataset& data, const PrivacyBudget& budget,
                       const AupConfig& config);

}  // namespace upldp

#endif  // UPLDP_AUP_HPP_
