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

#ifndef UPLDP_ESTIMATORS_HPP_
#define UPLDP_ESTIMATORS_HPP_

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "upldp/data_gen.hpp"
#include "upldp/mechanisms.hpp"
#include "upldp/model.hpp"

namespace upldp {

// Test/diagnostic hook: called with (0, theta0) before the first step and
// (t, theta_t) after each completed update. Not serialized.
using IterateObserver = std::function<void(int, std::span<const double>)>;

struct FitConfig {
  int T = 0;             // iteration budget; 0 = estimator default
  double eta = 0.0;      // step size; 0 = estimator default
  int batch_users = 0;   // expected Poisson batch (users); 0 = estimator default
  double clip = 0.0;     // per-user/item gradient clip; 0 = default C = L
  std::uint64_t seed = 0;
  int max_wall_iters = 200000;  // safety cap on T
  double grad_tol = 1e-8;       // full-batch fits stop below this gradient norm

  // Testing only: overrides the accountant's noise multiplier (0 disables
  // Gaussian noise entirely). Never set on real private runs.
  std::optional<double> sigma_override;
  IterateObserver observer;
};

// Per-stage diagnostics for the adaptive multi-stage estimator.
struct StageRecord {
  int n_users = 0;
  int T = 0;
  double tau = 0.0;
  double eta = 0.0;
  bool halted = false;
  double effective_noise_std = 0.0;
  int iterations_done = 0;
};

struct FitResult {
  std::vector<double> theta_hat;
  int iterations_done = 0;
  bool halted_early = false;
  // Mean per-coordinate Gaussian std actually injected over completed steps
  // (0 for noise-free fits, and when no step completed).
  double effective_noise_std = 0.0;
  // Full-data mean loss sampled on a fixed stride (diagnostic only).
  std::vector<double> loss_trajectory;

  // Populated by the adaptive estimator only.
  std::vector<StageRecord> stages;
  double epsilon_spent = 0.0;
  double delta_spent = 0.0;
};

std::string fit_result_to_json(const FitResult& result);

// --- de-biased randomized-response loss
//
// Labels arrive flipped: y_tilde = y with probability s = sigmoid(eps/m).
// The per-item estimator
//   [ 1(y~=1) (s log p - (1-s) log(1-p)) + 1(y~=0) (s log(1-p) - (1-s) log p) ]
//     * (-1) / (2s - 1),      p = sigmoid(<x, theta>),
// satisfies E_flip[loss | y] = clean btl_loss(theta; x, y) exactly: the
// bracket alone has expectation (2s-1) * btl_loss, and the 1/(2s-1) factor
// (the classic unbiased label-noise correction) removes it. The normalizer
// leaves the argmin unchanged and -> 1 as eps/m -> inf. Requires eps > 0.
double debiased_loss(std::span<const double> theta, std::span<const double> x,
                     int y_tilde, double eps, int m);

// Adds the per-item gradient of debiased_loss into out.
void debiased_grad_accum(std::span<const double> theta, std::span<const double> x,
                         int y_tilde, double eps, int m, std::span<double> out);

// --- whole-dataset loss/gradient helpers (means over all nm items)

double dataset_mean_loss(const Dataset& data, std::span<const double> theta);
void dataset_mean_grad(const Dataset& data, std::span<const double> theta,
                       std::span<double> out);
double dataset_mean_debiased_loss(const Dataset& data,
                                  const std::vector<std::vector<unsigned char>>& flipped,
                                  std::span<const double> theta, double eps);
void dataset_mean_debiased_grad(const Dataset& data,
                                const std::vector<std::vector<unsigned char>>& flipped,
                                std::span<const double> theta, double eps,
                                std::span<double> out);

// --- estimators
//
// All fits start from theta0 = 0 and project every iterate onto Theta_B.

// Non-private reference: full-batch projected gradient descent on the mean
// loss; returns the last iterate. Stops early below grad_tol. Throws if the
// sampled loss exceeds 1000x the initial loss (divergence guard).
FitResult fit_mle(const Dataset& data, const FitConfig& config);

// User-level randomized response: flips every label once up front (the flip
// pass is the only access to the true labels), then runs full-batch projected
// GD on the de-biased loss. Deterministic given config.seed. Pairwise only.
FitResult fit_rr(const Dataset& data, const PrivacyBudget& budget, const FitConfig& config);

// User-wise DP-SGD baseline: per step, Poisson-samples users at rate
// batch/n, averages each sampled user's per-user gradient, clips it to C,
// takes the mean over the nominal batch size, and adds per-coordinate
// Gaussian noise sigma*C/batch with sigma from the accountant on the full
// budget. Returns the average of the T post-update iterates.
FitResult fit_userwise_dpsgd(const Dataset& data, const PrivacyBudget& budget,
                             const FitConfig& config);

// Item-level DP-SGD run at the group-privacy budget (eps/m, ...) so the
// user-level guarantee still holds for users owning m items. Poisson-samples
// items; batch_users is interpreted as users, i.e. the item batch is
// batch_users * m (default min(500, nm) items). Returns the iterate average.
FitResult fit_group_privacy(const Dataset& data, const PrivacyBudget& budget,
                            const FitConfig& config);

}  // namespace upldp

#endif  // UPLDP_ESTIMATORS_HPP_
