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

#ifndef UPLDP_MECHANISMS_HPP_
#define UPLDP_MECHANISMS_HPP_

#include <span>

#include "upldp/rng.hpp"

namespace upldp {

struct PrivacyBudget {
  double epsilon = 1.0;
  double delta = 1e-5;

  void validate() const;  // epsilon > 0, 0 < delta < 1
};

// --- base samplers (thin named wrappers so mechanism code reads as DP ops)

inline double laplace_sample(double scale, Rng& rng) { return rng.laplace(scale); }

inline void gaussian_vector(double std, Rng& rng, std::span<double> out) {
  for (double& v : out) v = std * rng.normal();
}

// --- randomized response on binary labels
//
// A user holding m labels randomizes each one independently, keeping it with
// probability sigmoid(eps/m) (flipping otherwise). Composed over the user's m
// labels this gives the user-level eps guarantee. eps = 0 degenerates to a
// fair coin; eps/m -> inf keeps every label.
int rr_flip(int y, double eps, int m, Rng& rng);

// --- AboveThreshold (sparse vector)
//
// The noisy threshold is drawn once at construction; each query adds fresh
// Laplace noise and compares. The first below-threshold answer halts the
// mechanism permanently; querying a halted instance is a caller bug.
class AboveThreshold {
 public:
  // threshold_hat = threshold - Lap(2/eps); consumes one draw.
  AboveThreshold(double threshold, double eps, Rng& rng);

  // True = query + Lap(4/eps) cleared the noisy threshold. Consumes one draw.
  // Throws std::logic_error if already halted.
  bool query(double value, Rng& rng);

  bool halted() const { return halted_; }

 private:
  double threshold_hat_;
  double eps_;
  bool halted_ = false;
};

// --- accountant
//
// Calibrates the per-iteration Gaussian for T adaptive steps under a total
// (eps, delta) budget: advanced composition with explicit constants
//   eps' = eps / (4 sqrt(2 T ln(2/delta))),   delta' = delta / (2 T),
// undone through Poisson-subsampling amplification (sample rate n_batch/n, so
// the un-subsampled mechanism must satisfy eps_base = eps' * n/n_batch,
// delta_base = delta' * n/n_batch), then the standard Gaussian-mechanism
// multiplier sigma = sqrt(2 ln(1.25/delta_base)) / eps_base. The constant 4
// already includes the half of the budget reserved for the AboveThreshold
// gate in the adaptive algorithm, so callers pass their full budget.
struct NoisePlan {
  double sigma = 0.0;             // noise multiplier per unit sensitivity
  double per_iter_epsilon = 0.0;  // eps'
  double per_iter_delta = 0.0;    // delta'
  double gaussian_std = 0.0;      // (2 tau / n_batch) * sigma, the operative std
  double alg2_literal_std = 0.0;  // sqrt(8 tau^2 log(e^eps T / delta)) * sigma / n_batch
};

// tau is the concentration radius the noisy-mean step will use (sensitivity
// 2 tau / n_batch); pass tau = 1 to read gaussian_std as a per-unit-tau scale.
NoisePlan privacy_account(const PrivacyBudget& budget, long long n, long long n_batch,
                          int T, double tau = 1.0);

// Item-level budget that yields a user-level (eps, delta) guarantee for users
// holding m items, via group privacy: (eps/m, delta * e^{-(eps - eps/m)} / m).
// m = 1 is the identity.
PrivacyBudget group_privacy_budget(const PrivacyBudget& budget, int m);

}  // namespace upldp

#endif  // UPLDP_MECHANISMS_HPP_
