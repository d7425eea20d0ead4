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

#include "upldp/mechanisms.hpp"

#include <cmath>
#include <stdexcept>

#include "upldp/model.hpp"

namespace upldp {

void PrivacyBudget::validate() const {
  if (!(epsilon > 0.0)) throw std::invalid_argument("PrivacyBudget: epsilon must be > 0");
  if (!(delta > 0.0 && delta < 1.0)) {
    throw std::invalid_argument("PrivacyBudget: delta must be in (0, 1)");
  }
}

int rr_flip(int y, double eps, int m, Rng& rng) {
  if (eps < 0.0) throw std::invalid_argument("rr_flip: eps must be >= 0");
  if (m < 1) throw std::invalid_argument("rr_flip: m must be >= 1");
  if (y != 0 && y != 1) throw std::invalid_argument("rr_flip: y must be 0/1");
  bool keep = rng.bernoulli(sigmoid(eps / m));
  return keep ? y : 1 - y;
}

AboveThreshold::AboveThreshold(double threshold, double eps, Rng& rng) : eps_(eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("AboveThreshold: eps must be > 0");
  threshold_hat_ = threshold - laplace_sample(2.0 / eps, rng);
}

bool AboveThreshold::query(double value, Rng& rng) {
  if (halted_) throw std::logic_error("AboveThreshold: query after halt");
  bool above = value + laplace_sample(4.0 / eps_, rng) >= threshold_hat_;
  if (!above) halted_ = true;
  return above;
}

NoisePlan privacy_account(const PrivacyBudget& budget, long long n, long long n_batch,
                          int T, double tau) {
  budget.validate();
  if (n < 1 || n_batch < 1 || n_batch > n) {
    throw std::invalid_argument("privacy_account: need 1 <= n_batch <= n");
  }
  if (T < 1) throw std::invalid_argument("privacy_account: T must be >= 1");
  if (!(tau > 0.0)) throw std::invalid_argument("privacy_account: tau must be > 0");

  NoisePlan plan;
  plan.per_iter_epsilon = budget.epsilon / (4.0 * std::sqrt(2.0 * T * std::log(2.0 / budget.delta)));
  plan.per_iter_delta = budget.delta / (2.0 * T);
  const double ratio = static_cast<double>(n) / static_cast<double>(n_batch);
  const double eps_base = plan.per_iter_epsilon * ratio;
  const double delta_base = plan.per_iter_delta * ratio;
  if (!(delta_base < 1.0)) {
    throw std::invalid_argument("privacy_account: un-subsampled delta exceeds 1");
  }
  plan.sigma = std::sqrt(2.0 * std::log(1.25 / delta_base)) / eps_base;
  plan.gaussian_std = 2.0 * tau * plan.sigma / static_cast<double>(n_batch);
  // log(e^eps * T / delta) = eps + log(T / delta), kept in this form so large
  // eps cannot overflow the exp.
  plan.alg2_literal_std =
      std::sqrt(8.0 * tau * tau * (budget.epsilon + std::log(static_cast<double>(T) / budget.delta))) *
      plan.sigma / static_cast<double>(n_batch);
  return plan;
}

PrivacyBudget group_privacy_budget(const PrivacyBudget& budget, int m) {
  budget.validate();
  if (m < 1) throw std::invalid_argument("group_privacy_budget: m must be >= 1");
  PrivacyBudget out;
  out.epsilon = budget.epsilon / m;
  out.delta = budget.delta * std::exp(-(budget.epsilon - out.epsilon)) / m;
  return out;
}

}  // namespace upldp
