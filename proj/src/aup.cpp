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

#include "upldp/aup.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace upldp {

int auto_stage_count(long long n, int m) {
  if (n < 1 || m < 1) throw std::invalid_argument("auto_stage_count: n, m must be >= 1");
  const double mn = static_cast<double>(n) * static_cast<double>(m);
  if (mn <= std::exp(1.0)) return 1;
  const double v = std::log(std::log(mn));
  if (v <= 0.0) return 1;
  return std::max(1, static_cast<int>(std::ceil(v)));
}

std::vector<std::vector<int>> partition_users(int n, int k, Rng& rng) {
  if (n < 1) throw std::invalid_argument("partition_users: n must be >= 1");
  if (k < 1) throw std::invalid_argument("partition_users: k must be >= 1");
  if (k >= 31 || n < (1 << k)) {
    throw std::invalid_argument("partition_users: need n >= 2^k");
  }
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  for (int i = n - 1; i >= 1; --i) {
    std::uint64_t j = rng.below(static_cast<std::uint64_t>(i) + 1);
    std::swap(order[i], order[static_cast<int>(j)]);
  }
  std::vector<std::vector<int>> groups(k);
  int used = 0;
  for (int i = 1; i < k; ++i) {
    const int shift = k + 1 - i;
    const int size = shift >= 31 ? 0 : n >> shift;
    groups[i - 1].assign(order.begin() + used, order.begin() + used + size);
    used += size;
  }
  groups[k - 1].assign(order.begin() + used, order.end());
  return groups;
}

std::vector<long long> neighbor_counts(const std::vector<std::vector<double>>& grads,
                                       double radius) {
  const std::size_t len = grads.size();
  std::vector<long long> counts(len, 1);  // self pair
  const double r2 = radius * radius;
  for (std::size_t i = 0; i < len; ++i) {
    const auto& gi = grads[i];
    for (std::size_t j = i + 1; j < len; ++j) {
      const auto& gj = grads[j];
      double dist2 = 0.0;
      for (std::size_t c = 0; c < gi.size(); ++c) {
        const double diff = gi[c] - gj[c];
        dist2 += diff * diff;
      }
      if (dist2 <= r2) {
        ++counts[i];
        ++counts[j];
      }
    }
  }
  return counts;
}

double concentration_score(const std::vector<std::vector<double>>& grads, double tau) {
  if (grads.empty()) throw std::invalid_argument("concentration_score: empty batch");
  const std::vector<long long> counts = neighbor_counts(grads, tau);
  long long near = 0;
  for (long long c : counts) near += c;
  return static_cast<double>(near) / static_cast<double>(grads.size());
}

std::vector<double> outlier_keep_probs(const std::vector<std::vector<double>>& grads,
                                       double tau, int n_batch) {
  if (n_batch < 1) throw std::invalid_argument("outlier_keep_probs: n_batch must be >= 1");
  const std::vector<long long> counts = neighbor_counts(grads, 2.0 * tau);
  const std::size_t len = grads.size();
  const double nb = static_cast<double>(n_batch);
  std::vector<double> probs(len);
  for (std::size_t i = 0; i < len; ++i) {
    const double f = static_cast<double>(counts[i]);
    if (f < nb / 2.0) {
      probs[i] = 0.0;
    } else if (f >= 2.0 * nb / 3.0) {
      probs[i] = 1.0;
    } else {
      probs[i] = (f - nb / 2.0) / (nb / 6.0);
    }
  }
  return probs;
}

AdapResult adap_user_priv_sgd(const std::vector<double>& theta0, int n_users,
                              const UserGradFn& grad_fn, const StageParams& params,
                              Rng& rng, const IterateObserver& observer) {
  if (n_users < 1) throw std::invalid_argument("adap_user_priv_sgd: n_users must be >= 1");
  if (params.n_batch < 1 || params.n_batch > n_users) {
    throw std::invalid_argument("adap_user_priv_sgd: n_batch must be in [1, n_users]");
  }
  if (params.T < 1) throw std::invalid_argument("adap_user_priv_sgd: T must be >= 1");
  if (!(params.eta > 0.0)) throw std::invalid_argument("adap_user_priv_sgd: eta must be > 0");
  if (!(params.tau > 0.0)) throw std::invalid_argument("adap_user_priv_sgd: tau must be > 0");
  if (!(params.B > 0.0)) throw std::invalid_argument("adap_user_priv_sgd: B must be > 0");
  params.budget.validate();

  const std::size_t d = theta0.size();
  const NoisePlan plan =
      privacy_account(params.budget, n_users, params.n_batch, params.T, params.tau);
  const double gstd = params.sigma_override
                          ? 2.0 * params.tau * (*params.sigma_override) /
                                static_cast<double>(params.n_batch)
                          : plan.gaussian_std;

  // Screening gets half the budget; the accountant's per-step constant
  // already reserves that half, so it was fed the whole stage budget above.
  AboveThreshold gate(0.8 * static_cast<double>(params.n_batch),
                      params.budget.epsilon / 2.0, rng);
  const double q =
      static_cast<double>(params.n_batch) / static_cast<double>(n_users);

  std::vector<double> theta = theta0;
  std::vector<double> sum_theta(d, 0.0);
  std::vector<double> mean(d), noise(d);
  std::vector<std::vector<double>> grads;
  std::vector<std::size_t> sampled;
  AdapResult result;
  result.effective_noise_std = gstd;
  if (observer) observer(0, theta);
  for (int t = 1; t <= params.T; ++t) {
    sampled.clear();
    for (int i = 0; i < n_users; ++i) {
      if (rng.bernoulli(q)) sampled.push_back(static_cast<std::size_t>(i));
    }
    grads.resize(sampled.size());
    for (std::size_t j = 0; j < sampled.size(); ++j) {
      grads[j].assign(d, 0.0);
      grad_fn(theta, sampled[j], grads[j]);
    }
    // An empty batch carries no concentration evidence; score it 0 so the
    // gate decides (and almost surely halts).
    const double score = grads.empty() ? 0.0 : concentration_score(grads, params.tau);
    if (!gate.query(score, rng)) {
      result.halted_early = true;
      break;
    }
    const std::vector<double> keep = outlier_keep_probs(grads, params.tau, params.n_batch);
    std::fill(mean.begin(), mean.end(), 0.0);
    int kept = 0;
    for (std::size_t j = 0; j < grads.size(); ++j) {
      if (rng.bernoulli(keep[j])) {
        axpy(1.0, grads[j], mean);
        ++kept;
      }
    }
    if (kept > 0) scale(mean, 1.0 / static_cast<double>(kept));
    gaussian_vector(gstd, rng, noise);
    axpy(1.0, noise, mean);
    axpy(-params.eta, mean, theta);
    project(theta, params.B);
    axpy(1.0, theta, sum_theta);
    ++result.iterations_done;
    if (observer) observer(t, theta);
  }
  if (result.iterations_done > 0) {
    scale(sum_theta, 1.0 / static_cast<double>(result.iterations_done));
    result.theta_hat = std::move(sum_theta);
  } else {
    result.theta_hat = theta0;
  }
  return result;
}

StageSchedule compute_stage_schedule(int n_stage, int m, int d, double B, double L,
                                     const PrivacyBudget& budget, int t_cap, int k) {
  if (n_stage < 1) throw std::invalid_argument("compute_stage_schedule: n_stage must be >= 1");
  if (m < 1 || d < 1) throw std::invalid_argument("compute_stage_schedule: m, d must be >= 1");
  if (t_cap < 1 || k < 1) throw std::invalid_argument("compute_stage_schedule: t_cap, k must be >= 1");
  budget.validate();
  StageSchedule sched;

  const double nd = static_cast<double>(n_stage);
  const double md = static_cast<double>(m);
  const double dd = static_cast<double>(d);
  const double info_T = md * md * nd * nd + md * nd * std::sqrt(dd);
  const double cap = static_cast<double>(std::max(1, t_cap / k));
  sched.T = std::max(1, static_cast<int>(std::min(info_T, cap)));

  const double Td = static_cast<double>(sched.T);
  sched.tau = 4.0 * L * (budget.epsilon + std::log(nd * dd * md * Td / budget.delta)) /
              std::sqrt(md);

  const double log_term = std::log(md * nd * dd / budget.delta);
  const double by_privacy =
      std::sqrt(md) * nd * budget.epsilon / (Td * std::sqrt(dd) * log_term);
  const double by_horizon = 1.0 / std::pow(Td, 0.75);
  const double by_variance = std::sqrt(nd * md) / Td;
  sched.eta = (B / (4.0 * L)) * std::min({by_privacy, by_horizon, by_variance});
  return sched;
}

FitResult aup_rlhf_fit(const Dataset& data, const PrivacyBudget& budget,
                       const AupConfig& config) {
  budget.validate();
  const int n = data.config.n;
  const int m = data.config.m;
  const int d = data.config.d;
  const double B = data.config.B;
  const double L = data.config.L;
  int k = config.k;
  if (k <= 0) {
    k = auto_stage_count(n, m);
    while (k > 1 && (k >= 31 || n < (1 << k))) --k;
  }

  Rng rng(config.seed);
  const std::vector<std::vector<int>> parts = partition_users(n, k, rng);

  FitResult result;
  std::vector<double> theta(d, 0.0);
  result.loss_trajectory.push_back(dataset_mean_loss(data, theta));
  if (config.observer) config.observer(0, theta);
  int global_step = 0;
  for (int i = 0; i < k; ++i) {
    const std::vector<int>& part = parts[i];
    StageRecord record;
    record.n_users = static_cast<int>(part.size());
    StageSchedule sched = compute_stage_schedule(
        static_cast<int>(part.size()), m, d, B, L, budget, config.t_cap, k);
    if (config.T) sched.T = *config.T;
    if (config.eta) sched.eta = *config.eta;
    if (config.tau) sched.tau = *config.tau;

    StageParams params;
    params.n_users = static_cast<int>(part.size());
    params.n_batch = params.n_users;
    params.T = sched.T;
    params.eta = sched.eta;
    params.tau = sched.tau;
    params.B = B;
    params.budget = budget;
    params.sigma_override = config.sigma;

    UserGradFn grad_fn = [&data, &part, d](const std::vector<double>& th,
                                           std::size_t local, std::span<double> out) {
      const UserRecord& user = data.users[static_cast<std::size_t>(part[local])];
      if (!data.kwise()) {
        user_avg_grad(th, user.xs, user.ys, d, out);
      } else {
        user_avg_grad_kwise(th, user.features, user.perms, d, data.config.K, out);
      }
    };
    IterateObserver stage_observer;
    if (config.observer) {
      stage_observer = [&config, global_step](int t, std::span<const double> th) {
        if (t > 0) config.observer(global_step + t, th);
      };
    }
    AdapResult stage = adap_user_priv_sgd(theta, params.n_users, grad_fn, params,
                                          rng, stage_observer);
    global_step += stage.iterations_done;
    theta = stage.theta_hat;

    record.T = params.T;
    record.tau = params.tau;
    record.eta = params.eta;
    record.halted = stage.halted_early;
    record.effective_noise_std = stage.effective_noise_std;
    record.iterations_done = stage.iterations_done;
    result.stages.push_back(record);
    result.halted_early = result.halted_early || stage.halted_early;
    result.iterations_done += stage.iterations_done;
    result.effective_noise_std = stage.effective_noise_std;
    result.loss_trajectory.push_back(dataset_mean_loss(data, theta));
  }
  result.theta_hat = std::move(theta);
  result.epsilon_spent = budget.epsilon;
  result.delta_spent = budget.delta;
  return result;
}

}  // namespace upldp
