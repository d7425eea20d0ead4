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

#include "upldp/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "json.hpp"

namespace upldp {

namespace {

// Desk-scale defaults; anything serious overrides via FitConfig.
constexpr int kDefaultFullBatchT = 600;
constexpr int kDefaultSgdT = 60;
constexpr int kDefaultUserBatch = 50;
constexpr int kDefaultItemBatch = 500;

int effective_T(const FitConfig& config, int fallback) {
  int T = config.T > 0 ? config.T : fallback;
  return std::min(T, config.max_wall_iters);
}

double full_batch_eta(const FitConfig& config, double L) {
  // The mean-loss Hessian is bounded by L^2/4, so anything below 8/L^2 is
  // stable; 2/L^2 converges fast without ringing.
  return config.eta > 0.0 ? config.eta : 2.0 / (L * L);
}

double sgd_eta(const FitConfig& config, double L) {
  return config.eta > 0.0 ? config.eta : 0.5 / (L * L);
}

int loss_stride(int T) { return std::max(1, T / 32); }

void check_divergence(double loss, double initial_loss, const char* who) {
  double guard = 1000.0 * std::max(1.0, std::abs(initial_loss));
  if (!(loss < guard)) {
    throw std::runtime_error(std::string(who) + ": loss diverged past 1000x initial");
  }
}

double flip_keep_prob(double eps, int m) {
  if (!(eps > 0.0)) throw std::invalid_argument("debiased loss: eps must be > 0");
  if (m < 1) throw std::invalid_argument("debiased loss: m must be >= 1");
  return sigmoid(eps / m);
}

}  // namespace

double debiased_loss(std::span<const double> theta, std::span<const double> x,
                     int y_tilde, double eps, int m) {
  const double s = flip_keep_prob(eps, m);
  const double z = dot(x, theta);
  const double log_p = log_sigmoid(z);
  const double log_1mp = log_sigmoid(-z);
  double raw = y_tilde ? -(s * log_p - (1.0 - s) * log_1mp)
                       : -(s * log_1mp - (1.0 - s) * log_p);
  return raw / (2.0 * s - 1.0);
}

void debiased_grad_accum(std::span<const double> theta, std::span<const double> x,
                         int y_tilde, double eps, int m, std::span<double> out) {
  const double s = flip_keep_prob(eps, m);
  const double p = sigmoid(dot(x, theta));
  // d/dz of the bracketed estimator: -(s + p(1-2s)) for y~=1 and
  // (1-s) + p(2s-1) for y~=0; both reduce to the clean coefficients at s=1.
  double c = y_tilde ? -(s - p * (2.0 * s - 1.0)) : (1.0 - s) + p * (2.0 * s - 1.0);
  axpy(c / (2.0 * s - 1.0), x, out);
}

double dataset_mean_loss(const Dataset& data, std::span<const double> theta) {
  const int d = data.config.d;
  const int m = data.config.m;
  double total = 0.0;
  if (!data.kwise()) {
    for (const auto& user : data.users) {
      for (int j = 0; j < m; ++j) {
        total += btl_loss(theta, std::span<const double>(user.xs).subspan(
                                     static_cast<std::size_t>(j) * d, d),
                          user.ys[j]);
      }
    }
  } else {
    const int K = data.config.K;
    for (const auto& user : data.users) {
      for (int j = 0; j < m; ++j) {
        total += pl_loss(theta,
                         std::span<const double>(user.features)
                             .subspan(static_cast<std::size_t>(j) * K * d,
                                      static_cast<std::size_t>(K) * d),
                         std::span<const int>(user.perms).subspan(static_cast<std::size_t>(j) * K, K),
                         d);
      }
    }
  }
  return total / static_cast<double>(data.item_count());
}

void dataset_mean_grad(const Dataset& data, std::span<const double> theta,
                       std::span<double> out) {
  const int d = data.config.d;
  const int m = data.config.m;
  std::fill(out.begin(), out.end(), 0.0);
  if (!data.kwise()) {
    for (const auto& user : data.users) {
      for (int j = 0; j < m; ++j) {
        btl_grad_accum(theta, std::span<const double>(user.xs).subspan(
                                  static_cast<std::size_t>(j) * d, d),
                       user.ys[j], out);
      }
    }
  } else {
    const int K = data.config.K;
    for (const auto& user : data.users) {
      for (int j = 0; j < m; ++j) {
        pl_grad_accum(theta,
                      std::span<const double>(user.features)
                          .subspan(static_cast<std::size_t>(j) * K * d,
                                   static_cast<std::size_t>(K) * d),
                      std::span<const int>(user.perms).subspan(static_cast<std::size_t>(j) * K, K),
                      d, out);
      }
    }
  }
  scale(out, 1.0 / static_cast<double>(data.item_count()));
}

double dataset_mean_debiased_loss(const Dataset& data,
                                  const std::vector<std::vector<unsigned char>>& flipped,
                                  std::span<const double> theta, double eps) {
  const int d = data.config.d;
  const int m = data.config.m;
  double total = 0.0;
  for (std::size_t i = 0; i < data.users.size(); ++i) {
    const auto& user = data.users[i];
    for (int j = 0; j < m; ++j) {
      total += debiased_loss(theta, std::span<const double>(user.xs).subspan(
                                        static_cast<std::size_t>(j) * d, d),
                             flipped[i][j], eps, m);
    }
  }
  return total / static_cast<double>(data.item_count());
}

void dataset_mean_debiased_grad(const Dataset& data,
                                const std::vector<std::vector<unsigned char>>& flipped,
                                std::span<const double> theta, double eps,
                                std::span<double> out) {
  const int d = data.config.d;
  const int m = data.config.m;
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t i = 0; i < data.users.size(); ++i) {
    const auto& user = data.users[i];
    for (int j = 0; j < m; ++j) {
      debiased_grad_accum(theta, std::span<const double>(user.xs).subspan(
                                     static_cast<std::size_t>(j) * d, d),
                          flipped[i][j], eps, m, out);
    }
  }
  scale(out, 1.0 / static_cast<double>(data.item_count()));
}

namespace {

// Shared full-batch projected GD driver for fit_mle / fit_rr.
FitResult projected_gd(const Dataset& data, const FitConfig& config, int default_T,
                       const char* who,
                       const std::function<double(std::span<const double>)>& loss_fn,
                       const std::function<void(std::span<const double>, std::span<double>)>& grad_fn) {
  const int d = data.config.d;
  const double B = data.config.B;
  const int T = effective_T(config, default_T);
  const double eta = full_batch_eta(config, data.config.L);
  const int stride = loss_stride(T);

  FitResult result;
  std::vector<double> theta(d, 0.0);
  std::vector<double> g(d);
  if (config.observer) config.observer(0, theta);
  const double initial_loss = loss_fn(theta);
  result.loss_trajectory.push_back(initial_loss);
  for (int t = 1; t <= T; ++t) {
    grad_fn(theta, g);
    if (l2_norm(g) < config.grad_tol) break;
    axpy(-eta, g, theta);
    project(theta, B);
    result.iterations_done = t;
    if (config.observer) config.observer(t, theta);
    if (t % stride == 0 || t == T) {
      double loss = loss_fn(theta);
      result.loss_trajectory.push_back(loss);
      check_divergence(loss, initial_loss, who);
    }
  }
  result.theta_hat = std::move(theta);
  return result;
}

}  // namespace

FitResult fit_mle(const Dataset& data, const FitConfig& config) {
  return projected_gd(
      data, config, kDefaultFullBatchT, "fit_mle",
      [&](std::span<const double> th) { return dataset_mean_loss(data, th); },
      [&](std::span<const double> th, std::span<double> out) {
        dataset_mean_grad(data, th, out);
      });
}

FitResult fit_rr(const Dataset& data, const PrivacyBudget& budget, const FitConfig& config) {
  if (data.kwise()) {
    throw std::invalid_argument("fit_rr: randomized response is defined for binary labels");
  }
  budget.validate();
  const int m = data.config.m;
  // One randomization pass; afterwards only the flipped labels are read.
  Rng rng(config.seed);
  std::vector<std::vector<unsigned char>> flipped(data.users.size());
  for (std::size_t i = 0; i < data.users.size(); ++i) {
    flipped[i].resize(m);
    for (int j = 0; j < m; ++j) {
      flipped[i][j] = static_cast<unsigned char>(
          rr_flip(data.users[i].ys[j], budget.epsilon, m, rng));
    }
  }
  FitResult result = projected_gd(
      data, config, kDefaultFullBatchT, "fit_rr",
      [&](std::span<const double> th) {
        return dataset_mean_debiased_loss(data, flipped, th, budget.epsilon);
      },
      [&](std::span<const double> th, std::span<double> out) {
        dataset_mean_debiased_grad(data, flipped, th, budget.epsilon, out);
      });
  result.epsilon_spent = budget.epsilon;
  return result;
}

namespace {

// Per-item gradient into out (overwritten).
void item_grad(const Dataset& data, const UserRecord& user, int j,
               std::span<const double> theta, std::span<double> out) {
  const int d = data.config.d;
  std::fill(out.begin(), out.end(), 0.0);
  if (!data.kwise()) {
    btl_grad_accum(theta, std::span<const double>(user.xs).subspan(
                              static_cast<std::size_t>(j) * d, d),
                   user.ys[j], out);
  } else {
    const int K = data.config.K;
    pl_grad_accum(theta,
                  std::span<const double>(user.features)
                      .subspan(static_cast<std::size_t>(j) * K * d,
                               static_cast<std::size_t>(K) * d),
                  std::span<const int>(user.perms).subspan(static_cast<std::size_t>(j) * K, K),
                  d, out);
  }
}

void clip_to(std::span<double> v, double C) {
  double n = l2_norm(v);
  if (n > C) scale(v, C / n);
}

}  // namespace

FitResult fit_userwise_dpsgd(const Dataset& data, const PrivacyBudget& budget,
                             const FitConfig& config) {
  budget.validate();
  const int n = data.config.n;
  const int d = data.config.d;
  const double B = data.config.B;
  const double L = data.config.L;
  const int T = effective_T(config, kDefaultSgdT);
  const double eta = sgd_eta(config, L);
  const int batch = std::min(config.batch_users > 0 ? config.batch_users : kDefaultUserBatch, n);
  const double C = config.clip > 0.0 ? config.clip : L;
  const double q = static_cast<double>(batch) / static_cast<double>(n);
  const int stride = loss_stride(T);

  NoisePlan plan = privacy_account(budget, n, batch, T);
  const double sigma = config.sigma_override.value_or(plan.sigma);
  const double noise_std = sigma * C / static_cast<double>(batch);

  FitResult result;
  Rng rng(config.seed);
  std::vector<double> theta(d, 0.0);
  std::vector<double> sum_theta(d, 0.0);
  std::vector<double> g(d), tmp(d), noise(d);
  if (config.observer) config.observer(0, theta);
  const double initial_loss = dataset_mean_loss(data, theta);
  result.loss_trajectory.push_back(initial_loss);
  for (int t = 1; t <= T; ++t) {
    std::fill(g.begin(), g.end(), 0.0);
    // Poisson sampling: one Bernoulli per user per step, always in user
    // order, so the draw count is fixed and runs are bit-reproducible.
    for (int i = 0; i < n; ++i) {
      if (!rng.bernoulli(q)) continue;
      const auto& user = data.users[i];
      if (!data.kwise()) {
        user_avg_grad(theta, user.xs, user.ys, d, tmp);
      } else {
        user_avg_grad_kwise(theta, user.features, user.perms, d, data.config.K, tmp);
      }
      clip_to(tmp, C);
      axpy(1.0, tmp, g);
    }
    scale(g, 1.0 / static_cast<double>(batch));
    gaussian_vector(noise_std, rng, noise);
    axpy(1.0, noise, g);
    axpy(-eta, g, theta);
    project(theta, B);
    axpy(1.0, theta, sum_theta);
    result.iterations_done = t;
    if (config.observer) config.observer(t, theta);
    if (t % stride == 0 || t == T) {
      result.loss_trajectory.push_back(dataset_mean_loss(data, theta));
    }
  }
  scale(sum_theta, 1.0 / static_cast<double>(T));
  result.theta_hat = std::move(sum_theta);
  result.effective_noise_std = noise_std;
  result.epsilon_spent = budget.epsilon;
  result.delta_spent = budget.delta;
  return result;
}

FitResult fit_group_privacy(const Dataset& data, const PrivacyBudget& budget,
                            const FitConfig& config) {
  budget.validate();
  const int n = data.config.n;
  const int m = data.config.m;
  const int d = data.config.d;
  const double B = data.config.B;
  const double L = data.config.L;
  const long long n_items = data.item_count();
  const int T = effective_T(config, kDefaultSgdT);
  const double eta = sgd_eta(config, L);
  const long long batch_items =
      std::min<long long>(config.batch_users > 0
                              ? static_cast<long long>(config.batch_users) * m
                              : kDefaultItemBatch,
                          n_items);
  const double C = config.clip > 0.0 ? config.clip : L;
  const double q = static_cast<double>(batch_items) / static_cast<double>(n_items);
  const int stride = loss_stride(T);

  const PrivacyBudget item_budget = group_privacy_budget(budget, m);
  NoisePlan plan = privacy_account(item_budget, n_items, batch_items, T);
  const double sigma = config.sigma_override.value_or(plan.sigma);
  const double noise_std = sigma * C / static_cast<double>(batch_items);

  FitResult result;
  Rng rng(config.seed);
  std::vector<double> theta(d, 0.0);
  std::vector<double> sum_theta(d, 0.0);
  std::vector<double> g(d), tmp(d), noise(d);
  if (config.observer) config.observer(0, theta);
  result.loss_trajectory.push_back(dataset_mean_loss(data, theta));
  for (int t = 1; t <= T; ++t) {
    std::fill(g.begin(), g.end(), 0.0);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < m; ++j) {
        if (!rng.bernoulli(q)) continue;
        item_grad(data, data.users[i], j, theta, tmp);
        clip_to(tmp, C);
        axpy(1.0, tmp, g);
      }
    }
    scale(g, 1.0 / static_cast<double>(batch_items));
    gaussian_vector(noise_std, rng, noise);
    axpy(1.0, noise, g);
    axpy(-eta, g, theta);
    project(theta, B);
    axpy(1.0, theta, sum_theta);
    result.iterations_done = t;
    if (config.observer) config.observer(t, theta);
    if (t % stride == 0 || t == T) {
      result.loss_trajectory.push_back(dataset_mean_loss(data, theta));
    }
  }
  scale(sum_theta, 1.0 / static_cast<double>(T));
  result.theta_hat = std::move(sum_theta);
  result.effective_noise_std = noise_std;
  result.epsilon_spent = budget.epsilon;
  result.delta_spent = budget.delta;
  return result;
}

std::string fit_result_to_json(const FitResult& result) {
  nlohmann::json root;
  root["theta_hat"] = result.theta_hat;
  root["iterations_done"] = result.iterations_done;
  root["halted_early"] = result.halted_early;
  root["effective_noise_std"] = result.effective_noise_std;
  root["loss_trajectory"] = result.loss_trajectory;
  if (!result.stages.empty()) {
    nlohmann::json stages = nlohmann::json::array();
    for (const auto& s : result.stages) {
      stages.push_back({{"n_users", s.n_users},
                        {"T", s.T},
                        {"tau", s.tau},
                        {"eta", s.eta},
                        {"halted", s.halted},
                        {"effective_noise_std", s.effective_noise_std},
                        {"iterations_done", s.iterations_done}});
    }
    root["stages"] = std::move(stages);
    root["epsilon_spent"] = result.epsilon_spent;
    root["delta_spent"] = result.delta_spent;
  }
  return root.dump();
}

}  // namespace upldp
