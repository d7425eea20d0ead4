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

#include "upldp/model.hpp"

#include <algorithm>
#include <stdexcept>

namespace upldp {

void ModelConfig::validate() const {
  if (d < 2) throw std::invalid_argument("ModelConfig: d must be >= 2");
  if (!(B > 0.0)) throw std::invalid_argument("ModelConfig: B must be > 0");
  if (!(L > 0.0)) throw std::invalid_argument("ModelConfig: L must be > 0");
  if (K < 2) throw std::invalid_argument("ModelConfig: K must be >= 2");
}

double pl_loss(std::span<const double> theta, std::span<const double> features,
               std::span<const int> perm, int d) {
  const int K = static_cast<int>(perm.size());
  // Rewards in ranked order.
  double r[64];
  std::vector<double> r_heap;
  double* rr = r;
  if (K > 64) {
    r_heap.resize(K);
    rr = r_heap.data();
  }
  for (int j = 0; j < K; ++j) {
    rr[j] = dot(theta, features.subspan(static_cast<std::size_t>(perm[j]) * d, d));
  }
  // Suffix log-sum-exp built back to front: lse_j = log sum_{j' >= j} exp(r_j').
  // loss = sum_j (lse_j - r_j); the j = K-1 term is zero by construction.
  double loss = 0.0;
  double lse = rr[K - 1];
  for (int j = K - 2; j >= 0; --j) {
    double hi = std::max(rr[j], lse);
    lse = hi + std::log(std::exp(rr[j] - hi) + std::exp(lse - hi));
    loss += lse - rr[j];
  }
  return loss;
}

void pl_grad_accum(std::span<const double> theta, std::span<const double> features,
                   std::span<const int> perm, int d, std::span<double> out) {
  const int K = static_cast<int>(perm.size());
  std::vector<double> r(K);
  for (int j = 0; j < K; ++j) {
    r[j] = dot(theta, features.subspan(static_cast<std::size_t>(perm[j]) * d, d));
  }
  // For each prefix position j, the gradient contribution is the softmax
  // average of the suffix features minus the chosen feature:
  //   sum_{j' >= j} w_{j'} phi_{perm[j']} - phi_{perm[j]},
  // with w the softmax of suffix rewards. Work front to back, keeping the
  // suffix weights via one pass per j (K is small; O(K^2) is fine).
  for (int j = 0; j < K - 1; ++j) {
    double hi = r[j];
    for (int j2 = j + 1; j2 < K; ++j2) hi = std::max(hi, r[j2]);
    double z = 0.0;
    for (int j2 = j; j2 < K; ++j2) z += std::exp(r[j2] - hi);
    for (int j2 = j; j2 < K; ++j2) {
      double w = std::exp(r[j2] - hi) / z;
      axpy(w, features.subspan(static_cast<std::size_t>(perm[j2]) * d, d), out);
    }
    axpy(-1.0, features.subspan(static_cast<std::size_t>(perm[j]) * d, d), out);
  }
}

void project(std::span<double> theta, double B) {
  double mean = 0.0;
  for (double v : theta) mean += v;
  mean /= static_cast<double>(theta.size());
  for (double& v : theta) v -= mean;
  double n = l2_norm(theta);
  if (n > B) scale(theta, B / n);
}

void user_avg_grad(std::span<const double> theta, std::span<const double> xs,
                   std::span<const unsigned char> ys, int d, std::span<double> out) {
  const std::size_t m = ys.size();
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t j = 0; j < m; ++j) {
    btl_grad_accum(theta, xs.subspan(j * d, d), ys[j], out);
  }
  scale(out, 1.0 / static_cast<double>(m));
}

void user_avg_grad_kwise(std::span<const double> theta, std::span<const double> features,
                         std::span<const int> perms, int d, int K, std::span<double> out) {
  const std::size_t m = perms.size() / K;
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t j = 0; j < m; ++j) {
    pl_grad_accum(theta, features.subspan(j * K * d, static_cast<std::size_t>(K) * d),
                  perms.subspan(j * K, K), d, out);
  }
  scale(out, 1.0 / static_cast<double>(m));
}

}  // namespace upldp
