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

#ifndef UPLDP_MODEL_HPP_
#define UPLDP_MODEL_HPP_

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace upldp {

// Linear reward model over pairwise (Bradley-Terry) and K-wise
// (Plackett-Luce) comparisons. Parameters live in
//   Theta_B = { theta : <1, theta> = 0, ||theta||_2 <= B },
// pairwise features are differences x = phi(s,a1) - phi(s,a0) with
// ||x||_2 <= L, and P[y = 1 | x] = sigmoid(<x, theta>).
struct ModelConfig {
  int d = 0;       // parameter dimension, >= 2 (the centering constraint kills d = 1)
  double B = 1.0;  // parameter norm bound, > 0
  double L = 1.0;  // feature norm bound, > 0
  int K = 2;       // comparison arity; 2 = pairwise, >= 3 = K-wise lists

  // Throws std::invalid_argument on out-of-range fields.
  void validate() const;
};

// --- small dense-vector helpers (d stays tiny; plain loops beat a matrix
// --- library here and keep the reduction order fixed for reproducibility)

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double l2_norm(std::span<const double> a) {
  return std::sqrt(dot(a, a));
}

inline void scale(std::span<double> a, double c) {
  for (double& v : a) v *= c;
}

inline void axpy(double c, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += c * x[i];
}

// --- stable logistic primitives

// Never evaluates exp on a positive argument, so it cannot overflow.
inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  double e = std::exp(z);
  return e / (1.0 + e);
}

// log(sigmoid(z)) in branch form; accurate in both tails.
inline double log_sigmoid(double z) {
  if (z >= 0.0) return -std::log1p(std::exp(-z));
  return z - std::log1p(std::exp(z));
}

// P[y = 1 | x] under theta.
inline double btl_prob(std::span<const double> theta, std::span<const double> x) {
  return sigmoid(dot(x, theta));
}

// Negative log-likelihood of one comparison. Convention: smaller is better;
// log(1 - sigmoid(z)) = log_sigmoid(-z) keeps the y = 0 branch stable.
inline double btl_loss(std::span<const double> theta, std::span<const double> x, int y) {
  double z = dot(x, theta);
  return y ? -log_sigmoid(z) : -log_sigmoid(-z);
}

// Adds the single-item gradient (sigmoid(<x,theta>) - y) * x into out.
// ||gradient|| <= ||x|| <= L since |sigmoid - y| <= 1.
inline void btl_grad_accum(std::span<const double> theta, std::span<const double> x,
                           int y, std::span<double> out) {
  double c = sigmoid(dot(x, theta)) - static_cast<double>(y);
  axpy(c, x, out);
}

// --- K-wise Plackett-Luce
//
// features: K*d flat row-major (feature vector of action k at features[k*d..]).
// perm: length K; perm[j] is the action index ranked j-th (best first).
// Loss = -sum_j log( exp(r_{perm[j]}) / sum_{j' >= j} exp(r_{perm[j']}) ),
// evaluated with a running log-sum-exp over suffixes for stability.
// For K = 2 this reduces exactly to btl_loss with x = phi_first - phi_second
// and y = 1; at theta = 0 the loss is log(K!).
double pl_loss(std::span<const double> theta, std::span<const double> features,
               std::span<const int> perm, int d);

// Adds the gradient of pl_loss into out (length d).
void pl_grad_accum(std::span<const double> theta, std::span<const double> features,
                   std::span<const int> perm, int d, std::span<double> out);

// --- projection onto Theta_B
//
// Exact Euclidean projection: subtract the coordinate mean (projection onto
// the hyperplane <1, theta> = 0), then rescale onto the ball of radius B if
// needed. The two steps commute into the exact projection because the
// hyperplane passes through the origin.
void project(std::span<double> theta, double B);

// --- per-user averaged gradients (the user-level DP unit of work)

// Pairwise: xs is m*d flat, ys has m entries in {0,1}. out (length d) is
// overwritten with (1/m) sum_j grad_j; by convexity of the norm the result
// has ||.|| <= L.
void user_avg_grad(std::span<const double> theta, std::span<const double> xs,
                   std::span<const unsigned char> ys, int d, std::span<double> out);

// K-wise: features is m*K*d flat, perms is m*K flat.
void user_avg_grad_kwise(std::span<const double> theta, std::span<const double> features,
                         std::span<const int> perms, int d, int K, std::span<double> out);

}  // namespace upldp

#endif  // UPLDP_MODEL_HPP_
