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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "upldp/model.hpp"
#include "upldp/rng.hpp"

using namespace upldp;

namespace {

std::vector<double> random_vector(int d, double max_norm, Rng& rng) {
  std::vector<double> v(d);
  for (double& c : v) c = rng.uniform() * 2.0 - 1.0;
  double n = l2_norm(v);
  if (n > 0.0) scale(v, max_norm * rng.uniform() / n);
  return v;
}

}  // namespace

TEST_CASE("model config validation") {
  ModelConfig config{5, 1.0, 1.0, 2};
  CHECK_NOTHROW(config.validate());
  CHECK_THROWS_AS((ModelConfig{1, 1.0, 1.0, 2}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((ModelConfig{5, 0.0, 1.0, 2}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((ModelConfig{5, 1.0, -1.0, 2}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((ModelConfig{5, 1.0, 1.0, 1}.validate()), std::invalid_argument);
}

TEST_CASE("sigmoid closed forms and stability") {
  CHECK(sigmoid(0.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(sigmoid(std::log(3.0)) == doctest::Approx(0.75).epsilon(1e-14));
  CHECK(sigmoid(-1.2) == doctest::Approx(1.0 - sigmoid(1.2)).epsilon(1e-14));
  // Saturation without overflow far outside the exp range.
  CHECK(sigmoid(800.0) == 1.0);
  CHECK(sigmoid(-800.0) == 0.0);
  CHECK(std::isfinite(log_sigmoid(-800.0)));
  CHECK(log_sigmoid(-800.0) == doctest::Approx(-800.0).epsilon(1e-12));
  CHECK(log_sigmoid(0.0) == doctest::Approx(-std::log(2.0)).epsilon(1e-14));
  CHECK(log_sigmoid(3.0) == doctest::Approx(std::log(sigmoid(3.0))).epsilon(1e-12));
}

TEST_CASE("btl probability and loss closed forms") {
  std::vector<double> theta{0.0, 0.0, 0.0};
  std::vector<double> x{0.3, -0.2, 0.4};
  CHECK(btl_prob(theta, x) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(btl_loss(theta, x, 1) == doctest::Approx(std::log(2.0)).epsilon(1e-14));
  CHECK(btl_loss(theta, x, 0) == doctest::Approx(std::log(2.0)).epsilon(1e-14));

  // <x, theta> = ln 3 gives p = 3/4, loss -ln 0.75.
  std::vector<double> t2{std::log(3.0), 0.0, 0.0};
  std::vector<double> e1{1.0, 0.0, 0.0};
  CHECK(btl_loss(t2, e1, 1) == doctest::Approx(-std::log(0.75)).epsilon(1e-13));

  // Swapping action roles mirrors the label.
  Rng rng(11);
  for (int i = 0; i < 20; ++i) {
    auto th = random_vector(3, 1.0, rng);
    auto xv = random_vector(3, 1.0, rng);
    auto neg = xv;
    scale(neg, -1.0);
    CHECK(btl_loss(th, xv, 1) == doctest::Approx(btl_loss(th, neg, 0)).epsilon(1e-12));
    CHECK(btl_prob(th, neg) == doctest::Approx(1.0 - btl_prob(th, xv)).epsilon(1e-12));
  }
}

TEST_CASE("btl gradient closed form and norm bound") {
  const int d = 4;
  std::vector<double> theta(d, 0.0);
  std::vector<double> x(d, 0.0);
  x[0] = 1.0;
  std::vector<double> g(d, 0.0);
  btl_grad_accum(theta, x, 1, g);
  CHECK(g[0] == doctest::Approx(-0.5).epsilon(1e-15));
  CHECK(g[1] == 0.0);
  std::fill(g.begin(), g.end(), 0.0);
  btl_grad_accum(theta, x, 0, g);
  CHECK(g[0] == doctest::Approx(0.5).epsilon(1e-15));

  const double L = 0.7;
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    auto th = random_vector(d, 2.0, rng);
    auto xv = random_vector(d, L, rng);
    const int y = rng.bernoulli(0.5) ? 1 : 0;
    std::fill(g.begin(), g.end(), 0.0);
    btl_grad_accum(th, xv, y, g);
    CHECK(l2_norm(g) <= L + 1e-12);
  }
}

TEST_CASE("btl gradient matches finite differences") {
  const int d = 10;
  Rng rng(17);
  for (int i = 0; i < 100; ++i) {
    auto theta = random_vector(d, 1.5, rng);
    auto x = random_vector(d, 1.0, rng);
    const int y = rng.bernoulli(0.5) ? 1 : 0;
    std::vector<double> g(d, 0.0);
    btl_grad_accum(theta, x, y, g);
    auto fd = oracles::finite_diff_grad(
        [&](const std::vector<double>& t) { return btl_loss(t, x, y); }, theta, 1e-5);
    CHECK(oracles::rel_error(g, fd) < 1e-5);
  }
}

TEST_CASE("btl loss is convex along lines") {
  const int d = 6;
  Rng rng(23);
  for (int i = 0; i < 100; ++i) {
    auto t1 = random_vector(d, 2.0, rng);
    auto t2 = random_vector(d, 2.0, rng);
    auto x = random_vector(d, 1.0, rng);
    const int y = rng.bernoulli(0.5) ? 1 : 0;
    const double lambda = rng.uniform();
    std::vector<double> mix(d);
    for (int c = 0; c < d; ++c) mix[c] = lambda * t1[c] + (1.0 - lambda) * t2[c];
    CHECK(btl_loss(mix, x, y) <=
          lambda * btl_loss(t1, x, y) + (1.0 - lambda) * btl_loss(t2, x, y) + 1e-10);
  }
}

TEST_CASE("pl loss closed forms") {
  const int d = 3;
  Rng rng(5);
  // theta = 0 gives every ranking the uniform probability 1/K!.
  for (int K = 2; K <= 5; ++K) {
    std::vector<double> theta(d, 0.0);
    std::vector<double> features(static_cast<std::size_t>(K) * d);
    for (double& v : features) v = rng.uniform() - 0.5;
    std::vector<int> perm(K);
    for (int j = 0; j < K; ++j) perm[j] = j;
    CHECK(pl_loss(theta, features, perm, d) ==
          doctest::Approx(std::lgamma(K + 1.0)).epsilon(1e-12));
  }
}

TEST_CASE("pl loss at K=2 reduces to btl") {
  const int d = 5;
  Rng rng(29);
  for (int i = 0; i < 1000; ++i) {
    auto theta = random_vector(d, 2.0, rng);
    std::vector<double> features(2 * d);
    for (double& v : features) v = rng.uniform() - 0.5;
    std::vector<int> perm{0, 1};
    if (rng.bernoulli(0.5)) std::swap(perm[0], perm[1]);
    std::vector<double> x(d);
    for (int c = 0; c < d; ++c) {
      x[c] = features[static_cast<std::size_t>(perm[0]) * d + c] -
             features[static_cast<std::size_t>(perm[1]) * d + c];
    }
    const double pl = pl_loss(theta, features, perm, d);
    const double btl = btl_loss(theta, x, 1);
    CHECK(std::abs(pl - btl) < 1e-12);
  }
}

TEST_CASE("pl gradient matches finite differences") {
  const int d = 10;
  const int K = 4;
  Rng rng(31);
  for (int i = 0; i < 100; ++i) {
    auto theta = random_vector(d, 1.5, rng);
    std::vector<double> features(static_cast<std::size_t>(K) * d);
    for (double& v : features) v = rng.uniform() - 0.5;
    std::vector<int> perm(K);
    for (int j = 0; j < K; ++j) perm[j] = j;
    for (int j = K - 1; j >= 1; --j) {
      std::swap(perm[j], perm[static_cast<int>(rng.below(j + 1))]);
    }
    std::vector<double> g(d, 0.0);
    pl_grad_accum(theta, features, perm, d, g);
    auto fd = oracles::finite_diff_grad(
        [&](const std::vector<double>& t) { return pl_loss(t, features, perm, d); },
        theta, 1e-5);
    CHECK(oracles::rel_error(g, fd) < 1e-5);
  }
}

TEST_CASE("gradient accumulators add instead of overwrite") {
  const int d = 4;
  Rng rng(37);
  auto theta = random_vector(d, 1.0, rng);
  auto x = random_vector(d, 1.0, rng);
  std::vector<double> once(d, 0.0), twice(d, 0.0);
  btl_grad_accum(theta, x, 1, once);
  btl_grad_accum(theta, x, 1, twice);
  btl_grad_accum(theta, x, 1, twice);
  for (int c = 0; c < d; ++c) CHECK(twice[c] == doctest::Approx(2.0 * once[c]).epsilon(1e-14));
}

TEST_CASE("projection closed forms") {
  std::vector<double> a{2.0, 0.0};
  project(a, 10.0);
  CHECK(a[0] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(a[1] == doctest::Approx(-1.0).epsilon(1e-14));

  std::vector<double> b{3.0, -3.0};
  project(b, std::sqrt(2.0));
  CHECK(b[0] == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(b[1] == doctest::Approx(-1.0).epsilon(1e-13));

  // Already feasible: unchanged.
  std::vector<double> c{0.3, -0.3};
  auto copy = c;
  project(c, 1.0);
  CHECK(c[0] == copy[0]);
  CHECK(c[1] == copy[1]);
}

TEST_CASE("projection invariants") {
  const int d = 7;
  const double B = 0.8;
  Rng rng(41);
  for (int i = 0; i < 200; ++i) {
    std::vector<double> v(d);
    for (double& c : v) c = (rng.uniform() - 0.5) * 6.0;
    auto w = v;
    project(v, B);
    double mean = 0.0;
    for (double c : v) mean += c;
    CHECK(std::abs(mean) <= 1e-9 * d);
    CHECK(l2_norm(v) <= B + 1e-9);
    // Idempotence.
    auto v2 = v;
    project(v2, B);
    for (int c = 0; c < d; ++c) CHECK(v2[c] == doctest::Approx(v[c]).epsilon(1e-12));
    // Non-expansiveness against a second random point.
    std::vector<double> u(d);
    for (double& c : u) c = (rng.uniform() - 0.5) * 6.0;
    auto pu = u;
    project(pu, B);
    double before = 0.0, after = 0.0;
    for (int c = 0; c < d; ++c) {
      before += (w[c] - u[c]) * (w[c] - u[c]);
      after += (v[c] - pu[c]) * (v[c] - pu[c]);
    }
    CHECK(std::sqrt(after) <= std::sqrt(before) + 1e-9);
  }
}

TEST_CASE("user averaged gradient") {
  const int d = 4;
  const int m = 10;
  Rng rng(43);
  auto theta = random_vector(d, 1.0, rng);

  // Identical items average to the single-item gradient.
  auto x0 = random_vector(d, 1.0, rng);
  std::vector<double> xs;
  std::vector<unsigned char> ys;
  for (int j = 0; j < m; ++j) {
    xs.insert(xs.end(), x0.begin(), x0.end());
    ys.push_back(1);
  }
  std::vector<double> avg(d);
  user_avg_grad(theta, xs, ys, d, avg);
  std::vector<double> single(d, 0.0);
  btl_grad_accum(theta, x0, 1, single);
  for (int c = 0; c < d; ++c) CHECK(avg[c] == doctest::Approx(single[c]).epsilon(1e-13));

  // Mirrored preferences at the uniform point cancel exactly: at theta = 0
  // both items sit at sigma = 0.5, so (x, 1) and (-x, 1) pull oppositely.
  std::vector<double> xs2;
  std::vector<unsigned char> ys2;
  xs2.insert(xs2.end(), x0.begin(), x0.end());
  ys2.push_back(1);
  auto neg = x0;
  scale(neg, -1.0);
  xs2.insert(xs2.end(), neg.begin(), neg.end());
  ys2.push_back(1);
  std::vector<double> zero_theta(d, 0.0);
  user_avg_grad(zero_theta, xs2, ys2, d, avg);
  for (int c = 0; c < d; ++c) CHECK(std::abs(avg[c]) < 1e-13);

  // Random record matches sum-then-divide brute force.
  std::vector<double> xs3;
  std::vector<unsigned char> ys3;
  std::vector<double> brute(d, 0.0);
  for (int j = 0; j < m; ++j) {
    auto xj = random_vector(d, 1.0, rng);
    const int yj = rng.bernoulli(0.5) ? 1 : 0;
    xs3.insert(xs3.end(), xj.begin(), xj.end());
    ys3.push_back(yj);
    btl_grad_accum(theta, xj, yj, brute);
  }
  scale(brute, 1.0 / m);
  user_avg_grad(theta, xs3, ys3, d, avg);
  for (int c = 0; c < d; ++c) CHECK(avg[c] == doctest::Approx(brute[c]).epsilon(1e-12));
}
