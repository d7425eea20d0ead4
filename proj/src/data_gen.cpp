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

#include "upldp/data_gen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace upldp {

void GenConfig::validate() const {
  model().validate();
  if (n < 1) throw std::invalid_argument("GenConfig: n must be >= 1");
  if (m < 1) throw std::invalid_argument("GenConfig: m must be >= 1");
}

std::vector<double> sample_theta_star(int d, double B, Rng& rng) {
  if (d < 2) throw std::invalid_argument("sample_theta_star: d must be >= 2");
  std::vector<double> v(d);
  for (;;) {
    for (int i = 0; i < d; ++i) v[i] = rng.normal();
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= d;
    for (double& x : v) x -= mean;
    double n = l2_norm(v);
    if (n > 1e-12) {  // resample the measure-zero degenerate draw
      scale(v, B / n);
      return v;
    }
  }
}

void sample_feature(int d, double L, Rng& rng, std::span<double> out) {
  for (;;) {
    for (int i = 0; i < d; ++i) out[i] = rng.normal();
    double n = l2_norm(out);
    if (n > 1e-12) {
      scale(out, L / n);
      return;
    }
  }
}

int sample_label(std::span<const double> theta, std::span<const double> x, Rng& rng) {
  return rng.bernoulli(btl_prob(theta, x)) ? 1 : 0;
}

void sample_ranking(std::span<const double> theta, std::span<const double> features,
                    int d, int K, Rng& rng, std::span<int> perm) {
  std::vector<double> r(K);
  std::vector<int> remaining(K);
  for (int k = 0; k < K; ++k) {
    r[k] = dot(theta, features.subspan(static_cast<std::size_t>(k) * d, d));
    remaining[k] = k;
  }
  for (int pos = 0; pos < K - 1; ++pos) {
    int left = K - pos;
    double hi = r[remaining[0]];
    for (int i = 1; i < left; ++i) hi = std::max(hi, r[remaining[i]]);
    double total = 0.0;
    for (int i = 0; i < left; ++i) total += std::exp(r[remaining[i]] - hi);
    double u = rng.uniform() * total;
    int pick = left - 1;  // guard against accumulated rounding
    double acc = 0.0;
    for (int i = 0; i < left; ++i) {
      acc += std::exp(r[remaining[i]] - hi);
      if (u < acc) {
        pick = i;
        break;
      }
    }
    perm[pos] = remaining[pick];
    remaining.erase(remaining.begin() + pick);
  }
  perm[K - 1] = remaining[0];
}

Dataset generate(const GenConfig& config) {
  config.validate();
  Dataset data;
  data.config = config;
  Rng rng(config.seed);
  data.theta_star = sample_theta_star(config.d, config.B, rng);
  data.users.resize(config.n);
  const int d = config.d;
  const int m = config.m;
  if (config.K == 2) {
    for (auto& user : data.users) {
      user.xs.resize(static_cast<std::size_t>(m) * d);
      user.ys.resize(m);
      for (int j = 0; j < m; ++j) {
        std::span<double> x(user.xs.data() + static_cast<std::size_t>(j) * d, d);
        sample_feature(d, config.L, rng, x);
        user.ys[j] = static_cast<unsigned char>(sample_label(data.theta_star, x, rng));
      }
    }
  } else {
    const int K = config.K;
    for (auto& user : data.users) {
      user.features.resize(static_cast<std::size_t>(m) * K * d);
      user.perms.resize(static_cast<std::size_t>(m) * K);
      for (int j = 0; j < m; ++j) {
        std::span<double> feats(user.features.data() + static_cast<std::size_t>(j) * K * d,
                                static_cast<std::size_t>(K) * d);
        // Each action's feature has norm L/2 so any pairwise difference obeys
        // the feature bound L.
        for (int k = 0; k < K; ++k) {
          sample_feature(d, config.L / 2.0, rng, feats.subspan(static_cast<std::size_t>(k) * d, d));
        }
        sample_ranking(data.theta_star, feats, d, K, rng,
                       std::span<int>(user.perms.data() + static_cast<std::size_t>(j) * K, K));
      }
    }
  }
  return data;
}

std::vector<double> jacobi_eigenvalues(std::vector<double> a, int d) {
  // Cyclic Jacobi: deterministic (p, q) sweep order, rotations until the
  // off-diagonal mass drops below tolerance. d is small (<= 64-ish) so the
  // O(d^3) sweeps are immaterial.
  const double tol = 1e-10;
  auto off = [&]() {
    double s = 0.0;
    for (int p = 0; p < d; ++p)
      for (int q = p + 1; q < d; ++q) s += a[p * d + q] * a[p * d + q];
    return std::sqrt(2.0 * s);
  };
  for (int sweep = 0; sweep < 100 && off() > tol; ++sweep) {
    for (int p = 0; p < d; ++p) {
      for (int q = p + 1; q < d; ++q) {
        double apq = a[p * d + q];
        if (std::abs(apq) < 1e-300) continue;
        double tau = (a[q * d + q] - a[p * d + p]) / (2.0 * apq);
        double t = (tau >= 0.0) ? 1.0 / (tau + std::sqrt(1.0 + tau * tau))
                                : 1.0 / (tau - std::sqrt(1.0 + tau * tau));
        double c = 1.0 / std::sqrt(1.0 + t * t);
        double s = t * c;
        for (int k = 0; k < d; ++k) {
          double akp = a[k * d + p];
          double akq = a[k * d + q];
          a[k * d + p] = c * akp - s * akq;
          a[k * d + q] = s * akp + c * akq;
        }
        for (int k = 0; k < d; ++k) {
          double apk = a[p * d + k];
          double aqk = a[q * d + k];
          a[p * d + k] = c * apk - s * aqk;
          a[q * d + k] = s * apk + c * aqk;
        }
      }
    }
  }
  std::vector<double> eig(d);
  for (int i = 0; i < d; ++i) eig[i] = a[i * d + i];
  std::sort(eig.begin(), eig.end());
  return eig;
}

double coverage_check(const Dataset& data) {
  if (data.kwise()) {
    throw std::invalid_argument("coverage_check: defined for pairwise datasets only");
  }
  const int d = data.config.d;
  const long long nm = data.item_count();
  if (nm < d) throw std::invalid_argument("coverage_check: need nm >= d samples");
  std::vector<double> second_moment(static_cast<std::size_t>(d) * d, 0.0);
  for (const auto& user : data.users) {
    for (int j = 0; j < data.config.m; ++j) {
      const double* x = user.xs.data() + static_cast<std::size_t>(j) * d;
      for (int p = 0; p < d; ++p)
        for (int q = 0; q < d; ++q) second_moment[p * d + q] += x[p] * x[q];
    }
  }
  for (double& v : second_moment) v /= static_cast<double>(nm);
  return jacobi_eigenvalues(std::move(second_moment), d).front();
}

// --- JSON serialization. nlohmann orders object keys, and its double
// --- formatter emits shortest round-trip forms, so output is byte-stable.

std::string dataset_to_json(const Dataset& data) {
  nlohmann::json root;
  root["version"] = "upldp-1";
  root["config"] = {{"n", data.config.n},   {"m", data.config.m}, {"d", data.config.d},
                    {"B", data.config.B},   {"L", data.config.L}, {"K", data.config.K},
                    {"seed", data.config.seed}};
  root["theta_star"] = data.theta_star;
  nlohmann::json users = nlohmann::json::array();
  const int d = data.config.d;
  const int K = data.config.K;
  for (const auto& user : data.users) {
    nlohmann::json items = nlohmann::json::array();
    for (int j = 0; j < data.config.m; ++j) {
      nlohmann::json item;
      if (!data.kwise()) {
        item["x"] = std::vector<double>(user.xs.begin() + static_cast<std::size_t>(j) * d,
                                        user.xs.begin() + static_cast<std::size_t>(j + 1) * d);
        item["y"] = static_cast<int>(user.ys[j]);
      } else {
        nlohmann::json feats = nlohmann::json::array();
        for (int k = 0; k < K; ++k) {
          auto begin = user.features.begin() + (static_cast<std::size_t>(j) * K + k) * d;
          feats.push_back(std::vector<double>(begin, begin + d));
        }
        item["features"] = std::move(feats);
        item["perm"] = std::vector<int>(user.perms.begin() + static_cast<std::size_t>(j) * K,
                                        user.perms.begin() + static_cast<std::size_t>(j + 1) * K);
      }
      items.push_back(std::move(item));
    }
    users.push_back(nlohmann::json{{"items", std::move(items)}});
  }
  root["users"] = std::move(users);
  return root.dump();
}

Dataset dataset_from_json(const std::string& text) {
  nlohmann::json root = nlohmann::json::parse(text);
  if (root.at("version").get<std::string>() != "upldp-1") {
    throw std::invalid_argument("dataset: unsupported schema version");
  }
  Dataset data;
  const auto& c = root.at("config");
  data.config.n = c.at("n").get<int>();
  data.config.m = c.at("m").get<int>();
  data.config.d = c.at("d").get<int>();
  data.config.B = c.at("B").get<double>();
  data.config.L = c.at("L").get<double>();
  data.config.K = c.at("K").get<int>();
  data.config.seed = c.at("seed").get<std::uint64_t>();
  data.config.validate();
  data.theta_star = root.at("theta_star").get<std::vector<double>>();
  if (static_cast<int>(data.theta_star.size()) != data.config.d) {
    throw std::invalid_argument("dataset: theta_star dimension mismatch");
  }
  const auto& users = root.at("users");
  if (static_cast<int>(users.size()) != data.config.n) {
    throw std::invalid_argument("dataset: user count mismatch");
  }
  const int d = data.config.d;
  const int m = data.config.m;
  const int K = data.config.K;
  data.users.resize(data.config.n);
  for (int i = 0; i < data.config.n; ++i) {
    const auto& items = users[i].at("items");
    if (static_cast<int>(items.size()) != m) {
      throw std::invalid_argument("dataset: every user must have exactly m items");
    }
    auto& user = data.users[i];
    if (!data.kwise()) {
      user.xs.resize(static_cast<std::size_t>(m) * d);
      user.ys.resize(m);
      for (int j = 0; j < m; ++j) {
        auto x = items[j].at("x").get<std::vector<double>>();
        if (static_cast<int>(x.size()) != d) {
          throw std::invalid_argument("dataset: feature dimension mismatch");
        }
        std::copy(x.begin(), x.end(), user.xs.begin() + static_cast<std::size_t>(j) * d);
        int y = items[j].at("y").get<int>();
        if (y != 0 && y != 1) throw std::invalid_argument("dataset: labels must be 0/1");
        user.ys[j] = static_cast<unsigned char>(y);
      }
    } else {
      user.features.resize(static_cast<std::size_t>(m) * K * d);
      user.perms.resize(static_cast<std::size_t>(m) * K);
      for (int j = 0; j < m; ++j) {
        const auto& feats = items[j].at("features");
        if (static_cast<int>(feats.size()) != K) {
          throw std::invalid_argument("dataset: K-wise item must carry K feature vectors");
        }
        for (int k = 0; k < K; ++k) {
          auto f = feats[k].get<std::vector<double>>();
          if (static_cast<int>(f.size()) != d) {
            throw std::invalid_argument("dataset: feature dimension mismatch");
          }
          std::copy(f.begin(), f.end(),
                    user.features.begin() + (static_cast<std::size_t>(j) * K + k) * d);
        }
        auto perm = items[j].at("perm").get<std::vector<int>>();
        if (static_cast<int>(perm.size()) != K) {
          throw std::invalid_argument("dataset: perm must have K entries");
        }
        // perm must be a permutation of 0..K-1.
        std::vector<bool> seen(K, false);
        for (int v : perm) {
          if (v < 0 || v >= K || seen[v]) {
            throw std::invalid_argument("dataset: perm is not a permutation of 0..K-1");
          }
          seen[v] = true;
        }
        std::copy(perm.begin(), perm.end(), user.perms.begin() + static_cast<std::size_t>(j) * K);
      }
    }
  }
  return data;
}

void save_dataset(const Dataset& data, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << dataset_to_json(data);
  if (!out) throw std::runtime_error("write failed: " + path);
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return dataset_from_json(text);
}

}  // namespace upldp
