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

#include "upldp/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <set>
#include <stdexcept>
#include <thread>

#include "json.hpp"
#include "upldp/aup.hpp"
#include "upldp/data_gen.hpp"

namespace upldp {

namespace {

constexpr EstimatorKind kAllEstimators[] = {EstimatorKind::kMle, EstimatorKind::kRr,
                                            EstimatorKind::kUserwise, EstimatorKind::kGroup,
                                            EstimatorKind::kAup};

std::string format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string format_number(std::uint64_t v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string format_number(int v) {
  char buf[16];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

int worker_count(std::size_t jobs) {
  int count = 0;
  if (const char* env = std::getenv("UPLDP_THREADS")) {
    count = std::atoi(env);
  }
  if (count <= 0) {
    count = static_cast<int>(std::thread::hardware_concurrency());
  }
  if (count <= 0) count = 1;
  return static_cast<int>(std::min<std::size_t>(count, std::max<std::size_t>(jobs, 1)));
}

}  // namespace

const char* estimator_name(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::kMle: return "mle";
    case EstimatorKind::kRr: return "rr";
    case EstimatorKind::kUserwise: return "userwise";
    case EstimatorKind::kGroup: return "group";
    case EstimatorKind::kAup: return "aup";
  }
  return "unknown";
}

std::optional<EstimatorKind> parse_estimator(const std::string& name) {
  for (EstimatorKind kind : kAllEstimators) {
    if (name == estimator_name(kind)) return kind;
  }
  return std::nullopt;
}

void ExperimentSpec::validate() const {
  if (n_grid.empty() || m_grid.empty() || d_grid.empty() || epsilon_grid.empty()) {
    throw std::invalid_argument("experiment spec: grids must be non-empty");
  }
  if (estimators.empty()) {
    throw std::invalid_argument("experiment spec: estimators must be non-empty");
  }
  if (reps < 1) throw std::invalid_argument("experiment spec: reps must be >= 1");
  if (!(delta > 0.0 && delta < 1.0)) {
    throw std::invalid_argument("experiment spec: delta must be in (0, 1)");
  }
  if (!(B > 0.0) || !(L > 0.0)) {
    throw std::invalid_argument("experiment spec: B, L must be > 0");
  }
  if (K < 2) throw std::invalid_argument("experiment spec: K must be >= 2");
}

namespace {

FitOverrides overrides_from_json(const nlohmann::json& node) {
  FitOverrides ov;
  if (node.contains("T")) ov.T = node.at("T").get<int>();
  if (node.contains("eta")) ov.eta = node.at("eta").get<double>();
  if (node.contains("batch_users")) ov.batch_users = node.at("batch_users").get<int>();
  if (node.contains("clip")) ov.clip = node.at("clip").get<double>();
  if (node.contains("tau")) ov.tau = node.at("tau").get<double>();
  if (node.contains("k")) ov.k = node.at("k").get<int>();
  if (node.contains("t_cap")) ov.t_cap = node.at("t_cap").get<int>();
  return ov;
}

nlohmann::json overrides_to_json(const FitOverrides& ov) {
  nlohmann::json node = nlohmann::json::object();
  if (ov.T) node["T"] = *ov.T;
  if (ov.eta) node["eta"] = *ov.eta;
  if (ov.batch_users) node["batch_users"] = *ov.batch_users;
  if (ov.clip) node["clip"] = *ov.clip;
  if (ov.tau) node["tau"] = *ov.tau;
  if (ov.k) node["k"] = *ov.k;
  if (ov.t_cap) node["t_cap"] = *ov.t_cap;
  return node;
}

}  // namespace

ExperimentSpec experiment_spec_from_json(const std::string& text) {
  nlohmann::json root = nlohmann::json::parse(text);
  ExperimentSpec spec;
  const nlohmann::json& grid = root.at("grid");
  spec.n_grid = grid.at("n").get<std::vector<int>>();
  spec.m_grid = grid.at("m").get<std::vector<int>>();
  spec.d_grid = grid.at("d").get<std::vector<int>>();
  spec.epsilon_grid = grid.at("epsilon").get<std::vector<double>>();
  spec.delta = root.value("delta", 1e-5);
  spec.B = root.value("B", 1.0);
  spec.L = root.value("L", 1.0);
  spec.K = root.value("K", 2);
  for (const auto& name : root.at("estimators")) {
    auto kind = parse_estimator(name.get<std::string>());
    if (!kind) {
      throw std::invalid_argument("experiment spec: unknown estimator " +
                                  name.get<std::string>());
    }
    spec.estimators.push_back(*kind);
  }
  spec.reps = root.value("reps", 1);
  spec.master_seed = root.value("master_seed", std::uint64_t{0});
  if (root.contains("fit_overrides")) {
    for (const auto& [key, value] : root.at("fit_overrides").items()) {
      auto kind = parse_estimator(key);
      if (!kind) throw std::invalid_argument("experiment spec: unknown estimator " + key);
      spec.overrides[*kind] = overrides_from_json(value);
    }
  }
  spec.validate();
  return spec;
}

std::string experiment_spec_to_json(const ExperimentSpec& spec) {
  nlohmann::json root;
  root["grid"] = {{"n", spec.n_grid},
                  {"m", spec.m_grid},
                  {"d", spec.d_grid},
                  {"epsilon", spec.epsilon_grid}};
  root["delta"] = spec.delta;
  root["B"] = spec.B;
  root["L"] = spec.L;
  root["K"] = spec.K;
  std::vector<std::string> names;
  names.reserve(spec.estimators.size());
  for (EstimatorKind kind : spec.estimators) names.emplace_back(estimator_name(kind));
  root["estimators"] = names;
  root["reps"] = spec.reps;
  root["master_seed"] = spec.master_seed;
  if (!spec.overrides.empty()) {
    nlohmann::json ov = nlohmann::json::object();
    for (const auto& [kind, value] : spec.overrides) {
      ov[estimator_name(kind)] = overrides_to_json(value);
    }
    root["fit_overrides"] = std::move(ov);
  }
  return root.dump(2);
}

FitResult run_estimator(EstimatorKind kind, const Dataset& data,
                        const PrivacyBudget& budget, const FitOverrides& ov,
                        std::uint64_t fit_seed) {
  if (kind == EstimatorKind::kAup) {
    AupConfig config;
    config.seed = fit_seed;
    if (ov.k) config.k = *ov.k;
    if (ov.t_cap) config.t_cap = *ov.t_cap;
    config.T = ov.T;
    config.eta = ov.eta;
    config.tau = ov.tau;
    return aup_rlhf_fit(data, budget, config);
  }
  FitConfig config;
  config.seed = fit_seed;
  if (ov.T) config.T = *ov.T;
  if (ov.eta) config.eta = *ov.eta;
  if (ov.batch_users) config.batch_users = *ov.batch_users;
  if (ov.clip) config.clip = *ov.clip;
  switch (kind) {
    case EstimatorKind::kMle: return fit_mle(data, config);
    case EstimatorKind::kRr: return fit_rr(data, budget, config);
    case EstimatorKind::kUserwise: return fit_userwise_dpsgd(data, budget, config);
    case EstimatorKind::kGroup: return fit_group_privacy(data, budget, config);
    case EstimatorKind::kAup: break;
  }
  throw std::logic_error("run_estimator: unreachable");
}

namespace {

struct RowTask {
  int n, m, d, rep;
  double epsilon;
  EstimatorKind estimator;
};

ResultRow compute_row(const ExperimentSpec& spec, const RowTask& task) {
  ResultRow row;
  row.estimator = task.estimator;
  row.n = task.n;
  row.m = task.m;
  row.d = task.d;
  row.epsilon = task.epsilon;
  row.delta = spec.delta;
  row.rep = task.rep;
  // Dataset seed skips the estimator so all estimators in a cell see the
  // same data; the fit seed mixes it back in.
  row.seed = stable_hash(spec.master_seed, static_cast<std::uint64_t>(task.n),
                         static_cast<std::uint64_t>(task.m),
                         static_cast<std::uint64_t>(task.d), hash_double(task.epsilon),
                         static_cast<std::uint64_t>(task.rep));
  try {
    GenConfig gen;
    gen.n = task.n;
    gen.m = task.m;
    gen.d = task.d;
    gen.B = spec.B;
    gen.L = spec.L;
    gen.K = spec.K;
    gen.seed = row.seed;
    const Dataset data = generate(gen);

    FitOverrides ov;
    if (auto it = spec.overrides.find(task.estimator); it != spec.overrides.end()) {
      ov = it->second;
    }
    PrivacyBudget budget;
    budget.epsilon = task.epsilon;
    budget.delta = spec.delta;
    const std::uint64_t fit_seed =
        stable_hash(row.seed, static_cast<std::uint64_t>(task.estimator) + 1);
    const FitResult fit = run_estimator(task.estimator, data, budget, ov, fit_seed);

    double err2 = 0.0;
    for (int c = 0; c < task.d; ++c) {
      const double diff = fit.theta_hat[c] - data.theta_star[c];
      err2 += diff * diff;
    }
    row.error_l2 = std::sqrt(err2);
    row.effective_noise_std = fit.effective_noise_std;
    row.iterations_done = fit.iterations_done;
    row.halted_early = fit.halted_early;
  } catch (const std::exception&) {
    row.error_l2 = std::numeric_limits<double>::quiet_NaN();
    row.effective_noise_std = 0.0;
    row.iterations_done = 0;
    row.halted_early = false;
  }
  row.wall_seconds = 0.0;
  return row;
}

}  // namespace

std::vector<ResultRow> run_experiment(const ExperimentSpec& spec) {
  spec.validate();
  std::vector<RowTask> tasks;
  for (int n : spec.n_grid) {
    for (int m : spec.m_grid) {
      for (int d : spec.d_grid) {
        for (double eps : spec.epsilon_grid) {
          for (EstimatorKind kind : spec.estimators) {
            for (int rep = 0; rep < spec.reps; ++rep) {
              tasks.push_back(RowTask{n, m, d, rep, eps, kind});
            }
          }
        }
      }
    }
  }
  std::vector<ResultRow> rows(tasks.size());
  const int workers = worker_count(tasks.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < tasks.size(); ++i) rows[i] = compute_row(spec, tasks[i]);
    return rows;
  }
  std::atomic<std::size_t> next{0};
  auto drain = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      rows[i] = compute_row(spec, tasks[i]);
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) pool.emplace_back(drain);
  for (auto& t : pool) t.join();
  return rows;
}

std::string rows_to_csv(const std::vector<ResultRow>& rows) {
  std::string out =
      "estimator,n,m,d,epsilon,delta,rep,error_l2,effective_noise_std,"
      "iterations_done,halted_early,wall_seconds,seed\n";
  for (const ResultRow& row : rows) {
    out += estimator_name(row.estimator);
    out += ',';
    out += format_number(row.n);
    out += ',';
    out += format_number(row.m);
    out += ',';
    out += format_number(row.d);
    out += ',';
    out += format_number(row.epsilon);
    out += ',';
    out += format_number(row.delta);
    out += ',';
    out += format_number(row.rep);
    out += ',';
    out += format_number(row.error_l2);
    out += ',';
    out += format_number(row.effective_noise_std);
    out += ',';
    out += format_number(row.iterations_done);
    out += ',';
    out += row.halted_early ? '1' : '0';
    out += ',';
    out += format_number(row.wall_seconds);
    out += ',';
    out += format_number(row.seed);
    out += '\n';
  }
  return out;
}

TheoryBounds theory_bounds(int n, int m, int d, double epsilon, double B, double L,
                           double alpha) {
  TheoryBounds bounds;
  bounds.gamma = 1.0 / (2.0 + std::exp(-2.0 * L * B) + std::exp(2.0 * L * B));
  bounds.kappa = L * L / static_cast<double>(d);
  const double nm = static_cast<double>(n) * static_cast<double>(m);
  const double e = std::exp(epsilon / static_cast<double>(m));
  const double coth_half = (e + 1.0) / (e - 1.0);
  bounds.rr_bound = (1.0 / (bounds.gamma * bounds.kappa)) * coth_half *
                    std::sqrt((1.0 + std::log(1.0 / alpha)) / nm);
  const double sd = std::sqrt(static_cast<double>(d));
  const double sm = std::sqrt(static_cast<double>(m));
  bounds.aup_bound = 1.0 / std::sqrt(nm) + sd / (sm * static_cast<double>(n) * epsilon);
  bounds.lower_bound =
      static_cast<double>(d) / std::sqrt(nm) + sd / (sm * static_cast<double>(n) * epsilon);
  return bounds;
}

std::string theory_report(const ExperimentSpec& spec) {
  std::string out = "# reference curves, leading constants 1, not fit\n";
  out += "n,m,d,epsilon,gamma,kappa,rr_bound,aup_bound,lower_bound\n";
  for (int n : spec.n_grid) {
    for (int m : spec.m_grid) {
      for (int d : spec.d_grid) {
        for (double eps : spec.epsilon_grid) {
          const TheoryBounds b = theory_bounds(n, m, d, eps, spec.B, spec.L);
          out += format_number(n);
          out += ',';
          out += format_number(m);
          out += ',';
          out += format_number(d);
          out += ',';
          out += format_number(eps);
          out += ',';
          out += format_number(b.gamma);
          out += ',';
          out += format_number(b.kappa);
          out += ',';
          out += format_number(b.rr_bound);
          out += ',';
          out += format_number(b.aup_bound);
          out += ',';
          out += format_number(b.lower_bound);
          out += '\n';
        }
      }
    }
  }
  return out;
}

std::string effective_noise_report(const std::vector<ResultRow>& rows) {
  if (rows.empty()) throw std::invalid_argument("effective_noise_report: no rows");
  std::set<double> eps_values;
  std::set<int> m_values;
  std::set<EstimatorKind> kinds;
  for (const ResultRow& row : rows) {
    eps_values.insert(row.epsilon);
    m_values.insert(row.m);
    kinds.insert(row.estimator);
  }
  std::string out;
  bool first = true;
  for (EstimatorKind kind : kAllEstimators) {
    if (!kinds.count(kind)) continue;
    if (!first) out += '\n';
    first = false;
    out += "# effective noise: ";
    out += estimator_name(kind);
    out += "\nepsilon";
    for (int m : m_values) {
      out += ",m=";
      out += format_number(m);
    }
    out += '\n';
    for (double eps : eps_values) {
      out += format_number(eps);
      for (int m : m_values) {
        double total = 0.0;
        int count = 0;
        for (const ResultRow& row : rows) {
          if (row.estimator == kind && row.epsilon == eps && row.m == m &&
              !std::isnan(row.error_l2)) {
            total += row.effective_noise_std;
            ++count;
          }
        }
        out += ',';
        out += count > 0 ? format_number(total / count)
                         : std::string("nan");
      }
      out += '\n';
    }
  }
  return out;
}

}  // namespace upldp
