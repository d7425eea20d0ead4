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

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "upldp/aup.hpp"
#include "upldp/data_gen.hpp"
#include "upldp/harness.hpp"
#include "upldp/mechanisms.hpp"

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << content;
  if (!out) throw std::runtime_error("write failed for " + path);
}

struct GenArgs {
  int n = 0, m = 0, d = 0, K = 2;
  double B = 1.0, L = 1.0;
  std::uint64_t seed = 0;
  std::string out;
};

struct FitArgs {
  std::string estimator;
  double eps = 1.0, delta = 1e-5;
  std::string data, out;
  int T = 0, batch = 0, k = 0, t_cap = 0;
  double eta = 0.0, clip = 0.0, tau = 0.0;
  std::uint64_t seed = 0;
};

struct BenchArgs {
  std::string spec, out, noise_report, theory_report;
};

struct AccountArgs {
  double eps = 0.0, delta = 0.0, tau = 1.0;
  int n = 0, batch = 0, T = 0;
};

int run_gen(const GenArgs& args) {
  upldp::GenConfig config;
  config.n = args.n;
  config.m = args.m;
  config.d = args.d;
  config.B = args.B;
  config.L = args.L;
  config.K = args.K;
  config.seed = args.seed;
  const upldp::Dataset data = upldp::generate(config);
  upldp::save_dataset(data, args.out);
  return 0;
}

int run_fit(const FitArgs& args) {
  const auto kind = upldp::parse_estimator(args.estimator);
  if (!kind) throw std::invalid_argument("unknown estimator: " + args.estimator);
  const upldp::Dataset data = upldp::load_dataset(args.data);
  upldp::PrivacyBudget budget;
  budget.epsilon = args.eps;
  budget.delta = args.delta;
  upldp::FitOverrides overrides;
  if (args.T > 0) overrides.T = args.T;
  if (args.eta > 0.0) overrides.eta = args.eta;
  if (args.batch > 0) overrides.batch_users = args.batch;
  if (args.clip > 0.0) overrides.clip = args.clip;
  if (args.tau > 0.0) overrides.tau = args.tau;
  if (args.k > 0) overrides.k = args.k;
  if (args.t_cap > 0) overrides.t_cap = args.t_cap;
  const upldp::FitResult result =
      upldp::run_estimator(*kind, data, budget, overrides, args.seed);
  write_file(args.out, upldp::fit_result_to_json(result));
  return 0;
}

int run_bench(const BenchArgs& args) {
  const upldp::ExperimentSpec spec = upldp::experiment_spec_from_json(read_file(args.spec));
  const std::vector<upldp::ResultRow> rows = upldp::run_experiment(spec);
  write_file(args.out, upldp::rows_to_csv(rows));
  if (!args.noise_report.empty()) {
    write_file(args.noise_report, upldp::effective_noise_report(rows));
  }
  if (!args.theory_report.empty()) {
    write_file(args.theory_report, upldp::theory_report(spec));
  }
  return 0;
}

int run_account(const AccountArgs& args) {
  upldp::PrivacyBudget budget;
  budget.epsilon = args.eps;
  budget.delta = args.delta;
  const upldp::NoisePlan plan =
      upldp::privacy_account(budget, args.n, args.batch, args.T, args.tau);
  nlohmann::json out;
  out["sigma"] = plan.sigma;
  out["per_iter_epsilon"] = plan.per_iter_epsilon;
  out["per_iter_delta"] = plan.per_iter_delta;
  out["gaussian_std"] = plan.gaussian_std;
  out["alg2_literal_std"] = plan.alg2_literal_std;
  std::cout << out.dump() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"user-level label-private preference model estimation"};
  app.require_subcommand(1);

  GenArgs gen_args;
  CLI::App* gen = app.add_subcommand("gen", "generate a synthetic preference dataset");
  gen->add_option("--n", gen_args.n, "number of users")->required();
  gen->add_option("--m", gen_args.m, "items per user")->required();
  gen->add_option("--d", gen_args.d, "feature dimension")->required();
  gen->add_option("--B", gen_args.B, "parameter ball radius");
  gen->add_option("--L", gen_args.L, "feature norm bound");
  gen->add_option("--K", gen_args.K, "ranking length, 2 for pairwise");
  gen->add_option("--seed", gen_args.seed, "generation seed");
  gen->add_option("--out", gen_args.out, "output dataset JSON path")->required();

  FitArgs fit_args;
  CLI::App* fit = app.add_subcommand("fit", "fit an estimator to a dataset");
  fit->add_option("--estimator", fit_args.estimator, "mle|rr|userwise|group|aup")
      ->required();
  fit->add_option("--eps", fit_args.eps, "privacy budget epsilon");
  fit->add_option("--delta", fit_args.delta, "privacy budget delta");
  fit->add_option("--data", fit_args.data, "input dataset JSON path")->required();
  fit->add_option("--out", fit_args.out, "output fit result JSON path")->required();
  fit->add_option("--T", fit_args.T, "iteration count");
  fit->add_option("--eta", fit_args.eta, "step size");
  fit->add_option("--clip", fit_args.clip, "gradient clip radius");
  fit->add_option("--batch", fit_args.batch, "expected batch size in users");
  fit->add_option("--seed", fit_args.seed, "fit seed");
  fit->add_option("--tau", fit_args.tau, "concentration radius (aup)");
  fit->add_option("--k", fit_args.k, "stage count (aup)");
  fit->add_option("--t-cap", fit_args.t_cap, "total iteration cap (aup)");

  BenchArgs bench_args;
  CLI::App* bench = app.add_subcommand("bench", "run an experiment grid to CSV");
  bench->add_option("--spec", bench_args.spec, "experiment spec JSON path")->required();
  bench->add_option("--out", bench_args.out, "output CSV path")->required();
  bench->add_option("--noise-report", bench_args.noise_report,
                    "optional effective-noise table path");
  bench->add_option("--theory-report", bench_args.theory_report,
                    "optional reference-curve table path");

  AccountArgs account_args;
  CLI::App* account = app.add_subcommand("account", "print the per-step noise plan");
  account->add_option("--eps", account_args.eps, "total epsilon")->required();
  account->add_option("--delta", account_args.delta, "total delta")->required();
  account->add_option("--n", account_args.n, "population size")->required();
  account->add_option("--batch", account_args.batch, "expected batch size")->required();
  account->add_option("--T", account_args.T, "iteration count")->required();
  account->add_option("--tau", account_args.tau, "concentration radius");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) return run_gen(gen_args);
    if (fit->parsed()) return run_fit(fit_args);
    if (bench->parsed()) return run_bench(bench_args);
    if (account->parsed()) return run_account(account_args);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 2;
}
