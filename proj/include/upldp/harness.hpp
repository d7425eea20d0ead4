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

#ifndef UPLDP_HARNESS_HPP_
#define UPLDP_HARNESS_HPP_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "upldp/estimators.hpp"

namespace upldp {

enum class EstimatorKind { kMle, kRr, kUserwise, kGroup, kAup };

const char* estimator_name(EstimatorKind kind);
std::optional<EstimatorKind> parse_estimator(const std::string& name);

// Per-estimator hyperparameter overrides; anything unset falls back to the
// fitter's defaults.
struct FitOverrides {
  std::optional<int> T;
  std::optional<double> eta;
  std::optional<int> batch_users;
  std::optional<double> clip;
  std::optional<double> tau;  // adaptive fitter only
  std::optional<int> k;       // adaptive fitter only
  std::optional<int> t_cap;   // adaptive fitter only
};

struct ExperimentSpec {
  std::vector<int> n_grid;
  std::vector<int> m_grid;
  std::vector<int> d_grid;
  std::vector<double> epsilon_grid;
  double delta = 1e-5;
  double B = 1.0;
  double L = 1.0;
  int K = 2;
  std::vector<EstimatorKind> estimators;
  int reps = 1;
  std::uint64_t master_seed = 0;
  std::map<EstimatorKind, FitOverrides> overrides;

  void validate() const;  // grids non-empty, reps >= 1, estimators non-empty
};

ExperimentSpec experiment_spec_from_json(const std::string& text);
std::string experiment_spec_to_json(const ExperimentSpec& spec);

struct ResultRow {
  EstimatorKind estimator = EstimatorKind::kMle;
  int n = 0;
  int m = 0;
  int d = 0;
  double epsilon = 0.0;
  double delta = 0.0;
  int rep = 0;
  double error_l2 = 0.0;  // NaN marks a failed cell
  double effective_noise_std = 0.0;
  int iterations_done = 0;
  bool halted_early = false;
  double wall_seconds = 0.0;  // pinned to 0 so output stays byte-stable
  std::uint64_t seed = 0;
};

// Dispatches to the estimator named by kind, mapping overrides onto its
// fit configuration. The budget is ignored by the non-private estimator.
FitResult run_estimator(EstimatorKind kind, const Dataset& data,
                        const PrivacyBudget& budget, const FitOverrides& overrides,
                        std::uint64_t fit_seed);

// One dataset+fit per (cell, rep); the dataset seed is shared by every
// estimator in the same cell and rep so comparisons run on the same data.
// Rows come back in grid order (n, m, d, epsilon, estimator, rep) no
// matter how many workers ran; UPLDP_THREADS caps the worker count.
// Per-row failures surface as rows with error_l2 = NaN.
std::vector<ResultRow> run_experiment(const ExperimentSpec& spec);

// Fixed schema, one row per ResultRow, shortest round-trip number format.
std::string rows_to_csv(const std::vector<ResultRow>& rows);

struct TheoryBounds {
  double gamma = 0.0;  // 1/(2 + e^(-2LB) + e^(2LB)), in (0, 0.25]
  double kappa = 0.0;  // L^2/d for sphere-uniform features
  double rr_bound = 0.0;
  double aup_bound = 0.0;
  double lower_bound = 0.0;
};

// Reference rate curves with all leading constants set to 1; for overlays,
// not fits. alpha is the tail level inside the randomized-response curve.
TheoryBounds theory_bounds(int n, int m, int d, double epsilon, double B, double L,
                           double alpha = 0.05);

// Reference-curve table for every (n, m, d, epsilon) grid cell.
std::string theory_report(const ExperimentSpec& spec);

// Mean effective noise per (estimator, epsilon, m), pooled over n, d and
// reps; one block per estimator, epsilon rows and m columns.
std::string effective_noise_report(const std::vector<ResultRow>& rows);

}  // namespace upldp

#endif  // UPLDP_HARNESS_HPP_
