// Copyright 2026 The Freehand Authors
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

// Experiment configs, seeded sweeps, rate fits, SVG output and the
// calibration of the slack constants.

#ifndef FREEHAND_HARNESS_H_
#define FREEHAND_HARNESS_H_

#include <cmath>
#include <cstdint>
#include <nlohmann/json.hpp>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "freehand/action_based.h"
#include "freehand/analysis.h"
#include "freehand/planner.h"

namespace freehand {

const char* Version();

// A problem instance: dynamics, true reward and (optional) data laws and
// target policy.
struct Instance {
  TabularMdp mdp;
  RewardFunction r_star = TrajectoryReward{};
  std::optional<Policy> mu0, mu1;
  std::optional<Policy> target;
  std::optional<ActionDataLaws> action_laws;
};

// {"generator": "inline" | "prop2" | "lower_bound" | "contextual" |
//  "random", ...}. See the README for the parameters of each generator.
Instance MakeInstance(const nlohmann::json& spec);
// Inline form accepted back by MakeInstance.
nlohmann::json InstanceToJson(const Instance& inst);

// Contextual bandit with H = 1: rho_s proportional to ratio^s, the optimal
// action alternates between 0 and 1 across states, every other action sits
// `gap` below it.
Instance MakeContextualInstance(int num_states, int num_actions, double gap,
                                double ratio, double r_max);

// Random tiny instance: Dirichlet(1) rho and rows, rewards uniform on the
// admissible range (trajectory-wise or per step).
Instance MakeRandomInstance(int horizon, int num_states, int num_actions,
                            bool trajectory_reward, Rng& rng);

RewardClass MakeRewardClass(const nlohmann::json& spec, const TabularMdp& mdp);
TransitionClass MakeTransitionClass(const nlohmann::json& spec,
                                    const TabularMdp& mdp);
AdvantageClass MakeAdvantageClass(const nlohmann::json& spec,
                                  const TabularMdp& mdp);

enum class Algorithm {
  kFreehand,
  kFreehandTransition,
  kFreehandAction,
  kGreedyMleBaseline
};
Algorithm ParseAlgorithm(const std::string& name);
std::string AlgorithmName(Algorithm a);

struct ExperimentConfig {
  nlohmann::json raw;  // as loaded (plus overrides), hashed into every row
  std::string name = "experiment";
  Algorithm algorithm = Algorithm::kFreehand;
  nlohmann::json instance;
  nlohmann::json reward_class;
  nlohmann::json transition_class;
  nlohmann::json advantage_class;
  std::string link = "sigmoid";
  double delta = 0.1;
  double c_mle = kDefaultCMle;
  double c_p = kDefaultCP;
  bool per_row_transitions = false;
  std::vector<int> sample_sizes;  // strictly increasing
  int reps = 1;
  std::uint64_t seed = 0;
  std::string mu_ref = "mu1_empirical";  // | "mu1_exact" | "custom"
  nlohmann::json mu_ref_policy;          // for "custom"
  PlanOptions plan;
  std::uint64_t cap = kDefaultEnumerationCap;
};

// Throws InvalidInput on malformed configs.
ExperimentConfig ParseExperimentConfig(const nlohmann::json& j);
ExperimentConfig LoadExperimentConfig(const std::string& path);
// FNV-1a of the canonical dump, as 16 hex digits.
std::string ConfigHash(const ExperimentConfig& cfg);

// Cell seed: DeriveSeed(cfg.seed, {N, rep}).
std::uint64_t CellSeed(const ExperimentConfig& cfg, int n, int rep);

struct CellResult {
  int n = 0;
  int rep = 0;
  std::uint64_t seed = 0;
  std::string status = "ok";
  double suboptimality = 0.0;  // J(pi_tar) - J(pi_hat)
  double j_hat = 0.0;
  double j_target = 0.0;
  double j_mu1 = 0.0;
  double robust_value = 0.0;
  int covered = -1;    // r* in the reward set; -1 when not applicable
  int covered_p = -1;  // every P*_h in its set
  double zeta = 0.0;
  double loglik_hat = 0.0;
  std::uint64_t policy_index = 0;
  double wall_seconds = 0.0;  // kept out of the results CSV
};

struct ExperimentResult {
  std::string config_hash;
  std::vector<CellResult> cells;  // ordered by (N, rep)
};

// One cell: generate data, run the algorithm, score it. Failures are caught
// and recorded in `status`.
CellResult RunCell(const ExperimentConfig& cfg, const Instance& inst, int n,
                   int rep);
ExperimentResult RunExperiment(const ExperimentConfig& cfg, int threads = 0);

// Deterministic: no timings. Column order is fixed.
void WriteResultsCsv(std::ostream& out, const ExperimentConfig& cfg,
                     const ExperimentResult& result);
// config_hash,N,rep,seed,wall_seconds
void WriteTimingCsv(std::ostream& out, const ExperimentResult& result);

struct RateLevel {
  int n = 0;
  int count = 0;
  double mean = 0.0;
  double ci_lo = 0.0;  // mean -/+ 1.96 standard errors
  double ci_hi = 0.0;
};
struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  std::vector<RateLevel> levels;
  double Predict(double n) const {
    return std::exp(intercept) * std::pow(n, slope);
  }
};
// OLS of log mean on log N. Needs >= 4 levels with positive means, else
// InsufficientLevels.
RateFit FitRate(const std::vector<RateLevel>& levels);
// Groups ok cells by N and averages the suboptimality.
RateFit FitRate(const ExperimentResult& result);
RateFit FitRateFromCsv(std::istream& in);
void WriteRateCsv(std::ostream& out, const RateFit& fit);

// Log-log scatter of the level means with the fitted line.
void WriteSvgPlot(std::ostream& out, const RateFit& fit,
                  const std::string& title);

struct Calibration {
  std::vector<double> candidates;
  std::vector<double> coverage;  // per candidate
  double chosen = 0.0;           // smallest meeting the target, else largest
  bool met = false;
};
inline const std::vector<double> kCalibrationCandidates = {0.5, 1, 2, 4};

// The gap l_hat - l(r*) is computed once per seed; r* is covered at c iff
// the gap is at most c * (log N(1/N) + log(1/delta)).
Calibration CalibrateSlackConstant(
    const Instance& inst, const RewardClass& cls, const LinkFunction& link,
    int n, double delta, int seeds, std::uint64_t master_seed,
    std::vector<double> candidates = kCalibrationCandidates,
    double target = 0.9);
// The same for the transition sets (every step must be covered).
Calibration CalibrateTransitionConstant(
    const Instance& inst, const TransitionClass& cls, int n, double delta,
    int seeds, std::uint64_t master_seed,
    std::vector<double> candidates = kCalibrationCandidates,
    double target = 0.9);

}  // namespace freehand

#endif  // FREEHAND_HARNESS_H_
