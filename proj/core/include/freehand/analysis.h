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

// Concentrability coefficients, the per-step vs per-trajectory gap
// construction, and two-point lower-bound instances with their KL and
// empirical-risk bookkeeping.

#ifndef FREEHAND_ANALYSIS_H_
#define FREEHAND_ANALYSIS_H_

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "freehand/function_classes.h"
#include "freehand/preference.h"

namespace freehand {

// All coefficients use 0/0 -> 0 and x/0 -> +inf. Suprema over classes run
// over EnumerateMembers at `resolution` (exact for grid and finite classes).

// max{0, sup_r E_{pi_tar x mu_ref}[D] / sqrt(E_{mu0 x mu1}[D^2])} with
// D = (r* - r)(tau0) - (r* - r)(tau1).
double ConcentrabilityReward(
    const RewardClass& cls, const TabularMdp& mdp, const Policy& pi_tar,
    const TrajectoryMixture& mu_ref, const TrajectoryMixture& mu0,
    const TrajectoryMixture& mu1, const std::vector<double>& r_star,
    std::uint64_t cap = kDefaultEnumerationCap, double resolution = 0.1);
// Same numerator; the denominator averages over the dataset's pairs.
double ConcentrabilityRewardEmpirical(
    const RewardClass& cls, const TabularMdp& mdp, const Policy& pi_tar,
    const TrajectoryMixture& mu_ref, const PreferenceDataset& data,
    const std::vector<double>& r_star,
    std::uint64_t cap = kDefaultEnumerationCap, double resolution = 0.1);

// max_tau d^pi(tau) / mu0(tau).
double ConcentrabilityPerTrajectory(const TabularMdp& mdp, const Policy& pi_tar,
                                    const TrajectoryMixture& mu0,
                                    std::uint64_t cap = kDefaultEnumerationCap);
// max_{h,s,a} d^pi_h(s, a) / mu0_h(s, a).
double ConcentrabilityPerStep(const TabularMdp& mdp, const Policy& pi_tar,
                              const TrajectoryMixture& mu0,
                              std::uint64_t cap = kDefaultEnumerationCap);

// max_h sup_{P_h} E_{d_h}[|P_h - P*_h|_1] / sqrt(E_{(mu0_h +
// mu1_h)/2}[|.|_1^2]) over the transition steps h = 0..H-2; the truth is
// mdp.transitions(). The initial law is known here and contributes no slot.
double ConcentrabilityTransition(const TransitionClass& cls,
                                 const TabularMdp& mdp, const Policy& pi_tar,
                                 const TrajectoryMixture& mu0,
                                 const TrajectoryMixture& mu1,
                                 std::uint64_t cap = kDefaultEnumerationCap,
                                 double resolution = 0.25);
// sup_{h,s,a} d_h(s, a) / ((mu0_h + mu1_h)(s, a) / 2) over the same steps.
double ConcentrabilityTransitionBound(
    const TabularMdp& mdp, const Policy& pi_tar, const TrajectoryMixture& mu0,
    const TrajectoryMixture& mu1, std::uint64_t cap = kDefaultEnumerationCap);

// Exact best response to a trajectory reward: backward induction over
// histories; lowest action index on ties.
struct TrajectoryOptimum {
  HistoryDeterministicPolicy policy;
  double value = 0.0;
};
TrajectoryOptimum SolveTrajectoryReward(const TabularMdp& mdp,
                                        const std::vector<double>& r);

// Action-independent dynamics, a Markov target and a behavior policy that
// shrinks action 0 by 1/C and moves the mass to action 1.
struct Prop2Instance {
  TabularMdp mdp;
  MarkovStochasticPolicy target;
  MarkovStochasticPolicy behavior;
  TrajectoryMixture mu0;
  double C = 1.0;
};
// `chain[h]` is an S x S table; defaults to uniform. `target` defaults to
// the uniform policy.
Prop2Instance MakeProp2Instance(
    int num_states, int num_actions, int horizon, double C,
    std::optional<MarkovStochasticPolicy> target = std::nullopt,
    std::optional<std::vector<std::vector<double>>> chain = std::nullopt);

enum class LowerBoundKind { kPerStep, kPerTrajectory };
LowerBoundKind ParseLowerBoundKind(const std::string& name);  // "st" | "tr"
std::string LowerBoundKindName(LowerBoundKind kind);

// Two models sharing dynamics and mu0 = mu1, with rewards 1/2 +- x on one
// special trajectory and 1/2 elsewhere. C >= 2 uses one state; 1 < C < 2
// uses two absorbing states with rho = (C - 1, 2 - C). State 0 / action 0
// play the roles of the special state and action.
struct LowerBoundInstance {
  LowerBoundKind kind = LowerBoundKind::kPerTrajectory;
  double C = 2.0;
  int H = 1;
  int N = 1;
  bool two_state = false;
  double x = 0.0;
  TabularMdp mdp;
  TrajectoryMixture mu;  // mu0 = mu1
  std::vector<double> r1, r2;
  TrajectoryId special = 0;
  // Well-covered optimal policies under r1 and r2 (the coefficient targets).
  MarkovDeterministicPolicy target1, target2;
  double separation = 0.0;   // lower bound on L(pi; M1) + L(pi; M2)
  double kl_bound = 0.0;     // closed-form per-sample KL bound
  double proof_bound = 0.0;  // separation / 2
};
LowerBoundInstance MakeLowerBoundInstance(LowerBoundKind kind, double C, int H,
                                          int N);
// min{C - 1, sqrt(max(C, 2)^{H-1} (C - 1) / N)} (st) or
// min{C - 1, sqrt((C - 1) / N)} (tr), without constants.
double LowerBoundRate(LowerBoundKind kind, double C, int H, int N);

// Exact per-sample KL(mu0 x mu1 x P_{r1} || mu0 x mu1 x P_{r2}), sigmoid link.
double InstancePairKl(const LowerBoundInstance& pair);

// Estimators map a dataset to a policy; they may read mu (the known mu1).
using PolicyEstimator =
    std::function<Policy(const PreferenceDataset&, const LowerBoundInstance&)>;
PolicyEstimator GreedyMleEstimator();  // MLE over {r1, r2}, then best response
PolicyEstimator UniformEstimator();
PolicyEstimator OracleEstimator(int member);  // best response to r1 or r2

struct RiskEstimate {
  double risk1 = 0.0, se1 = 0.0;
  double risk2 = 0.0, se2 = 0.0;
  double max_risk = 0.0;
  double lower_bound_rate = 0.0;
};
// Rep i under member k draws from DeriveRng(seed, {k, i}).
RiskEstimate MinimaxRiskEval(const PolicyEstimator& estimator,
                             const LowerBoundInstance& pair, int N, int reps,
                             std::uint64_t seed, int threads = 0);

}  // namespace freehand

#endif  // FREEHAND_ANALYSIS_H_
