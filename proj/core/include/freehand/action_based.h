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

// Action-comparison learning: per-step advantage MLE, greedy extraction and
// margin/coverage diagnostics.

#ifndef FREEHAND_ACTION_BASED_H_
#define FREEHAND_ACTION_BASED_H_

#include <vector>

#include "freehand/mle.h"

namespace freehand {

// argmax_a A_h(s, a), lowest index on ties.
MarkovDeterministicPolicy GreedyFromAdvantage(
    const TabularMdp& mdp, const std::vector<std::vector<double>>& tables);

struct ActionRunResult {
  MarkovDeterministicPolicy policy;
  AdvantageFit fit;
  double optimal_value = 0.0;  // J(pi*)
  double value = 0.0;          // J(pi_hat)
  double suboptimality = 0.0;
};

// Needs a StateActionReward truth for the exact evaluation.
ActionRunResult RunFreehandAction(const TabularMdp& mdp,
                                  const RewardFunction& r_star,
                                  const ActionPreferenceDataset& data,
                                  const AdvantageClass& cls,
                                  const LinkFunction& link,
                                  const MleOptions& opts = {});

// Lowest-index optimal policy.
MarkovDeterministicPolicy OptimalPolicy(const TabularMdp& mdp,
                                        const RewardFunction& r_star);

struct MarginProfile {
  std::vector<double> alphas;
  // per_action[h * A + a][k] = P(0 < |Q*(s, pi*(s)) - Q*(s, a)| < alphas[k])
  // under d^{pi*}_h; m[k] is the max over (h, a).
  std::vector<std::vector<double>> per_action;
  std::vector<double> m;
  bool hard_margin = false;  // m == 0 on the whole grid, or a single jump
  bool fitted = false;
  double beta = 0.0;    // +inf for a hard margin
  double alpha0 = 0.0;  // smallest alpha with m > 0 when hard
};

MarginProfile ComputeMarginProfile(const TabularMdp& mdp,
                                   const RewardFunction& r_star,
                                   const std::vector<double>& alphas);

struct MarginFit {
  double beta;
  double alpha0;
};
// Least squares of log m on log alpha over points with 0 < m < 1; throws
// DegenerateProfile with fewer than two such points.
MarginFit FitMarginExponent(const std::vector<double>& alphas,
                            const std::vector<double>& m);

// 1 / min Phi' over [-b_max, b_max].
double KappaAction(const LinkFunction& link, double b_max);

// sup over steps and enumerated class members of the ratio of expected
// squared advantage-difference errors, (d^{pi*}_h, pi*, Unif) against the
// data laws. 0/0 counts as 0, x/0 as +inf.
double ConcentrabilityAction(const AdvantageClass& cls, const TabularMdp& mdp,
                             const RewardFunction& r_star,
                             const ActionDataLaws& laws,
                             std::uint64_t cap = kDefaultEnumerationCap,
                             double resolution = 0.1);
// The three-factor coverage product that upper-bounds the coefficient.
double ConcentrabilityActionBound(const TabularMdp& mdp,
                                  const RewardFunction& r_star,
                                  const ActionDataLaws& laws);

}  // namespace freehand

#endif  // FREEHAND_ACTION_BASED_H_
