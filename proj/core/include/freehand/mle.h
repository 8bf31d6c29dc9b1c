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

// Maximum-likelihood fits for rewards (trajectory comparisons), per-step
// transitions and per-step advantages (action comparisons).

#ifndef FREEHAND_MLE_H_
#define FREEHAND_MLE_H_

#include <string>
#include <vector>

#include "freehand/function_classes.h"
#include "freehand/preference.h"
#include "freehand/solver.h"

namespace freehand {

// Records grouped by ordered (tau0, tau1) pair; pairs sorted.
struct PairCounts {
  struct Entry {
    TrajectoryId tau0;
    TrajectoryId tau1;
    double n1;
    double n0;
  };
  std::vector<Entry> entries;
  double total = 0.0;
};
PairCounts AggregatePairs(const PreferenceDataset& data);

// sum_n log P_r(o^n | tau0^n, tau1^n), with clamped logs. `r` is dense over
// trajectory ids. Identical pairs are summed together.
double LogLikelihoodReward(const std::vector<double>& r,
                           const PairCounts& counts, const LinkFunction& link);
double LogLikelihoodReward(const std::vector<double>& r,
                           const PreferenceDataset& data,
                           const LinkFunction& link);
// Gradient with respect to the dense table.
std::vector<double> LogLikelihoodRewardGradient(const std::vector<double>& r,
                                                const PairCounts& counts,
                                                const LinkFunction& link);

// Continuous view of a reward class: parameters, feasible set and the
// likelihood as a function of the parameters. Grid classes are relaxed to
// their [0, r_max] box over cells; finite classes have no continuous view.
ParamDomain RewardDomain(const RewardClass& cls);
ComparisonLikelihood RewardLikelihood(const RewardClass& cls,
                                      const PairCounts& counts,
                                      const LinkFunction& link);
// Maps a dense-table functional sum_tau c(tau) r(tau) to parameter space.
Eigen::VectorXd PullBackFunctional(const RewardClass& cls,
                                   const std::vector<double>& c);

struct RewardFit {
  RewardModel model;
  double loglik = 0.0;
  int iterations = 0;
  double grad_norm = 0.0;
  std::string method;  // "grid_scan", "finite_scan", "relaxed_rounding",
                       // "projected_newton"
  std::vector<TraceRow> trace;
};

// Throws DidNotConverge or EnumerationTooLarge.
RewardFit FitRewardMle(const RewardClass& cls, const PreferenceDataset& data,
                       const LinkFunction& link, const MleOptions& opts = {},
                       std::uint64_t cap = kDefaultEnumerationCap);

// Counts of (s_h, a_h, s_{h+1}) over both compared trajectories, flat
// (S*A) x S.
std::vector<double> TransitionCounts(const TabularMdp& mdp,
                                     const PreferenceDataset& data, int h);
double TransitionLogLikelihood(const std::vector<double>& table,
                               const std::vector<double>& counts);
// Empirical frequencies with additive smoothing (uniform rows when
// unvisited), or the best candidate (first on ties).
std::vector<double> FitTransitionMle(const StepTransitionClass& cls,
                                     const TabularMdp& mdp,
                                     const PreferenceDataset& data, int h,
                                     double smoothing = 0.0);

double LogLikelihoodAdvantage(const std::vector<double>& table,
                              const std::vector<ActionRecord>& records,
                              int num_actions, const LinkFunction& link);

struct AdvantageFit {
  std::vector<std::vector<double>> tables;  // [h][s * A + a], max_a = 0
  std::vector<double> loglik;
  std::vector<int> iterations;
};

// Per step: tabular tables are fitted over the box [-b_max/2, b_max/2]
// (whose differences span exactly what gauge-fixed members can express),
// linear ones over the parameter ball. Output is shifted so that
// max_a A(s, a) = 0 for every state.
AdvantageFit FitAdvantageMle(const AdvantageClass& cls, const TabularMdp& mdp,
                             const ActionPreferenceDataset& data,
                             const LinkFunction& link,
                             const MleOptions& opts = {});

}  // namespace freehand

#endif  // FREEHAND_MLE_H_
