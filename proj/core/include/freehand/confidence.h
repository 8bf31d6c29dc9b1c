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

// Likelihood-slack confidence sets for rewards and per-step transitions.

#ifndef FREEHAND_CONFIDENCE_H_
#define FREEHAND_CONFIDENCE_H_

#include <vector>

#include "freehand/function_classes.h"
#include "freehand/mle.h"

namespace freehand {

// Smallest of {0.5, 1, 2, 4} reaching 90% coverage at delta = 0.1 over 200
// seeds on the reference instances (a 9-member grid for c_mle, a random
// 2-state full-simplex model for c_p). See CalibrateSlackConstant and the
// calibration tests.
inline constexpr double kDefaultCMle = 0.5;
inline constexpr double kDefaultCP = 0.5;

// c_mle * (log N(1/N) + log(1/delta)).
double SlackReward(const RewardClass& cls, int n, double delta, double c_mle);
// c_p * (log H + log N_h(1/N) + log(1/delta)).
double SlackTransition(const StepTransitionClass& cls, int num_states,
                       int num_actions, int horizon, int n, double delta,
                       double c_p);

class RewardConfidenceSet {
 public:
  RewardConfidenceSet(RewardClass cls, RewardFit mle, double zeta,
                      PairCounts counts, LinkFunction link);

  // Exact recomputation: l(r) >= l(r_hat) - zeta.
  bool Contains(const std::vector<double>& r) const;
  double LogLikelihood(const std::vector<double>& r) const;
  RewardConfidenceSet WithSlack(double zeta) const;

  const RewardClass& reward_class() const { return cls_; }
  const RewardFit& mle() const { return mle_; }
  double loglik_hat() const { return mle_.loglik; }
  double zeta() const { return zeta_; }
  const PairCounts& counts() const { return counts_; }
  const LinkFunction& link() const { return link_; }

 private:
  RewardClass cls_;
  RewardFit mle_;
  double zeta_;
  PairCounts counts_;
  LinkFunction link_;
};

RewardConfidenceSet BuildRewardConfidence(
    const PreferenceDataset& data, const RewardClass& cls,
    const LinkFunction& link, double delta, double c_mle = kDefaultCMle,
    const MleOptions& opts = {}, std::uint64_t cap = kDefaultEnumerationCap);

// Enumerated class members (net points for linear classes) that pass
// Contains(), plus the MLE point if the enumeration missed it.
std::vector<RewardModel> Discretize(const RewardConfidenceSet& set,
                                    double resolution,
                                    std::uint64_t cap = kDefaultEnumerationCap);

// E_{tau0 ~ mu0, tau1 ~ mu1} [((r*(tau1) - r*(tau0)) - (r(tau1) - r(tau0)))^2].
double SquaredDifferenceRadius(const std::vector<double>& r,
                               const TrajectoryMixture& mu0,
                               const TrajectoryMixture& mu1,
                               const std::vector<double>& r_star);

class TransitionConfidenceSet {
 public:
  struct StepSet {
    StepTransitionClass cls;
    std::vector<double> mle;
    std::vector<double> counts;
    double loglik_hat = 0.0;
    double zeta = 0.0;
  };

  TransitionConfidenceSet(int num_states, int num_actions,
                          std::vector<StepSet> steps, bool per_row);

  // Per step: one constraint on the whole table. Per row: every (s, a) row
  // keeps its own likelihood within zeta of its own maximum.
  bool Contains(int h, const std::vector<double>& table) const;
  double LogLikelihood(int h, const std::vector<double>& table) const;
  const StepSet& step(int h) const { return steps_[h]; }
  int num_steps() const { return static_cast<int>(steps_.size()); }
  int num_states() const { return num_states_; }
  int num_actions() const { return num_actions_; }
  bool per_row() const { return per_row_; }

 private:
  int num_states_, num_actions_;
  std::vector<StepSet> steps_;
  bool per_row_;
};

TransitionConfidenceSet BuildTransitionConfidence(
    const TabularMdp& mdp, const PreferenceDataset& data,
    const TransitionClass& cls, double delta, double c_p = kDefaultCP,
    bool per_row = false, double smoothing = 0.0);

// Class members at step h passing Contains(); the MLE table is always kept.
std::vector<std::vector<double>> DiscretizeTransitions(
    const TransitionConfidenceSet& set, int h, double resolution,
    std::uint64_t cap = kDefaultEnumerationCap);

}  // namespace freehand

#endif  // FREEHAND_CONFIDENCE_H_
