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

#include "freehand/confidence.h"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "freehand/errors.h"

namespace freehand {
namespace {

void CheckDelta(double delta) {
  if (!(delta > 0.0 && delta <= 1.0)) {
    throw InvalidDelta("delta must lie in (0, 1]");
  }
}

double RowLogLikelihood(const double* table, const double* counts, int n) {
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    if (counts[i] > 0)
      total += counts[i] * std::log(std::max(table[i], kLogClamp));
  }
  return total;
}

}  // namespace

double SlackReward(const RewardClass& cls, int n, double delta, double c_mle) {
  CheckDelta(delta);
  if (n < 1) throw InvalidInput("N must be positive");
  return c_mle * (LogBracketNumber(cls, 1.0 / n) + std::log(1.0 / delta));
}

double SlackTransition(const StepTransitionClass& cls, int num_states,
                       int num_actions, int horizon, int n, double delta,
                       double c_p) {
  CheckDelta(delta);
  if (n < 1) throw InvalidInput("N must be positive");
  return c_p * (std::log(static_cast<double>(horizon)) +
                LogBracketNumber(cls, num_states, num_actions, 1.0 / n) +
                std::log(1.0 / delta));
}

RewardConfidenceSet::RewardConfidenceSet(RewardClass cls, RewardFit mle,
                                         double zeta, PairCounts counts,
                                         LinkFunction link)
    : cls_(std::move(cls)),
      mle_(std::move(mle)),
      zeta_(zeta),
      counts_(std::move(counts)),
      link_(std::move(link)) {
  if (!(zeta_ >= 0.0)) throw InvalidInput("slack must be nonnegative");
}

double RewardConfidenceSet::LogLikelihood(const std::vector<double>& r) const {
  return LogLikelihoodReward(r, counts_, link_);
}

bool RewardConfidenceSet::Contains(const std::vector<double>& r) const {
  return LogLikelihood(r) >= mle_.loglik - zeta_;
}

RewardConfidenceSet RewardConfidenceSet::WithSlack(double zeta) const {
  return RewardConfidenceSet(cls_, mle_, zeta, counts_, link_);
}

RewardConfidenceSet BuildRewardConfidence(const PreferenceDataset& data,
                                          const RewardClass& cls,
                                          const LinkFunction& link,
                                          double delta, double c_mle,
                                          const MleOptions& opts,
                                          std::uint64_t cap) {
  const double zeta =
      SlackReward(cls, static_cast<int>(data.size()), delta, c_mle);
  RewardFit fit = FitRewardMle(cls, data, link, opts, cap);
  return RewardConfidenceSet(cls, std::move(fit), zeta, AggregatePairs(data),
                             link);
}

std::vector<RewardModel> Discretize(const RewardConfidenceSet& set,
                                    double resolution, std::uint64_t cap) {
  std::vector<RewardModel> out;
  bool has_mle = false;
  for (auto& m : EnumerateMembers(set.reward_class(), cap, resolution)) {
    if (!set.Contains(m.values)) continue;
    has_mle = has_mle || m.values == set.mle().model.values;
    out.push_back(std::move(m));
  }
  if (!has_mle) out.push_back(set.mle().model);
  return out;
}

double SquaredDifferenceRadius(const std::vector<double>& r,
                               const TrajectoryMixture& mu0,
                               const TrajectoryMixture& mu1,
                               const std::vector<double>& r_star) {
  double total = 0.0;
  for (std::size_t i = 0; i < mu0.size(); ++i) {
    const TrajectoryId t0 = mu0.ids[i];
    for (std::size_t j = 0; j < mu1.size(); ++j) {
      const TrajectoryId t1 = mu1.ids[j];
      double e = (r_star[t1] - r_star[t0]) - (r[t1] - r[t0]);
      total += mu0.probs[i] * mu1.probs[j] * e * e;
    }
  }
  return total;
}

TransitionConfidenceSet::TransitionConfidenceSet(int num_states,
                                                 int num_actions,
                                                 std::vector<StepSet> steps,
                                                 bool per_row)
    : num_states_(num_states),
      num_actions_(num_actions),
      steps_(std::move(steps)),
      per_row_(per_row) {}

double TransitionConfidenceSet::LogLikelihood(
    int h, const std::vector<double>& table) const {
  return TransitionLogLikelihood(table, steps_.at(h).counts);
}

bool TransitionConfidenceSet::Contains(int h,
                                       const std::vector<double>& table) const {
  const StepSet& st = steps_.at(h);
  if (!per_row_) return LogLikelihood(h, table) >= st.loglik_hat - st.zeta;
  const int S = num_states_;
  for (int sa = 0; sa < S * num_actions_; ++sa) {
    double best =
        RowLogLikelihood(st.mle.data() + sa * S, st.counts.data() + sa * S, S);
    double here =
        RowLogLikelihood(table.data() + sa * S, st.counts.data() + sa * S, S);
    if (here < best - st.zeta) return false;
  }
  return true;
}

TransitionConfidenceSet BuildTransitionConfidence(const TabularMdp& mdp,
                                                  const PreferenceDataset& data,
                                                  const TransitionClass& cls,
                                                  double delta, double c_p,
                                                  bool per_row,
                                                  double smoothing) {
  if (static_cast<int>(cls.steps.size()) != mdp.horizon() - 1) {
    throw InvalidInput("transition class needs H-1 steps");
  }
  std::vector<TransitionConfidenceSet::StepSet> steps;
  for (int h = 0; h + 1 < mdp.horizon(); ++h) {
    TransitionConfidenceSet::StepSet st;
    st.cls = cls.steps[h];
    st.counts = TransitionCounts(mdp, data, h);
    st.mle = FitTransitionMle(cls.steps[h], mdp, data, h, smoothing);
    st.loglik_hat = TransitionLogLikelihood(st.mle, st.counts);
    st.zeta = SlackTransition(cls.steps[h], mdp.num_states(), mdp.num_actions(),
                              mdp.horizon(), static_cast<int>(data.size()),
                              delta, c_p);
    steps.push_back(std::move(st));
  }
  return TransitionConfidenceSet(mdp.num_states(), mdp.num_actions(),
                                 std::move(steps), per_row);
}

std::vector<std::vector<double>> DiscretizeTransitions(
    const TransitionConfidenceSet& set, int h, double resolution,
    std::uint64_t cap) {
  const auto& st = set.step(h);
  std::vector<std::vector<double>> out;
  bool has_mle = false;
  for (auto& table : EnumerateTransitionMembers(
           st.cls, set.num_states(), set.num_actions(), resolution, cap)) {
    if (!set.Contains(h, table)) continue;
    has_mle = has_mle || table == st.mle;
    out.push_back(std::move(table));
  }
  if (!has_mle) out.push_back(st.mle);
  return out;
}

}  // namespace freehand
