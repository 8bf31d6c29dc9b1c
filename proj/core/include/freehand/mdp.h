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

// Finite episodic MDPs with trajectory-wise or state-action rewards, and the
// exact enumeration/evaluation machinery everything else is built on.
//
// Indexing conventions used throughout:
//  * steps are 0-based, h = 0..H-1; transition table h maps step h to h+1;
//  * (s, a) pairs are flattened as s * A + a;
//  * a trajectory id is the base-(S*A) number whose digits are the flattened
//    pairs, first step most significant, so ids sort lexicographically.

#ifndef FREEHAND_MDP_H_
#define FREEHAND_MDP_H_

#include <cstdint>
#include <map>
#include <nlohmann/json_fwd.hpp>
#include <random>
#include <string>
#include <variant>
#include <vector>

namespace freehand {

inline constexpr std::uint64_t kDefaultEnumerationCap = 1'000'000;
inline constexpr double kRepresentationTol = 1e-12;

using Rng = std::mt19937_64;
using TrajectoryId = std::uint64_t;

struct Step {
  int state = 0;
  int action = 0;
  bool operator==(const Step&) const = default;
};
using Trajectory = std::vector<Step>;

class TabularMdp {
 public:
  TabularMdp() = default;
  // `transitions[h]` holds P_h as a flat (S*A) x S row-major table, for
  // h = 0..H-2.
  TabularMdp(int horizon, int num_states, int num_actions,
             std::vector<double> initial,
             std::vector<std::vector<double>> transitions, double r_max);

  // Deterministic chain that stays in place; useful for bandit-like instances.
  static TabularMdp Stationary(int horizon, int num_states, int num_actions,
                               std::vector<double> initial, double r_max);

  int horizon() const { return horizon_; }
  int num_states() const { return num_states_; }
  int num_actions() const { return num_actions_; }
  int num_pairs() const { return num_states_ * num_actions_; }
  double r_max() const { return r_max_; }
  const std::vector<double>& initial() const { return initial_; }
  const std::vector<std::vector<double>>& transitions() const {
    return transitions_;
  }
  const std::vector<double>& transitions(int h) const {
    return transitions_[h];
  }
  double transition(int h, int s, int a, int next) const {
    return transitions_[h][(s * num_actions_ + a) * num_states_ + next];
  }
  const double* transition_row(int h, int s, int a) const {
    return transitions_[h].data() + (s * num_actions_ + a) * num_states_;
  }

  TabularMdp WithTransitions(std::vector<std::vector<double>> tables) const;

  // (S*A)^H. Throws EnumerationTooLarge when above `cap`.
  std::uint64_t NumTrajectories(
      std::uint64_t cap = kDefaultEnumerationCap) const;

  TrajectoryId Encode(const Trajectory& tau) const;
  Trajectory Decode(TrajectoryId id) const;
  // Index-range check only; dynamics are not consulted.
  bool InRange(const Trajectory& tau) const;
  // rho(s_0) * prod_h P_h(s_{h+1} | s_h, a_h).
  double DynamicsProb(TrajectoryId id) const;

 private:
  int horizon_ = 1;
  int num_states_ = 1;
  int num_actions_ = 1;
  double r_max_ = 1.0;
  std::vector<double> initial_;
  std::vector<std::vector<double>> transitions_;
};

// Rewards. Trajectory tables are dense over all (S*A)^H ids.
struct TrajectoryReward {
  std::vector<double> values;
};
// values[h][s * A + a].
struct StateActionReward {
  std::vector<std::vector<double>> values;
};
using RewardFunction = std::variant<TrajectoryReward, StateActionReward>;

double RewardOf(const TabularMdp& mdp, const RewardFunction& r,
                TrajectoryId id);
std::vector<double> DenseRewardTable(
    const TabularMdp& mdp, const RewardFunction& r,
    std::uint64_t cap = kDefaultEnumerationCap);
// Throws InvalidInput unless 0 <= r <= r_max (per-step tables in
// [0, r_max / H]).
void ValidateReward(const TabularMdp& mdp, const RewardFunction& r);

// Policies.
struct MarkovDeterministicPolicy {
  std::vector<std::vector<int>> action;  // [h][s]
};
struct MarkovStochasticPolicy {
  std::vector<std::vector<double>> prob;  // [h][s * A + a]
};
// Keyed by HistoryKey(prefix, s). Only reachable histories are stored;
// anything else falls back to action 0.
struct HistoryDeterministicPolicy {
  std::vector<std::map<std::uint64_t, int>> action;  // [h]
};
// Sparse law over trajectory ids, ids strictly increasing.
struct TrajectoryMixture {
  std::vector<TrajectoryId> ids;
  std::vector<double> probs;

  double Prob(TrajectoryId id) const;
  double Expect(const std::vector<double>& dense) const;
  std::size_t size() const { return ids.size(); }
  static TrajectoryMixture FromMap(const std::map<TrajectoryId, double>& m);
};
using Policy = std::variant<MarkovDeterministicPolicy, MarkovStochasticPolicy,
                            HistoryDeterministicPolicy, TrajectoryMixture>;

// History prefix of h steps (base-SA digits, as for ids) plus current state.
inline std::uint64_t HistoryKey(const TabularMdp& mdp, std::uint64_t prefix,
                                int state) {
  return prefix * static_cast<std::uint64_t>(mdp.num_states()) + state;
}

bool IsMarkov(const Policy& pi);
// pi_h(a | s) for Markov policies.
double ActionProb(const TabularMdp& mdp, const Policy& pi, int h, int s, int a);
// Any non-mixture policy, given the h-step history prefix and current state.
double PolicyActionProb(const TabularMdp& mdp, const Policy& pi, int h,
                        std::uint64_t prefix, int s, int a);
MarkovStochasticPolicy UniformPolicy(const TabularMdp& mdp);
void ValidatePolicy(const TabularMdp& mdp, const Policy& pi);

TrajectoryMixture TrajectoryDistribution(
    const TabularMdp& mdp, const Policy& pi,
    std::uint64_t cap = kDefaultEnumerationCap);

double EvaluatePolicy(const TabularMdp& mdp, const Policy& pi,
                      const RewardFunction& r,
                      std::uint64_t cap = kDefaultEnumerationCap);

// d^pi_h(s, a), flattened.
std::vector<double> Visitation(const TabularMdp& mdp, const Policy& pi, int h,
                               std::uint64_t cap = kDefaultEnumerationCap);
std::vector<std::vector<double>> Visitations(
    const TabularMdp& mdp, const Policy& pi,
    std::uint64_t cap = kDefaultEnumerationCap);
// Per-step marginals of an explicit trajectory law.
std::vector<std::vector<double>> MarginalVisitations(
    const TabularMdp& mdp, const TrajectoryMixture& law);

Trajectory SampleTrajectory(const TabularMdp& mdp, const Policy& pi, Rng& rng);

// Inverse-cdf sampling from a fixed categorical law.
class CategoricalSampler {
 public:
  CategoricalSampler() = default;
  explicit CategoricalSampler(const std::vector<double>& probs);
  int operator()(Rng& rng) const;

 private:
  std::vector<double> cdf_;
};
int SampleIndex(const double* probs, int n, Rng& rng);

struct OptimalValues {
  std::vector<std::vector<double>> q;          // [h][s * A + a]
  std::vector<std::vector<double>> v;          // [h][s]
  std::vector<std::vector<double>> advantage;  // [h][s * A + a]
};
// Throws RewardKindMismatch for trajectory-wise rewards.
OptimalValues ComputeOptimalValues(const TabularMdp& mdp,
                                   const RewardFunction& r);
// Q^pi for a Markov policy and state-action reward.
std::vector<std::vector<double>> PolicyQValues(const TabularMdp& mdp,
                                               const Policy& pi,
                                               const RewardFunction& r);
// Lowest-index argmax per (h, s).
MarkovDeterministicPolicy GreedyPolicy(
    const TabularMdp& mdp, const std::vector<std::vector<double>>& q);

enum class PolicyKind { kMarkovDeterministic, kHistoryDeterministic };
PolicyKind ParsePolicyKind(const std::string& name);

// Random-access, duplicate-free enumeration in a fixed mixed-radix order.
// Index 0 always plays action 0 everywhere.
class PolicyEnumerator {
 public:
  PolicyEnumerator(const TabularMdp& mdp, PolicyKind kind,
                   std::uint64_t cap = kDefaultEnumerationCap);

  std::uint64_t size() const { return count_; }
  Policy At(std::uint64_t index) const;
  PolicyKind kind() const { return kind_; }
  // Reachable history keys at step h (history kind only).
  const std::vector<std::uint64_t>& histories(int h) const {
    return histories_[h];
  }

 private:
  PolicyKind kind_;
  int horizon_, num_states_, num_actions_;
  std::uint64_t count_ = 1;
  std::vector<std::vector<std::uint64_t>> histories_;
};

// JSON: {"H","S","A","r_max","rho","P":[h][s][a][s'],"reward":{...}}.
nlohmann::json MdpToJson(const TabularMdp& mdp);
TabularMdp MdpFromJson(const nlohmann::json& j);
nlohmann::json RewardToJson(const TabularMdp& mdp, const RewardFunction& r);
RewardFunction RewardFromJson(const TabularMdp& mdp, const nlohmann::json& j);
nlohmann::json PolicyToJson(const TabularMdp& mdp, const Policy& pi);
Policy PolicyFromJson(const TabularMdp& mdp, const nlohmann::json& j);

}  // namespace freehand

#endif  // FREEHAND_MDP_H_
