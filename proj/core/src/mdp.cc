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

#include "freehand/mdp.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <nlohmann/json.hpp>
#include <numeric>
#include <string>
#include <utility>

#include "freehand/errors.h"

namespace freehand {
namespace {

bool NearlyOne(double x, double tol) { return std::abs(x - 1.0) <= tol; }

void CheckSimplex(const double* p, int n, double tol, const std::string& what) {
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    if (!(p[i] >= 0.0)) throw InvalidInput(what + " has a negative entry");
    total += p[i];
  }
  if (!NearlyOne(total, tol)) {
    throw InvalidInput(what + " sums to " + std::to_string(total));
  }
}

// Overflow-safe integer power with a ceiling.
std::uint64_t CappedPow(std::uint64_t base, std::uint64_t exp,
                        std::uint64_t cap, bool* over) {
  std::uint64_t out = 1;
  *over = false;
  for (std::uint64_t i = 0; i < exp; ++i) {
    if (base != 0 && out > cap / base) {
      *over = true;
      return cap + 1;
    }
    out *= base;
  }
  if (out > cap) *over = true;
  return out;
}

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

}  // namespace

TabularMdp::TabularMdp(int horizon, int num_states, int num_actions,
                       std::vector<double> initial,
                       std::vector<std::vector<double>> transitions,
                       double r_max)
    : horizon_(horizon),
      num_states_(num_states),
      num_actions_(num_actions),
      r_max_(r_max),
      initial_(std::move(initial)),
      transitions_(std::move(transitions)) {
  if (horizon_ < 1 || num_states_ < 1 || num_actions_ < 1) {
    throw InvalidInput("H, S and A must be positive");
  }
  if (!(r_max_ >= 0.0)) throw InvalidInput("r_max must be nonnegative");
  if (static_cast<int>(initial_.size()) != num_states_) {
    throw InvalidInput("initial distribution has wrong length");
  }
  CheckSimplex(initial_.data(), num_states_, kRepresentationTol,
               "initial distribution");
  if (static_cast<int>(transitions_.size()) != horizon_ - 1) {
    throw InvalidInput("expected H-1 transition tables");
  }
  for (int h = 0; h + 1 < horizon_; ++h) {
    if (static_cast<int>(transitions_[h].size()) != num_pairs() * num_states_) {
      throw InvalidInput("transition table has wrong size");
    }
    for (int sa = 0; sa < num_pairs(); ++sa) {
      CheckSimplex(transitions_[h].data() + sa * num_states_, num_states_,
                   kRepresentationTol,
                   "transition row (h=" + std::to_string(h) +
                       ", sa=" + std::to_string(sa) + ")");
    }
  }
}

TabularMdp TabularMdp::Stationary(int horizon, int num_states, int num_actions,
                                  std::vector<double> initial, double r_max) {
  std::vector<std::vector<double>> tables(
      horizon - 1,
      std::vector<double>(num_states * num_actions * num_states, 0.0));
  for (auto& t : tables) {
    for (int s = 0; s < num_states; ++s) {
      for (int a = 0; a < num_actions; ++a) {
        t[(s * num_actions + a) * num_states + s] = 1.0;
      }
    }
  }
  return TabularMdp(horizon, num_states, num_actions, std::move(initial),
                    std::move(tables), r_max);
}

TabularMdp TabularMdp::WithTransitions(
    std::vector<std::vector<double>> tables) const {
  return TabularMdp(horizon_, num_states_, num_actions_, initial_,
                    std::move(tables), r_max_);
}

std::uint64_t TabularMdp::NumTrajectories(std::uint64_t cap) const {
  bool over = false;
  std::uint64_t n = CappedPow(num_pairs(), horizon_, cap, &over);
  if (over) {
    throw EnumerationTooLarge("(S*A)^H exceeds the cap of " +
                              std::to_string(cap) + " trajectories");
  }
  return n;
}

TrajectoryId TabularMdp::Encode(const Trajectory& tau) const {
  TrajectoryId id = 0;
  for (const Step& st : tau) {
    id = id * num_pairs() + (st.state * num_actions_ + st.action);
  }
  return id;
}

Trajectory TabularMdp::Decode(TrajectoryId id) const {
  Trajectory tau(horizon_);
  for (int h = horizon_ - 1; h >= 0; --h) {
    int sa = static_cast<int>(id % num_pairs());
    id /= num_pairs();
    tau[h] = {sa / num_actions_, sa % num_actions_};
  }
  return tau;
}

bool TabularMdp::InRange(const Trajectory& tau) const {
  if (static_cast<int>(tau.size()) != horizon_) return false;
  for (const Step& st : tau) {
    if (st.state < 0 || st.state >= num_states_ || st.action < 0 ||
        st.action >= num_actions_) {
      return false;
    }
  }
  return true;
}

double TabularMdp::DynamicsProb(TrajectoryId id) const {
  Trajectory tau = Decode(id);
  double p = initial_[tau[0].state];
  for (int h = 0; h + 1 < horizon_ && p > 0.0; ++h) {
    p *= transition(h, tau[h].state, tau[h].action, tau[h + 1].state);
  }
  return p;
}

double RewardOf(const TabularMdp& mdp, const RewardFunction& r,
                TrajectoryId id) {
  return std::visit(
      Overloaded{
          [&](const TrajectoryReward& t) { return t.values.at(id); },
          [&](const StateActionReward& t) {
            double total = 0.0;
            Trajectory tau = mdp.Decode(id);
            for (int h = 0; h < mdp.horizon(); ++h) {
              total +=
                  t.values[h][tau[h].state * mdp.num_actions() + tau[h].action];
            }
            return total;
          }},
      r);
}

std::vector<double> DenseRewardTable(const TabularMdp& mdp,
                                     const RewardFunction& r,
                                     std::uint64_t cap) {
  if (const auto* t = std::get_if<TrajectoryReward>(&r)) return t->values;
  std::uint64_t n = mdp.NumTrajectories(cap);
  std::vector<double> out(n);
  for (TrajectoryId id = 0; id < n; ++id) out[id] = RewardOf(mdp, r, id);
  return out;
}

void ValidateReward(const TabularMdp& mdp, const RewardFunction& r) {
  const double tol = kRepresentationTol;
  std::visit(
      Overloaded{
          [&](const TrajectoryReward& t) {
            if (t.values.size() != mdp.NumTrajectories()) {
              throw InvalidInput("trajectory reward table has wrong size");
            }
            for (double v : t.values) {
              if (v < -tol || v > mdp.r_max() + tol) {
                throw InvalidInput("trajectory reward outside [0, r_max]");
              }
            }
          },
          [&](const StateActionReward& t) {
            if (static_cast<int>(t.values.size()) != mdp.horizon()) {
              throw InvalidInput("state-action reward needs H tables");
            }
            const double cap = mdp.r_max() / mdp.horizon();
            for (const auto& row : t.values) {
              if (static_cast<int>(row.size()) != mdp.num_pairs()) {
                throw InvalidInput("state-action reward table has wrong size");
              }
              for (double v : row) {
                if (v < -tol || v > cap + tol) {
                  throw InvalidInput("per-step reward outside [0, r_max/H]");
                }
              }
            }
          }},
      r);
}

double TrajectoryMixture::Prob(TrajectoryId id) const {
  auto it = std::lower_bound(ids.begin(), ids.end(), id);
  if (it == ids.end() || *it != id) return 0.0;
  return probs[it - ids.begin()];
}

double TrajectoryMixture::Expect(const std::vector<double>& dense) const {
  double total = 0.0;
  for (std::size_t i = 0; i < ids.size(); ++i)
    total += probs[i] * dense[ids[i]];
  return total;
}

TrajectoryMixture TrajectoryMixture::FromMap(
    const std::map<TrajectoryId, double>& m) {
  TrajectoryMixture out;
  for (const auto& [id, p] : m) {
    if (p == 0.0) continue;
    out.ids.push_back(id);
    out.probs.push_back(p);
  }
  return out;
}

bool IsMarkov(const Policy& pi) {
  return std::holds_alternative<MarkovDeterministicPolicy>(pi) ||
         std::holds_alternative<MarkovStochasticPolicy>(pi);
}

double ActionProb(const TabularMdp& mdp, const Policy& pi, int h, int s,
                  int a) {
  if (const auto* d = std::get_if<MarkovDeterministicPolicy>(&pi)) {
    return d->action[h][s] == a ? 1.0 : 0.0;
  }
  if (const auto* m = std::get_if<MarkovStochasticPolicy>(&pi)) {
    return m->prob[h][s * mdp.num_actions() + a];
  }
  throw InvalidInput("ActionProb needs a Markov policy");
}

MarkovStochasticPolicy UniformPolicy(const TabularMdp& mdp) {
  MarkovStochasticPolicy pi;
  pi.prob.assign(mdp.horizon(),
                 std::vector<double>(mdp.num_pairs(), 1.0 / mdp.num_actions()));
  return pi;
}

void ValidatePolicy(const TabularMdp& mdp, const Policy& pi) {
  const int H = mdp.horizon(), S = mdp.num_states(), A = mdp.num_actions();
  std::visit(
      Overloaded{
          [&](const MarkovDeterministicPolicy& p) {
            if (static_cast<int>(p.action.size()) != H) {
              throw InvalidInput("policy needs H rows");
            }
            for (const auto& row : p.action) {
              if (static_cast<int>(row.size()) != S) {
                throw InvalidInput("policy row has wrong length");
              }
              for (int a : row) {
                if (a < 0 || a >= A) throw InvalidInput("action out of range");
              }
            }
          },
          [&](const MarkovStochasticPolicy& p) {
            if (static_cast<int>(p.prob.size()) != H) {
              throw InvalidInput("policy needs H rows");
            }
            for (const auto& row : p.prob) {
              if (static_cast<int>(row.size()) != S * A) {
                throw InvalidInput("policy row has wrong length");
              }
              for (int s = 0; s < S; ++s) {
                CheckSimplex(row.data() + s * A, A, kRepresentationTol,
                             "policy row");
              }
            }
          },
          [&](const HistoryDeterministicPolicy& p) {
            if (static_cast<int>(p.action.size()) != H) {
              throw InvalidInput("policy needs H maps");
            }
            for (const auto& m : p.action) {
              for (const auto& [key, a] : m) {
                if (a < 0 || a >= A) throw InvalidInput("action out of range");
              }
            }
          },
          [&](const TrajectoryMixture& m) {
            std::uint64_t n = mdp.NumTrajectories();
            if (m.ids.size() != m.probs.size() || m.ids.empty()) {
              throw InvalidInput("mixture ids/probs mismatch or empty");
            }
            double total = 0.0;
            for (std::size_t i = 0; i < m.ids.size(); ++i) {
              if (m.ids[i] >= n) throw InvalidInput("mixture id out of range");
              if (i > 0 && m.ids[i] <= m.ids[i - 1]) {
                throw InvalidInput("mixture ids must be strictly increasing");
              }
              if (!(m.probs[i] >= 0.0)) {
                throw InvalidInput("mixture has a negative probability");
              }
              if (m.probs[i] > 0.0 && mdp.DynamicsProb(m.ids[i]) <= 0.0) {
                throw InvalidInput("mixture supports trajectory " +
                                   std::to_string(m.ids[i]) +
                                   " that the dynamics cannot produce");
              }
              total += m.probs[i];
            }
            if (!NearlyOne(total, 1e-10)) {
              throw InvalidInput("mixture sums to " + std::to_string(total));
            }
          }},
      pi);
}

double PolicyActionProb(const TabularMdp& mdp, const Policy& pi, int h,
                        std::uint64_t prefix, int s, int a) {
  if (const auto* hd = std::get_if<HistoryDeterministicPolicy>(&pi)) {
    const auto& m = hd->action[h];
    auto it = m.find(HistoryKey(mdp, prefix, s));
    int chosen = it == m.end() ? 0 : it->second;
    return chosen == a ? 1.0 : 0.0;
  }
  return ActionProb(mdp, pi, h, s, a);
}

namespace {

void ExpandTrajectories(const TabularMdp& mdp, const Policy& pi, int h,
                        std::uint64_t prefix, int s, double prob,
                        const std::function<void(TrajectoryId, double)>& emit) {
  const int A = mdp.num_actions(), S = mdp.num_states();
  for (int a = 0; a < A; ++a) {
    double pa = PolicyActionProb(mdp, pi, h, prefix, s, a);
    if (pa <= 0.0) continue;
    double p = prob * pa;
    std::uint64_t next_prefix = prefix * mdp.num_pairs() + (s * A + a);
    if (h + 1 == mdp.horizon()) {
      emit(next_prefix, p);
      continue;
    }
    const double* row = mdp.transition_row(h, s, a);
    for (int s2 = 0; s2 < S; ++s2) {
      if (row[s2] <= 0.0) continue;
      ExpandTrajectories(mdp, pi, h + 1, next_prefix, s2, p * row[s2], emit);
    }
  }
}

}  // namespace

TrajectoryMixture TrajectoryDistribution(const TabularMdp& mdp,
                                         const Policy& pi, std::uint64_t cap) {
  mdp.NumTrajectories(cap);
  if (const auto* m = std::get_if<TrajectoryMixture>(&pi)) return *m;
  TrajectoryMixture out;
  auto emit = [&](TrajectoryId id, double p) {
    out.ids.push_back(id);
    out.probs.push_back(p);
  };
  for (int s = 0; s < mdp.num_states(); ++s) {
    if (mdp.initial()[s] <= 0.0) continue;
    ExpandTrajectories(mdp, pi, 0, 0, s, mdp.initial()[s], emit);
  }
  return out;
}

double EvaluatePolicy(const TabularMdp& mdp, const Policy& pi,
                      const RewardFunction& r, std::uint64_t cap) {
  if (const auto* sa = std::get_if<StateActionReward>(&r);
      sa != nullptr && IsMarkov(pi)) {
    double total = 0.0;
    auto d = Visitations(mdp, pi, cap);
    for (int h = 0; h < mdp.horizon(); ++h) {
      for (int i = 0; i < mdp.num_pairs(); ++i) {
        total += d[h][i] * sa->values[h][i];
      }
    }
    return total;
  }
  TrajectoryMixture law = TrajectoryDistribution(mdp, pi, cap);
  double total = 0.0;
  for (std::size_t i = 0; i < law.size(); ++i) {
    total += law.probs[i] * RewardOf(mdp, r, law.ids[i]);
  }
  return total;
}

std::vector<std::vector<double>> MarginalVisitations(
    const TabularMdp& mdp, const TrajectoryMixture& law) {
  std::vector<std::vector<double>> d(mdp.horizon(),
                                     std::vector<double>(mdp.num_pairs(), 0.0));
  for (std::size_t i = 0; i < law.size(); ++i) {
    TrajectoryId id = law.ids[i];
    for (int h = mdp.horizon() - 1; h >= 0; --h) {
      d[h][id % mdp.num_pairs()] += law.probs[i];
      id /= mdp.num_pairs();
    }
  }
  return d;
}

std::vector<std::vector<double>> Visitations(const TabularMdp& mdp,
                                             const Policy& pi,
                                             std::uint64_t cap) {
  if (!IsMarkov(pi)) {
    return MarginalVisitations(mdp, TrajectoryDistribution(mdp, pi, cap));
  }
  const int S = mdp.num_states(), A = mdp.num_actions();
  std::vector<std::vector<double>> d(mdp.horizon(),
                                     std::vector<double>(S * A, 0.0));
  std::vector<double> states = mdp.initial();
  for (int h = 0; h < mdp.horizon(); ++h) {
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a) {
        d[h][s * A + a] = states[s] * ActionProb(mdp, pi, h, s, a);
      }
    }
    if (h + 1 == mdp.horizon()) break;
    std::vector<double> next(S, 0.0);
    for (int sa = 0; sa < S * A; ++sa) {
      if (d[h][sa] == 0.0) continue;
      const double* row = mdp.transitions(h).data() + sa * S;
      for (int s2 = 0; s2 < S; ++s2) next[s2] += d[h][sa] * row[s2];
    }
    states = std::move(next);
  }
  return d;
}

std::vector<double> Visitation(const TabularMdp& mdp, const Policy& pi, int h,
                               std::uint64_t cap) {
  return Visitations(mdp, pi, cap).at(h);
}

int SampleIndex(const double* probs, int n, Rng& rng) {
  double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  int last = 0;
  for (int i = 0; i < n; ++i) {
    if (probs[i] <= 0.0) continue;
    last = i;
    u -= probs[i];
    if (u < 0.0) return i;
  }
  return last;
}

CategoricalSampler::CategoricalSampler(const std::vector<double>& probs)
    : cdf_(probs.size()) {
  std::partial_sum(probs.begin(), probs.end(), cdf_.begin());
}

int CategoricalSampler::operator()(Rng& rng) const {
  double u = std::uniform_real_distribution<double>(0.0, cdf_.back())(rng);
  auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  if (it == cdf_.end()) --it;
  return static_cast<int>(it - cdf_.begin());
}

Trajectory SampleTrajectory(const TabularMdp& mdp, const Policy& pi, Rng& rng) {
  if (const auto* m = std::get_if<TrajectoryMixture>(&pi)) {
    int i = SampleIndex(m->probs.data(), static_cast<int>(m->size()), rng);
    return mdp.Decode(m->ids[i]);
  }
  const int A = mdp.num_actions();
  Trajectory tau(mdp.horizon());
  std::vector<double> action_probs(A);
  std::uint64_t prefix = 0;
  int s = SampleIndex(mdp.initial().data(), mdp.num_states(), rng);
  for (int h = 0; h < mdp.horizon(); ++h) {
    for (int a = 0; a < A; ++a) {
      action_probs[a] = PolicyActionProb(mdp, pi, h, prefix, s, a);
    }
    int a = SampleIndex(action_probs.data(), A, rng);
    tau[h] = {s, a};
    prefix = prefix * mdp.num_pairs() + (s * A + a);
    if (h + 1 < mdp.horizon()) {
      s = SampleIndex(mdp.transition_row(h, s, a), mdp.num_states(), rng);
    }
  }
  return tau;
}

OptimalValues ComputeOptimalValues(const TabularMdp& mdp,
                                   const RewardFunction& r) {
  const auto* sa = std::get_if<StateActionReward>(&r);
  if (sa == nullptr) {
    throw RewardKindMismatch("optimal values need a state-action reward");
  }
  const int H = mdp.horizon(), S = mdp.num_states(), A = mdp.num_actions();
  OptimalValues out;
  out.q.assign(H, std::vector<double>(S * A));
  out.v.assign(H, std::vector<double>(S));
  out.advantage.assign(H, std::vector<double>(S * A));
  for (int h = H - 1; h >= 0; --h) {
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a) {
        double q = sa->values[h][s * A + a];
        if (h + 1 < H) {
          const double* row = mdp.transition_row(h, s, a);
          for (int s2 = 0; s2 < S; ++s2) q += row[s2] * out.v[h + 1][s2];
        }
        out.q[h][s * A + a] = q;
      }
      out.v[h][s] = *std::max_element(out.q[h].begin() + s * A,
                                      out.q[h].begin() + (s + 1) * A);
      for (int a = 0; a < A; ++a) {
        out.advantage[h][s * A + a] = out.q[h][s * A + a] - out.v[h][s];
      }
    }
  }
  return out;
}

std::vector<std::vector<double>> PolicyQValues(const TabularMdp& mdp,
                                               const Policy& pi,
                                               const RewardFunction& r) {
  const auto* sa = std::get_if<StateActionReward>(&r);
  if (sa == nullptr) {
    throw RewardKindMismatch("Q-values need a state-action reward");
  }
  if (!IsMarkov(pi)) throw InvalidInput("Q-values need a Markov policy");
  const int H = mdp.horizon(), S = mdp.num_states(), A = mdp.num_actions();
  std::vector<std::vector<double>> q(H, std::vector<double>(S * A));
  std::vector<double> v_next(S, 0.0);
  for (int h = H - 1; h >= 0; --h) {
    std::vector<double> v(S, 0.0);
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a) {
        double value = sa->values[h][s * A + a];
        if (h + 1 < H) {
          const double* row = mdp.transition_row(h, s, a);
          for (int s2 = 0; s2 < S; ++s2) value += row[s2] * v_next[s2];
        }
        q[h][s * A + a] = value;
        v[s] += ActionProb(mdp, pi, h, s, a) * value;
      }
    }
    v_next = std::move(v);
  }
  return q;
}

MarkovDeterministicPolicy GreedyPolicy(
    const TabularMdp& mdp, const std::vector<std::vector<double>>& q) {
  const int S = mdp.num_states(), A = mdp.num_actions();
  MarkovDeterministicPolicy pi;
  pi.action.assign(mdp.horizon(), std::vector<int>(S, 0));
  for (int h = 0; h < mdp.horizon(); ++h) {
    for (int s = 0; s < S; ++s) {
      int best = 0;
      for (int a = 1; a < A; ++a) {
        if (q[h][s * A + a] > q[h][s * A + best]) best = a;
      }
      pi.action[h][s] = best;
    }
  }
  return pi;
}

PolicyKind ParsePolicyKind(const std::string& name) {
  if (name == "markov_det") return PolicyKind::kMarkovDeterministic;
  if (name == "history_det") return PolicyKind::kHistoryDeterministic;
  throw InvalidInput("unknown policy kind '" + name + "'");
}

PolicyEnumerator::PolicyEnumerator(const TabularMdp& mdp, PolicyKind kind,
                                   std::uint64_t cap)
    : kind_(kind),
      horizon_(mdp.horizon()),
      num_states_(mdp.num_states()),
      num_actions_(mdp.num_actions()) {
  std::uint64_t slots = 0;
  if (kind == PolicyKind::kMarkovDeterministic) {
    slots = static_cast<std::uint64_t>(num_states_) * horizon_;
  } else {
    // Histories reachable under some policy: every action is explored.
    std::vector<std::vector<std::uint64_t>> keys(horizon_);
    std::function<void(int, std::uint64_t, int)> walk =
        [&](int h, std::uint64_t prefix, int s) {
          keys[h].push_back(HistoryKey(mdp, prefix, s));
          if (h + 1 == horizon_) return;
          for (int a = 0; a < num_actions_; ++a) {
            std::uint64_t next =
                prefix * mdp.num_pairs() + s * num_actions_ + a;
            const double* row = mdp.transition_row(h, s, a);
            for (int s2 = 0; s2 < num_states_; ++s2) {
              if (row[s2] > 0.0) walk(h + 1, next, s2);
            }
          }
        };
    for (int s = 0; s < num_states_; ++s) {
      if (mdp.initial()[s] > 0.0) walk(0, 0, s);
    }
    for (auto& k : keys) {
      std::sort(k.begin(), k.end());
      slots += k.size();
    }
    histories_ = std::move(keys);
  }
  bool over = false;
  count_ = CappedPow(num_actions_, slots, cap, &over);
  if (over) {
    throw EnumerationTooLarge("policy count exceeds the cap of " +
                              std::to_string(cap));
  }
}

Policy PolicyEnumerator::At(std::uint64_t index) const {
  if (index >= count_) throw InvalidInput("policy index out of range");
  const std::uint64_t A = num_actions_;
  if (kind_ == PolicyKind::kMarkovDeterministic) {
    MarkovDeterministicPolicy pi;
    pi.action.assign(horizon_, std::vector<int>(num_states_, 0));
    for (int j = horizon_ * num_states_ - 1; j >= 0; --j) {
      pi.action[j / num_states_][j % num_states_] = static_cast<int>(index % A);
      index /= A;
    }
    return pi;
  }
  HistoryDeterministicPolicy pi;
  pi.action.resize(horizon_);
  for (int h = horizon_ - 1; h >= 0; --h) {
    for (auto it = histories_[h].rbegin(); it != histories_[h].rend(); ++it) {
      pi.action[h][*it] = static_cast<int>(index % A);
      index /= A;
    }
  }
  return pi;
}

nlohmann::json MdpToJson(const TabularMdp& mdp) {
  const int S = mdp.num_states(), A = mdp.num_actions();
  nlohmann::json j;
  j["H"] = mdp.horizon();
  j["S"] = S;
  j["A"] = A;
  j["r_max"] = mdp.r_max();
  j["rho"] = mdp.initial();
  nlohmann::json p = nlohmann::json::array();
  for (int h = 0; h + 1 < mdp.horizon(); ++h) {
    nlohmann::json by_state = nlohmann::json::array();
    for (int s = 0; s < S; ++s) {
      nlohmann::json by_action = nlohmann::json::array();
      for (int a = 0; a < A; ++a) {
        const double* row = mdp.transition_row(h, s, a);
        by_action.push_back(std::vector<double>(row, row + S));
      }
      by_state.push_back(by_action);
    }
    p.push_back(by_state);
  }
  j["P"] = p;
  return j;
}

TabularMdp MdpFromJson(const nlohmann::json& j) {
  try {
    const int H = j.at("H"), S = j.at("S"), A = j.at("A");
    std::vector<double> rho = j.at("rho").get<std::vector<double>>();
    std::vector<std::vector<double>> tables;
    if (j.contains("P")) {
      for (const auto& step : j.at("P")) {
        std::vector<double> t;
        for (const auto& by_state : step) {
          for (const auto& row : by_state) {
            for (double v : row) t.push_back(v);
          }
        }
        tables.push_back(std::move(t));
      }
    } else {
      // No dynamics given: every state persists.
      return TabularMdp::Stationary(H, S, A, rho, j.value("r_max", 1.0));
    }
    return TabularMdp(H, S, A, std::move(rho), std::move(tables),
                      j.value("r_max", 1.0));
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("malformed MDP: ") + e.what());
  }
}

nlohmann::json RewardToJson(const TabularMdp& mdp, const RewardFunction& r) {
  nlohmann::json j;
  if (const auto* t = std::get_if<TrajectoryReward>(&r)) {
    j["kind"] = "trajectory";
    nlohmann::json table = nlohmann::json::object();
    for (std::size_t id = 0; id < t->values.size(); ++id) {
      if (t->values[id] != 0.0) table[std::to_string(id)] = t->values[id];
    }
    j["table"] = table;
  } else {
    const auto& sa = std::get<StateActionReward>(r);
    j["kind"] = "state_action";
    nlohmann::json table = nlohmann::json::array();
    for (const auto& step : sa.values) {
      nlohmann::json by_state = nlohmann::json::array();
      for (int s = 0; s < mdp.num_states(); ++s) {
        by_state.push_back(
            std::vector<double>(step.begin() + s * mdp.num_actions(),
                                step.begin() + (s + 1) * mdp.num_actions()));
      }
      table.push_back(by_state);
    }
    j["table"] = table;
  }
  return j;
}

RewardFunction RewardFromJson(const TabularMdp& mdp, const nlohmann::json& j) {
  try {
    const std::string kind = j.at("kind");
    if (kind == "trajectory") {
      TrajectoryReward t;
      t.values.assign(mdp.NumTrajectories(), 0.0);
      for (const auto& [key, v] : j.at("table").items()) {
        t.values.at(std::stoull(key)) = v.get<double>();
      }
      return t;
    }
    if (kind == "state_action") {
      StateActionReward sa;
      for (const auto& step : j.at("table")) {
        std::vector<double> flat;
        for (const auto& row : step) {
          for (double v : row) flat.push_back(v);
        }
        sa.values.push_back(std::move(flat));
      }
      return sa;
    }
    throw InvalidInput("unknown reward kind '" + kind + "'");
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("malformed reward: ") + e.what());
  } catch (const std::out_of_range&) {
    throw InvalidInput("reward table key out of range");
  }
}

nlohmann::json PolicyToJson(const TabularMdp& mdp, const Policy& pi) {
  const int A = mdp.num_actions();
  return std::visit(
      Overloaded{
          [&](const MarkovDeterministicPolicy& p) {
            return nlohmann::json{{"kind", "markov_det"}, {"action", p.action}};
          },
          [&](const MarkovStochasticPolicy& p) {
            nlohmann::json rows = nlohmann::json::array();
            for (const auto& step : p.prob) {
              nlohmann::json by_state = nlohmann::json::array();
              for (int s = 0; s < mdp.num_states(); ++s) {
                by_state.push_back(std::vector<double>(
                    step.begin() + s * A, step.begin() + (s + 1) * A));
              }
              rows.push_back(by_state);
            }
            return nlohmann::json{{"kind", "markov_stochastic"},
                                  {"prob", rows}};
          },
          [&](const HistoryDeterministicPolicy& p) {
            nlohmann::json steps = nlohmann::json::array();
            for (const auto& m : p.action) {
              nlohmann::json obj = nlohmann::json::object();
              for (const auto& [key, a] : m) obj[std::to_string(key)] = a;
              steps.push_back(obj);
            }
            return nlohmann::json{{"kind", "history_det"}, {"action", steps}};
          },
          [&](const TrajectoryMixture& m) {
            nlohmann::json w = nlohmann::json::object();
            for (std::size_t i = 0; i < m.size(); ++i) {
              w[std::to_string(m.ids[i])] = m.probs[i];
            }
            return nlohmann::json{{"kind", "mixture"}, {"weights", w}};
          }},
      pi);
}

Policy PolicyFromJson(const TabularMdp& mdp, const nlohmann::json& j) {
  try {
    const std::string kind = j.at("kind");
    Policy out;
    if (kind == "uniform") {
      out = UniformPolicy(mdp);
    } else if (kind == "markov_det") {
      out = MarkovDeterministicPolicy{
          j.at("action").get<std::vector<std::vector<int>>>()};
    } else if (kind == "markov_stochastic") {
      MarkovStochasticPolicy p;
      for (const auto& step : j.at("prob")) {
        std::vector<double> flat;
        for (const auto& row : step) {
          for (double v : row) flat.push_back(v);
        }
        p.prob.push_back(std::move(flat));
      }
      out = p;
    } else if (kind == "history_det") {
      HistoryDeterministicPolicy p;
      for (const auto& step : j.at("action")) {
        std::map<std::uint64_t, int> m;
        for (const auto& [key, a] : step.items()) {
          m[std::stoull(key)] = a.get<int>();
        }
        p.action.push_back(std::move(m));
      }
      out = p;
    } else if (kind == "mixture") {
      std::map<TrajectoryId, double> m;
      if (j.contains("weights")) {
        for (const auto& [key, p] : j.at("weights").items()) {
          m[std::stoull(key)] += p.get<double>();
        }
      } else {
        for (const auto& entry : j.at("trajectories")) {
          Trajectory tau;
          for (const auto& st : entry.at("steps")) {
            tau.push_back({st.at(0).get<int>(), st.at(1).get<int>()});
          }
          if (!mdp.InRange(tau)) throw InvalidInput("trajectory out of range");
          m[mdp.Encode(tau)] += entry.at("p").get<double>();
        }
      }
      out = TrajectoryMixture::FromMap(m);
    } else {
      throw InvalidInput("unknown policy kind '" + kind + "'");
    }
    ValidatePolicy(mdp, out);
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("malformed policy: ") + e.what());
  }
}

}  // namespace freehand
