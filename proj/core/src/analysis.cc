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

#include "freehand/analysis.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>

#include "freehand/errors.h"
#include "freehand/mle.h"
#include "freehand/parallel.h"
#include "freehand/random.h"

namespace freehand {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Numerators at or below this count as zero, so that rounding noise in
// r* - r cannot manufacture an infinite ratio.
constexpr double kRatioTol = 1e-12;

double Ratio(double num, double den) {
  if (num <= kRatioTol) return 0.0;
  return den > 0.0 ? num / den : kInf;
}

double PairedSquare(const std::vector<double>& e, const TrajectoryMixture& mu0,
                    const TrajectoryMixture& mu1) {
  double total = 0.0;
  for (std::size_t i = 0; i < mu0.size(); ++i) {
    for (std::size_t j = 0; j < mu1.size(); ++j) {
      double d = e[mu0.ids[i]] - e[mu1.ids[j]];
      total += mu0.probs[i] * mu1.probs[j] * d * d;
    }
  }
  return total;
}

template <typename Denominator>
double RewardCoefficient(const RewardClass& cls, const TabularMdp& mdp,
                         const Policy& pi_tar, const TrajectoryMixture& mu_ref,
                         const std::vector<double>& r_star, std::uint64_t cap,
                         double resolution, Denominator denominator_sq) {
  const TrajectoryMixture law = TrajectoryDistribution(mdp, pi_tar, cap);
  if (r_star.size() != mdp.NumTrajectories(cap)) {
    throw InvalidInput("r* must be dense over trajectories");
  }
  double sup = 0.0;
  std::vector<double> e(r_star.size());
  for (const auto& m : EnumerateMembers(cls, cap, resolution)) {
    for (std::size_t t = 0; t < e.size(); ++t) e[t] = r_star[t] - m.values[t];
    const double num = law.Expect(e) - mu_ref.Expect(e);
    sup = std::max(sup, Ratio(num, std::sqrt(denominator_sq(e))));
  }
  return sup;
}

double KlBernoulli(double p, double q) {
  double kl = 0.0;
  if (p > 0.0) kl += p * std::log(p / q);
  if (p < 1.0) kl += (1.0 - p) * std::log((1.0 - p) / (1.0 - q));
  return kl;
}

}  // namespace

double ConcentrabilityReward(const RewardClass& cls, const TabularMdp& mdp,
                             const Policy& pi_tar,
                             const TrajectoryMixture& mu_ref,
                             const TrajectoryMixture& mu0,
                             const TrajectoryMixture& mu1,
                             const std::vector<double>& r_star,
                             std::uint64_t cap, double resolution) {
  return RewardCoefficient(
      cls, mdp, pi_tar, mu_ref, r_star, cap, resolution,
      [&](const std::vector<double>& e) { return PairedSquare(e, mu0, mu1); });
}

double ConcentrabilityRewardEmpirical(
    const RewardClass& cls, const TabularMdp& mdp, const Policy& pi_tar,
    const TrajectoryMixture& mu_ref, const PreferenceDataset& data,
    const std::vector<double>& r_star, std::uint64_t cap, double resolution) {
  if (data.records.empty()) throw InvalidInput("empty dataset");
  const PairCounts counts = AggregatePairs(data);
  return RewardCoefficient(cls, mdp, pi_tar, mu_ref, r_star, cap, resolution,
                           [&](const std::vector<double>& e) {
                             double total = 0.0;
                             for (const auto& c : counts.entries) {
                               double d = e[c.tau0] - e[c.tau1];
                               total += (c.n0 + c.n1) * d * d;
                             }
                             return total / counts.total;
                           });
}

double ConcentrabilityPerTrajectory(const TabularMdp& mdp, const Policy& pi_tar,
                                    const TrajectoryMixture& mu0,
                                    std::uint64_t cap) {
  const TrajectoryMixture law = TrajectoryDistribution(mdp, pi_tar, cap);
  double sup = 0.0;
  for (std::size_t i = 0; i < law.size(); ++i) {
    if (law.probs[i] <= 0.0) continue;
    const double m = mu0.Prob(law.ids[i]);
    sup = std::max(sup, m > 0.0 ? law.probs[i] / m : kInf);
  }
  return sup;
}

double ConcentrabilityPerStep(const TabularMdp& mdp, const Policy& pi_tar,
                              const TrajectoryMixture& mu0, std::uint64_t cap) {
  const auto d =
      MarginalVisitations(mdp, TrajectoryDistribution(mdp, pi_tar, cap));
  const auto m = MarginalVisitations(mdp, mu0);
  double sup = 0.0;
  for (int h = 0; h < mdp.horizon(); ++h) {
    for (int i = 0; i < mdp.num_pairs(); ++i) {
      if (d[h][i] <= 0.0) continue;
      sup = std::max(sup, m[h][i] > 0.0 ? d[h][i] / m[h][i] : kInf);
    }
  }
  return sup;
}

double ConcentrabilityTransition(const TransitionClass& cls,
                                 const TabularMdp& mdp, const Policy& pi_tar,
                                 const TrajectoryMixture& mu0,
                                 const TrajectoryMixture& mu1,
                                 std::uint64_t cap, double resolution) {
  const int S = mdp.num_states(), rows = mdp.num_pairs();
  if (static_cast<int>(cls.steps.size()) != mdp.horizon() - 1) {
    throw InvalidInput("transition class needs H-1 steps");
  }
  const auto d =
      MarginalVisitations(mdp, TrajectoryDistribution(mdp, pi_tar, cap));
  const auto m0 = MarginalVisitations(mdp, mu0);
  const auto m1 = MarginalVisitations(mdp, mu1);
  double sup = 0.0;
  std::vector<double> l1(rows);
  for (int h = 0; h + 1 < mdp.horizon(); ++h) {
    const auto& truth = mdp.transitions(h);
    for (const auto& table : EnumerateTransitionMembers(
             cls.steps[h], S, mdp.num_actions(), resolution, cap)) {
      double num = 0.0, den = 0.0;
      for (int sa = 0; sa < rows; ++sa) {
        double dist = 0.0;
        for (int s2 = 0; s2 < S; ++s2) {
          dist += std::abs(table[sa * S + s2] - truth[sa * S + s2]);
        }
        num += d[h][sa] * dist;
        den += 0.5 * (m0[h][sa] + m1[h][sa]) * dist * dist;
      }
      sup = std::max(sup, Ratio(num, std::sqrt(den)));
    }
  }
  return sup;
}

double ConcentrabilityTransitionBound(const TabularMdp& mdp,
                                      const Policy& pi_tar,
                                      const TrajectoryMixture& mu0,
                                      const TrajectoryMixture& mu1,
                                      std::uint64_t cap) {
  const auto d =
      MarginalVisitations(mdp, TrajectoryDistribution(mdp, pi_tar, cap));
  const auto m0 = MarginalVisitations(mdp, mu0);
  const auto m1 = MarginalVisitations(mdp, mu1);
  double sup = 0.0;
  for (int h = 0; h + 1 < mdp.horizon(); ++h) {
    for (int i = 0; i < mdp.num_pairs(); ++i) {
      if (d[h][i] <= 0.0) continue;
      const double m = 0.5 * (m0[h][i] + m1[h][i]);
      sup = std::max(sup, m > 0.0 ? d[h][i] / m : kInf);
    }
  }
  return sup;
}

TrajectoryOptimum SolveTrajectoryReward(const TabularMdp& mdp,
                                        const std::vector<double>& r) {
  const int S = mdp.num_states(), A = mdp.num_actions(), H = mdp.horizon();
  if (r.size() != mdp.NumTrajectories()) {
    throw InvalidInput("reward must be dense over trajectories");
  }
  TrajectoryOptimum out;
  out.policy.action.resize(H);
  std::function<double(int, std::uint64_t, int)> value =
      [&](int h, std::uint64_t prefix, int s) {
        double best = -kInf;
        int arg = 0;
        for (int a = 0; a < A; ++a) {
          const std::uint64_t next = prefix * mdp.num_pairs() + (s * A + a);
          double v = 0.0;
          if (h + 1 == H) {
            v = r[next];
          } else {
            const double* row = mdp.transition_row(h, s, a);
            for (int s2 = 0; s2 < S; ++s2) {
              if (row[s2] > 0.0) v += row[s2] * value(h + 1, next, s2);
            }
          }
          if (v > best) {
            best = v;
            arg = a;
          }
        }
        out.policy.action[h][HistoryKey(mdp, prefix, s)] = arg;
        return best;
      };
  for (int s = 0; s < S; ++s) {
    if (mdp.initial()[s] > 0.0) out.value += mdp.initial()[s] * value(0, 0, s);
  }
  return out;
}

Prop2Instance MakeProp2Instance(
    int num_states, int num_actions, int horizon, double C,
    std::optional<MarkovStochasticPolicy> target,
    std::optional<std::vector<std::vector<double>>> chain) {
  if (num_states < 1 || num_actions < 2 || horizon < 1 || !(C >= 1.0)) {
    throw InvalidParams("need S >= 1, A >= 2, H >= 1 and C >= 1");
  }
  const int S = num_states, A = num_actions, H = horizon;
  std::vector<std::vector<double>> tables;
  for (int h = 0; h + 1 < H; ++h) {
    std::vector<double> t(static_cast<std::size_t>(S) * A * S, 1.0 / S);
    if (chain) {
      const auto& c = chain->at(h);
      if (static_cast<int>(c.size()) != S * S) {
        throw InvalidParams("chain tables must be S x S");
      }
      for (int s = 0; s < S; ++s) {
        for (int a = 0; a < A; ++a) {
          std::copy(c.begin() + s * S, c.begin() + (s + 1) * S,
                    t.begin() + (s * A + a) * S);
        }
      }
    }
    tables.push_back(std::move(t));
  }
  Prop2Instance out;
  out.C = C;
  out.mdp = TabularMdp(H, S, A, std::vector<double>(S, 1.0 / S),
                       std::move(tables), 1.0);
  out.target = target ? *target : UniformPolicy(out.mdp);
  ValidatePolicy(out.mdp, out.target);
  out.behavior = out.target;
  for (int h = 0; h < H; ++h) {
    for (int s = 0; s < S; ++s) {
      auto& b = out.behavior.prob[h];
      const double p1 = out.target.prob[h][s * A];
      if (!(p1 > 0.0)) {
        throw InvalidParams("target must give action 0 positive probability");
      }
      b[s * A] = p1 / C;
      b[s * A + 1] += (1.0 - 1.0 / C) * p1;
    }
  }
  out.mu0 = TrajectoryDistribution(out.mdp, out.behavior);
  return out;
}

LowerBoundKind ParseLowerBoundKind(const std::string& name) {
  if (name == "st") return LowerBoundKind::kPerStep;
  if (name == "tr") return LowerBoundKind::kPerTrajectory;
  throw InvalidInput("lower-bound kind must be 'st' or 'tr', got '" + name +
                     "'");
}

std::string LowerBoundKindName(LowerBoundKind kind) {
  return kind == LowerBoundKind::kPerStep ? "st" : "tr";
}

LowerBoundInstance MakeLowerBoundInstance(LowerBoundKind kind, double C, int H,
                                          int N) {
  if (!(C > 1.0) || H < 1 || N < 1) {
    throw InvalidParams("need C > 1, H >= 1 and N >= 1");
  }
  const double e_half = std::exp(0.5);
  LowerBoundInstance p;
  p.kind = kind;
  p.C = C;
  p.H = H;
  p.N = N;
  p.two_state = C < 2.0;
  const int S = p.two_state ? 2 : 1, A = 2;
  std::vector<double> rho = p.two_state ? std::vector<double>{C - 1.0, 2.0 - C}
                                        : std::vector<double>{1.0};
  p.mdp = TabularMdp::Stationary(H, S, A, rho, 1.0);
  auto constant = [&](int s, int a) {
    return p.mdp.Encode(Trajectory(H, Step{s, a}));
  };
  p.special = constant(0, 0);

  std::map<TrajectoryId, double> mu;
  const double two_h = std::pow(2.0, H);
  if (!p.two_state) {
    if (kind == LowerBoundKind::kPerStep) {
      // Product of per-step laws (1/C, 1 - 1/C).
      for (TrajectoryId id = 0; id < p.mdp.NumTrajectories(); ++id) {
        double prob = 1.0;
        for (const Step& st : p.mdp.Decode(id)) {
          prob *= st.action == 0 ? 1.0 / C : 1.0 - 1.0 / C;
        }
        mu[id] += prob;
      }
      p.x = std::min(0.5, std::sqrt(std::pow(C, H) / (2.0 * e_half * N)));
      p.kl_bound = 2.0 * e_half * p.x * p.x / std::pow(C, H);
    } else {
      mu[constant(0, 0)] += 1.0 / C;
      mu[constant(0, 1)] += 1.0 - 1.0 / C;
      p.x = std::min(0.5, std::sqrt(C / (2.0 * e_half * N)));
      p.kl_bound = 2.0 * e_half * p.x * p.x / C;
    }
    p.separation = p.x;
  } else {
    if (kind == LowerBoundKind::kPerStep) {
      // Uniform over action sequences in state 0.
      for (TrajectoryId id = 0; id < p.mdp.NumTrajectories(); ++id) {
        const Trajectory tau = p.mdp.Decode(id);
        bool stays = std::all_of(tau.begin(), tau.end(),
                                 [](const Step& st) { return st.state == 0; });
        if (stays) mu[id] += 2.0 * (C - 1.0) / C / two_h;
      }
      p.x =
          std::min(0.5, std::sqrt(two_h * C / (4.0 * e_half * (C - 1.0) * N)));
      p.kl_bound = 4.0 * (C - 1.0) * e_half * p.x * p.x / (two_h * C);
    } else {
      mu[constant(0, 0)] += (C - 1.0) / C;
      mu[constant(0, 1)] += (C - 1.0) / C;
      p.x = std::min(0.5, std::sqrt(C / (2.0 * e_half * (C - 1.0) * N)));
      p.kl_bound = 2.0 * (C - 1.0) * e_half * p.x * p.x / C;
    }
    mu[constant(1, 0)] += (2.0 - C) / C;
    p.separation = (C - 1.0) * p.x;
  }
  p.proof_bound = 0.5 * p.separation;
  p.mu = TrajectoryMixture::FromMap(mu);
  ValidatePolicy(p.mdp, p.mu);

  const std::uint64_t T = p.mdp.NumTrajectories();
  p.r1.assign(T, 0.5);
  p.r2.assign(T, 0.5);
  p.r1[p.special] = 0.5 + p.x;
  p.r2[p.special] = 0.5 - p.x;

  p.target1.action.assign(H, std::vector<int>(S, 0));
  p.target2.action.assign(H, std::vector<int>(S, 1));
  // In the absorbing second state any action is optimal; keep the covered one.
  if (p.two_state) {
    for (int h = 0; h < H; ++h) p.target2.action[h][1] = 0;
  }
  return p;
}

double LowerBoundRate(LowerBoundKind kind, double C, int H, int N) {
  const double scale = kind == LowerBoundKind::kPerStep
                           ? std::pow(std::max(C, 2.0), H - 1)
                           : 1.0;
  return std::min(C - 1.0, std::sqrt(scale * (C - 1.0) / N));
}

double InstancePairKl(const LowerBoundInstance& pair) {
  const auto& mu = pair.mu;
  double kl = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    for (std::size_t j = 0; j < mu.size(); ++j) {
      const TrajectoryId t0 = mu.ids[i], t1 = mu.ids[j];
      const double p = Sigmoid(pair.r1[t1] - pair.r1[t0]);
      const double q = Sigmoid(pair.r2[t1] - pair.r2[t0]);
      kl += mu.probs[i] * mu.probs[j] * KlBernoulli(p, q);
    }
  }
  return kl;
}

PolicyEstimator GreedyMleEstimator() {
  return [](const PreferenceDataset& data, const LowerBoundInstance& pair) {
    RewardClass cls = FiniteRewardClass{{pair.r1, pair.r2}};
    RewardFit fit = FitRewardMle(cls, data, SigmoidLink());
    return Policy(SolveTrajectoryReward(pair.mdp, fit.model.values).policy);
  };
}

PolicyEstimator UniformEstimator() {
  return [](const PreferenceDataset&, const LowerBoundInstance& pair) {
    return Policy(UniformPolicy(pair.mdp));
  };
}

PolicyEstimator OracleEstimator(int member) {
  if (member != 1 && member != 2) throw InvalidInput("member must be 1 or 2");
  return [member](const PreferenceDataset&, const LowerBoundInstance& pair) {
    return Policy(
        SolveTrajectoryReward(pair.mdp, member == 1 ? pair.r1 : pair.r2)
            .policy);
  };
}

RiskEstimate MinimaxRiskEval(const PolicyEstimator& estimator,
                             const LowerBoundInstance& pair, int N, int reps,
                             std::uint64_t seed, int threads) {
  if (reps < 1 || N < 1) throw InvalidInput("need reps >= 1 and N >= 1");
  RiskEstimate out;
  out.lower_bound_rate = LowerBoundRate(pair.kind, pair.C, pair.H, N);
  const LinkFunction link = SigmoidLink();
  for (int k = 1; k <= 2; ++k) {
    const std::vector<double>& r = k == 1 ? pair.r1 : pair.r2;
    const double best = SolveTrajectoryReward(pair.mdp, r).value;
    std::vector<double> loss(reps);
    ParallelFor(
        reps,
        [&](std::size_t i) {
          Rng rng = DeriveRng(seed, {static_cast<std::uint64_t>(k), i});
          PreferenceDataset data = GeneratePreferenceDataset(
              pair.mdp, TrajectoryReward{r}, link, pair.mu, pair.mu, N, rng);
          Policy pi = estimator(data, pair);
          loss[i] = best - EvaluatePolicy(pair.mdp, pi, TrajectoryReward{r});
        },
        threads);
    double mean = 0.0;
    for (double l : loss) mean += l / reps;
    double var = 0.0;
    for (double l : loss) var += (l - mean) * (l - mean);
    const double se = reps > 1 ? std::sqrt(var / (reps - 1) / reps) : 0.0;
    (k == 1 ? out.risk1 : out.risk2) = mean;
    (k == 1 ? out.se1 : out.se2) = se;
  }
  out.max_risk = std::max(out.risk1, out.risk2);
  return out;
}

}  // namespace freehand
