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

#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <nlohmann/json.hpp>
#include <set>

#include "freehand/errors.h"
#include "test_util.h"

namespace freehand {
namespace {

using testing::AllTrajectories;
using testing::DirectTrajectoryProb;
using testing::RandomDeterministicPolicy;
using testing::RandomMdp;
using testing::RandomStateActionReward;
using testing::RandomStochasticPolicy;

TEST(TabularMdpTest, RejectsUnnormalizedInputs) {
  EXPECT_THROW(TabularMdp(1, 2, 1, {0.5, 0.6}, {}, 1.0), InvalidInput);
  EXPECT_THROW(TabularMdp(2, 1, 1, {1.0}, {{1.1}}, 1.0), InvalidInput);
  EXPECT_THROW(TabularMdp(2, 2, 1, {1.0, 0.0}, {{1.0, 0.0, -0.1, 1.1}}, 1.0),
               InvalidInput);
  EXPECT_THROW(TabularMdp(0, 1, 1, {1.0}, {}, 1.0), InvalidInput);
  EXPECT_NO_THROW(TabularMdp(1, 2, 1, {0.5, 0.5}, {}, 1.0));
}

TEST(TabularMdpTest, EncodeDecodeRoundTripsInLexicographicOrder) {
  Rng rng(1);
  TabularMdp mdp = RandomMdp(3, 2, 3, rng);
  const auto all = AllTrajectories(mdp);
  ASSERT_EQ(all.size(), mdp.NumTrajectories());
  for (std::size_t i = 0; i < all.size(); ++i) {
    EXPECT_EQ(mdp.Encode(all[i]), i);
    EXPECT_EQ(mdp.Decode(i), all[i]);
  }
}

TEST(TrajectoryDistributionTest, OneStateUniformIsHalfEach) {
  TabularMdp mdp = TabularMdp::Stationary(1, 1, 2, {1.0}, 1.0);
  TrajectoryMixture d = TrajectoryDistribution(mdp, UniformPolicy(mdp));
  ASSERT_EQ(d.size(), 2u);
  EXPECT_DOUBLE_EQ(d.Prob(0), 0.5);
  EXPECT_DOUBLE_EQ(d.Prob(1), 0.5);
}

TEST(TrajectoryDistributionTest, DeterministicEverythingGivesOneTrajectory) {
  // s0 -> a1 -> s1 with certainty.
  TabularMdp mdp(2, 2, 2, {1.0, 0.0},
                 {{1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0}}, 1.0);
  MarkovDeterministicPolicy pi{{{1, 1}, {0, 0}}};
  TrajectoryMixture d = TrajectoryDistribution(mdp, pi);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(mdp.Decode(d.ids[0]), (Trajectory{{0, 1}, {1, 0}}));
  EXPECT_DOUBLE_EQ(d.probs[0], 1.0);
}

TEST(TrajectoryDistributionTest, MatchesDirectProductFormula) {
  Rng rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    TabularMdp mdp = RandomMdp(3, 2, 2, rng);
    auto pi = RandomStochasticPolicy(mdp, rng);
    TrajectoryMixture d = TrajectoryDistribution(mdp, pi);
    EXPECT_NEAR(testing::SumOf(d.probs), 1.0, 1e-10);
    for (const Trajectory& tau : AllTrajectories(mdp)) {
      EXPECT_NEAR(d.Prob(mdp.Encode(tau)), DirectTrajectoryProb(mdp, pi, tau),
                  1e-15);
    }
  }
}

TEST(TrajectoryDistributionTest, MatchesMonteCarloFrequencies) {
  Rng rng(3);
  TabularMdp mdp = RandomMdp(2, 2, 2, rng);
  auto pi = RandomStochasticPolicy(mdp, rng);
  TrajectoryMixture d = TrajectoryDistribution(mdp, pi);
  const int n = 1'000'000;
  std::map<TrajectoryId, int> counts;
  for (int i = 0; i < n; ++i)
    ++counts[mdp.Encode(SampleTrajectory(mdp, pi, rng))];
  for (std::size_t k = 0; k < d.size(); ++k) {
    const double p = d.probs[k];
    const double se = std::sqrt(p * (1 - p) / n);
    EXPECT_NEAR(counts[d.ids[k]] / double(n), p, 3 * se + 1e-12);
  }
  for (const auto& [id, c] : counts) EXPECT_GT(d.Prob(id), 0.0);
}

TEST(TrajectoryDistributionTest, CapIsEnforced) {
  TabularMdp mdp = TabularMdp::Stationary(10, 2, 2, {0.5, 0.5}, 1.0);
  EXPECT_THROW(TrajectoryDistribution(mdp, UniformPolicy(mdp)),
               EnumerationTooLarge);
  EXPECT_NO_THROW(TrajectoryDistribution(mdp, UniformPolicy(mdp), 1u << 20));
}

TEST(EvaluatePolicyTest, ZeroRewardGivesZero) {
  Rng rng(4);
  TabularMdp mdp = RandomMdp(2, 2, 2, rng);
  TrajectoryReward r{std::vector<double>(mdp.NumTrajectories(), 0.0)};
  EXPECT_EQ(EvaluatePolicy(mdp, UniformPolicy(mdp), r), 0.0);
}

TEST(EvaluatePolicyTest, OneStepExpectation) {
  TabularMdp mdp = TabularMdp::Stationary(1, 1, 2, {1.0}, 1.0);
  StateActionReward r{{{0.9, 0.1}}};
  MarkovStochasticPolicy pi{{{0.3, 0.7}}};
  EXPECT_NEAR(EvaluatePolicy(mdp, pi, r), 0.34, 1e-15);
}

TEST(EvaluatePolicyTest, DynamicProgrammingMatchesEnumeration) {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    TabularMdp mdp = RandomMdp(3, 2, 2, rng);
    auto pi = RandomStochasticPolicy(mdp, rng);
    auto r = RandomStateActionReward(mdp, rng);
    // Enumeration oracle: sum over all trajectories of prob * summed reward.
    double oracle = 0.0;
    for (const Trajectory& tau : AllTrajectories(mdp)) {
      double ret = 0.0;
      for (int h = 0; h < mdp.horizon(); ++h) {
        ret += r.values[h][tau[h].state * mdp.num_actions() + tau[h].action];
      }
      oracle += DirectTrajectoryProb(mdp, pi, tau) * ret;
    }
    EXPECT_NEAR(EvaluatePolicy(mdp, pi, r), oracle, 1e-9);
    EXPECT_NEAR(EvaluatePolicy(mdp, TrajectoryDistribution(mdp, pi), r), oracle,
                1e-9);
  }
}

TEST(EvaluatePolicyTest, LinearInReward) {
  Rng rng(6);
  TabularMdp mdp = RandomMdp(2, 2, 3, rng);
  auto pi = RandomStochasticPolicy(mdp, rng);
  auto r1 = testing::RandomTrajectoryTable(mdp, rng);
  auto r2 = testing::RandomTrajectoryTable(mdp, rng);
  const double alpha = 0.3;
  std::vector<double> mix(r1.size());
  for (std::size_t i = 0; i < mix.size(); ++i) {
    mix[i] = alpha * r1[i] + (1 - alpha) * r2[i];
  }
  const double lhs = EvaluatePolicy(mdp, pi, TrajectoryReward{mix});
  const double rhs =
      alpha * EvaluatePolicy(mdp, pi, TrajectoryReward{r1}) +
      (1 - alpha) * EvaluatePolicy(mdp, pi, TrajectoryReward{r2});
  EXPECT_NEAR(lhs, rhs, 1e-12);
}

TEST(VisitationTest, FirstStepIsInitialTimesPolicy) {
  Rng rng(7);
  TabularMdp mdp = RandomMdp(3, 3, 2, rng);
  auto pi = RandomStochasticPolicy(mdp, rng);
  auto d0 = Visitation(mdp, pi, 0);
  for (int s = 0; s < 3; ++s) {
    for (int a = 0; a < 2; ++a) {
      EXPECT_EQ(d0[s * 2 + a], mdp.initial()[s] * pi.prob[0][s * 2 + a]);
    }
  }
}

TEST(VisitationTest, UniformOneStateIsHalfPerAction) {
  TabularMdp mdp = TabularMdp::Stationary(4, 1, 2, {1.0}, 1.0);
  for (const auto& d : Visitations(mdp, UniformPolicy(mdp))) {
    EXPECT_DOUBLE_EQ(d[0], 0.5);
    EXPECT_DOUBLE_EQ(d[1], 0.5);
  }
}

TEST(VisitationTest, MarginalizesTrajectoryDistribution) {
  Rng rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    TabularMdp mdp = RandomMdp(3, 2, 3, rng);
    auto pi = RandomStochasticPolicy(mdp, rng);
    auto dists = Visitations(mdp, pi);
    std::vector<std::vector<double>> oracle(3, std::vector<double>(6, 0.0));
    for (const Trajectory& tau : AllTrajectories(mdp)) {
      const double p = DirectTrajectoryProb(mdp, pi, tau);
      for (int h = 0; h < 3; ++h)
        oracle[h][tau[h].state * 3 + tau[h].action] += p;
    }
    for (int h = 0; h < 3; ++h) {
      EXPECT_NEAR(testing::SumOf(dists[h]), 1.0, 1e-10);
      for (int i = 0; i < 6; ++i) EXPECT_NEAR(dists[h][i], oracle[h][i], 1e-10);
    }
  }
}

TEST(SampleTrajectoryTest, DeterministicCaseAndReplay) {
  TabularMdp mdp(2, 2, 2, {0.0, 1.0},
                 {{0.0, 1.0, 1.0, 0.0, 1.0, 0.0, 0.0, 1.0}}, 1.0);
  MarkovDeterministicPolicy pi{{{0, 0}, {1, 1}}};
  Rng rng(9);
  EXPECT_EQ(SampleTrajectory(mdp, pi, rng), (Trajectory{{1, 0}, {0, 1}}));

  Rng rng2(9);
  TabularMdp random_mdp = RandomMdp(3, 3, 3, rng2);
  auto rpi = RandomStochasticPolicy(random_mdp, rng2);
  Rng a(77), b(77);
  for (int i = 0; i < 100; ++i) {
    EXPECT_EQ(SampleTrajectory(random_mdp, rpi, a),
              SampleTrajectory(random_mdp, rpi, b));
  }
}

TEST(SampleTrajectoryTest, HistoryPolicyFrequenciesMatchDistribution) {
  Rng rng(10);
  TabularMdp mdp = RandomMdp(2, 2, 2, rng);
  PolicyEnumerator e(mdp, PolicyKind::kHistoryDeterministic);
  Policy pi = e.At(e.size() / 3);
  TrajectoryMixture d = TrajectoryDistribution(mdp, pi);
  const int n = 100'000;
  std::map<TrajectoryId, int> counts;
  for (int i = 0; i < n; ++i)
    ++counts[mdp.Encode(SampleTrajectory(mdp, pi, rng))];
  for (std::size_t k = 0; k < d.size(); ++k) {
    const double p = d.probs[k];
    EXPECT_NEAR(counts[d.ids[k]] / double(n), p,
                4 * std::sqrt(p * (1 - p) / n) + 1e-12);
  }
}

TEST(OptimalValuesTest, SingleStepQIsReward) {
  TabularMdp mdp = TabularMdp::Stationary(1, 2, 3, {0.4, 0.6}, 1.0);
  StateActionReward r{{{0.1, 0.5, 0.2, 0.9, 0.0, 0.3}}};
  OptimalValues ov = ComputeOptimalValues(mdp, r);
  EXPECT_EQ(ov.q[0], r.values[0]);
  EXPECT_EQ(ov.v[0], (std::vector<double>{0.5, 0.9}));
}

TEST(OptimalValuesTest, AdvantageMaxIsZeroAndGreedyAttainsValue) {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    TabularMdp mdp = RandomMdp(3, 3, 2, rng);
    auto r = RandomStateActionReward(mdp, rng);
    OptimalValues ov = ComputeOptimalValues(mdp, r);
    for (int h = 0; h < 3; ++h) {
      for (int s = 0; s < 3; ++s) {
        double m = -1.0;
        for (int a = 0; a < 2; ++a) {
          EXPECT_LE(ov.advantage[h][s * 2 + a], 0.0);
          m = std::max(m, ov.advantage[h][s * 2 + a]);
        }
        EXPECT_EQ(m, 0.0);
      }
    }
    auto greedy = GreedyPolicy(mdp, ov.q);
    double v1 = 0.0;
    for (int s = 0; s < 3; ++s) v1 += mdp.initial()[s] * ov.v[0][s];
    EXPECT_NEAR(EvaluatePolicy(mdp, greedy, r), v1, 1e-9);
    // No deterministic policy beats it.
    PolicyEnumerator e(mdp, PolicyKind::kMarkovDeterministic);
    for (std::uint64_t i = 0; i < e.size(); ++i) {
      EXPECT_LE(EvaluatePolicy(mdp, e.At(i), r), v1 + 1e-12);
    }
  }
}

TEST(OptimalValuesTest, TrajectoryRewardIsAKindMismatch) {
  TabularMdp mdp = TabularMdp::Stationary(1, 1, 2, {1.0}, 1.0);
  EXPECT_THROW(ComputeOptimalValues(mdp, TrajectoryReward{{0.0, 1.0}}),
               RewardKindMismatch);
}

TEST(GreedyPolicyTest, TiesBreakTowardLowestAction) {
  TabularMdp mdp = TabularMdp::Stationary(1, 1, 3, {1.0}, 1.0);
  auto pi = GreedyPolicy(mdp, {{0.2, 0.7, 0.7}});
  EXPECT_EQ(pi.action[0][0], 1);
}

TEST(PolicyEnumeratorTest, Counts) {
  EXPECT_EQ(PolicyEnumerator(TabularMdp::Stationary(2, 1, 2, {1.0}, 1.0),
                             PolicyKind::kMarkovDeterministic)
                .size(),
            4u);
  // Full-support dynamics: 2 histories at h=0, 8 at h=1.
  Rng rng(12);
  TabularMdp mdp = RandomMdp(2, 2, 2, rng);
  EXPECT_EQ(PolicyEnumerator(mdp, PolicyKind::kHistoryDeterministic).size(),
            1024u);
  EXPECT_EQ(PolicyEnumerator(mdp, PolicyKind::kMarkovDeterministic).size(),
            16u);
  EXPECT_EQ(PolicyEnumerator(TabularMdp::Stationary(3, 1, 1, {1.0}, 1.0),
                             PolicyKind::kHistoryDeterministic)
                .size(),
            1u);
  EXPECT_THROW(PolicyEnumerator(TabularMdp::Stationary(5, 3, 3, {1, 0, 0}, 1),
                                PolicyKind::kMarkovDeterministic, 1000),
               EnumerationTooLarge);
}

TEST(PolicyEnumeratorTest, DuplicateFreeAndIndexZeroPlaysActionZero) {
  Rng rng(13);
  TabularMdp mdp = RandomMdp(2, 2, 2, rng);
  for (PolicyKind kind :
       {PolicyKind::kMarkovDeterministic, PolicyKind::kHistoryDeterministic}) {
    PolicyEnumerator e(mdp, kind);
    std::set<std::string> encodings;
    for (std::uint64_t i = 0; i < e.size(); ++i) {
      encodings.insert(PolicyToJson(mdp, e.At(i)).dump());
    }
    EXPECT_EQ(encodings.size(), e.size());
    TrajectoryMixture d0 = TrajectoryDistribution(mdp, e.At(0));
    for (TrajectoryId id : d0.ids) {
      for (const Step& st : mdp.Decode(id)) EXPECT_EQ(st.action, 0);
    }
  }
}

TEST(PerformanceDifferenceTest, IdentityHoldsOnRandomInstances) {
  Rng rng(14);
  for (int trial = 0; trial < 25; ++trial) {
    TabularMdp mdp = RandomMdp(4, 3, 2, rng);
    auto r = RandomStateActionReward(mdp, rng);
    auto pi = RandomDeterministicPolicy(mdp, rng);
    auto pi2 = RandomDeterministicPolicy(mdp, rng);
    auto q = PolicyQValues(mdp, pi, r);
    auto d2 = Visitations(mdp, pi2);
    double rhs = 0.0;
    for (int h = 0; h < 4; ++h) {
      for (int s = 0; s < 3; ++s) {
        double mass = 0.0;
        for (int a = 0; a < 2; ++a) mass += d2[h][s * 2 + a];
        rhs += mass *
               (q[h][s * 2 + pi2.action[h][s]] - q[h][s * 2 + pi.action[h][s]]);
      }
    }
    const double lhs = EvaluatePolicy(mdp, pi2, r) - EvaluatePolicy(mdp, pi, r);
    EXPECT_NEAR(lhs, rhs, 1e-9);
  }
}

TEST(SimulationBoundTest, ValueGapBoundedByWeightedL1Error) {
  Rng rng(15);
  for (int trial = 0; trial < 25; ++trial) {
    TabularMdp mdp = RandomMdp(3, 3, 2, rng);
    TabularMdp other = RandomMdp(3, 3, 2, rng);
    std::vector<std::vector<double>> mixed;
    const double w = std::uniform_real_distribution<double>(0, 1)(rng);
    for (int h = 0; h < 2; ++h) {
      std::vector<double> t(mdp.transitions(h).size());
      for (std::size_t i = 0; i < t.size(); ++i) {
        t[i] = (1 - w) * mdp.transitions(h)[i] + w * other.transitions(h)[i];
      }
      mixed.push_back(t);
    }
    TabularMdp perturbed = mdp.WithTransitions(mixed);
    auto pi = RandomStochasticPolicy(mdp, rng);
    auto table = testing::RandomTrajectoryTable(mdp, rng);
    TrajectoryReward r{table};
    const double gap =
        std::abs(EvaluatePolicy(mdp, pi, r) - EvaluatePolicy(perturbed, pi, r));
    auto d = Visitations(mdp, pi);
    double bound = 0.0;
    for (int h = 0; h < 2; ++h) {
      for (int sa = 0; sa < 6; ++sa) {
        double l1 = 0.0;
        for (int s2 = 0; s2 < 3; ++s2) {
          l1 +=
              std::abs(mdp.transitions(h)[sa * 3 + s2] - mixed[h][sa * 3 + s2]);
        }
        bound += d[h][sa] * l1;
      }
    }
    EXPECT_LE(gap, mdp.r_max() * bound + 1e-12);
  }
}

TEST(JsonTest, RoundTrips) {
  Rng rng(16);
  TabularMdp mdp = RandomMdp(2, 2, 2, rng);
  TabularMdp back = MdpFromJson(MdpToJson(mdp));
  EXPECT_EQ(back.initial(), mdp.initial());
  EXPECT_EQ(back.transitions(), mdp.transitions());
  auto table = testing::RandomTrajectoryTable(mdp, rng);
  RewardFunction r = TrajectoryReward{table};
  auto r_back = RewardFromJson(mdp, RewardToJson(mdp, r));
  EXPECT_EQ(std::get<TrajectoryReward>(r_back).values, table);
  auto pi = RandomStochasticPolicy(mdp, rng);
  auto pi_back = PolicyFromJson(mdp, PolicyToJson(mdp, pi));
  EXPECT_EQ(std::get<MarkovStochasticPolicy>(pi_back).prob, pi.prob);
  EXPECT_THROW(MdpFromJson(nlohmann::json::parse(R"({"H": 1})")), InvalidInput);
}

TEST(ValidationTest, RewardRangeAndMixtureSupport) {
  TabularMdp mdp(2, 2, 1, {1.0, 0.0}, {{1.0, 0.0, 0.0, 1.0}}, 1.0);
  EXPECT_THROW(ValidateReward(mdp, TrajectoryReward{{1.5, 0, 0, 0}}),
               InvalidInput);
  EXPECT_THROW(ValidateReward(mdp, StateActionReward{{{0.6, 0.0}, {0, 0}}}),
               InvalidInput);
  // Trajectory (s0, s1) is dynamically impossible.
  TrajectoryMixture bad{{1}, {1.0}};
  EXPECT_THROW(ValidatePolicy(mdp, bad), InvalidInput);
  TrajectoryMixture good{{0}, {1.0}};
  EXPECT_NO_THROW(ValidatePolicy(mdp, good));
}

}  // namespace
}  // namespace freehand
