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

#include "freehand/action_based.h"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "freehand/errors.h"
#include "freehand/function_classes.h"
#include "freehand/preference.h"
#include "test_util.h"

namespace freehand {
namespace {

using ::freehand::testing::AllTrajectories;
using ::freehand::testing::DirectTrajectoryProb;
using ::freehand::testing::RandomMdp;
using ::freehand::testing::RandomSimplex;
using ::freehand::testing::RandomStateActionReward;

ActionDataLaws UniformLaws(const TabularMdp& mdp) {
  const int H = mdp.horizon(), S = mdp.num_states(), A = mdp.num_actions();
  ActionDataLaws laws;
  for (int h = 0; h < H; ++h) {
    laws.state.emplace_back(S, 1.0 / S);
    laws.a0.emplace_back(S * A, 1.0 / A);
    laws.a1.emplace_back(S * A, 1.0 / A);
  }
  return laws;
}

TEST(GreedyFromAdvantageTest, TruthGivesOptimalPolicy) {
  Rng rng(51);
  for (int trial = 0; trial < 10; ++trial) {
    TabularMdp mdp = RandomMdp(3, 2, 3, rng);
    RewardFunction r = RandomStateActionReward(mdp, rng);
    auto opt = ComputeOptimalValues(mdp, r);
    auto pi = GreedyFromAdvantage(mdp, opt.advantage);
    EXPECT_NEAR(EvaluatePolicy(mdp, pi, r),
                EvaluatePolicy(mdp, OptimalPolicy(mdp, r), r), 1e-12);
    EXPECT_NEAR(EvaluatePolicy(mdp, pi, r),
                opt.v[0][0] * mdp.initial()[0] + opt.v[0][1] * mdp.initial()[1],
                1e-12);
  }
}

TEST(GreedyFromAdvantageTest, TiesGoToActionZero) {
  TabularMdp mdp = TabularMdp::Stationary(2, 2, 3, {0.5, 0.5}, 1.0);
  std::vector<std::vector<double>> tables = {{0, 0, 0, -1, 0, 0},
                                             {-0.5, -0.5, -0.5, 0, 0, -2}};
  auto pi = GreedyFromAdvantage(mdp, tables);
  EXPECT_EQ(pi.action[0], (std::vector<int>{0, 1}));
  EXPECT_EQ(pi.action[1], (std::vector<int>{0, 0}));
}

TEST(GreedyFromAdvantageTest, InvariantToStateShifts) {
  Rng rng(52);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  TabularMdp mdp =
      TabularMdp::Stationary(3, 4, 3, {0.25, 0.25, 0.25, 0.25}, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::vector<double>> tables(3, std::vector<double>(12));
    for (auto& t : tables) {
      for (double& x : t) x = 0.25 * std::round(4 * u(rng));  // force ties
    }
    auto shifted = tables;
    for (auto& t : shifted) {
      for (int s = 0; s < 4; ++s) {
        const double c = 0.25 * std::round(4 * u(rng));
        for (int a = 0; a < 3; ++a) t[s * 3 + a] += c;
      }
    }
    EXPECT_EQ(GreedyFromAdvantage(mdp, tables).action,
              GreedyFromAdvantage(mdp, shifted).action);
  }
}

TEST(RunFreehandActionTest, LargeSampleWideGap) {
  // Per-state gap 1; the chain stays put so Q gaps equal reward gaps.
  TabularMdp mdp = TabularMdp::Stationary(2, 2, 2, {0.5, 0.5}, 2.0);
  StateActionReward r{{{1.0, 0.0, 0.0, 1.0}, {0.0, 1.0, 1.0, 0.0}}};
  Rng rng(53);
  auto data = GenerateActionDataset(mdp, r, SigmoidLink(), UniformLaws(mdp),
                                    100'000, rng);
  auto run = RunFreehandAction(mdp, r, data, TabularAdvantageClass(2, 2.0, 0.5),
                               SigmoidLink());
  EXPECT_LE(run.suboptimality, 0.01);
  EXPECT_NEAR(run.optimal_value, 2.0, 1e-12);
}

TEST(RunFreehandActionTest, SingleActionHasNoSuboptimality) {
  Rng rng(54);
  TabularMdp mdp = RandomMdp(2, 2, 1, rng);
  RewardFunction r = RandomStateActionReward(mdp, rng);
  auto data =
      GenerateActionDataset(mdp, r, SigmoidLink(), UniformLaws(mdp), 50, rng);
  auto run = RunFreehandAction(mdp, r, data, TabularAdvantageClass(2, 1.0, 0.5),
                               SigmoidLink());
  EXPECT_EQ(run.suboptimality, 0.0);
}

TEST(MarginProfileTest, HardMargin) {
  TabularMdp mdp = TabularMdp::Stationary(1, 2, 2, {0.5, 0.5}, 1.0);
  StateActionReward r{{{1.0, 0.2, 0.1, 0.9}}};
  auto prof = ComputeMarginProfile(mdp, r, {0.1, 0.3, 0.5, 0.7});
  for (double m : prof.m) EXPECT_EQ(m, 0.0);
  EXPECT_TRUE(prof.hard_margin);
  EXPECT_TRUE(std::isinf(prof.beta));
  EXPECT_THROW(FitMarginExponent(prof.alphas, prof.m), DegenerateProfile);
}

TEST(MarginProfileTest, SingleGapSteps) {
  TabularMdp mdp = TabularMdp::Stationary(1, 1, 2, {1.0}, 1.0);
  StateActionReward r{{{0.5, 1.0}}};
  auto prof = ComputeMarginProfile(mdp, r, {0.25, 0.5, 0.75, 1.0});
  // Action 0 has gap 0.5; the optimal action has gap 0 and never counts.
  EXPECT_EQ(prof.per_action[0], (std::vector<double>{0, 0, 1, 1}));
  EXPECT_EQ(prof.per_action[1], (std::vector<double>{0, 0, 0, 0}));
  EXPECT_EQ(prof.m, (std::vector<double>{0, 0, 1, 1}));
}

TEST(MarginProfileTest, UniformGapsGiveUnitExponent) {
  const int S = 200;
  TabularMdp mdp =
      TabularMdp::Stationary(1, S, 2, std::vector<double>(S, 1.0 / S), 1.0);
  StateActionReward r;
  r.values.assign(1, std::vector<double>(2 * S));
  for (int s = 0; s < S; ++s) {
    r.values[0][2 * s] = 1.0;
    r.values[0][2 * s + 1] = 1.0 - static_cast<double>(s + 1) / S;
  }
  std::vector<double> alphas;
  for (double a = 0.05; a < 0.96; a += 0.05) alphas.push_back(a);
  auto prof = ComputeMarginProfile(mdp, r, alphas);
  for (std::size_t k = 0; k < alphas.size(); ++k) {
    EXPECT_NEAR(prof.m[k], alphas[k], 1.0 / S + 1e-12);
    if (k > 0) EXPECT_GE(prof.m[k], prof.m[k - 1]);
  }
  auto fit = FitMarginExponent(alphas, prof.m);
  EXPECT_GE(fit.beta, 0.8);
  EXPECT_LE(fit.beta, 1.2);
}

TEST(MarginProfileTest, MatchesTrajectoryEnumeration) {
  Rng rng(55);
  for (int trial = 0; trial < 10; ++trial) {
    TabularMdp mdp = RandomMdp(3, 2, 3, rng);
    RewardFunction r = RandomStateActionReward(mdp, rng);
    auto opt = ComputeOptimalValues(mdp, r);
    auto star = OptimalPolicy(mdp, r);
    MarkovStochasticPolicy as_stochastic;
    for (const auto& step : star.action) {
      std::vector<double> probs(2 * 3, 0.0);
      for (int s = 0; s < 2; ++s) probs[s * 3 + step[s]] = 1.0;
      as_stochastic.prob.push_back(probs);
    }
    const std::vector<double> alphas = {0.02, 0.05, 0.1, 0.2, 0.4};
    std::vector<std::vector<double>> oracle(3 * 3,
                                            std::vector<double>(alphas.size()));
    for (const auto& tau : AllTrajectories(mdp)) {
      const double p = DirectTrajectoryProb(mdp, as_stochastic, tau);
      if (p == 0.0) continue;
      for (int h = 0; h < 3; ++h) {
        const int s = tau[h].state;
        const double best = opt.q[h][s * 3 + star.action[h][s]];
        for (int a = 0; a < 3; ++a) {
          const double gap = std::abs(best - opt.q[h][s * 3 + a]);
          for (std::size_t k = 0; k < alphas.size(); ++k) {
            if (gap > 0 && gap < alphas[k]) oracle[h * 3 + a][k] += p;
          }
        }
      }
    }
    auto prof = ComputeMarginProfile(mdp, r, alphas);
    for (int i = 0; i < 9; ++i) {
      for (std::size_t k = 0; k < alphas.size(); ++k) {
        EXPECT_NEAR(prof.per_action[i][k], oracle[i][k], 1e-12);
      }
    }
  }
}

TEST(KappaActionTest, SigmoidAtUnitBound) {
  const double e = std::exp(1.0);
  EXPECT_NEAR(KappaAction(SigmoidLink(), 1.0), (1 + e) * (1 + e) / e, 1e-12);
  EXPECT_NEAR(KappaAction(SigmoidLink(), 1.0), 5.0862, 1e-4);
}

TEST(ConcentrabilityActionTest, ZeroWhenClassIsTheTruth) {
  // Constant rewards give A* = 0; zero features make 0 the only member.
  TabularMdp mdp = TabularMdp::Stationary(2, 2, 2, {0.5, 0.5}, 1.0);
  StateActionReward r{{{0.3, 0.3, 0.3, 0.3}, {0.1, 0.1, 0.1, 0.1}}};
  AdvantageStepClass zero;
  zero.features.assign(4, std::vector<double>{0.0});
  EXPECT_EQ(ConcentrabilityAction(AdvantageClass{{zero, zero}}, mdp, r,
                                  UniformLaws(mdp)),
            0.0);
}

TEST(ConcentrabilityActionTest, BelowProductBound) {
  Rng rng(56);
  for (int trial = 0; trial < 10; ++trial) {
    TabularMdp mdp = RandomMdp(2, 2, 2, rng);
    RewardFunction r = RandomStateActionReward(mdp, rng);
    ActionDataLaws laws;
    for (int h = 0; h < 2; ++h) {
      laws.state.push_back(RandomSimplex(2, rng));
      std::vector<double> a0, a1;
      for (int s = 0; s < 2; ++s) {
        auto p0 = RandomSimplex(2, rng), p1 = RandomSimplex(2, rng);
        a0.insert(a0.end(), p0.begin(), p0.end());
        a1.insert(a1.end(), p1.begin(), p1.end());
      }
      laws.a0.push_back(a0);
      laws.a1.push_back(a1);
    }
    AdvantageClass cls = TabularAdvantageClass(2, 0.5, 0.25);
    EXPECT_LE(ConcentrabilityAction(cls, mdp, r, laws),
              ConcentrabilityActionBound(mdp, r, laws) * (1 + 1e-12));
  }
}

TEST(ConcentrabilityActionTest, OnPolicyLawsHaveUnitBound) {
  Rng rng(57);
  TabularMdp mdp = RandomMdp(2, 2, 2, rng);
  RewardFunction r = RandomStateActionReward(mdp, rng);
  auto star = OptimalPolicy(mdp, r);
  auto visits = Visitations(mdp, star);
  ActionDataLaws laws;
  for (int h = 0; h < 2; ++h) {
    std::vector<double> state(2, 0.0), a0(4, 0.0);
    for (int s = 0; s < 2; ++s) {
      state[s] = visits[h][s * 2] + visits[h][s * 2 + 1];
      a0[s * 2 + star.action[h][s]] = 1.0;
    }
    laws.state.push_back(state);
    laws.a0.push_back(a0);
    laws.a1.emplace_back(4, 0.5);
  }
  EXPECT_NEAR(ConcentrabilityActionBound(mdp, r, laws), 1.0, 1e-12);
  EXPECT_LE(
      ConcentrabilityAction(TabularAdvantageClass(2, 0.5, 0.25), mdp, r, laws),
      1.0 + 1e-12);
}

TEST(ConcentrabilityActionTest, MissingActionIsInfinite) {
  TabularMdp mdp = TabularMdp::Stationary(1, 1, 2, {1.0}, 1.0);
  StateActionReward r{{{0.2, 0.6}}};
  // Only (0, 0) comparisons are ever shown; pi* plays action 1.
  ActionDataLaws laws{{{1.0}}, {{1.0, 0.0}}, {{1.0, 0.0}}};
  EXPECT_TRUE(std::isinf(
      ConcentrabilityAction(TabularAdvantageClass(1, 1.0, 0.5), mdp, r, laws)));
}

}  // namespace
}  // namespace freehand
