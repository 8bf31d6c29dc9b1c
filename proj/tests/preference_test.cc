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

#include "freehand/preference.h"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "freehand/errors.h"
#include "test_util.h"

namespace freehand {
namespace {

double Logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

TEST(LinkTest, SigmoidSymmetryAndMonotonicity) {
  LinkFunction link = SigmoidLink();
  double prev = -1.0;
  for (double x = -30.0; x <= 30.0; x += 0.01) {
    EXPECT_NEAR(link.forward(x) + link.forward(-x), 1.0, 1e-12);
    EXPECT_GT(link.forward(x), prev);
    prev = link.forward(x);
  }
}

TEST(LinkTest, LogitIdentity) {
  LinkFunction link = SigmoidLink();
  for (double d : {-5.0, -1.0, -0.3, 0.0, 0.7, 2.5, 10.0}) {
    EXPECT_NEAR(link.LogProb(d) - link.LogComplement(d), d, 1e-10);
  }
}

TEST(LinkTest, LogProbsAreClampedNotInfinite) {
  LinkFunction link = SigmoidLink();
  EXPECT_TRUE(std::isfinite(link.LogProb(-1e6)));
  LinkFunction probit = CustomLink(
      "probit", [](double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); },
      [](double x) { return std::exp(-x * x / 2) / std::sqrt(2 * M_PI); });
  EXPECT_GE(probit.LogProb(-100.0), std::log(kLogClamp));
  EXPECT_TRUE(std::isfinite(probit.LogComplement(100.0)));
}

TEST(PrefProbTest, Examples) {
  LinkFunction link = SigmoidLink();
  EXPECT_EQ(PrefProb(link, 0.4, 0.4), 0.5);
  EXPECT_NEAR(PrefProb(link, 0.0, 1.0), Logistic(1.0), 1e-15);
  EXPECT_NEAR(PrefProb(link, 0.0, 1.0), 0.7310585786300049, 1e-15);
  // Swapping the pair exchanges the o = 1 and o = 0 probabilities.
  EXPECT_NEAR(PrefProb(link, 0.2, 0.9), 1.0 - PrefProb(link, 0.9, 0.2), 1e-15);
}

TEST(PrefProbTest, TrajectoryOverloadReadsTheRewardTable) {
  TabularMdp mdp = TabularMdp::Stationary(1, 1, 2, {1.0}, 1.0);
  RewardFunction r = TrajectoryReward{{0.25, 1.0}};
  EXPECT_NEAR(PrefProb(SigmoidLink(), mdp, r, 0, 1), Logistic(0.75), 1e-15);
  EXPECT_NEAR(PrefProb(SigmoidLink(), mdp, r, 1, 0), Logistic(-0.75), 1e-15);
}

TEST(ActionPrefProbTest, SameActionIsHalfAndQEqualsAdvantage) {
  LinkFunction link = SigmoidLink();
  Rng rng(1);
  for (int trial = 0; trial < 10; ++trial) {
    TabularMdp mdp = testing::RandomMdp(3, 3, 3, rng);
    auto r = testing::RandomStateActionReward(mdp, rng);
    OptimalValues ov = ComputeOptimalValues(mdp, r);
    for (int h = 0; h < 3; ++h) {
      for (int s = 0; s < 3; ++s) {
        EXPECT_EQ(ActionPrefProb(link, ov.q[h], 3, s, 1, 1), 0.5);
        for (int a0 = 0; a0 < 3; ++a0) {
          for (int a1 = 0; a1 < 3; ++a1) {
            const double pq = ActionPrefProb(link, ov.q[h], 3, s, a0, a1);
            EXPECT_NEAR(pq, ActionPrefProb(link, ov.advantage[h], 3, s, a0, a1),
                        1e-12);
            // Adding a state-only shift changes nothing.
            std::vector<double> shifted = ov.q[h];
            for (int a = 0; a < 3; ++a) shifted[s * 3 + a] += 0.37 * (s + 1);
            EXPECT_NEAR(pq, ActionPrefProb(link, shifted, 3, s, a0, a1), 1e-12);
            EXPECT_NEAR(pq + ActionPrefProb(link, ov.q[h], 3, s, a1, a0), 1.0,
                        1e-12);
          }
        }
      }
    }
  }
}

TEST(KappaTest, SigmoidValues) {
  LinkFunction link = SigmoidLink();
  EXPECT_NEAR(Kappa(link, 0.0), 4.0, 1e-12);
  const double s1 = Logistic(1.0);
  EXPECT_NEAR(Kappa(link, 1.0), 1.0 / (s1 * (1 - s1)), 1e-9);
  EXPECT_NEAR(Kappa(link, 1.0), 5.0862, 1e-4);
  for (double r : {0.1, 0.5, 2.0, 5.0}) EXPECT_GE(Kappa(link, r), 4.0);
}

TEST(KappaTest, DegenerateLinkIsRejected) {
  LinkFunction step = CustomLink(
      "steep", [](double x) { return x > 0 ? 1.0 : 0.0; },
      [](double) { return 0.0; });
  EXPECT_THROW(Kappa(step, 1.0), DegenerateLink);
}

TEST(GenerateTest, ConstantRewardGivesFairCoins) {
  Rng rng(2);
  TabularMdp mdp = testing::RandomMdp(2, 2, 2, rng);
  TrajectoryReward r{std::vector<double>(mdp.NumTrajectories(), 0.6)};
  const int n = 10'000;
  auto data = GeneratePreferenceDataset(
      mdp, r, SigmoidLink(), UniformPolicy(mdp), UniformPolicy(mdp), n, rng);
  ASSERT_EQ(data.size(), static_cast<std::size_t>(n));
  double ones = 0;
  for (const auto& rec : data.records) ones += rec.o;
  EXPECT_NEAR(ones / n, 0.5, 4 * std::sqrt(0.25 / n));
}

TEST(GenerateTest, PointMassesGiveSigmoidOfMinusOne) {
  TabularMdp mdp = TabularMdp::Stationary(1, 1, 2, {1.0}, 1.0);
  TrajectoryReward r{{1.0, 0.0}};  // tau* = action 0
  TrajectoryMixture at_star{{0}, {1.0}}, at_other{{1}, {1.0}};
  Rng rng(3);
  const int n = 100'000;
  auto data = GeneratePreferenceDataset(mdp, r, SigmoidLink(), at_star,
                                        at_other, n, rng);
  double ones = 0;
  for (const auto& rec : data.records) {
    ASSERT_EQ(rec.tau0, 0u);
    ASSERT_EQ(rec.tau1, 1u);
    ones += rec.o;
  }
  const double p = Logistic(-1.0);
  EXPECT_NEAR(p, 0.26894, 1e-5);
  EXPECT_NEAR(ones / n, p, 4 * std::sqrt(p * (1 - p) / n));
}

TEST(GenerateTest, FixedSeedReplaysAndSerializationRoundTrips) {
  Rng setup(4);
  TabularMdp mdp = testing::RandomMdp(3, 2, 2, setup);
  TrajectoryReward r{testing::RandomTrajectoryTable(mdp, setup)};
  auto mu0 = testing::RandomStochasticPolicy(mdp, setup);
  Rng a(11), b(11);
  auto d1 = GeneratePreferenceDataset(mdp, r, SigmoidLink(), mu0,
                                      UniformPolicy(mdp), 200, a);
  auto d2 = GeneratePreferenceDataset(mdp, r, SigmoidLink(), mu0,
                                      UniformPolicy(mdp), 200, b);
  EXPECT_EQ(d1.records, d2.records);
  std::stringstream ss;
  WritePreferenceDataset(ss, mdp, d1);
  auto back = ReadPreferenceDataset(ss, mdp);
  EXPECT_EQ(back.records, d1.records);
}

TEST(GenerateTest, SampledPairsFollowTheirLaws) {
  Rng rng(5);
  TabularMdp mdp = testing::RandomMdp(2, 2, 2, rng);
  auto mu0 = testing::RandomStochasticPolicy(mdp, rng);
  auto mu1 = testing::RandomStochasticPolicy(mdp, rng);
  TrajectoryReward r{testing::RandomTrajectoryTable(mdp, rng)};
  const int n = 100'000;
  auto data =
      GeneratePreferenceDataset(mdp, r, SigmoidLink(), mu0, mu1, n, rng);
  auto d0 = TrajectoryDistribution(mdp, mu0);
  auto d1 = TrajectoryDistribution(mdp, mu1);
  std::vector<double> c0(mdp.NumTrajectories()), c1(mdp.NumTrajectories());
  for (const auto& rec : data.records) {
    c0[rec.tau0] += 1;
    c1[rec.tau1] += 1;
  }
  for (TrajectoryId id = 0; id < mdp.NumTrajectories(); ++id) {
    for (auto [count, p] :
         {std::pair{c0[id], d0.Prob(id)}, std::pair{c1[id], d1.Prob(id)}}) {
      EXPECT_NEAR(count / n, p, 4 * std::sqrt(p * (1 - p) / n) + 1e-12);
    }
  }
}

TEST(GenerateActionTest, SingleActionIsUninformative) {
  TabularMdp mdp = TabularMdp::Stationary(2, 2, 1, {0.5, 0.5}, 1.0);
  StateActionReward r{{{0.1, 0.4}, {0.2, 0.3}}};
  ActionDataLaws laws{{{0.5, 0.5}, {0.5, 0.5}},
                      {{1.0, 1.0}, {1.0, 1.0}},
                      {{1.0, 1.0}, {1.0, 1.0}}};
  Rng rng(6);
  const int n = 10'000;
  auto data = GenerateActionDataset(mdp, r, SigmoidLink(), laws, n, rng);
  for (const auto& step : data.steps) {
    double ones = 0;
    for (const auto& rec : step) ones += rec.o;
    EXPECT_NEAR(ones / n, 0.5, 4 * std::sqrt(0.25 / n));
  }
}

TEST(GenerateActionTest, ConditionalLabelMeansMatch) {
  Rng rng(7);
  TabularMdp mdp = testing::RandomMdp(2, 2, 2, rng);
  auto r = testing::RandomStateActionReward(mdp, rng);
  OptimalValues ov = ComputeOptimalValues(mdp, r);
  ActionDataLaws laws;
  for (int h = 0; h < 2; ++h) {
    laws.state.push_back({0.5, 0.5});
    laws.a0.push_back({0.5, 0.5, 0.5, 0.5});
    laws.a1.push_back({0.5, 0.5, 0.5, 0.5});
  }
  const int n = 100'000;
  auto data = GenerateActionDataset(mdp, r, SigmoidLink(), laws, n, rng);
  for (int h = 0; h < 2; ++h) {
    std::vector<double> ones(8, 0.0), count(8, 0.0);
    for (const auto& rec : data.steps[h]) {
      const int cell = rec.state * 4 + rec.a0 * 2 + rec.a1;
      count[cell] += 1;
      ones[cell] += rec.o;
    }
    for (int s = 0; s < 2; ++s) {
      for (int a0 = 0; a0 < 2; ++a0) {
        for (int a1 = 0; a1 < 2; ++a1) {
          const int cell = s * 4 + a0 * 2 + a1;
          const double p = Logistic(ov.q[h][s * 2 + a1] - ov.q[h][s * 2 + a0]);
          ASSERT_GT(count[cell], 1000);
          EXPECT_NEAR(ones[cell] / count[cell], p,
                      4 * std::sqrt(p * (1 - p) / count[cell]));
        }
      }
    }
  }
}

TEST(GenerateActionTest, ReplayAndKindMismatch) {
  Rng setup(8);
  TabularMdp mdp = testing::RandomMdp(2, 2, 2, setup);
  auto r = testing::RandomStateActionReward(mdp, setup);
  ActionDataLaws laws{{{0.3, 0.7}, {0.6, 0.4}},
                      {{0.5, 0.5, 0.2, 0.8}, {0.5, 0.5, 0.5, 0.5}},
                      {{0.1, 0.9, 0.5, 0.5}, {0.5, 0.5, 0.5, 0.5}}};
  Rng a(3), b(3);
  auto d1 = GenerateActionDataset(mdp, r, SigmoidLink(), laws, 300, a);
  auto d2 = GenerateActionDataset(mdp, r, SigmoidLink(), laws, 300, b);
  EXPECT_EQ(d1.steps, d2.steps);
  std::stringstream ss;
  WriteActionDataset(ss, d1);
  EXPECT_EQ(ReadActionDataset(ss, mdp).steps, d1.steps);
  TrajectoryReward tr{std::vector<double>(mdp.NumTrajectories(), 0.0)};
  EXPECT_THROW(GenerateActionDataset(mdp, tr, SigmoidLink(), laws, 10, a),
               RewardKindMismatch);
}

}  // namespace
}  // namespace freehand
