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

#include "freehand/mle.h"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "freehand/errors.h"
#include "freehand/function_classes.h"
#include "freehand/preference.h"
#include "test_util.h"

namespace freehand {
namespace {

using ::freehand::testing::RandomMdp;
using ::freehand::testing::RandomTrajectoryTable;

PreferenceDataset RandomDataset(std::uint64_t num_traj, int n, Rng& rng) {
  std::uniform_int_distribution<std::uint64_t> pick(0, num_traj - 1);
  std::bernoulli_distribution coin(0.5);
  PreferenceDataset data;
  for (int i = 0; i < n; ++i) {
    data.records.push_back({pick(rng), pick(rng), coin(rng) ? 1 : 0});
  }
  return data;
}

// Per-record sum, written without the pair aggregation.
double NaiveLogLik(const std::vector<double>& r,
                   const PreferenceDataset& data) {
  double total = 0.0;
  for (const auto& rec : data.records) {
    double p = 1.0 / (1.0 + std::exp(-(r[rec.tau1] - r[rec.tau0])));
    total += std::log(rec.o == 1 ? p : 1.0 - p);
  }
  return total;
}

TEST(LogLikelihoodRewardTest, ConstantRewardSingleRecord) {
  PreferenceDataset data;
  data.records.push_back({0, 1, 1});
  EXPECT_NEAR(LogLikelihoodReward({0.3, 0.3}, data, SigmoidLink()),
              std::log(0.5), 1e-15);
}

TEST(LogLikelihoodRewardTest, Additive) {
  PreferenceDataset one, two;
  one.records.push_back({2, 0, 0});
  two.records = {one.records[0], one.records[0]};
  std::vector<double> r = {0.1, 0.7, 0.4};
  EXPECT_EQ(LogLikelihoodReward(r, two, SigmoidLink()),
            2 * LogLikelihoodReward(r, one, SigmoidLink()));
}

TEST(LogLikelihoodRewardTest, MatchesNaiveSum) {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    TabularMdp mdp = RandomMdp(2, 2, 2, rng);
    auto r = RandomTrajectoryTable(mdp, rng);
    auto data = RandomDataset(mdp.NumTrajectories(), 40, rng);
    EXPECT_NEAR(LogLikelihoodReward(r, data, SigmoidLink()),
                NaiveLogLik(r, data), 1e-12);
  }
}

TEST(LogLikelihoodRewardTest, AggregationCountsEveryRecord) {
  Rng rng(12);
  auto data = RandomDataset(5, 200, rng);
  PairCounts counts = AggregatePairs(data);
  double total = 0.0;
  for (const auto& e : counts.entries) total += e.n0 + e.n1;
  EXPECT_EQ(total, 200.0);
  EXPECT_EQ(counts.total, 200.0);
}

TEST(LogLikelihoodRewardTest, GradientMatchesFiniteDifferences) {
  Rng rng(13);
  const LinkFunction link = SigmoidLink();
  for (int trial = 0; trial < 10; ++trial) {
    TabularMdp mdp = RandomMdp(2, 2, 2, rng);
    auto r = RandomTrajectoryTable(mdp, rng);
    auto counts = AggregatePairs(RandomDataset(mdp.NumTrajectories(), 60, rng));
    auto grad = LogLikelihoodRewardGradient(r, counts, link);
    const double step = 1e-6;
    for (std::size_t i = 0; i < r.size(); ++i) {
      auto up = r, down = r;
      up[i] += step;
      down[i] -= step;
      double fd = (LogLikelihoodReward(up, counts, link) -
                   LogLikelihoodReward(down, counts, link)) /
                  (2 * step);
      EXPECT_NEAR(grad[i], fd, 1e-4 * std::max(1.0, std::abs(fd)));
    }
  }
}

TEST(LogLikelihoodRewardTest, MidpointConcavity) {
  Rng rng(14);
  const LinkFunction link = SigmoidLink();
  for (int trial = 0; trial < 50; ++trial) {
    TabularMdp mdp = RandomMdp(2, 2, 2, rng);
    auto counts = AggregatePairs(RandomDataset(mdp.NumTrajectories(), 50, rng));
    auto r1 = RandomTrajectoryTable(mdp, rng);
    auto r2 = RandomTrajectoryTable(mdp, rng);
    std::vector<double> mid(r1.size());
    for (std::size_t i = 0; i < mid.size(); ++i) mid[i] = (r1[i] + r2[i]) / 2;
    EXPECT_GE(LogLikelihoodReward(mid, counts, link),
              (LogLikelihoodReward(r1, counts, link) +
               LogLikelihoodReward(r2, counts, link)) /
                      2 -
                  1e-10);
  }
}

TEST(FitRewardMleTest, GridPicksLargestMarginWhenOneSideAlwaysWins) {
  // Two trajectories on {0, 1}: differences in {-1, 0, 1}.
  RewardClass cls = MakeTabularGrid(2, 1.0, 1.0);
  PreferenceDataset data;
  for (int i = 0; i < 30; ++i) data.records.push_back({0, 1, 1});
  RewardFit fit = FitRewardMle(cls, data, SigmoidLink());
  EXPECT_EQ(fit.method, "grid_scan");
  EXPECT_EQ(fit.model.values[1] - fit.model.values[0], 1.0);
}

TEST(FitRewardMleTest, SymmetricDataGivesZeroDifference) {
  PreferenceDataset data;
  for (int i = 0; i < 25; ++i) {
    data.records.push_back({0, 1, 1});
    data.records.push_back({0, 1, 0});
  }
  RewardFit grid =
      FitRewardMle(MakeTabularGrid(2, 1.0, 0.25), data, SigmoidLink());
  EXPECT_EQ(grid.model.values[1], grid.model.values[0]);
  RewardFit lin =
      FitRewardMle(MakeOneHotClass(2, 1.0, 1.0), data, SigmoidLink());
  EXPECT_NEAR(lin.model.values[1], lin.model.values[0], 1e-6);
}

TEST(FitRewardMleTest, LinearRecoveryAtTenThousandSamples) {
  // One state, four actions, H = 1: four trajectories with 2-d features.
  TabularMdp mdp = TabularMdp::Stationary(1, 1, 4, {1.0}, 1.0);
  std::vector<std::vector<double>> phi = {
      {1.0, 0.0}, {0.0, 1.0}, {0.5, 0.5}, {0.8, 0.2}};
  RewardClass cls = MakeLinearClass(phi, 1.0, 1.0);
  const std::vector<double> theta = {0.6, 0.2};
  TrajectoryReward truth;
  for (const auto& f : phi)
    truth.values.push_back(f[0] * theta[0] + f[1] * theta[1]);
  const Policy uniform = UniformPolicy(mdp);
  double mse_total = 0.0;
  const int seeds = 5;
  for (int seed = 0; seed < seeds; ++seed) {
    Rng rng(100 + seed);
    auto data = GeneratePreferenceDataset(mdp, truth, SigmoidLink(), uniform,
                                          uniform, 10000, rng);
    RewardFit fit = FitRewardMle(cls, data, SigmoidLink());
    EXPECT_EQ(fit.method, "projected_newton");
    double mse = 0.0;
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 4; ++j) {
        double err = (fit.model.values[j] - fit.model.values[i]) -
                     (truth.values[j] - truth.values[i]);
        mse += err * err / 16;
      }
    }
    EXPECT_LE(mse, 0.05) << "seed " << seed;
    mse_total += mse;
  }
  // The typical error is far below the cap.
  EXPECT_LE(mse_total / seeds, 0.01);
}

TEST(FitRewardMleTest, LikelihoodAtLeastThatOfTruth) {
  Rng rng(15);
  const LinkFunction link = SigmoidLink();
  for (int trial = 0; trial < 10; ++trial) {
    TabularMdp mdp = TabularMdp::Stationary(2, 1, 3, {1.0}, 1.0);
    // Truth on the grid {0, 0.5, 1}.
    std::uniform_int_distribution<int> lvl(0, 2);
    TrajectoryReward truth;
    for (std::uint64_t t = 0; t < mdp.NumTrajectories(); ++t) {
      truth.values.push_back(0.5 * lvl(rng));
    }
    const Policy uniform = UniformPolicy(mdp);
    auto data =
        GeneratePreferenceDataset(mdp, truth, link, uniform, uniform, 300, rng);
    std::vector<RewardClass> classes = {
        MakeTabularGrid(mdp.NumTrajectories(), 1.0, 0.5),
        MakeOneHotClass(mdp.NumTrajectories(), 3.0, 1.0)};
    for (const auto& cls : classes) {
      RewardFit fit = FitRewardMle(cls, data, link);
      EXPECT_GE(fit.loglik,
                LogLikelihoodReward(truth.values, data, link) - 1e-8);
      EXPECT_NEAR(fit.loglik, LogLikelihoodReward(fit.model.values, data, link),
                  1e-9);
    }
  }
}

TEST(FitRewardMleTest, EmptyDatasetRejected) {
  EXPECT_THROW(FitRewardMle(MakeTabularGrid(2, 1.0, 0.5), {}, SigmoidLink()),
               InvalidInput);
}

TEST(FitTransitionMleTest, DeterministicRowsBecomeOneHot) {
  // Two states; action a moves to state a.
  std::vector<double> table = {1, 0, 0, 1, 1, 0, 0, 1};
  TabularMdp mdp(2, 2, 2, {0.5, 0.5}, {table}, 1.0);
  Rng rng(16);
  const Policy uniform = UniformPolicy(mdp);
  TrajectoryReward r{std::vector<double>(mdp.NumTrajectories(), 0.5)};
  auto data = GeneratePreferenceDataset(mdp, r, SigmoidLink(), uniform, uniform,
                                        1000, rng);
  auto fit = FitTransitionMle(FullSimplexClass{}, mdp, data, 0);
  for (int sa = 0; sa < 4; ++sa) {
    double top = std::max(fit[sa * 2], fit[sa * 2 + 1]);
    EXPECT_GE(top, 0.99);
  }
}

TEST(FitTransitionMleTest, UnvisitedRowsAreUniform) {
  TabularMdp mdp = TabularMdp::Stationary(2, 3, 2, {1.0, 0.0, 0.0}, 1.0);
  PreferenceDataset data;
  Trajectory tau = {{0, 1}, {0, 0}};
  data.records.push_back({mdp.Encode(tau), mdp.Encode(tau), 1});
  auto fit = FitTransitionMle(FullSimplexClass{}, mdp, data, 0);
  for (int sa = 0; sa < 6; ++sa) {
    if (sa == 1) continue;
    for (int s2 = 0; s2 < 3; ++s2) EXPECT_EQ(fit[sa * 3 + s2], 1.0 / 3);
  }
  EXPECT_EQ(fit[1 * 3 + 0], 1.0);
  // Smoothing spreads mass toward unseen next states.
  auto smooth = FitTransitionMle(FullSimplexClass{}, mdp, data, 0, 1.0);
  EXPECT_NEAR(smooth[1 * 3 + 0], 3.0 / 5, 1e-15);
  EXPECT_NEAR(smooth[1 * 3 + 1], 1.0 / 5, 1e-15);
}

TEST(FitTransitionMleTest, TrueCandidateUsuallyWins) {
  // Truth and a wrong candidate differ on every row by 0.2 in mass.
  Rng setup(17);
  TabularMdp mdp = RandomMdp(2, 2, 2, setup);
  std::vector<double> wrong = mdp.transitions(0);
  for (int sa = 0; sa < 4; ++sa) {
    double shift = wrong[sa * 2] > 0.5 ? -0.2 : 0.2;
    wrong[sa * 2] += shift;
    wrong[sa * 2 + 1] -= shift;
  }
  CandidateTransitions cls{{wrong, mdp.transitions(0)}};
  TrajectoryReward r{std::vector<double>(mdp.NumTrajectories(), 0.5)};
  const Policy uniform = UniformPolicy(mdp);
  int wins = 0;
  const int runs = 100;
  for (int seed = 0; seed < runs; ++seed) {
    Rng rng(1000 + seed);
    auto data = GeneratePreferenceDataset(mdp, r, SigmoidLink(), uniform,
                                          uniform, 200, rng);
    auto counts = TransitionCounts(mdp, data, 0);
    if (TransitionLogLikelihood(mdp.transitions(0), counts) >=
        TransitionLogLikelihood(wrong, counts)) {
      ++wins;
      EXPECT_EQ(FitTransitionMle(cls, mdp, data, 0), mdp.transitions(0));
    }
  }
  EXPECT_GE(wins, 95);
}

ActionPreferenceDataset TwoActionData(int favor, int against) {
  ActionPreferenceDataset data;
  data.steps.resize(1);
  for (int i = 0; i < favor; ++i) data.steps[0].push_back({0, 0, 1, 1});
  for (int i = 0; i < against; ++i) data.steps[0].push_back({0, 0, 1, 0});
  return data;
}

TEST(FitAdvantageMleTest, GapInvertsEmpiricalRate) {
  TabularMdp mdp = TabularMdp::Stationary(1, 1, 2, {1.0}, 1.0);
  AdvantageClass cls = TabularAdvantageClass(1, 4.0, 0.5);
  AdvantageFit fit =
      FitAdvantageMle(cls, mdp, TwoActionData(9000, 1000), SigmoidLink());
  const double gap = fit.tables[0][1] - fit.tables[0][0];
  EXPECT_NEAR(gap, std::log(9.0), 0.15);
  EXPECT_NEAR(gap, std::log(9.0), 1e-6);  // the solver is much tighter
}

TEST(FitAdvantageMleTest, SymmetricLabelsGiveZeroGap) {
  TabularMdp mdp = TabularMdp::Stationary(1, 1, 2, {1.0}, 1.0);
  AdvantageFit fit = FitAdvantageMle(TabularAdvantageClass(1, 2.0, 0.5), mdp,
                                     TwoActionData(500, 500), SigmoidLink());
  EXPECT_NEAR(fit.tables[0][1] - fit.tables[0][0], 0.0, 1e-8);
}

TEST(FitAdvantageMleTest, GaugeMaxIsExactlyZero) {
  Rng rng(18);
  TabularMdp mdp = RandomMdp(2, 3, 3, rng);
  auto r = testing::RandomStateActionReward(mdp, rng);
  ActionDataLaws laws;
  for (int h = 0; h < 2; ++h) {
    laws.state.push_back(std::vector<double>(3, 1.0 / 3));
    laws.a0.push_back(std::vector<double>(9, 1.0 / 3));
    laws.a1.push_back(std::vector<double>(9, 1.0 / 3));
  }
  auto data = GenerateActionDataset(mdp, r, SigmoidLink(), laws, 400, rng);
  AdvantageFit fit = FitAdvantageMle(TabularAdvantageClass(2, 1.0, 0.25), mdp,
                                     data, SigmoidLink());
  for (const auto& table : fit.tables) {
    for (int s = 0; s < 3; ++s) {
      double top = std::max({table[s * 3], table[s * 3 + 1], table[s * 3 + 2]});
      EXPECT_EQ(top, 0.0);
    }
  }
}

}  // namespace
}  // namespace freehand
