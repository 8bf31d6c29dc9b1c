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

#include "freehand/harness.h"

#include <gtest/gtest.h>

#include <cmath>
#include <nlohmann/json.hpp>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "freehand/errors.h"

namespace freehand {
namespace {

using nlohmann::json;

std::vector<RateLevel> PowerLaw(double scale, double slope,
                                const std::vector<int>& ns) {
  std::vector<RateLevel> levels;
  for (int n : ns) {
    RateLevel l;
    l.n = n;
    l.count = 10;
    l.mean = scale * std::pow(n, slope);
    levels.push_back(l);
  }
  return levels;
}

const std::vector<int> kLevels = {128, 256, 512, 1024, 2048, 4096, 8192};

TEST(FitRateTest, ExactPowerLaws) {
  for (double slope : {-0.5, -1.0}) {
    RateFit fit = FitRate(PowerLaw(3.0, slope, kLevels));
    EXPECT_NEAR(fit.slope, slope, 1e-12);
    EXPECT_NEAR(fit.intercept, std::log(3.0), 1e-10);
    EXPECT_NEAR(fit.r2, 1.0, 1e-12);
    EXPECT_NEAR(fit.Predict(1000), 3.0 * std::pow(1000, slope), 1e-10);
  }
}

TEST(FitRateTest, RecoversNoisySlope) {
  Rng rng(71);
  std::normal_distribution<double> noise(0.0, 0.1);
  int close = 0;
  for (int trial = 0; trial < 50; ++trial) {
    auto levels = PowerLaw(2.0, -0.5, kLevels);
    for (auto& l : levels) l.mean *= std::exp(noise(rng));
    RateFit fit = FitRate(levels);
    if (std::abs(fit.slope + 0.5) < 0.1) ++close;
    EXPECT_GE(fit.r2, 0.0);
    EXPECT_LE(fit.r2, 1.0);
  }
  EXPECT_GE(close, 45);
}

TEST(FitRateTest, NeedsFourPositiveLevels) {
  EXPECT_THROW(FitRate(PowerLaw(1.0, -1.0, {10, 20, 40})), InsufficientLevels);
  auto levels = PowerLaw(1.0, -1.0, {10, 20, 40, 80, 160});
  levels[1].mean = 0.0;
  levels[3].mean = 0.0;
  EXPECT_THROW(FitRate(levels), InsufficientLevels);
  levels[3].mean = 1.0 / 80;
  RateFit fit = FitRate(levels);
  EXPECT_NEAR(fit.slope, -1.0, 1e-12);
}

TEST(FitRateTest, RateCsvRoundTrip) {
  RateFit fit = FitRate(PowerLaw(3.0, -0.7, kLevels));
  std::stringstream csv;
  WriteRateCsv(csv, fit);
  EXPECT_EQ(csv.str().rfind("# slope=", 0), 0u);
  RateFit back = FitRateFromCsv(csv);
  EXPECT_NEAR(back.slope, fit.slope, 1e-12);
  EXPECT_NEAR(back.intercept, fit.intercept, 1e-12);
  ASSERT_EQ(back.levels.size(), kLevels.size());
}

TEST(SvgPlotTest, EscapesTitleAndDrawsEveryLevel) {
  RateFit fit = FitRate(PowerLaw(1.0, -0.5, kLevels));
  std::ostringstream svg;
  WriteSvgPlot(svg, fit, "a<b & \"c\"");
  const std::string s = svg.str();
  EXPECT_EQ(s.rfind("<?xml", 0), 0u);
  EXPECT_NE(s.find("<svg"), std::string::npos);
  EXPECT_NE(s.find("a&lt;b &amp; &quot;c&quot;"), std::string::npos);
  EXPECT_EQ(s.find("a<b"), std::string::npos);
  std::size_t circles = 0;
  for (std::size_t p = s.find("<circle"); p != std::string::npos;
       p = s.find("<circle", p + 1)) {
    ++circles;
  }
  EXPECT_EQ(circles, kLevels.size());
  EXPECT_NE(s.rfind("</svg>"), std::string::npos);
}

json TinyConfig() {
  return json::parse(R"({
    "name": "tiny",
    "algorithm": "freehand",
    "instance": {
      "generator": "inline",
      "mdp": {"H": 1, "S": 1, "A": 3, "rho": [1.0], "r_max": 1.0},
      "reward": {"kind": "trajectory", "table": {"0": 0.0, "1": 0.5, "2": 1.0}}
    },
    "reward_class": {"kind": "tabular_grid", "spacing": 0.5},
    "N": [40, 80, 160, 320],
    "reps": 3,
    "seed": 5
  })");
}

std::string ResultsCsv(const ExperimentConfig& cfg, int threads) {
  std::ostringstream out;
  WriteResultsCsv(out, cfg, RunExperiment(cfg, threads));
  return out.str();
}

TEST(RunExperimentTest, ByteIdenticalAcrossRunsAndThreads) {
  ExperimentConfig cfg = ParseExperimentConfig(TinyConfig());
  const std::string a = ResultsCsv(cfg, 1);
  EXPECT_EQ(a, ResultsCsv(cfg, 1));
  EXPECT_EQ(a, ResultsCsv(cfg, 3));
  json other = TinyConfig();
  other["seed"] = 6;
  EXPECT_NE(a, ResultsCsv(ParseExperimentConfig(other), 1));
  EXPECT_EQ(a.substr(0, a.find('\n')),
            "config_hash,version,algorithm,N,rep,seed,status,suboptimality,"
            "j_hat,j_target,j_mu1,robust_value,covered,covered_p,zeta,"
            "loglik_hat,policy_index");
}

TEST(RunExperimentTest, ResultsCsvFeedsRateFit) {
  json j = TinyConfig();
  j["reward_class"] = {{"kind", "finite"},
                       {"members", {{0.0, 0.5, 1.0}, {1.0, 0.5, 0.0}}}};
  ExperimentConfig cfg = ParseExperimentConfig(j);
  ExperimentResult res = RunExperiment(cfg, 1);
  ASSERT_EQ(res.cells.size(), 12u);
  for (const auto& c : res.cells) EXPECT_EQ(c.status, "ok");
  std::stringstream csv;
  WriteResultsCsv(csv, cfg, res);
  try {
    RateFit direct = FitRate(res);
    RateFit parsed = FitRateFromCsv(csv);
    EXPECT_NEAR(parsed.slope, direct.slope, 1e-12);
  } catch (const InsufficientLevels&) {
    // Zero suboptimality at every level is a legitimate outcome here.
    EXPECT_THROW(FitRateFromCsv(csv), InsufficientLevels);
  }
}

TEST(RunExperimentTest, SingletonTruthHasNoSuboptimality) {
  json j = TinyConfig();
  j["reward_class"] = {{"kind", "finite"}, {"members", {{0.0, 0.5, 1.0}}}};
  ExperimentResult res = RunExperiment(ParseExperimentConfig(j), 1);
  for (const auto& c : res.cells) {
    EXPECT_EQ(c.status, "ok");
    EXPECT_EQ(c.suboptimality, 0.0);
    EXPECT_EQ(c.covered, 1);
  }
}

TEST(RunExperimentTest, SingletonTransitionsMatchKnownDynamics) {
  json known = json::parse(R"({
    "algorithm": "freehand",
    "instance": {"generator": "random", "H": 2, "S": 2, "A": 2, "seed": 3},
    "reward_class": {"kind": "tabular_grid", "spacing": 1.0},
    "c_mle": 0.05,
    "N": [30], "reps": 4, "seed": 9
  })");
  json unknown = known;
  unknown["algorithm"] = "freehand_transition";
  unknown["transition_class"] = "singleton";
  auto a = RunExperiment(ParseExperimentConfig(known), 1);
  auto b = RunExperiment(ParseExperimentConfig(unknown), 1);
  ASSERT_EQ(a.cells.size(), b.cells.size());
  for (std::size_t i = 0; i < a.cells.size(); ++i) {
    EXPECT_EQ(b.cells[i].status, "ok");
    EXPECT_NEAR(a.cells[i].robust_value, b.cells[i].robust_value, 1e-12);
    EXPECT_EQ(a.cells[i].policy_index, b.cells[i].policy_index);
    EXPECT_EQ(b.cells[i].covered_p, 1);
  }
}

TEST(ExperimentConfigTest, RejectsMalformedConfigs) {
  json j = TinyConfig();
  j["N"] = {100, 50};
  EXPECT_THROW(ParseExperimentConfig(j), InvalidInput);
  j = TinyConfig();
  j.erase("reward_class");
  EXPECT_THROW(ParseExperimentConfig(j), InvalidInput);
  j = TinyConfig();
  j["algorithm"] = "nope";
  EXPECT_THROW(ParseExperimentConfig(j), InvalidInput);
  j = TinyConfig();
  j["reps"] = 0;
  EXPECT_THROW(ParseExperimentConfig(j), InvalidInput);
}

TEST(ExperimentConfigTest, HashAndCellSeeds) {
  ExperimentConfig a = ParseExperimentConfig(TinyConfig());
  ExperimentConfig b = ParseExperimentConfig(TinyConfig());
  EXPECT_EQ(ConfigHash(a), ConfigHash(b));
  EXPECT_EQ(ConfigHash(a).size(), 16u);
  json j = TinyConfig();
  j["reps"] = 4;
  EXPECT_NE(ConfigHash(a), ConfigHash(ParseExperimentConfig(j)));
  std::set<std::uint64_t> seeds;
  for (int n : a.sample_sizes) {
    for (int rep = 0; rep < 50; ++rep) seeds.insert(CellSeed(a, n, rep));
  }
  EXPECT_EQ(seeds.size(), a.sample_sizes.size() * 50);
  EXPECT_EQ(CellSeed(a, 80, 2), CellSeed(b, 80, 2));
}

TEST(InstanceTest, InlineRoundTrip) {
  Rng rng(72);
  Instance inst = MakeRandomInstance(2, 2, 2, false, rng);
  Instance back = MakeInstance(InstanceToJson(inst));
  EXPECT_EQ(MdpToJson(back.mdp), MdpToJson(inst.mdp));
  EXPECT_EQ(DenseRewardTable(back.mdp, back.r_star),
            DenseRewardTable(inst.mdp, inst.r_star));
  EXPECT_THROW(MakeInstance(json{{"generator", "bogus"}}), InvalidInput);
}

TEST(InstanceTest, ContextualShape) {
  Instance inst = MakeContextualInstance(4, 3, 0.5, 0.5, 1.0);
  const auto& rho = inst.mdp.initial();
  for (int s = 1; s < 4; ++s) EXPECT_NEAR(rho[s] / rho[s - 1], 0.5, 1e-12);
  const auto& r = std::get<StateActionReward>(inst.r_star).values[0];
  for (int s = 0; s < 4; ++s) {
    const int best = s % 2;
    for (int a = 0; a < 3; ++a) {
      if (a != best) EXPECT_NEAR(r[s * 3 + best] - r[s * 3 + a], 0.5, 1e-12);
    }
  }
}

TEST(CalibrationTest, ShippedRewardConstantIsTheCalibratedOne) {
  Instance inst = MakeInstance(json::parse(R"({
    "generator": "inline",
    "mdp": {"H": 2, "S": 1, "A": 2, "rho": [1.0], "r_max": 1.0},
    "reward": {"kind": "trajectory",
               "table": {"0": 1.0, "1": 1.0, "2": 0.5, "3": 0.5}}})"));
  RewardClass cls = MakeRewardClass(
      json{{"kind", "tabular_grid"}, {"spacing", 0.5}, {"cells", {0, 0, 1, 1}}},
      inst.mdp);
  Calibration cal =
      CalibrateSlackConstant(inst, cls, SigmoidLink(), 500, 0.1, 200, 1);
  EXPECT_TRUE(cal.met);
  EXPECT_EQ(cal.chosen, kDefaultCMle);
  for (std::size_t k = 1; k < cal.coverage.size(); ++k) {
    EXPECT_GE(cal.coverage[k], cal.coverage[k - 1]);
  }
}

TEST(CalibrationTest, ShippedTransitionConstantIsTheCalibratedOne) {
  Rng rng(2);
  Instance inst = MakeRandomInstance(3, 2, 2, true, rng);
  Calibration cal = CalibrateTransitionConstant(
      inst, FullSimplexTransitions(inst.mdp), 500, 0.1, 200, 1);
  EXPECT_TRUE(cal.met);
  EXPECT_EQ(cal.chosen, kDefaultCP);
}

}  // namespace
}  // namespace freehand
