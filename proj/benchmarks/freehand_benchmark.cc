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

#include <benchmark/benchmark.h>

#include <cstdint>
#include <vector>

#include "freehand/analysis.h"
#include "freehand/confidence.h"
#include "freehand/function_classes.h"
#include "freehand/harness.h"
#include "freehand/mdp.h"
#include "freehand/mle.h"
#include "freehand/planner.h"
#include "freehand/preference.h"
#include "freehand/random.h"

namespace freehand {
namespace {

struct Fixture {
  Instance inst;
  PreferenceDataset data;
  std::vector<double> truth;
};

Fixture MakeFixture(int horizon, int num_states, int num_actions, int n) {
  Rng rng(11);
  Fixture f{
      MakeRandomInstance(horizon, num_states, num_actions, true, rng), {}, {}};
  f.truth = DenseRewardTable(f.inst.mdp, f.inst.r_star);
  const Policy uniform = UniformPolicy(f.inst.mdp);
  f.data = GeneratePreferenceDataset(f.inst.mdp, TrajectoryReward{f.truth},
                                     SigmoidLink(), uniform, uniform, n, rng);
  return f;
}

void BM_TrajectoryDistribution(benchmark::State& state) {
  const int H = static_cast<int>(state.range(0));
  Fixture f = MakeFixture(H, 3, 2, 1);
  const Policy uniform = UniformPolicy(f.inst.mdp);
  for (auto _ : state) {
    benchmark::DoNotOptimize(TrajectoryDistribution(f.inst.mdp, uniform));
  }
  state.SetItemsProcessed(state.iterations() * f.inst.mdp.NumTrajectories());
}
BENCHMARK(BM_TrajectoryDistribution)->DenseRange(2, 5);

void BM_PolicyEnumeration(benchmark::State& state) {
  Fixture f = MakeFixture(static_cast<int>(state.range(0)), 2, 2, 1);
  for (auto _ : state) {
    PolicyEnumerator en(f.inst.mdp, PolicyKind::kMarkovDeterministic);
    double total = 0.0;
    for (std::uint64_t k = 0; k < en.size(); ++k) {
      total += EvaluatePolicy(f.inst.mdp, en.At(k), TrajectoryReward{f.truth});
    }
    benchmark::DoNotOptimize(total);
  }
}
BENCHMARK(BM_PolicyEnumeration)->DenseRange(2, 4);

void BM_RewardMleOneHot(benchmark::State& state) {
  Fixture f = MakeFixture(2, 2, 2, static_cast<int>(state.range(0)));
  const RewardClass cls =
      MakeOneHotClass(f.inst.mdp.NumTrajectories(), 3.0, 1.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(FitRewardMle(cls, f.data, SigmoidLink()));
  }
}
BENCHMARK(BM_RewardMleOneHot)->RangeMultiplier(4)->Range(256, 16384);

void BM_InnerMin(benchmark::State& state) {
  Fixture f = MakeFixture(2, 2, 2, 2000);
  const auto method = static_cast<InnerMethod>(state.range(0));
  const std::uint64_t n = f.inst.mdp.NumTrajectories();
  // The grid ties trajectories into 4 cells (81 members) to stay enumerable.
  std::vector<int> cell_of(n);
  for (std::uint64_t t = 0; t < n; ++t) cell_of[t] = static_cast<int>(t % 4);
  const RewardClass cls =
      method == InnerMethod::kGrid
          ? RewardClass(MakeTabularGrid(n, 1.0, 0.5, cell_of))
          : RewardClass(MakeOneHotClass(n, 3.0, 1.0));
  auto set = BuildRewardConfidence(f.data, cls, SigmoidLink(), 0.1);
  const TrajectoryMixture ref = EmpiricalReference(f.data);
  const Policy pi = UniformPolicy(f.inst.mdp);
  for (auto _ : state) {
    benchmark::DoNotOptimize(InnerMinReward(f.inst.mdp, pi, set, ref, method));
  }
}
BENCHMARK(BM_InnerMin)
    ->Arg(static_cast<int>(InnerMethod::kGrid))
    ->Arg(static_cast<int>(InnerMethod::kLagrangian));

void BM_RobustPlanKnown(benchmark::State& state) {
  Fixture f = MakeFixture(2, 2, 2, 2000);
  auto set = BuildRewardConfidence(
      f.data, MakeOneHotClass(f.inst.mdp.NumTrajectories(), 3.0, 1.0),
      SigmoidLink(), 0.1);
  const TrajectoryMixture ref = EmpiricalReference(f.data);
  PlanOptions opts;
  opts.threads = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(RobustPlanKnown(f.inst.mdp, set, ref, opts));
  }
}
BENCHMARK(BM_RobustPlanKnown)->Arg(1)->Arg(4)->UseRealTime();

}  // namespace
}  // namespace freehand

BENCHMARK_MAIN();
