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

// Reward, transition and advantage function classes: membership checks,
// log bracket-number bookkeeping and member enumeration.

#ifndef FREEHAND_FUNCTION_CLASSES_H_
#define FREEHAND_FUNCTION_CLASSES_H_

#include <cstdint>
#include <variant>
#include <vector>

#include "freehand/mdp.h"

namespace freehand {

// Constant of the ball-covering bound behind the linear bracket count.
inline constexpr double kDefaultGeometricConstant = 3.0;

// Per-trajectory values on {0, g, 2g, ...} within [0, r_max]. Trajectories
// sharing a cell always share a value; by default every trajectory is its
// own cell.
struct TabularGridClass {
  double r_max = 1.0;
  double spacing = 1.0;
  std::vector<int> cell_of;  // [trajectory id] -> cell
  int num_cells = 0;

  int levels() const;
  double level_value(int k) const { return k * spacing; }
};
TabularGridClass MakeTabularGrid(std::uint64_t num_trajectories, double r_max,
                                 double spacing, std::vector<int> cell_of = {});

// r(tau) = <phi(tau), theta>, ||theta|| <= B, and 0 <= r <= r_max on every
// trajectory.
struct LinearRewardClass {
  std::vector<std::vector<double>> features;  // [trajectory id][d]
  int dim = 0;
  double B = 1.0;
  double R = 0.0;  // max feature norm, filled in by MakeLinearClass
  double r_max = 1.0;
  double c_geom = kDefaultGeometricConstant;
};
LinearRewardClass MakeLinearClass(std::vector<std::vector<double>> features,
                                  double B, double r_max,
                                  double c_geom = kDefaultGeometricConstant);
// Indicator features, one coordinate per trajectory.
LinearRewardClass MakeOneHotClass(std::uint64_t num_trajectories, double B,
                                  double r_max,
                                  double c_geom = kDefaultGeometricConstant);

// An explicit list of dense reward tables.
struct FiniteRewardClass {
  std::vector<std::vector<double>> members;
};

using RewardClass =
    std::variant<TabularGridClass, LinearRewardClass, FiniteRewardClass>;

// A class member: `params` are cell values (grid), theta (linear) or the
// list index (finite); `values` is the dense trajectory table.
struct RewardModel {
  std::vector<double> params;
  std::vector<double> values;
};

std::uint64_t NumTrajectoriesOf(const RewardClass& cls);
RewardModel Realize(const RewardClass& cls, const std::vector<double>& params);
double LogBracketNumber(const RewardClass& cls, double epsilon);
bool ContainsTruth(const RewardClass& cls, const std::vector<double>& truth);

// Grid and finite classes: every member, in mixed-radix order (first cell most
// significant). Linear classes: the bounded points of ParameterNet at
// `resolution`.
std::vector<RewardModel> EnumerateMembers(
    const RewardClass& cls, std::uint64_t cap = kDefaultEnumerationCap,
    double resolution = 0.1);

// Deterministic net of the radius-B ball in R^d: every ball point is within
// `resolution` of some net point. Cubic lattice with spacing
// 2 * resolution / sqrt(d), kept within B + resolution and projected onto
// the ball (projection cannot increase distances to ball points).
std::vector<std::vector<double>> ParameterNet(
    int dim, double B, double resolution,
    std::uint64_t cap = kDefaultEnumerationCap);

// Transition classes, one entry per step h = 0..H-2.
struct FullSimplexClass {
  double c_geom = kDefaultGeometricConstant;
};
struct CandidateTransitions {
  std::vector<std::vector<double>> tables;  // flat (S*A) x S
};
using StepTransitionClass =
    std::variant<FullSimplexClass, CandidateTransitions>;
struct TransitionClass {
  std::vector<StepTransitionClass> steps;
};
TransitionClass FullSimplexTransitions(const TabularMdp& mdp);
TransitionClass SingletonTransitions(const TabularMdp& mdp);

double LogBracketNumber(const StepTransitionClass& cls, int num_states,
                        int num_actions, double epsilon);
bool ContainsTruth(const StepTransitionClass& cls,
                   const std::vector<double>& table, int num_states,
                   int num_actions);
// Candidates as listed, or every table whose rows lie on the simplex grid of
// step `resolution` for FullSimplex.
std::vector<std::vector<double>> EnumerateTransitionMembers(
    const StepTransitionClass& cls, int num_states, int num_actions,
    double resolution, std::uint64_t cap = kDefaultEnumerationCap);

// Advantage class for one step: tables on the grid {-b_max + k * spacing}
// (tabular), or A(s, a) = <phi(s, a), theta> with ||theta|| <= B and a
// certified bound b_max (linear, when `features` is non-empty).
struct AdvantageStepClass {
  double b_max = 1.0;
  double spacing = 0.5;
  std::vector<std::vector<double>> features;  // [s * A + a][d]
  double B = 1.0;
  double c_geom = kDefaultGeometricConstant;

  bool is_linear() const { return !features.empty(); }
  int levels() const;
};
struct AdvantageClass {
  std::vector<AdvantageStepClass> steps;  // [h]
};
AdvantageClass TabularAdvantageClass(int horizon, double b_max, double spacing);

double LogBracketNumber(const AdvantageStepClass& cls, int num_states,
                        int num_actions, double epsilon);
bool ContainsTruth(const AdvantageStepClass& cls,
                   const std::vector<double>& table, int num_states,
                   int num_actions);
std::vector<std::vector<double>> EnumerateAdvantageMembers(
    const AdvantageStepClass& cls, int num_states, int num_actions,
    std::uint64_t cap = kDefaultEnumerationCap, double resolution = 0.1);

}  // namespace freehand

#endif  // FREEHAND_FUNCTION_CLASSES_H_
