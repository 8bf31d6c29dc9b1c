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

// Distributionally robust planning against reward (and transition)
// confidence sets, by exhaustive search over a finite policy class.

#ifndef FREEHAND_PLANNER_H_
#define FREEHAND_PLANNER_H_

#include <optional>
#include <string>
#include <vector>

#include "freehand/confidence.h"

namespace freehand {

// kAuto: grid for tabular and finite classes, Lagrangian for linear ones.
enum class InnerMethod { kAuto, kGrid, kLagrangian };
InnerMethod ParseInnerMethod(const std::string& name);
std::string InnerMethodName(InnerMethod m);

struct PlanOptions {
  PolicyKind policy_kind = PolicyKind::kMarkovDeterministic;
  InnerMethod inner = InnerMethod::kAuto;
  double resolution = 0.05;  // net resolution for grid inner mins (linear)
  std::uint64_t cap = kDefaultEnumerationCap;
  MleOptions solver;
  double constraint_tol = 1e-6;
  // Unknown transitions.
  int max_rounds = 100;
  bool exhaustive_transitions = false;
  double transition_resolution = 0.25;
  int threads = 0;
};

// The empirical law of the tau1 arm.
TrajectoryMixture EmpiricalReference(const PreferenceDataset& data);

// J(pi; r, P) - E_{mu_ref}[r] with `r` dense over trajectory ids.
double PessimisticObjective(const TabularMdp& mdp, const Policy& pi,
                            const std::vector<double>& r,
                            const TrajectoryMixture& mu_ref,
                            std::uint64_t cap = kDefaultEnumerationCap);

// c = d^pi - mu_ref as a dense table, so the objective is <c, r>.
std::vector<double> ObjectiveCoefficients(
    const TabularMdp& mdp, const Policy& pi, const TrajectoryMixture& mu_ref,
    std::uint64_t cap = kDefaultEnumerationCap);

struct InnerMinResult {
  double value = 0.0;
  RewardModel argmin;
  int solves = 0;
  double slack = 0.0;  // l(argmin) - (l_hat - zeta), >= 0
};

// min_{r in set} <c, r>. The grid method scans Discretize(set); the
// Lagrangian method traces x(t) = argmax l(x) - t <g, x> and bisects t until
// the likelihood constraint is active.
class RewardInnerMin {
 public:
  RewardInnerMin(const RewardConfidenceSet& set, InnerMethod method,
                 const PlanOptions& opts = {});

  InnerMinResult Solve(const std::vector<double>& c) const;
  InnerMethod method() const { return method_; }
  const std::vector<RewardModel>& members() const { return members_; }

 private:
  InnerMinResult SolveGrid(const std::vector<double>& c) const;
  InnerMinResult SolveLagrangian(const std::vector<double>& c) const;

  const RewardConfidenceSet* set_;
  InnerMethod method_;
  PlanOptions opts_;
  std::vector<RewardModel> members_;
  std::optional<ComparisonLikelihood> lik_;
  ParamDomain domain_;
};

InnerMinResult InnerMinReward(const TabularMdp& mdp, const Policy& pi,
                              const RewardConfidenceSet& set,
                              const TrajectoryMixture& mu_ref,
                              InnerMethod method, const PlanOptions& opts = {});

struct RobustPlanResult {
  Policy policy;
  std::uint64_t policy_index = 0;
  double value = 0.0;
  RewardModel reward;
  std::vector<std::vector<double>> transitions;  // unknown dynamics only
  std::vector<double> policy_values;             // per enumerated policy
  int inner_solves = 0;
  double slack = 0.0;
  std::vector<double> trace;  // alternating objective at the chosen policy
};

// argmax over the enumeration of the inner min; first policy wins ties.
RobustPlanResult RobustPlanKnown(const TabularMdp& mdp,
                                 const RewardConfidenceSet& set,
                                 const TrajectoryMixture& mu_ref,
                                 const PlanOptions& opts = {});

// Joint inner min over (r, P_0, ..., P_{H-2}).
struct JointMinResult {
  double value = 0.0;
  RewardModel reward;
  std::vector<std::vector<double>> transitions;
  std::vector<double> trace;  // objective after every block update
};

// Weights w with J(pi; r, P) = sum w(s, a, s') P_h(s' | s, a), holding the
// other steps of `mdp` fixed.
std::vector<double> StepWeights(const TabularMdp& mdp, const Policy& pi,
                                const std::vector<double>& r, int h);

// min over the step-h set of <w, P_h>.
std::vector<double> MinimizeStep(const TransitionConfidenceSet& tset, int h,
                                 const std::vector<double>& w,
                                 double tol = 1e-6);

JointMinResult InnerMinJoint(const TabularMdp& mdp, const Policy& pi,
                             const RewardInnerMin& rmin,
                             const TransitionConfidenceSet& tset,
                             const TrajectoryMixture& mu_ref,
                             const PlanOptions& opts = {});
JointMinResult InnerMinJointExhaustive(const TabularMdp& mdp, const Policy& pi,
                                       const RewardInnerMin& rmin,
                                       const TransitionConfidenceSet& tset,
                                       const TrajectoryMixture& mu_ref,
                                       const PlanOptions& opts = {});

// `mdp` supplies rho and sizes; its transitions are ignored. Policies are
// enumerated on a full-support skeleton so that every history any member
// of the transition sets can produce has an explicit action.
RobustPlanResult RobustPlanUnknown(const TabularMdp& mdp,
                                   const RewardConfidenceSet& set,
                                   const TransitionConfidenceSet& tset,
                                   const TrajectoryMixture& mu_ref,
                                   const PlanOptions& opts = {});

}  // namespace freehand

#endif  // FREEHAND_PLANNER_H_
