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

// Link functions and the two preference-generation models: comparisons of
// whole trajectories, and comparisons of two actions at a visited state.

#ifndef FREEHAND_PREFERENCE_H_
#define FREEHAND_PREFERENCE_H_

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "freehand/mdp.h"

namespace freehand {

// Probabilities are clamped to at least this before taking logs.
inline constexpr double kLogClamp = 1e-300;

struct LinkFunction {
  std::string name;
  std::function<double(double)> forward;
  std::function<double(double)> derivative;
  // Optional stable log Phi(x); log(1 - Phi(x)) is taken as log_forward(-x),
  // so only symmetric links should set it.
  std::function<double(double)> log_forward;

  double LogProb(double x) const;        // log Phi(x), clamped
  double LogComplement(double x) const;  // log(1 - Phi(x)), clamped
};

LinkFunction SigmoidLink();
// User links must come with their derivative.
LinkFunction CustomLink(std::string name, std::function<double(double)> forward,
                        std::function<double(double)> derivative);
LinkFunction LinkByName(const std::string& name);

double Sigmoid(double x);

// P(o = 1 | tau0, tau1) = Phi(r(tau1) - r(tau0)).
inline double PrefProb(const LinkFunction& link, double r0, double r1) {
  return link.forward(r1 - r0);
}
double PrefProb(const LinkFunction& link, const TabularMdp& mdp,
                const RewardFunction& r, TrajectoryId tau0, TrajectoryId tau1);
// Phi(values(s, a1) - values(s, a0)) for one step's flattened Q or A table.
double ActionPrefProb(const LinkFunction& link,
                      const std::vector<double>& values, int num_actions, int s,
                      int a0, int a1);

// 1 / min Phi' over [-r_max, r_max]; 10^4-point grid plus both endpoints.
double Kappa(const LinkFunction& link, double r_max);

struct PreferenceRecord {
  TrajectoryId tau0 = 0;
  TrajectoryId tau1 = 0;
  int o = 0;  // 1 iff tau1 is preferred
  bool operator==(const PreferenceRecord&) const = default;
};

struct PreferenceDataset {
  std::vector<PreferenceRecord> records;
  std::optional<TrajectoryMixture> mu0, mu1;
  std::size_t size() const { return records.size(); }
};

// Draws tau0 ~ mu0, tau1 ~ mu1, then o, record by record.
PreferenceDataset GeneratePreferenceDataset(const TabularMdp& mdp,
                                            const RewardFunction& r_star,
                                            const LinkFunction& link,
                                            const Policy& mu0,
                                            const Policy& mu1, int n, Rng& rng);

struct ActionRecord {
  int state = 0;
  int a0 = 0;
  int a1 = 0;
  int o = 0;
  bool operator==(const ActionRecord&) const = default;
};

// Data laws for action comparisons: state[h][s], a0/a1[h][s * A + a].
struct ActionDataLaws {
  std::vector<std::vector<double>> state;
  std::vector<std::vector<double>> a0;
  std::vector<std::vector<double>> a1;
};

struct ActionPreferenceDataset {
  std::vector<std::vector<ActionRecord>> steps;  // [h]
  ActionDataLaws laws;
};

// Labels follow Phi(A*_h(s, a1) - A*_h(s, a0)). Needs a state-action reward.
ActionPreferenceDataset GenerateActionDataset(const TabularMdp& mdp,
                                              const RewardFunction& r_star,
                                              const LinkFunction& link,
                                              const ActionDataLaws& laws, int n,
                                              Rng& rng);

// Line format: "s,a,s,a,... s,a,s,a,... o" (columns tau0 tau1 o); lines
// starting with '#' are comments.
void WritePreferenceDataset(std::ostream& out, const TabularMdp& mdp,
                            const PreferenceDataset& data);
PreferenceDataset ReadPreferenceDataset(std::istream& in,
                                        const TabularMdp& mdp);
// Line format: "h s a0 a1 o".
void WriteActionDataset(std::ostream& out, const ActionPreferenceDataset& data);
ActionPreferenceDataset ReadActionDataset(std::istream& in,
                                          const TabularMdp& mdp);

}  // namespace freehand

#endif  // FREEHAND_PREFERENCE_H_
