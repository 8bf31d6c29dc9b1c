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

#include "freehand/function_classes.h"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>

#include "freehand/errors.h"

namespace freehand {
namespace {

constexpr double kGridTol = 1e-9;

std::uint64_t CheckedPow(std::uint64_t base, std::uint64_t exp,
                         std::uint64_t cap, const char* what) {
  std::uint64_t out = 1;
  for (std::uint64_t i = 0; i < exp; ++i) {
    if (base != 0 && out > cap / base)
      out = cap + 1;
    else
      out *= base;
    if (out > cap) {
      throw EnumerationTooLarge(std::string(what) + " exceeds the cap of " +
                                std::to_string(cap));
    }
  }
  return out;
}

void CheckEpsilon(double epsilon) {
  if (!(epsilon > 0.0 && epsilon <= 1.0)) {
    throw InvalidEpsilon("epsilon must lie in (0, 1]");
  }
}

// Snaps x onto {lo + k * g, k = 0..levels-1}; returns -1 if off-grid.
int GridIndex(double x, double lo, double g, int levels) {
  double k = (x - lo) / g;
  double kr = std::round(k);
  if (std::abs(k - kr) > kGridTol || kr < 0 || kr >= levels) return -1;
  return static_cast<int>(kr);
}

std::vector<std::vector<int>> Compositions(int total, int parts) {
  std::vector<std::vector<int>> out;
  std::vector<int> cur(parts, 0);
  std::function<void(int, int)> rec = [&](int i, int left) {
    if (i == parts - 1) {
      cur[i] = left;
      out.push_back(cur);
      return;
    }
    for (int k = left; k >= 0; --k) {
      cur[i] = k;
      rec(i + 1, left - k);
    }
  };
  rec(0, total);
  return out;
}

}  // namespace

int TabularGridClass::levels() const {
  return static_cast<int>(std::floor(r_max / spacing + kGridTol)) + 1;
}

TabularGridClass MakeTabularGrid(std::uint64_t num_trajectories, double r_max,
                                 double spacing, std::vector<int> cell_of) {
  if (!(spacing > 0.0) || !(r_max >= 0.0)) {
    throw InvalidInput("grid needs spacing > 0 and r_max >= 0");
  }
  TabularGridClass cls;
  cls.r_max = r_max;
  cls.spacing = spacing;
  if (cell_of.empty()) {
    cell_of.resize(num_trajectories);
    std::iota(cell_of.begin(), cell_of.end(), 0);
  }
  if (cell_of.size() != num_trajectories) {
    throw InvalidInput("cell map must cover every trajectory");
  }
  cls.num_cells = 1 + *std::max_element(cell_of.begin(), cell_of.end());
  std::vector<bool> used(cls.num_cells, false);
  for (int c : cell_of) {
    if (c < 0) throw InvalidInput("negative cell index");
    used[c] = true;
  }
  if (std::find(used.begin(), used.end(), false) != used.end()) {
    throw InvalidInput("cell indices must be contiguous from 0");
  }
  cls.cell_of = std::move(cell_of);
  return cls;
}

LinearRewardClass MakeLinearClass(std::vector<std::vector<double>> features,
                                  double B, double r_max, double c_geom) {
  if (features.empty()) throw InvalidInput("linear class needs features");
  LinearRewardClass cls;
  cls.dim = static_cast<int>(features[0].size());
  if (cls.dim < 1) throw InvalidInput("feature dimension must be positive");
  for (const auto& row : features) {
    if (static_cast<int>(row.size()) != cls.dim) {
      throw InvalidInput("ragged feature matrix");
    }
    double n = 0.0;
    for (double v : row) n += v * v;
    cls.R = std::max(cls.R, std::sqrt(n));
  }
  if (!(B > 0.0)) throw InvalidInput("B must be positive");
  cls.features = std::move(features);
  cls.B = B;
  cls.r_max = r_max;
  cls.c_geom = c_geom;
  return cls;
}

LinearRewardClass MakeOneHotClass(std::uint64_t num_trajectories, double B,
                                  double r_max, double c_geom) {
  std::vector<std::vector<double>> features(
      num_trajectories, std::vector<double>(num_trajectories, 0.0));
  for (std::uint64_t i = 0; i < num_trajectories; ++i) features[i][i] = 1.0;
  return MakeLinearClass(std::move(features), B, r_max, c_geom);
}

std::uint64_t NumTrajectoriesOf(const RewardClass& cls) {
  if (const auto* g = std::get_if<TabularGridClass>(&cls)) {
    return g->cell_of.size();
  }
  if (const auto* l = std::get_if<LinearRewardClass>(&cls)) {
    return l->features.size();
  }
  const auto& f = std::get<FiniteRewardClass>(cls);
  return f.members.empty() ? 0 : f.members[0].size();
}

RewardModel Realize(const RewardClass& cls, const std::vector<double>& params) {
  RewardModel m;
  m.params = params;
  if (const auto* g = std::get_if<TabularGridClass>(&cls)) {
    m.values.resize(g->cell_of.size());
    for (std::size_t t = 0; t < g->cell_of.size(); ++t) {
      m.values[t] = params.at(g->cell_of[t]);
    }
  } else if (const auto* l = std::get_if<LinearRewardClass>(&cls)) {
    m.values.assign(l->features.size(), 0.0);
    for (std::size_t t = 0; t < l->features.size(); ++t) {
      for (int k = 0; k < l->dim; ++k) {
        m.values[t] += l->features[t][k] * params.at(k);
      }
    }
  } else {
    const auto& f = std::get<FiniteRewardClass>(cls);
    m.values = f.members.at(static_cast<std::size_t>(params.at(0)));
  }
  return m;
}

double LogBracketNumber(const RewardClass& cls, double epsilon) {
  CheckEpsilon(epsilon);
  if (const auto* g = std::get_if<TabularGridClass>(&cls)) {
    return g->num_cells * std::log(static_cast<double>(g->levels()));
  }
  if (const auto* l = std::get_if<LinearRewardClass>(&cls)) {
    return l->dim * std::log(l->B * l->R / epsilon) +
           l->dim * std::log(l->c_geom);
  }
  return std::log(
      static_cast<double>(std::get<FiniteRewardClass>(cls).members.size()));
}

bool ContainsTruth(const RewardClass& cls, const std::vector<double>& truth) {
  if (truth.size() != NumTrajectoriesOf(cls)) return false;
  if (const auto* g = std::get_if<TabularGridClass>(&cls)) {
    std::vector<double> cell_value(g->num_cells, -1.0);
    for (std::size_t t = 0; t < truth.size(); ++t) {
      if (GridIndex(truth[t], 0.0, g->spacing, g->levels()) < 0) return false;
      double& v = cell_value[g->cell_of[t]];
      if (v >= 0.0 && std::abs(v - truth[t]) > kGridTol) return false;
      v = truth[t];
    }
    return true;
  }
  if (const auto* l = std::get_if<LinearRewardClass>(&cls)) {
    const int T = static_cast<int>(truth.size());
    Eigen::MatrixXd phi(T, l->dim);
    Eigen::VectorXd r(T);
    for (int t = 0; t < T; ++t) {
      if (truth[t] < -kGridTol || truth[t] > l->r_max + kGridTol) return false;
      r(t) = truth[t];
      for (int k = 0; k < l->dim; ++k) phi(t, k) = l->features[t][k];
    }
    // Minimum-norm least squares: the smallest theta reproducing the truth.
    Eigen::VectorXd theta = phi.completeOrthogonalDecomposition().solve(r);
    double residual = (phi * theta - r).cwiseAbs().maxCoeff();
    return residual <= kGridTol * (1.0 + r.cwiseAbs().maxCoeff()) &&
           theta.norm() <= l->B * (1.0 + kGridTol);
  }
  for (const auto& m : std::get<FiniteRewardClass>(cls).members) {
    bool same = m.size() == truth.size();
    for (std::size_t t = 0; same && t < m.size(); ++t) {
      same = std::abs(m[t] - truth[t]) <= kRepresentationTol;
    }
    if (same) return true;
  }
  return false;
}

std::vector<std::vector<double>> ParameterNet(int dim, double B,
                                              double resolution,
                                              std::uint64_t cap) {
  if (!(resolution > 0.0) || dim < 1) {
    throw InvalidInput("net needs resolution > 0 and dim >= 1");
  }
  const double h = 2.0 * resolution / std::sqrt(static_cast<double>(dim));
  const int m = static_cast<int>(std::ceil((B + resolution) / h));
  const std::uint64_t side = 2 * static_cast<std::uint64_t>(m) + 1;
  const std::uint64_t count = CheckedPow(side, dim, cap, "parameter net");
  std::vector<std::vector<double>> net;
  std::vector<double> x(dim);
  for (std::uint64_t idx = 0; idx < count; ++idx) {
    std::uint64_t rest = idx;
    double norm2 = 0.0;
    for (int k = dim - 1; k >= 0; --k) {
      x[k] = (static_cast<double>(rest % side) - m) * h;
      rest /= side;
      norm2 += x[k] * x[k];
    }
    double norm = std::sqrt(norm2);
    if (norm > B + resolution) continue;
    std::vector<double> p = x;
    if (norm > B) {
      for (double& v : p) v *= B / norm;
    }
    net.push_back(std::move(p));
  }
  return net;
}

std::vector<RewardModel> EnumerateMembers(const RewardClass& cls,
                                          std::uint64_t cap,
                                          double resolution) {
  std::vector<RewardModel> out;
  if (const auto* g = std::get_if<TabularGridClass>(&cls)) {
    const int levels = g->levels();
    const std::uint64_t count =
        CheckedPow(levels, g->num_cells, cap, "grid member count");
    std::vector<double> params(g->num_cells);
    out.reserve(count);
    for (std::uint64_t idx = 0; idx < count; ++idx) {
      std::uint64_t rest = idx;
      for (int c = g->num_cells - 1; c >= 0; --c) {
        params[c] = g->level_value(static_cast<int>(rest % levels));
        rest /= levels;
      }
      out.push_back(Realize(cls, params));
    }
    return out;
  }
  if (const auto* l = std::get_if<LinearRewardClass>(&cls)) {
    for (auto& theta : ParameterNet(l->dim, l->B, resolution, cap)) {
      RewardModel m = Realize(cls, theta);
      bool bounded =
          std::all_of(m.values.begin(), m.values.end(), [&](double v) {
            return v >= -kRepresentationTol &&
                   v <= l->r_max + kRepresentationTol;
          });
      if (bounded) out.push_back(std::move(m));
    }
    return out;
  }
  const auto& f = std::get<FiniteRewardClass>(cls);
  if (f.members.size() > cap) {
    throw EnumerationTooLarge("finite class exceeds the cap");
  }
  for (std::size_t i = 0; i < f.members.size(); ++i) {
    out.push_back({{static_cast<double>(i)}, f.members[i]});
  }
  return out;
}

TransitionClass FullSimplexTransitions(const TabularMdp& mdp) {
  return {
      std::vector<StepTransitionClass>(mdp.horizon() - 1, FullSimplexClass{})};
}

TransitionClass SingletonTransitions(const TabularMdp& mdp) {
  TransitionClass cls;
  for (int h = 0; h + 1 < mdp.horizon(); ++h) {
    cls.steps.push_back(CandidateTransitions{{mdp.transitions(h)}});
  }
  return cls;
}

double LogBracketNumber(const StepTransitionClass& cls, int num_states,
                        int num_actions, double epsilon) {
  CheckEpsilon(epsilon);
  if (const auto* f = std::get_if<FullSimplexClass>(&cls)) {
    // Each row is a point of an (S-1)-dimensional simplex.
    const double free_params =
        static_cast<double>(num_states) * num_actions * (num_states - 1);
    return free_params * std::log(f->c_geom / epsilon);
  }
  return std::log(
      static_cast<double>(std::get<CandidateTransitions>(cls).tables.size()));
}

bool ContainsTruth(const StepTransitionClass& cls,
                   const std::vector<double>& table, int num_states,
                   int num_actions) {
  const std::size_t n =
      static_cast<std::size_t>(num_states) * num_actions * num_states;
  if (table.size() != n) return false;
  if (std::holds_alternative<FullSimplexClass>(cls)) {
    for (int sa = 0; sa < num_states * num_actions; ++sa) {
      double total = 0.0;
      for (int s2 = 0; s2 < num_states; ++s2) {
        double p = table[sa * num_states + s2];
        if (p < 0.0) return false;
        total += p;
      }
      if (std::abs(total - 1.0) > kRepresentationTol) return false;
    }
    return true;
  }
  for (const auto& cand : std::get<CandidateTransitions>(cls).tables) {
    bool same = cand.size() == n;
    for (std::size_t i = 0; same && i < n; ++i) {
      same = std::abs(cand[i] - table[i]) <= kRepresentationTol;
    }
    if (same) return true;
  }
  return false;
}

std::vector<std::vector<double>> EnumerateTransitionMembers(
    const StepTransitionClass& cls, int num_states, int num_actions,
    double resolution, std::uint64_t cap) {
  if (const auto* c = std::get_if<CandidateTransitions>(&cls)) {
    if (c->tables.size() > cap) {
      throw EnumerationTooLarge("candidate list exceeds the cap");
    }
    return c->tables;
  }
  const int total =
      std::max(1, static_cast<int>(std::lround(1.0 / resolution)));
  const auto rows = Compositions(total, num_states);
  const int pairs = num_states * num_actions;
  const std::uint64_t count =
      CheckedPow(rows.size(), pairs, cap, "simplex grid member count");
  std::vector<std::vector<double>> out;
  out.reserve(count);
  for (std::uint64_t idx = 0; idx < count; ++idx) {
    std::vector<double> table(static_cast<std::size_t>(pairs) * num_states);
    std::uint64_t rest = idx;
    for (int sa = pairs - 1; sa >= 0; --sa) {
      const auto& row = rows[rest % rows.size()];
      rest /= rows.size();
      for (int s2 = 0; s2 < num_states; ++s2) {
        table[sa * num_states + s2] = static_cast<double>(row[s2]) / total;
      }
    }
    out.push_back(std::move(table));
  }
  return out;
}

int AdvantageStepClass::levels() const {
  return static_cast<int>(std::floor(2.0 * b_max / spacing + kGridTol)) + 1;
}

AdvantageClass TabularAdvantageClass(int horizon, double b_max,
                                     double spacing) {
  if (!(b_max > 0.0) || !(spacing > 0.0)) {
    throw InvalidInput("advantage class needs b_max > 0 and spacing > 0");
  }
  AdvantageStepClass step;
  step.b_max = b_max;
  step.spacing = spacing;
  return {std::vector<AdvantageStepClass>(horizon, step)};
}

double LogBracketNumber(const AdvantageStepClass& cls, int num_states,
                        int num_actions, double epsilon) {
  CheckEpsilon(epsilon);
  if (cls.is_linear()) {
    double R = 0.0;
    for (const auto& row : cls.features) {
      double n = 0.0;
      for (double v : row) n += v * v;
      R = std::max(R, std::sqrt(n));
    }
    const double d = static_cast<double>(cls.features[0].size());
    return d * std::log(cls.B * R / epsilon) + d * std::log(cls.c_geom);
  }
  return static_cast<double>(num_states) * num_actions *
         std::log(static_cast<double>(cls.levels()));
}

bool ContainsTruth(const AdvantageStepClass& cls,
                   const std::vector<double>& table, int num_states,
                   int num_actions) {
  if (static_cast<int>(table.size()) != num_states * num_actions) return false;
  for (double v : table) {
    if (std::abs(v) > cls.b_max + kGridTol) return false;
  }
  if (!cls.is_linear()) {
    for (double v : table) {
      if (GridIndex(v, -cls.b_max, cls.spacing, cls.levels()) < 0) return false;
    }
    return true;
  }
  const int n = num_states * num_actions;
  const int d = static_cast<int>(cls.features[0].size());
  Eigen::MatrixXd phi(n, d);
  Eigen::VectorXd a(n);
  for (int i = 0; i < n; ++i) {
    a(i) = table[i];
    for (int k = 0; k < d; ++k) phi(i, k) = cls.features[i][k];
  }
  Eigen::VectorXd theta = phi.completeOrthogonalDecomposition().solve(a);
  return (phi * theta - a).cwiseAbs().maxCoeff() <= kGridTol &&
         theta.norm() <= cls.B * (1.0 + kGridTol);
}

std::vector<std::vector<double>> EnumerateAdvantageMembers(
    const AdvantageStepClass& cls, int num_states, int num_actions,
    std::uint64_t cap, double resolution) {
  const int n = num_states * num_actions;
  std::vector<std::vector<double>> out;
  if (cls.is_linear()) {
    const int d = static_cast<int>(cls.features[0].size());
    for (const auto& theta : ParameterNet(d, cls.B, resolution, cap)) {
      std::vector<double> table(n, 0.0);
      bool bounded = true;
      for (int i = 0; i < n; ++i) {
        for (int k = 0; k < d; ++k) table[i] += cls.features[i][k] * theta[k];
        bounded = bounded && std::abs(table[i]) <= cls.b_max + kGridTol;
      }
      if (bounded) out.push_back(std::move(table));
    }
    return out;
  }
  const int levels = cls.levels();
  const std::uint64_t count =
      CheckedPow(levels, n, cap, "advantage grid member count");
  out.reserve(count);
  for (std::uint64_t idx = 0; idx < count; ++idx) {
    std::vector<double> table(n);
    std::uint64_t rest = idx;
    for (int i = n - 1; i >= 0; --i) {
      table[i] = -cls.b_max + cls.spacing * static_cast<double>(rest % levels);
      rest /= levels;
    }
    out.push_back(std::move(table));
  }
  return out;
}

}  // namespace freehand
