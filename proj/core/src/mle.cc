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

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <tuple>
#include <utility>

#include "freehand/errors.h"

namespace freehand {
namespace {

Eigen::VectorXd FeatureRow(const RewardClass& cls, TrajectoryId id) {
  if (const auto* g = std::get_if<TabularGridClass>(&cls)) {
    Eigen::VectorXd row = Eigen::VectorXd::Zero(g->num_cells);
    row(g->cell_of.at(id)) = 1.0;
    return row;
  }
  if (const auto* l = std::get_if<LinearRewardClass>(&cls)) {
    const auto& f = l->features.at(id);
    return Eigen::Map<const Eigen::VectorXd>(f.data(), l->dim);
  }
  throw InvalidInput("finite reward classes have no parameterization");
}

int ParamDim(const RewardClass& cls) {
  if (const auto* g = std::get_if<TabularGridClass>(&cls)) return g->num_cells;
  if (const auto* l = std::get_if<LinearRewardClass>(&cls)) return l->dim;
  throw InvalidInput("finite reward classes have no parameterization");
}

std::vector<double> ToStd(const Eigen::VectorXd& x) {
  return std::vector<double>(x.data(), x.data() + x.size());
}

// Pairwise slope of n1 log Phi(d) + n0 log(1 - Phi(d)) in d.
double PairSlope(const LinkFunction& link, double d, double n1, double n0) {
  double p = link.forward(d), dp = link.derivative(d);
  return n1 * dp / std::max(p, kLogClamp) -
         n0 * dp / std::max(1.0 - p, kLogClamp);
}

}  // namespace

PairCounts AggregatePairs(const PreferenceDataset& data) {
  std::map<std::pair<TrajectoryId, TrajectoryId>, std::pair<double, double>>
      grouped;
  for (const auto& rec : data.records) {
    auto& c = grouped[{rec.tau0, rec.tau1}];
    (rec.o == 1 ? c.first : c.second) += 1.0;
  }
  PairCounts out;
  out.entries.reserve(grouped.size());
  for (const auto& [key, c] : grouped) {
    out.entries.push_back({key.first, key.second, c.first, c.second});
  }
  out.total = static_cast<double>(data.size());
  return out;
}

double LogLikelihoodReward(const std::vector<double>& r,
                           const PairCounts& counts, const LinkFunction& link) {
  double total = 0.0;
  for (const auto& e : counts.entries) {
    double d = r[e.tau1] - r[e.tau0];
    if (e.n1 > 0) total += e.n1 * link.LogProb(d);
    if (e.n0 > 0) total += e.n0 * link.LogComplement(d);
  }
  return total;
}

double LogLikelihoodReward(const std::vector<double>& r,
                           const PreferenceDataset& data,
                           const LinkFunction& link) {
  return LogLikelihoodReward(r, AggregatePairs(data), link);
}

std::vector<double> LogLikelihoodRewardGradient(const std::vector<double>& r,
                                                const PairCounts& counts,
                                                const LinkFunction& link) {
  std::vector<double> grad(r.size(), 0.0);
  for (const auto& e : counts.entries) {
    double slope = PairSlope(link, r[e.tau1] - r[e.tau0], e.n1, e.n0);
    grad[e.tau1] += slope;
    grad[e.tau0] -= slope;
  }
  return grad;
}

ParamDomain RewardDomain(const RewardClass& cls) {
  if (const auto* g = std::get_if<TabularGridClass>(&cls)) {
    return ParamDomain::Box(g->num_cells, 0.0, g->r_max);
  }
  if (const auto* l = std::get_if<LinearRewardClass>(&cls)) {
    ParamDomain d = ParamDomain::Ball(l->dim, l->B);
    std::vector<std::vector<double>> seen;
    for (const auto& row : l->features) {
      if (std::find(seen.begin(), seen.end(), row) != seen.end()) continue;
      seen.push_back(row);
      d.AddSlab(Eigen::Map<const Eigen::VectorXd>(row.data(), l->dim), 0.0,
                l->r_max);
    }
    return d;
  }
  throw InvalidInput("finite reward classes have no parameterization");
}

ComparisonLikelihood RewardLikelihood(const RewardClass& cls,
                                      const PairCounts& counts,
                                      const LinkFunction& link) {
  std::vector<ComparisonGroup> groups;
  groups.reserve(counts.entries.size());
  for (const auto& e : counts.entries) {
    groups.push_back(
        {FeatureRow(cls, e.tau1) - FeatureRow(cls, e.tau0), e.n1, e.n0});
  }
  return ComparisonLikelihood(ParamDim(cls), std::move(groups), link);
}

Eigen::VectorXd PullBackFunctional(const RewardClass& cls,
                                   const std::vector<double>& c) {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(ParamDim(cls));
  if (const auto* grid = std::get_if<TabularGridClass>(&cls)) {
    for (std::size_t t = 0; t < c.size(); ++t) g(grid->cell_of[t]) += c[t];
    return g;
  }
  for (std::size_t t = 0; t < c.size(); ++t) {
    if (c[t] != 0.0) g += c[t] * FeatureRow(cls, t);
  }
  return g;
}

namespace {

RewardFit ScanFinite(const RewardClass& cls, const PairCounts& counts,
                     const LinkFunction& link, std::uint64_t cap) {
  RewardFit fit;
  fit.method = "finite_scan";
  bool first = true;
  for (auto& m : EnumerateMembers(cls, cap)) {
    double ll = LogLikelihoodReward(m.values, counts, link);
    if (first || ll > fit.loglik) {
      fit.loglik = ll;
      fit.model = std::move(m);
      first = false;
    }
  }
  return fit;
}

RewardFit ScanGrid(const TabularGridClass& g, const PairCounts& counts,
                   const LinkFunction& link, std::uint64_t count) {
  RewardFit fit;
  fit.method = "grid_scan";
  const int levels = g.levels();
  std::vector<double> params(g.num_cells), values(g.cell_of.size());
  for (std::uint64_t idx = 0; idx < count; ++idx) {
    std::uint64_t rest = idx;
    for (int c = g.num_cells - 1; c >= 0; --c) {
      params[c] = g.level_value(static_cast<int>(rest % levels));
      rest /= levels;
    }
    for (std::size_t t = 0; t < values.size(); ++t) {
      values[t] = params[g.cell_of[t]];
    }
    double ll = LogLikelihoodReward(values, counts, link);
    if (idx == 0 || ll > fit.loglik) {
      fit.loglik = ll;
      fit.model = {params, values};
    }
  }
  return fit;
}

}  // namespace

RewardFit FitRewardMle(const RewardClass& cls, const PreferenceDataset& data,
                       const LinkFunction& link, const MleOptions& opts,
                       std::uint64_t cap) {
  if (data.records.empty()) throw InvalidInput("empty preference dataset");
  if (opts.max_iters < 1 || !(opts.grad_tol > 0.0)) {
    throw InvalidInput("MleOptions need max_iters >= 1 and grad_tol > 0");
  }
  const PairCounts counts = AggregatePairs(data);
  if (std::holds_alternative<FiniteRewardClass>(cls)) {
    return ScanFinite(cls, counts, link, cap);
  }
  if (const auto* g = std::get_if<TabularGridClass>(&cls)) {
    double log_count =
        g->num_cells * std::log(static_cast<double>(g->levels()));
    if (log_count <= std::log(static_cast<double>(cap)) + 1e-12) {
      std::uint64_t count = 1;
      for (int c = 0; c < g->num_cells; ++c) count *= g->levels();
      return ScanGrid(*g, counts, link, count);
    }
  }

  const ParamDomain domain = RewardDomain(cls);
  const ComparisonLikelihood lik = RewardLikelihood(cls, counts, link);
  const int dim = lik.dim();
  const Eigen::VectorXd zero_g = Eigen::VectorXd::Zero(dim);
  const auto* grid = std::get_if<TabularGridClass>(&cls);
  SolveResult best;
  bool have = false;
  for (int k = 0; k < std::max(1, opts.restarts); ++k) {
    Eigen::VectorXd x0 = Eigen::VectorXd::Zero(dim);
    if (grid != nullptr) x0.setConstant(grid->r_max / 2);
    if (k > 0) x0(k % dim) += (k % 2 == 0 ? 1.0 : -1.0) * k;
    SolveResult res = MaximizePenalized(lik, domain, zero_g, 0.0, x0, opts);
    if (!have || res.objective > best.objective) {
      best = std::move(res);
      have = true;
    }
  }
  if (!best.converged) {
    throw DidNotConverge("reward MLE stopped with projected-gradient norm " +
                         std::to_string(best.grad_norm));
  }
  RewardFit fit;
  fit.iterations = best.iterations;
  fit.grad_norm = best.grad_norm;
  fit.trace = std::move(best.trace);
  if (grid == nullptr) {
    fit.method = "projected_newton";
    fit.model = Realize(cls, ToStd(best.x));
    fit.loglik = LogLikelihoodReward(fit.model.values, counts, link);
    return fit;
  }

  // Too many grid members to scan: anchor the relaxed optimum at 0, round to
  // the grid, then improve one level at a time while the likelihood rises.
  fit.method = "relaxed_rounding";
  Eigen::VectorXd x = best.x.array() - best.x.minCoeff();
  const int levels = grid->levels();
  std::vector<int> level(dim);
  for (int c = 0; c < dim; ++c) {
    level[c] = std::clamp(static_cast<int>(std::lround(x(c) / grid->spacing)),
                          0, levels - 1);
  }
  auto values_of = [&](const std::vector<int>& lv) {
    std::vector<double> params(dim);
    for (int c = 0; c < dim; ++c) params[c] = grid->level_value(lv[c]);
    return Realize(cls, params);
  };
  RewardModel model = values_of(level);
  double ll = LogLikelihoodReward(model.values, counts, link);
  for (bool improved = true; improved;) {
    improved = false;
    for (int c = 0; c < dim; ++c) {
      for (int delta : {-1, 1}) {
        std::vector<int> trial = level;
        trial[c] += delta;
        if (trial[c] < 0 || trial[c] >= levels) continue;
        RewardModel m = values_of(trial);
        double tll = LogLikelihoodReward(m.values, counts, link);
        if (tll > ll) {
          ll = tll;
          level = std::move(trial);
          model = std::move(m);
          improved = true;
        }
      }
    }
  }
  fit.model = std::move(model);
  fit.loglik = ll;
  return fit;
}

std::vector<double> TransitionCounts(const TabularMdp& mdp,
                                     const PreferenceDataset& data, int h) {
  if (h < 0 || h + 1 >= mdp.horizon()) {
    throw InvalidInput("transition step out of range");
  }
  const int S = mdp.num_states(), A = mdp.num_actions();
  std::vector<double> counts(static_cast<std::size_t>(S) * A * S, 0.0);
  for (const auto& rec : data.records) {
    for (TrajectoryId id : {rec.tau0, rec.tau1}) {
      Trajectory tau = mdp.Decode(id);
      counts[(tau[h].state * A + tau[h].action) * S + tau[h + 1].state] += 1.0;
    }
  }
  return counts;
}

double TransitionLogLikelihood(const std::vector<double>& table,
                               const std::vector<double>& counts) {
  double total = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (counts[i] > 0)
      total += counts[i] * std::log(std::max(table[i], kLogClamp));
  }
  return total;
}

std::vector<double> FitTransitionMle(const StepTransitionClass& cls,
                                     const TabularMdp& mdp,
                                     const PreferenceDataset& data, int h,
                                     double smoothing) {
  const std::vector<double> counts = TransitionCounts(mdp, data, h);
  const int S = mdp.num_states();
  if (const auto* cand = std::get_if<CandidateTransitions>(&cls)) {
    if (cand->tables.empty()) throw InvalidInput("empty candidate list");
    std::size_t best = 0;
    double best_ll = TransitionLogLikelihood(cand->tables[0], counts);
    for (std::size_t i = 1; i < cand->tables.size(); ++i) {
      double ll = TransitionLogLikelihood(cand->tables[i], counts);
      if (ll > best_ll) {
        best_ll = ll;
        best = i;
      }
    }
    return cand->tables[best];
  }
  if (smoothing < 0) throw InvalidInput("smoothing must be nonnegative");
  std::vector<double> table(counts.size());
  for (int sa = 0; sa < mdp.num_pairs(); ++sa) {
    double n = 0.0;
    for (int s2 = 0; s2 < S; ++s2) n += counts[sa * S + s2];
    double denom = n + S * smoothing;
    for (int s2 = 0; s2 < S; ++s2) {
      table[sa * S + s2] =
          denom > 0 ? (counts[sa * S + s2] + smoothing) / denom : 1.0 / S;
    }
  }
  return table;
}

double LogLikelihoodAdvantage(const std::vector<double>& table,
                              const std::vector<ActionRecord>& records,
                              int num_actions, const LinkFunction& link) {
  double total = 0.0;
  for (const auto& rec : records) {
    double d = table[rec.state * num_actions + rec.a1] -
               table[rec.state * num_actions + rec.a0];
    total += rec.o == 1 ? link.LogProb(d) : link.LogComplement(d);
  }
  return total;
}

AdvantageFit FitAdvantageMle(const AdvantageClass& cls, const TabularMdp& mdp,
                             const ActionPreferenceDataset& data,
                             const LinkFunction& link, const MleOptions& opts) {
  const int H = mdp.horizon(), S = mdp.num_states(), A = mdp.num_actions();
  if (static_cast<int>(cls.steps.size()) != H ||
      static_cast<int>(data.steps.size()) != H) {
    throw InvalidInput("advantage class and data need one entry per step");
  }
  AdvantageFit fit;
  for (int h = 0; h < H; ++h) {
    const AdvantageStepClass& step = cls.steps[h];
    const auto& records = data.steps[h];
    if (records.empty()) throw InvalidInput("no action comparisons at a step");
    std::map<std::tuple<int, int, int>, std::pair<double, double>> grouped;
    for (const auto& rec : records) {
      auto& c = grouped[{rec.state, rec.a0, rec.a1}];
      (rec.o == 1 ? c.first : c.second) += 1.0;
    }
    auto row = [&](int s, int a) -> Eigen::VectorXd {
      if (step.is_linear()) {
        const auto& f = step.features.at(s * A + a);
        return Eigen::Map<const Eigen::VectorXd>(f.data(), f.size());
      }
      Eigen::VectorXd e = Eigen::VectorXd::Zero(S * A);
      e(s * A + a) = 1.0;
      return e;
    };
    const int dim =
        step.is_linear() ? static_cast<int>(step.features[0].size()) : S * A;
    std::vector<ComparisonGroup> groups;
    for (const auto& [key, c] : grouped) {
      auto [s, a0, a1] = key;
      groups.push_back({row(s, a1) - row(s, a0), c.first, c.second});
    }
    ParamDomain domain(dim);
    if (step.is_linear()) {
      domain = ParamDomain::Ball(dim, step.B);
      for (int i = 0; i < S * A; ++i) {
        domain.AddSlab(row(i / A, i % A), -step.b_max, step.b_max);
      }
    } else {
      domain = ParamDomain::Box(dim, -step.b_max / 2, step.b_max / 2);
    }
    ComparisonLikelihood lik(dim, std::move(groups), link);
    SolveResult res = MaximizePenalized(lik, domain, Eigen::VectorXd::Zero(dim),
                                        0.0, Eigen::VectorXd::Zero(dim), opts);
    if (!res.converged) {
      throw DidNotConverge("advantage MLE at step " + std::to_string(h) +
                           " stopped with projected-gradient norm " +
                           std::to_string(res.grad_norm));
    }
    std::vector<double> table(S * A);
    for (int i = 0; i < S * A; ++i) table[i] = row(i / A, i % A).dot(res.x);
    for (int s = 0; s < S; ++s) {
      double top =
          *std::max_element(table.begin() + s * A, table.begin() + (s + 1) * A);
      for (int a = 0; a < A; ++a) table[s * A + a] -= top;
    }
    fit.loglik.push_back(LogLikelihoodAdvantage(table, records, A, link));
    fit.iterations.push_back(res.iterations);
    fit.tables.push_back(std::move(table));
  }
  return fit;
}

}  // namespace freehand
