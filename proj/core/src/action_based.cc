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

#include <algorithm>
#include <cmath>
#include <limits>

#include "freehand/errors.h"
#include "freehand/function_classes.h"

namespace freehand {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double SafeRatio(double num, double den) {
  if (den > 0.0) return num / den;
  return num > 0.0 ? kInf : 0.0;
}

// d^{pi*}_h(s).
std::vector<std::vector<double>> OptimalStateVisits(
    const TabularMdp& mdp, const MarkovDeterministicPolicy& pi) {
  auto d = Visitations(mdp, Policy(pi));
  const int S = mdp.num_states(), A = mdp.num_actions();
  std::vector<std::vector<double>> out(mdp.horizon(), std::vector<double>(S));
  for (int h = 0; h < mdp.horizon(); ++h) {
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a) out[h][s] += d[h][s * A + a];
    }
  }
  return out;
}

}  // namespace

MarkovDeterministicPolicy GreedyFromAdvantage(
    const TabularMdp& mdp, const std::vector<std::vector<double>>& tables) {
  if (static_cast<int>(tables.size()) != mdp.horizon()) {
    throw InvalidInput("need one advantage table per step");
  }
  return GreedyPolicy(mdp, tables);
}

MarkovDeterministicPolicy OptimalPolicy(const TabularMdp& mdp,
                                        const RewardFunction& r_star) {
  return GreedyPolicy(mdp, ComputeOptimalValues(mdp, r_star).q);
}

ActionRunResult RunFreehandAction(const TabularMdp& mdp,
                                  const RewardFunction& r_star,
                                  const ActionPreferenceDataset& data,
                                  const AdvantageClass& cls,
                                  const LinkFunction& link,
                                  const MleOptions& opts) {
  ActionRunResult out;
  out.fit = FitAdvantageMle(cls, mdp, data, link, opts);
  out.policy = GreedyFromAdvantage(mdp, out.fit.tables);
  // Same evaluator on both sides, so a recovered pi* scores exactly 0.
  out.optimal_value =
      EvaluatePolicy(mdp, Policy(OptimalPolicy(mdp, r_star)), r_star);
  out.value = EvaluatePolicy(mdp, Policy(out.policy), r_star);
  out.suboptimality = std::max(0.0, out.optimal_value - out.value);
  return out;
}

MarginProfile ComputeMarginProfile(const TabularMdp& mdp,
                                   const RewardFunction& r_star,
                                   const std::vector<double>& alphas) {
  if (alphas.empty()) throw InvalidInput("empty alpha grid");
  const int S = mdp.num_states(), A = mdp.num_actions(), H = mdp.horizon();
  const auto values = ComputeOptimalValues(mdp, r_star);
  const auto pi = GreedyPolicy(mdp, values.q);
  const auto visits = OptimalStateVisits(mdp, pi);

  MarginProfile out;
  out.alphas = alphas;
  out.per_action.assign(H * A, std::vector<double>(alphas.size(), 0.0));
  out.m.assign(alphas.size(), 0.0);
  for (int h = 0; h < H; ++h) {
    for (int s = 0; s < S; ++s) {
      if (visits[h][s] <= 0.0) continue;
      const double best = values.q[h][s * A + pi.action[h][s]];
      for (int a = 0; a < A; ++a) {
        const double gap = std::abs(best - values.q[h][s * A + a]);
        if (gap <= 0.0) continue;
        for (std::size_t k = 0; k < alphas.size(); ++k) {
          if (gap < alphas[k]) out.per_action[h * A + a][k] += visits[h][s];
        }
      }
    }
  }
  for (const auto& row : out.per_action) {
    for (std::size_t k = 0; k < alphas.size(); ++k) {
      out.m[k] = std::max(out.m[k], std::min(row[k], 1.0));
    }
  }

  int interior = 0;
  for (double v : out.m) interior += (v > 0.0 && v < 1.0);
  if (interior >= 2) {
    try {
      MarginFit fit = FitMarginExponent(out.alphas, out.m);
      out.fitted = true;
      out.beta = fit.beta;
      out.alpha0 = fit.alpha0;
      return out;
    } catch (const DegenerateProfile&) {
    }
  }
  if (interior == 0) {
    // No mass strictly inside: either never positive, or a single jump. A
    // jump at the smallest positive gap is a hard margin at that gap.
    out.hard_margin = true;
    out.beta = kInf;
    out.alpha0 = kInf;
    for (std::size_t k = 0; k < alphas.size(); ++k) {
      if (out.m[k] > 0.0) {
        out.alpha0 = alphas[k];
        break;
      }
    }
  } else {
    out.beta = std::numeric_limits<double>::quiet_NaN();
    out.alpha0 = std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

MarginFit FitMarginExponent(const std::vector<double>& alphas,
                            const std::vector<double>& m) {
  if (alphas.size() != m.size()) throw InvalidInput("size mismatch");
  std::vector<double> x, y;
  for (std::size_t k = 0; k < m.size(); ++k) {
    if (m[k] > 0.0 && m[k] < 1.0 && alphas[k] > 0.0) {
      x.push_back(std::log(alphas[k]));
      y.push_back(std::log(m[k]));
    }
  }
  if (x.size() < 2) {
    throw DegenerateProfile("fewer than two points with 0 < m(alpha) < 1");
  }
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i] / n;
    my += y[i] / n;
  }
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx <= 0.0) throw DegenerateProfile("all alphas coincide");
  const double beta = sxy / sxx;
  if (!(beta > 0.0)) throw DegenerateProfile("nonpositive fitted exponent");
  // log m = beta * (log alpha - log alpha0).
  const double intercept = my - beta * mx;
  return {beta, std::exp(-intercept / beta)};
}

double KappaAction(const LinkFunction& link, double b_max) {
  return Kappa(link, b_max);
}

double ConcentrabilityAction(const AdvantageClass& cls, const TabularMdp& mdp,
                             const RewardFunction& r_star,
                             const ActionDataLaws& laws, std::uint64_t cap,
                             double resolution) {
  const int S = mdp.num_states(), A = mdp.num_actions(), H = mdp.horizon();
  if (static_cast<int>(cls.steps.size()) != H) {
    throw InvalidInput("advantage class needs one entry per step");
  }
  const auto values = ComputeOptimalValues(mdp, r_star);
  const auto pi = GreedyPolicy(mdp, values.q);
  const auto visits = OptimalStateVisits(mdp, pi);
  double sup = 0.0;
  for (int h = 0; h < H; ++h) {
    const auto& truth = values.advantage[h];
    auto loss = [&](const std::vector<double>& t, int s, int a0, int a1) {
      double e = (truth[s * A + a0] - truth[s * A + a1]) -
                 (t[s * A + a0] - t[s * A + a1]);
      return e * e;
    };
    for (const auto& t :
         EnumerateAdvantageMembers(cls.steps[h], S, A, cap, resolution)) {
      double num = 0.0, den = 0.0;
      for (int s = 0; s < S; ++s) {
        if (visits[h][s] > 0.0) {
          for (int a1 = 0; a1 < A; ++a1) {
            num += visits[h][s] * loss(t, s, pi.action[h][s], a1) / A;
          }
        }
        if (laws.state[h][s] <= 0.0) continue;
        for (int a0 = 0; a0 < A; ++a0) {
          const double p0 = laws.a0[h][s * A + a0];
          if (p0 <= 0.0) continue;
          for (int a1 = 0; a1 < A; ++a1) {
            const double p1 = laws.a1[h][s * A + a1];
            if (p1 > 0.0)
              den += laws.state[h][s] * p0 * p1 * loss(t, s, a0, a1);
          }
        }
      }
      sup = std::max(sup, SafeRatio(num, den));
    }
  }
  return sup;
}

double ConcentrabilityActionBound(const TabularMdp& mdp,
                                  const RewardFunction& r_star,
                                  const ActionDataLaws& laws) {
  const int S = mdp.num_states(), A = mdp.num_actions(), H = mdp.horizon();
  const auto pi = OptimalPolicy(mdp, r_star);
  const auto visits = OptimalStateVisits(mdp, pi);
  double states = 0.0, first = 0.0, second = 0.0;
  for (int h = 0; h < H; ++h) {
    for (int s = 0; s < S; ++s) {
      states = std::max(states, SafeRatio(visits[h][s], laws.state[h][s]));
      first =
          std::max(first, SafeRatio(1.0, laws.a0[h][s * A + pi.action[h][s]]));
      for (int a = 0; a < A; ++a) {
        second = std::max(second, SafeRatio(1.0, laws.a1[h][s * A + a]));
      }
    }
  }
  return states * first * second / A;
}

}  // namespace freehand
