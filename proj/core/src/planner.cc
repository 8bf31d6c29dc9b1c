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

#include "freehand/planner.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <utility>

#include "freehand/errors.h"
#include "freehand/parallel.h"

namespace freehand {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double Dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

InnerMethod Resolve(InnerMethod m, const RewardClass& cls) {
  if (std::holds_alternative<FiniteRewardClass>(cls)) return InnerMethod::kGrid;
  if (m != InnerMethod::kAuto) return m;
  return std::holds_alternative<LinearRewardClass>(cls)
             ? InnerMethod::kLagrangian
             : InnerMethod::kGrid;
}

std::vector<double> Dense(const TrajectoryMixture& law, std::uint64_t n) {
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < law.size(); ++i) out[law.ids[i]] += law.probs[i];
  return out;
}

}  // namespace

InnerMethod ParseInnerMethod(const std::string& name) {
  if (name == "auto") return InnerMethod::kAuto;
  if (name == "grid") return InnerMethod::kGrid;
  if (name == "lagrangian") return InnerMethod::kLagrangian;
  throw InvalidInput("unknown inner method '" + name + "'");
}

std::string InnerMethodName(InnerMethod m) {
  switch (m) {
    case InnerMethod::kAuto:
      return "auto";
    case InnerMethod::kGrid:
      return "grid";
    case InnerMethod::kLagrangian:
      return "lagrangian";
  }
  return "auto";
}

TrajectoryMixture EmpiricalReference(const PreferenceDataset& data) {
  if (data.records.empty()) throw InvalidInput("empty dataset");
  std::map<TrajectoryId, double> m;
  const double w = 1.0 / static_cast<double>(data.records.size());
  for (const auto& rec : data.records) m[rec.tau1] += w;
  return TrajectoryMixture::FromMap(m);
}

std::vector<double> ObjectiveCoefficients(const TabularMdp& mdp,
                                          const Policy& pi,
                                          const TrajectoryMixture& mu_ref,
                                          std::uint64_t cap) {
  const std::uint64_t n = mdp.NumTrajectories(cap);
  std::vector<double> c = Dense(TrajectoryDistribution(mdp, pi, cap), n);
  for (std::size_t i = 0; i < mu_ref.size(); ++i) {
    c[mu_ref.ids[i]] -= mu_ref.probs[i];
  }
  return c;
}

double PessimisticObjective(const TabularMdp& mdp, const Policy& pi,
                            const std::vector<double>& r,
                            const TrajectoryMixture& mu_ref,
                            std::uint64_t cap) {
  const TrajectoryMixture law = TrajectoryDistribution(mdp, pi, cap);
  return law.Expect(r) - mu_ref.Expect(r);
}

RewardInnerMin::RewardInnerMin(const RewardConfidenceSet& set,
                               InnerMethod method, const PlanOptions& opts)
    : set_(&set), method_(Resolve(method, set.reward_class())), opts_(opts) {
  if (method_ == InnerMethod::kGrid) {
    members_ = Discretize(set, opts.resolution, opts.cap);
  } else {
    lik_.emplace(
        RewardLikelihood(set.reward_class(), set.counts(), set.link()));
    domain_ = RewardDomain(set.reward_class());
  }
}

InnerMinResult RewardInnerMin::Solve(const std::vector<double>& c) const {
  return method_ == InnerMethod::kGrid ? SolveGrid(c) : SolveLagrangian(c);
}

InnerMinResult RewardInnerMin::SolveGrid(const std::vector<double>& c) const {
  InnerMinResult out;
  out.value = kInf;
  for (const auto& m : members_) {
    double v = Dot(c, m.values);
    if (v < out.value) {
      out.value = v;
      out.argmin = m;
    }
  }
  out.slack = set_->LogLikelihood(out.argmin.values) -
              (set_->loglik_hat() - set_->zeta());
  return out;
}

InnerMinResult RewardInnerMin::SolveLagrangian(
    const std::vector<double>& c) const {
  const RewardClass& cls = set_->reward_class();
  const double threshold = set_->loglik_hat() - set_->zeta();
  const Eigen::VectorXd g = PullBackFunctional(cls, c);
  InnerMinResult out;
  auto finish = [&](const Eigen::VectorXd& x) {
    std::vector<double> params(x.data(), x.data() + x.size());
    out.argmin = Realize(cls, params);
    out.value = Dot(c, out.argmin.values);
    out.slack = set_->LogLikelihood(out.argmin.values) - threshold;
    return out;
  };
  const auto& mle_params = set_->mle().model.params;
  Eigen::VectorXd x_mle =
      Eigen::Map<const Eigen::VectorXd>(mle_params.data(), mle_params.size());
  if (set_->zeta() <= 0.0 || g.norm() == 0.0) return finish(x_mle);

  auto solve = [&](double t, const Eigen::VectorXd& x0) {
    ++out.solves;
    SolveResult res = MaximizePenalized(*lik_, domain_, g, t, x0, opts_.solver);
    if (!res.converged && res.grad_norm > 1e3 * opts_.solver.grad_tol) {
      throw DidNotConverge("inner Lagrangian solve stalled at t=" +
                           std::to_string(t));
    }
    return res;
  };

  // x(t) maximizes l - t <g, x>; l(x(t)) and <g, x(t)> both fall as t grows.
  constexpr double kMaxT = 1e8, kMinT = 1e-10;
  double lo = 0.0, hi = kInf;
  Eigen::VectorXd x_lo = x_mle;
  double ll_lo = lik_->Value(x_mle);
  SolveResult r = solve(1.0, x_mle);
  if (r.loglik >= threshold) {
    lo = 1.0;
    x_lo = r.x;
    ll_lo = r.loglik;
    for (double t = 4.0; t <= kMaxT; t *= 4.0) {
      r = solve(t, x_lo);
      if (r.loglik < threshold) {
        hi = t;
        break;
      }
      lo = t;
      x_lo = r.x;
      ll_lo = r.loglik;
    }
    // Constraint never binds: the likelihood is flat enough along -g.
    if (hi == kInf) return finish(x_lo);
  } else {
    hi = 1.0;
    for (double t = 0.25; t >= kMinT; t *= 0.25) {
      r = solve(t, x_lo);
      if (r.loglik >= threshold) {
        lo = t;
        x_lo = r.x;
        ll_lo = r.loglik;
        break;
      }
      hi = t;
    }
    if (lo == 0.0) return finish(x_mle);
  }
  for (int it = 0; it < 200 && ll_lo - threshold > opts_.constraint_tol &&
                   hi / lo > 1.0 + 1e-13;
       ++it) {
    const double mid = std::sqrt(lo * hi);
    r = solve(mid, x_lo);
    if (r.loglik >= threshold) {
      lo = mid;
      x_lo = r.x;
      ll_lo = r.loglik;
    } else {
      hi = mid;
    }
  }
  return finish(x_lo);
}

InnerMinResult InnerMinReward(const TabularMdp& mdp, const Policy& pi,
                              const RewardConfidenceSet& set,
                              const TrajectoryMixture& mu_ref,
                              InnerMethod method, const PlanOptions& opts) {
  RewardInnerMin solver(set, method, opts);
  return solver.Solve(ObjectiveCoefficients(mdp, pi, mu_ref, opts.cap));
}

RobustPlanResult RobustPlanKnown(const TabularMdp& mdp,
                                 const RewardConfidenceSet& set,
                                 const TrajectoryMixture& mu_ref,
                                 const PlanOptions& opts) {
  PolicyEnumerator policies(mdp, opts.policy_kind, opts.cap);
  RewardInnerMin solver(set, opts.inner, opts);
  const std::size_t n = policies.size();

  // Distinct policies often share a trajectory law; solve each c once.
  std::vector<std::vector<double>> coeffs(n);
  ParallelFor(
      n,
      [&](std::size_t i) {
        coeffs[i] =
            ObjectiveCoefficients(mdp, policies.At(i), mu_ref, opts.cap);
      },
      opts.threads);
  std::map<std::vector<double>, std::size_t> index;
  std::vector<std::size_t> slot(n);
  std::vector<const std::vector<double>*> unique;
  for (std::size_t i = 0; i < n; ++i) {
    auto [it, inserted] = index.emplace(coeffs[i], unique.size());
    if (inserted) unique.push_back(&it->first);
    slot[i] = it->second;
  }
  std::vector<InnerMinResult> solved(unique.size());
  ParallelFor(
      unique.size(),
      [&](std::size_t k) { solved[k] = solver.Solve(*unique[k]); },
      opts.threads);

  RobustPlanResult out;
  out.policy_values.resize(n);
  std::size_t best = 0;
  for (std::size_t i = 0; i < n; ++i) {
    out.policy_values[i] = solved[slot[i]].value;
    if (out.policy_values[i] > out.policy_values[best]) best = i;
  }
  for (const auto& s : solved) out.inner_solves += s.solves;
  const InnerMinResult& win = solved[slot[best]];
  out.policy = policies.At(best);
  out.policy_index = best;
  out.value = win.value;
  out.reward = win.argmin;
  out.slack = win.slack;
  return out;
}

std::vector<double> StepWeights(const TabularMdp& mdp, const Policy& pi,
                                const std::vector<double>& r, int h) {
  const int S = mdp.num_states(), A = mdp.num_actions(), H = mdp.horizon();
  if (h < 0 || h + 1 >= H) throw InvalidInput("step out of range");
  std::vector<double> w(static_cast<std::size_t>(S) * A * S, 0.0);
  std::function<void(int, std::uint64_t, int, double, std::size_t)> expand =
      [&](int t, std::uint64_t prefix, int s, double prob, std::size_t key) {
        for (int a = 0; a < A; ++a) {
          double pa = PolicyActionProb(mdp, pi, t, prefix, s, a);
          if (pa <= 0.0) continue;
          const double p = prob * pa;
          const std::uint64_t next = prefix * mdp.num_pairs() + (s * A + a);
          if (t + 1 == H) {
            w[key] += p * r[next];
            continue;
          }
          const double* row = mdp.transition_row(t, s, a);
          for (int s2 = 0; s2 < S; ++s2) {
            if (t == h) {
              expand(t + 1, next, s2, p,
                     static_cast<std::size_t>(s * A + a) * S + s2);
            } else if (row[s2] > 0.0) {
              expand(t + 1, next, s2, p * row[s2], key);
            }
          }
        }
      };
  for (int s = 0; s < S; ++s) {
    if (mdp.initial()[s] > 0.0) expand(0, 0, s, mdp.initial()[s], 0);
  }
  return w;
}

namespace {

// argmin over the simplex of <w, p> - eta * sum n log p.
void SolveRow(const double* w, const double* n, int S, double eta, double* p) {
  double wmin_pos = kInf, wmin_zero = kInf, total = 0.0;
  int zero_arg = -1;
  for (int i = 0; i < S; ++i) {
    if (n[i] > 0.0) {
      wmin_pos = std::min(wmin_pos, w[i]);
      total += n[i];
    } else if (w[i] < wmin_zero) {
      wmin_zero = w[i];
      zero_arg = i;
    }
  }
  std::fill(p, p + S, 0.0);
  if (total == 0.0) {
    p[std::min_element(w, w + S) - w] = 1.0;
    return;
  }
  auto mass = [&](double nu) {
    double m = 0.0;
    for (int i = 0; i < S; ++i) {
      if (n[i] > 0.0) m += eta * n[i] / (w[i] + nu);
    }
    return m;
  };
  double lo = -wmin_pos, hi = -wmin_pos + eta * total;
  double nu;
  if (zero_arg >= 0 && -wmin_zero > lo && mass(-wmin_zero) <= 1.0) {
    nu = -wmin_zero;
  } else {
    if (zero_arg >= 0) lo = std::max(lo, -wmin_zero);
    for (int it = 0; it < 2000; ++it) {
      double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      (mass(mid) > 1.0 ? lo : hi) = mid;
    }
    nu = hi;
  }
  double sum = 0.0;
  for (int i = 0; i < S; ++i) {
    if (n[i] > 0.0) sum += (p[i] = eta * n[i] / (w[i] + nu));
  }
  if (sum < 1.0 && zero_arg >= 0 && nu == -wmin_zero) {
    p[zero_arg] = 1.0 - sum;
  } else {
    for (int i = 0; i < S; ++i) p[i] /= sum;
  }
}

double RowLoglik(const double* p, const double* n, int S) {
  double ll = 0.0;
  for (int i = 0; i < S; ++i) {
    if (n[i] > 0.0) ll += n[i] * std::log(std::max(p[i], kLogClamp));
  }
  return ll;
}

// Solves the rows [begin, end) under one shared likelihood constraint.
void SolveBlock(const std::vector<double>& w, const std::vector<double>& n,
                const std::vector<double>& mle, int S, int begin, int end,
                double zeta, double tol, std::vector<double>* p) {
  auto loglik_at = [&](double eta) {
    double ll = 0.0;
    for (int r = begin; r < end; ++r) {
      SolveRow(w.data() + r * S, n.data() + r * S, S, eta, p->data() + r * S);
      ll += RowLoglik(p->data() + r * S, n.data() + r * S, S);
    }
    return ll;
  };
  double target = -zeta;
  for (int r = begin; r < end; ++r) {
    target += RowLoglik(mle.data() + r * S, n.data() + r * S, S);
  }
  double lo = 1e-12, hi = 1e12;
  if (zeta > 0.0 && loglik_at(lo) >= target) return;
  if (zeta <= 0.0 || loglik_at(hi) < target) {
    std::copy(mle.begin() + begin * S, mle.begin() + end * S,
              p->begin() + begin * S);
    return;
  }
  for (int it = 0; it < 300; ++it) {
    const double mid = std::sqrt(lo * hi);
    const double ll = loglik_at(mid);
    if (ll >= target) {
      hi = mid;
      if (ll - target <= tol) break;
    } else {
      lo = mid;
    }
    if (hi / lo < 1.0 + 1e-14) break;
  }
  loglik_at(hi);
}

}  // namespace

std::vector<double> MinimizeStep(const TransitionConfidenceSet& tset, int h,
                                 const std::vector<double>& w, double tol) {
  const auto& st = tset.step(h);
  const int S = tset.num_states(), rows = S * tset.num_actions();
  if (const auto* cand = std::get_if<CandidateTransitions>(&st.cls)) {
    const std::vector<double>* best = &st.mle;
    double best_v = Dot(w, st.mle);
    for (const auto& t : cand->tables) {
      if (!tset.Contains(h, t)) continue;
      double v = Dot(w, t);
      if (v < best_v) {
        best_v = v;
        best = &t;
      }
    }
    return *best;
  }
  std::vector<double> p(w.size(), 0.0);
  if (tset.per_row()) {
    for (int r = 0; r < rows; ++r) {
      SolveBlock(w, st.counts, st.mle, S, r, r + 1, st.zeta, tol, &p);
    }
  } else {
    SolveBlock(w, st.counts, st.mle, S, 0, rows, st.zeta, tol, &p);
  }
  return p;
}

namespace {

double JointObjective(const TabularMdp& mdp, const Policy& pi,
                      const std::vector<std::vector<double>>& tables,
                      const std::vector<double>& r,
                      const TrajectoryMixture& mu_ref, std::uint64_t cap) {
  return PessimisticObjective(mdp.WithTransitions(tables), pi, r, mu_ref, cap);
}

TabularMdp Skeleton(const TabularMdp& mdp,
                    const TransitionConfidenceSet& tset) {
  const int S = mdp.num_states(), rows = mdp.num_pairs();
  std::vector<std::vector<double>> tables;
  for (int h = 0; h < tset.num_steps(); ++h) {
    std::vector<double> t(static_cast<std::size_t>(rows) * S, 1.0 / S);
    if (const auto* c = std::get_if<CandidateTransitions>(&tset.step(h).cls)) {
      std::fill(t.begin(), t.end(), 0.0);
      std::vector<const std::vector<double>*> all{&tset.step(h).mle};
      for (const auto& x : c->tables) all.push_back(&x);
      for (const auto* x : all) {
        for (std::size_t i = 0; i < t.size(); ++i) t[i] += (*x)[i] / all.size();
      }
    }
    tables.push_back(std::move(t));
  }
  return mdp.WithTransitions(std::move(tables));
}

}  // namespace

JointMinResult InnerMinJoint(const TabularMdp& mdp, const Policy& pi,
                             const RewardInnerMin& rmin,
                             const TransitionConfidenceSet& tset,
                             const TrajectoryMixture& mu_ref,
                             const PlanOptions& opts) {
  JointMinResult out;
  for (int h = 0; h < tset.num_steps(); ++h) {
    out.transitions.push_back(tset.step(h).mle);
  }
  // Any member of the reward set works as a start; the r-step replaces it.
  out.reward =
      rmin.Solve(ObjectiveCoefficients(mdp.WithTransitions(out.transitions), pi,
                                       mu_ref, opts.cap))
          .argmin;
  double cur = JointObjective(mdp, pi, out.transitions, out.reward.values,
                              mu_ref, opts.cap);
  out.trace.push_back(cur);
  for (int round = 0; round < opts.max_rounds; ++round) {
    const double start = cur;
    for (int h = 0; h < tset.num_steps(); ++h) {
      const TabularMdp current = mdp.WithTransitions(out.transitions);
      auto w = StepWeights(current, pi, out.reward.values, h);
      auto table = MinimizeStep(tset, h, w, opts.constraint_tol);
      auto trial = out.transitions;
      trial[h] = std::move(table);
      double v =
          JointObjective(mdp, pi, trial, out.reward.values, mu_ref, opts.cap);
      if (v < cur) {
        cur = v;
        out.transitions = std::move(trial);
      }
      out.trace.push_back(cur);
    }
    InnerMinResult rr = rmin.Solve(ObjectiveCoefficients(
        mdp.WithTransitions(out.transitions), pi, mu_ref, opts.cap));
    if (rr.value < cur) {
      cur = rr.value;
      out.reward = std::move(rr.argmin);
    }
    out.trace.push_back(cur);
    if (start - cur <= 1e-10 * (1.0 + std::abs(cur))) break;
  }
  out.value = cur;
  return out;
}

JointMinResult InnerMinJointExhaustive(const TabularMdp& mdp, const Policy& pi,
                                       const RewardInnerMin& rmin,
                                       const TransitionConfidenceSet& tset,
                                       const TrajectoryMixture& mu_ref,
                                       const PlanOptions& opts) {
  std::vector<std::vector<std::vector<double>>> steps;
  for (int h = 0; h < tset.num_steps(); ++h) {
    steps.push_back(
        DiscretizeTransitions(tset, h, opts.transition_resolution, opts.cap));
  }
  JointMinResult out;
  out.value = kInf;
  std::vector<std::size_t> pick(steps.size(), 0);
  std::vector<std::vector<double>> tables(steps.size());
  while (true) {
    for (std::size_t h = 0; h < steps.size(); ++h)
      tables[h] = steps[h][pick[h]];
    InnerMinResult rr = rmin.Solve(ObjectiveCoefficients(
        mdp.WithTransitions(tables), pi, mu_ref, opts.cap));
    if (rr.value < out.value) {
      out.value = rr.value;
      out.reward = std::move(rr.argmin);
      out.transitions = tables;
    }
    std::size_t h = steps.size();
    while (h > 0 && ++pick[h - 1] == steps[h - 1].size()) pick[--h] = 0;
    if (h == 0) break;
  }
  out.trace.push_back(out.value);
  return out;
}

RobustPlanResult RobustPlanUnknown(const TabularMdp& mdp,
                                   const RewardConfidenceSet& set,
                                   const TransitionConfidenceSet& tset,
                                   const TrajectoryMixture& mu_ref,
                                   const PlanOptions& opts) {
  if (tset.num_steps() != mdp.horizon() - 1) {
    throw InvalidInput("transition set needs H-1 steps");
  }
  const TabularMdp skeleton = Skeleton(mdp, tset);
  PolicyEnumerator policies(skeleton, opts.policy_kind, opts.cap);
  RewardInnerMin rmin(set, opts.inner, opts);
  const std::size_t n = policies.size();
  std::vector<JointMinResult> solved(n);
  ParallelFor(
      n,
      [&](std::size_t i) {
        const Policy pi = policies.At(i);
        solved[i] = opts.exhaustive_transitions
                        ? InnerMinJointExhaustive(skeleton, pi, rmin, tset,
                                                  mu_ref, opts)
                        : InnerMinJoint(skeleton, pi, rmin, tset, mu_ref, opts);
      },
      opts.threads);
  RobustPlanResult out;
  out.policy_values.resize(n);
  std::size_t best = 0;
  for (std::size_t i = 0; i < n; ++i) {
    out.policy_values[i] = solved[i].value;
    if (solved[i].value > solved[best].value) best = i;
  }
  out.policy = policies.At(best);
  out.policy_index = best;
  out.value = solved[best].value;
  out.reward = solved[best].reward;
  out.transitions = solved[best].transitions;
  out.trace = solved[best].trace;
  out.slack =
      set.LogLikelihood(out.reward.values) - (set.loglik_hat() - set.zeta());
  return out;
}

}  // namespace freehand
