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

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "freehand/errors.h"
#include "freehand/parallel.h"
#include "freehand/random.h"

namespace freehand {
namespace {

using nlohmann::json;

constexpr double kInf() { return std::numeric_limits<double>::infinity(); }

std::vector<double> Dirichlet(int n, Rng& rng) {
  std::gamma_distribution<double> gamma(1.0, 1.0);
  std::vector<double> p(n);
  double total = 0.0;
  for (double& x : p) total += (x = gamma(rng));
  for (double& x : p) x /= total;
  return p;
}

std::string FormatDouble(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

std::string CsvEscape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + "\"";
}

std::vector<std::string> SplitCsv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

std::string XmlEscape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&':
        out += "&amp;";
        break;
      case '<':
        out += "&lt;";
        break;
      case '>':
        out += "&gt;";
        break;
      case '"':
        out += "&quot;";
        break;
      default:
        out += c;
    }
  }
  return out;
}

Policy PolicyOr(const std::optional<Policy>& p, const TabularMdp& mdp) {
  return p ? *p : Policy(UniformPolicy(mdp));
}

ActionDataLaws DefaultActionLaws(const TabularMdp& mdp) {
  const int S = mdp.num_states(), A = mdp.num_actions();
  ActionDataLaws laws;
  const auto d = Visitations(mdp, UniformPolicy(mdp));
  for (int h = 0; h < mdp.horizon(); ++h) {
    std::vector<double> states(S, 0.0);
    for (int i = 0; i < S * A; ++i) states[i / A] += d[h][i];
    laws.state.push_back(std::move(states));
    laws.a0.emplace_back(S * A, 1.0 / A);
    laws.a1.emplace_back(S * A, 1.0 / A);
  }
  return laws;
}

ActionDataLaws ParseActionLaws(const json& j, const TabularMdp& mdp) {
  ActionDataLaws laws = DefaultActionLaws(mdp);
  auto field = [&](const char* key, std::vector<std::vector<double>>* out) {
    if (!j.contains(key) || j.at(key) == "uniform") return;
    *out = j.at(key).get<std::vector<std::vector<double>>>();
  };
  field("state", &laws.state);
  field("a0", &laws.a0);
  field("a1", &laws.a1);
  return laws;
}

}  // namespace

const char* Version() { return FREEHAND_VERSION; }

Instance MakeContextualInstance(int num_states, int num_actions, double gap,
                                double ratio, double r_max) {
  if (num_states < 1 || num_actions < 2 || !(gap > 0.0) || !(ratio > 0.0) ||
      gap > r_max) {
    throw InvalidParams(
        "contextual instance needs S >= 1, A >= 2, ratio > 0 "
        "and 0 < gap <= r_max");
  }
  std::vector<double> rho(num_states);
  double total = 0.0;
  for (int s = 0; s < num_states; ++s) total += (rho[s] = std::pow(ratio, s));
  for (double& p : rho) p /= total;
  Instance inst;
  inst.mdp = TabularMdp::Stationary(1, num_states, num_actions, rho, r_max);
  StateActionReward r;
  r.values.assign(1, std::vector<double>(num_states * num_actions));
  for (int s = 0; s < num_states; ++s) {
    for (int a = 0; a < num_actions; ++a) {
      r.values[0][s * num_actions + a] = a == s % 2 ? r_max : r_max - gap;
    }
  }
  inst.r_star = r;
  return inst;
}

Instance MakeRandomInstance(int horizon, int num_states, int num_actions,
                            bool trajectory_reward, Rng& rng) {
  const int H = horizon, S = num_states, A = num_actions;
  std::vector<std::vector<double>> tables;
  for (int h = 0; h + 1 < H; ++h) {
    std::vector<double> t;
    for (int sa = 0; sa < S * A; ++sa) {
      auto row = Dirichlet(S, rng);
      t.insert(t.end(), row.begin(), row.end());
    }
    tables.push_back(std::move(t));
  }
  Instance inst;
  inst.mdp = TabularMdp(H, S, A, Dirichlet(S, rng), std::move(tables), 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  if (trajectory_reward) {
    std::vector<double> r(inst.mdp.NumTrajectories());
    for (double& x : r) x = unit(rng);
    inst.r_star = TrajectoryReward{std::move(r)};
  } else {
    StateActionReward r;
    r.values.assign(H, std::vector<double>(S * A));
    for (auto& step : r.values) {
      for (double& x : step) x = unit(rng) / H;
    }
    inst.r_star = std::move(r);
  }
  return inst;
}

Instance MakeInstance(const json& spec) {
  try {
    const std::string gen = spec.value("generator", "inline");
    Instance inst;
    if (gen == "inline") {
      inst.mdp = MdpFromJson(spec.at("mdp"));
      inst.r_star = spec.contains("reward")
                        ? RewardFromJson(inst.mdp, spec.at("reward"))
                        : RewardFunction(TrajectoryReward{std::vector<double>(
                              inst.mdp.NumTrajectories(), 0.0)});
    } else if (gen == "prop2") {
      Prop2Instance p = MakeProp2Instance(spec.at("S"), spec.at("A"),
                                          spec.at("H"), spec.at("C"));
      inst.mdp = p.mdp;
      inst.r_star =
          TrajectoryReward{std::vector<double>(p.mdp.NumTrajectories(), 0.0)};
      inst.mu0 = p.behavior;
      inst.mu1 = p.behavior;
      inst.target = p.target;
    } else if (gen == "lower_bound") {
      LowerBoundInstance p =
          MakeLowerBoundInstance(ParseLowerBoundKind(spec.value("kind", "tr")),
                                 spec.at("C"), spec.at("H"), spec.at("N"));
      const int member = spec.value("member", 1);
      if (member != 1 && member != 2)
        throw InvalidInput("member must be 1 or 2");
      inst.mdp = p.mdp;
      inst.r_star = TrajectoryReward{member == 1 ? p.r1 : p.r2};
      inst.mu0 = p.mu;
      inst.mu1 = p.mu;
      inst.target = member == 1 ? p.target1 : p.target2;
    } else if (gen == "contextual") {
      inst = MakeContextualInstance(spec.at("S"), spec.at("A"), spec.at("gap"),
                                    spec.value("ratio", 0.7),
                                    spec.value("r_max", 1.0));
    } else if (gen == "random") {
      Rng rng(spec.value("seed", std::uint64_t{0}));
      inst = MakeRandomInstance(
          spec.at("H"), spec.at("S"), spec.at("A"),
          spec.value("reward", "trajectory") == std::string("trajectory"), rng);
    } else {
      throw InvalidInput("unknown instance generator '" + gen + "'");
    }
    if (spec.contains("mu0")) inst.mu0 = PolicyFromJson(inst.mdp, spec["mu0"]);
    if (spec.contains("mu1")) inst.mu1 = PolicyFromJson(inst.mdp, spec["mu1"]);
    if (spec.contains("target")) {
      inst.target = PolicyFromJson(inst.mdp, spec["target"]);
    }
    if (spec.contains("action_laws")) {
      inst.action_laws = ParseActionLaws(spec["action_laws"], inst.mdp);
    }
    return inst;
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("malformed instance: ") + e.what());
  }
}

json InstanceToJson(const Instance& inst) {
  json j;
  j["generator"] = "inline";
  j["mdp"] = MdpToJson(inst.mdp);
  j["reward"] = RewardToJson(inst.mdp, inst.r_star);
  if (inst.mu0) j["mu0"] = PolicyToJson(inst.mdp, *inst.mu0);
  if (inst.mu1) j["mu1"] = PolicyToJson(inst.mdp, *inst.mu1);
  if (inst.target) j["target"] = PolicyToJson(inst.mdp, *inst.target);
  if (inst.action_laws) {
    j["action_laws"] = {{"state", inst.action_laws->state},
                        {"a0", inst.action_laws->a0},
                        {"a1", inst.action_laws->a1}};
  }
  return j;
}

RewardClass MakeRewardClass(const json& spec, const TabularMdp& mdp) {
  try {
    const std::string kind = spec.at("kind");
    const std::uint64_t T = mdp.NumTrajectories();
    const double r_max = spec.value("r_max", mdp.r_max());
    const double c_geom = spec.value("c_geom", kDefaultGeometricConstant);
    if (kind == "tabular_grid") {
      return MakeTabularGrid(T, r_max, spec.at("spacing"),
                             spec.value("cells", std::vector<int>{}));
    }
    if (kind == "one_hot") {
      return MakeOneHotClass(T, spec.at("B"), r_max, c_geom);
    }
    if (kind == "linear") {
      return MakeLinearClass(
          spec.at("features").get<std::vector<std::vector<double>>>(),
          spec.at("B"), r_max, c_geom);
    }
    if (kind == "additive") {
      // phi(tau) = sum_h e_{h, s_h, a_h}: sums of per-step tables.
      const int dim = mdp.horizon() * mdp.num_pairs();
      std::vector<std::vector<double>> features(T, std::vector<double>(dim));
      for (std::uint64_t id = 0; id < T; ++id) {
        const Trajectory tau = mdp.Decode(id);
        for (int h = 0; h < mdp.horizon(); ++h) {
          features[id][h * mdp.num_pairs() + tau[h].state * mdp.num_actions() +
                       tau[h].action] = 1.0;
        }
      }
      return MakeLinearClass(std::move(features), spec.at("B"), r_max, c_geom);
    }
    if (kind == "finite") {
      return FiniteRewardClass{
          spec.at("members").get<std::vector<std::vector<double>>>()};
    }
    throw InvalidInput("unknown reward class '" + kind + "'");
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("malformed reward class: ") + e.what());
  }
}

TransitionClass MakeTransitionClass(const json& spec, const TabularMdp& mdp) {
  try {
    const std::string kind =
        spec.is_string() ? spec.get<std::string>() : spec.value("kind", "");
    if (kind == "full_simplex") {
      TransitionClass cls = FullSimplexTransitions(mdp);
      if (spec.is_object() && spec.contains("c_geom")) {
        for (auto& s : cls.steps) s = FullSimplexClass{spec["c_geom"]};
      }
      return cls;
    }
    if (kind == "singleton") return SingletonTransitions(mdp);
    if (kind == "candidates") {
      TransitionClass cls;
      for (const auto& step : spec.at("tables")) {
        cls.steps.push_back(
            CandidateTransitions{step.get<std::vector<std::vector<double>>>()});
      }
      return cls;
    }
    throw InvalidInput("unknown transition class '" + kind + "'");
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("malformed transition class: ") + e.what());
  }
}

AdvantageClass MakeAdvantageClass(const json& spec, const TabularMdp& mdp) {
  try {
    const std::string kind = spec.value("kind", "tabular");
    const double b_max = spec.value("b_max", mdp.r_max());
    if (kind == "tabular") {
      return TabularAdvantageClass(mdp.horizon(), b_max,
                                   spec.value("spacing", b_max / 2));
    }
    if (kind == "linear") {
      AdvantageStepClass step;
      step.b_max = b_max;
      step.features =
          spec.at("features").get<std::vector<std::vector<double>>>();
      step.B = spec.at("B");
      step.c_geom = spec.value("c_geom", kDefaultGeometricConstant);
      return AdvantageClass{
          std::vector<AdvantageStepClass>(mdp.horizon(), step)};
    }
    throw InvalidInput("unknown advantage class '" + kind + "'");
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("malformed advantage class: ") + e.what());
  }
}

Algorithm ParseAlgorithm(const std::string& name) {
  if (name == "freehand") return Algorithm::kFreehand;
  if (name == "freehand_transition") return Algorithm::kFreehandTransition;
  if (name == "freehand_action") return Algorithm::kFreehandAction;
  if (name == "greedy_mle_baseline") return Algorithm::kGreedyMleBaseline;
  throw InvalidInput("unknown algorithm '" + name + "'");
}

std::string AlgorithmName(Algorithm a) {
  switch (a) {
    case Algorithm::kFreehand:
      return "freehand";
    case Algorithm::kFreehandTransition:
      return "freehand_transition";
    case Algorithm::kFreehandAction:
      return "freehand_action";
    case Algorithm::kGreedyMleBaseline:
      return "greedy_mle_baseline";
  }
  return "freehand";
}

ExperimentConfig ParseExperimentConfig(const json& j) {
  try {
    ExperimentConfig cfg;
    cfg.raw = j;
    cfg.name = j.value("name", cfg.name);
    cfg.algorithm = ParseAlgorithm(j.value("algorithm", "freehand"));
    cfg.instance = j.at("instance");
    cfg.reward_class = j.value("reward_class", json::object());
    cfg.transition_class = j.value("transition_class", json("full_simplex"));
    cfg.advantage_class = j.value("advantage_class", json::object());
    cfg.link = j.value("link", cfg.link);
    cfg.delta = j.value("delta", cfg.delta);
    cfg.c_mle = j.value("c_mle", cfg.c_mle);
    cfg.c_p = j.value("c_p", cfg.c_p);
    cfg.per_row_transitions = j.value("per_row_transitions", false);
    cfg.sample_sizes = j.at("N").get<std::vector<int>>();
    cfg.reps = j.value("reps", 1);
    cfg.seed = j.value("seed", std::uint64_t{0});
    cfg.cap = j.value("cap", cfg.cap);
    if (j.contains("mu_ref")) {
      const json& m = j["mu_ref"];
      if (m.is_string()) {
        cfg.mu_ref = m;
      } else {
        cfg.mu_ref = "custom";
        cfg.mu_ref_policy = m.at("custom");
      }
    }
    if (cfg.mu_ref != "mu1_empirical" && cfg.mu_ref != "mu1_exact" &&
        cfg.mu_ref != "custom") {
      throw InvalidInput("mu_ref must be mu1_empirical, mu1_exact or custom");
    }
    const json planner = j.value("planner", json::object());
    cfg.plan.policy_kind =
        ParsePolicyKind(planner.value("policy_kind", "markov_det"));
    cfg.plan.inner = ParseInnerMethod(planner.value("inner", "auto"));
    cfg.plan.resolution = planner.value("resolution", cfg.plan.resolution);
    cfg.plan.max_rounds = planner.value("max_rounds", cfg.plan.max_rounds);
    cfg.plan.exhaustive_transitions =
        planner.value("exhaustive_transitions", false);
    cfg.plan.transition_resolution =
        planner.value("transition_resolution", cfg.plan.transition_resolution);
    cfg.plan.constraint_tol =
        planner.value("constraint_tol", cfg.plan.constraint_tol);
    cfg.plan.cap = cfg.cap;
    cfg.plan.threads = 1;  // cells are the unit of parallelism
    const json solver = j.value("solver", json::object());
    cfg.plan.solver.max_iters = solver.value("max_iters", 5000);
    cfg.plan.solver.grad_tol = solver.value("grad_tol", 1e-8);

    if (cfg.sample_sizes.empty()) throw InvalidInput("N schedule is empty");
    for (std::size_t i = 0; i < cfg.sample_sizes.size(); ++i) {
      if (cfg.sample_sizes[i] < 1 ||
          (i > 0 && cfg.sample_sizes[i] <= cfg.sample_sizes[i - 1])) {
        throw InvalidInput(
            "N schedule must be positive and strictly increasing");
      }
    }
    if (cfg.reps < 1) throw InvalidInput("reps must be positive");
    if (cfg.algorithm != Algorithm::kFreehandAction &&
        cfg.reward_class.empty()) {
      throw InvalidInput("reward_class is required");
    }
    return cfg;
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("malformed config: ") + e.what());
  }
}

ExperimentConfig LoadExperimentConfig(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open config '" + path + "'");
  json j;
  try {
    j = json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::exception& e) {
    throw InvalidInput("config '" + path + "' is not valid JSON: " + e.what());
  }
  return ParseExperimentConfig(j);
}

std::string ConfigHash(const ExperimentConfig& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : cfg.raw.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

std::uint64_t CellSeed(const ExperimentConfig& cfg, int n, int rep) {
  return DeriveSeed(cfg.seed, {static_cast<std::uint64_t>(n),
                               static_cast<std::uint64_t>(rep)});
}

CellResult RunCell(const ExperimentConfig& cfg, const Instance& inst, int n,
                   int rep) {
  CellResult out;
  out.n = n;
  out.rep = rep;
  out.seed = CellSeed(cfg, n, rep);
  const auto start = std::chrono::steady_clock::now();
  try {
    const TabularMdp& mdp = inst.mdp;
    const LinkFunction link = LinkByName(cfg.link);
    Rng rng(out.seed);
    if (cfg.algorithm == Algorithm::kFreehandAction) {
      const ActionDataLaws laws =
          inst.action_laws ? *inst.action_laws : DefaultActionLaws(mdp);
      const AdvantageClass cls = MakeAdvantageClass(cfg.advantage_class, mdp);
      auto data = GenerateActionDataset(mdp, inst.r_star, link, laws, n, rng);
      ActionRunResult run =
          RunFreehandAction(mdp, inst.r_star, data, cls, link, cfg.plan.solver);
      out.j_hat = run.value;
      out.j_target = inst.target
                         ? EvaluatePolicy(mdp, *inst.target, inst.r_star)
                         : run.optimal_value;
      out.loglik_hat = 0.0;
      for (double ll : run.fit.loglik) out.loglik_hat += ll;
    } else {
      const std::vector<double> r_dense =
          DenseRewardTable(mdp, inst.r_star, cfg.cap);
      const RewardClass cls = MakeRewardClass(cfg.reward_class, mdp);
      const Policy mu0 = PolicyOr(inst.mu0, mdp), mu1 = PolicyOr(inst.mu1, mdp);
      PreferenceDataset data =
          GeneratePreferenceDataset(mdp, inst.r_star, link, mu0, mu1, n, rng);
      out.j_mu1 = EvaluatePolicy(mdp, mu1, inst.r_star, cfg.cap);
      const Policy target =
          inst.target ? *inst.target
                      : Policy(SolveTrajectoryReward(mdp, r_dense).policy);
      out.j_target = EvaluatePolicy(mdp, target, inst.r_star, cfg.cap);

      TrajectoryMixture mu_ref;
      if (cfg.mu_ref == "mu1_exact") {
        mu_ref = TrajectoryDistribution(mdp, mu1, cfg.cap);
      } else if (cfg.mu_ref == "custom") {
        mu_ref = TrajectoryDistribution(
            mdp, PolicyFromJson(mdp, cfg.mu_ref_policy), cfg.cap);
      } else {
        mu_ref = EmpiricalReference(data);
      }

      Policy pi_hat;
      if (cfg.algorithm == Algorithm::kGreedyMleBaseline) {
        RewardFit fit = FitRewardMle(cls, data, link, cfg.plan.solver, cfg.cap);
        out.loglik_hat = fit.loglik;
        pi_hat = SolveTrajectoryReward(mdp, fit.model.values).policy;
      } else {
        RewardConfidenceSet set = BuildRewardConfidence(
            data, cls, link, cfg.delta, cfg.c_mle, cfg.plan.solver, cfg.cap);
        out.zeta = set.zeta();
        out.loglik_hat = set.loglik_hat();
        out.covered = set.Contains(r_dense) ? 1 : 0;
        RobustPlanResult plan;
        if (cfg.algorithm == Algorithm::kFreehandTransition) {
          const TransitionClass tcls =
              MakeTransitionClass(cfg.transition_class, mdp);
          TransitionConfidenceSet tset = BuildTransitionConfidence(
              mdp, data, tcls, cfg.delta, cfg.c_p, cfg.per_row_transitions);
          out.covered_p = 1;
          for (int h = 0; h < tset.num_steps(); ++h) {
            if (!tset.Contains(h, mdp.transitions(h))) out.covered_p = 0;
          }
          plan = RobustPlanUnknown(mdp, set, tset, mu_ref, cfg.plan);
        } else {
          plan = RobustPlanKnown(mdp, set, mu_ref, cfg.plan);
        }
        out.robust_value = plan.value;
        out.policy_index = plan.policy_index;
        pi_hat = plan.policy;
      }
      out.j_hat = EvaluatePolicy(mdp, pi_hat, inst.r_star, cfg.cap);
    }
    out.suboptimality = out.j_target - out.j_hat;
  } catch (const std::exception& e) {
    out.status = e.what();
  }
  out.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  return out;
}

ExperimentResult RunExperiment(const ExperimentConfig& cfg, int threads) {
  const Instance inst = MakeInstance(cfg.instance);
  ExperimentResult result;
  result.config_hash = ConfigHash(cfg);
  const std::size_t reps = cfg.reps;
  result.cells.resize(cfg.sample_sizes.size() * reps);
  ParallelFor(
      result.cells.size(),
      [&](std::size_t i) {
        result.cells[i] = RunCell(cfg, inst, cfg.sample_sizes[i / reps],
                                  static_cast<int>(i % reps));
      },
      threads);
  return result;
}

void WriteResultsCsv(std::ostream& out, const ExperimentConfig& cfg,
                     const ExperimentResult& result) {
  out << "config_hash,version,algorithm,N,rep,seed,status,suboptimality,j_hat,"
         "j_target,j_mu1,robust_value,covered,covered_p,zeta,loglik_hat,"
         "policy_index\n";
  const std::string algo = AlgorithmName(cfg.algorithm);
  for (const CellResult& c : result.cells) {
    out << result.config_hash << ',' << Version() << ',' << algo << ',' << c.n
        << ',' << c.rep << ',' << c.seed << ',' << CsvEscape(c.status) << ','
        << FormatDouble(c.suboptimality) << ',' << FormatDouble(c.j_hat) << ','
        << FormatDouble(c.j_target) << ',' << FormatDouble(c.j_mu1) << ','
        << FormatDouble(c.robust_value) << ',' << c.covered << ','
        << c.covered_p << ',' << FormatDouble(c.zeta) << ','
        << FormatDouble(c.loglik_hat) << ',' << c.policy_index << '\n';
  }
}

void WriteTimingCsv(std::ostream& out, const ExperimentResult& result) {
  out << "config_hash,N,rep,seed,wall_seconds\n";
  for (const CellResult& c : result.cells) {
    out << result.config_hash << ',' << c.n << ',' << c.rep << ',' << c.seed
        << ',' << FormatDouble(c.wall_seconds) << '\n';
  }
}

RateFit FitRate(const std::vector<RateLevel>& levels) {
  RateFit fit;
  std::vector<double> x, y;
  for (const RateLevel& l : levels) {
    if (l.n > 0 && l.mean > 0.0) {
      fit.levels.push_back(l);
      x.push_back(std::log(static_cast<double>(l.n)));
      y.push_back(std::log(l.mean));
    }
  }
  if (x.size() < 4) {
    throw InsufficientLevels(
        "need at least 4 N-levels with positive means, got " +
        std::to_string(x.size()));
  }
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i] / n;
    my += y[i] / n;
  }
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0.0) throw InsufficientLevels("N-levels must be distinct");
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double e = y[i] - (fit.intercept + fit.slope * x[i]);
    ss_res += e * e;
  }
  fit.r2 = syy > 0.0 ? std::clamp(1.0 - ss_res / syy, 0.0, 1.0) : 1.0;
  return fit;
}

namespace {

std::vector<RateLevel> Levels(const std::map<int, std::vector<double>>& by_n) {
  std::vector<RateLevel> levels;
  for (const auto& [n, values] : by_n) {
    RateLevel l;
    l.n = n;
    l.count = static_cast<int>(values.size());
    for (double v : values) l.mean += v / l.count;
    double var = 0.0;
    for (double v : values) var += (v - l.mean) * (v - l.mean);
    const double se =
        l.count > 1 ? std::sqrt(var / (l.count - 1) / l.count) : 0.0;
    l.ci_lo = l.mean - 1.96 * se;
    l.ci_hi = l.mean + 1.96 * se;
    levels.push_back(l);
  }
  return levels;
}

}  // namespace

RateFit FitRate(const ExperimentResult& result) {
  std::map<int, std::vector<double>> by_n;
  for (const CellResult& c : result.cells) {
    if (c.status == "ok") by_n[c.n].push_back(c.suboptimality);
  }
  RateFit fit = FitRate(Levels(by_n));
  return fit;
}

RateFit FitRateFromCsv(std::istream& in) {
  std::string line;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    header = SplitCsv(line);
    break;
  }
  auto column = [&](const std::string& name) {
    auto it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? -1 : static_cast<int>(it - header.begin());
  };
  const int n_col = column("N");
  if (n_col < 0) throw InvalidInput("CSV has no N column");
  const int mean_col = column("mean"), sub_col = column("suboptimality"),
            status_col = column("status");
  std::map<int, std::vector<double>> by_n;
  std::vector<RateLevel> levels;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    auto f = SplitCsv(line);
    try {
      if (mean_col >= 0) {
        RateLevel l;
        l.n = std::stoi(f.at(n_col));
        l.mean = std::stod(f.at(mean_col));
        const int cnt = column("count"), lo = column("ci_lo"),
                  hi = column("ci_hi");
        if (cnt >= 0) l.count = std::stoi(f.at(cnt));
        l.ci_lo = lo >= 0 ? std::stod(f.at(lo)) : l.mean;
        l.ci_hi = hi >= 0 ? std::stod(f.at(hi)) : l.mean;
        levels.push_back(l);
      } else if (sub_col >= 0) {
        if (status_col >= 0 && f.at(status_col) != "ok") continue;
        by_n[std::stoi(f.at(n_col))].push_back(std::stod(f.at(sub_col)));
      } else {
        throw InvalidInput("CSV needs a mean or suboptimality column");
      }
    } catch (const std::logic_error& e) {
      throw InvalidInput("malformed CSV row: " + line);
    }
  }
  return FitRate(mean_col >= 0 ? levels : Levels(by_n));
}

void WriteRateCsv(std::ostream& out, const RateFit& fit) {
  out << "# slope=" << FormatDouble(fit.slope)
      << " intercept=" << FormatDouble(fit.intercept)
      << " r2=" << FormatDouble(fit.r2) << '\n';
  out << "N,count,mean,ci_lo,ci_hi\n";
  for (const RateLevel& l : fit.levels) {
    out << l.n << ',' << l.count << ',' << FormatDouble(l.mean) << ','
        << FormatDouble(l.ci_lo) << ',' << FormatDouble(l.ci_hi) << '\n';
  }
}

void WriteSvgPlot(std::ostream& out, const RateFit& fit,
                  const std::string& title) {
  constexpr double kW = 640, kH = 480, kLeft = 70, kRight = 20, kTop = 40,
                   kBottom = 50;
  double x_lo = kInf(), x_hi = -kInf(), y_lo = kInf(), y_hi = -kInf();
  for (const RateLevel& l : fit.levels) {
    const double x = std::log10(static_cast<double>(l.n));
    x_lo = std::min(x_lo, x);
    x_hi = std::max(x_hi, x);
    for (double y : {l.mean, l.ci_lo, l.ci_hi, fit.Predict(l.n)}) {
      if (y > 0.0) {
        y_lo = std::min(y_lo, std::log10(y));
        y_hi = std::max(y_hi, std::log10(y));
      }
    }
  }
  if (fit.levels.empty()) x_lo = y_lo = 0.0, x_hi = y_hi = 1.0;
  if (x_hi - x_lo < 1e-9) x_lo -= 0.5, x_hi += 0.5;
  if (y_hi - y_lo < 1e-9) y_lo -= 0.5, y_hi += 0.5;
  auto px = [&](double x) {
    return kLeft + (x - x_lo) / (x_hi - x_lo) * (kW - kLeft - kRight);
  };
  auto py = [&](double y) {
    return kH - kBottom - (y - y_lo) / (y_hi - y_lo) * (kH - kTop - kBottom);
  };
  char buf[256];
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW
      << "\" height=\"" << kH << "\" viewBox=\"0 0 " << kW << ' ' << kH
      << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << kW / 2 << "\" y=\"24\" text-anchor=\"middle\" "
      << "font-family=\"sans-serif\" font-size=\"16\">" << XmlEscape(title)
      << "</text>\n";
  std::snprintf(
      buf, sizeof(buf),
      "<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" stroke=\"black\"/>\n",
      kLeft, kH - kBottom, kW - kRight, kH - kBottom);
  out << buf;
  std::snprintf(
      buf, sizeof(buf),
      "<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" stroke=\"black\"/>\n",
      kLeft, kTop, kLeft, kH - kBottom);
  out << buf;
  out << "<text x=\"" << kW / 2 << "\" y=\"" << kH - 12
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"12\">log10 N</text>\n"
      << "<text x=\"16\" y=\"" << kH / 2
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"12\" "
         "transform=\"rotate(-90 16 "
      << kH / 2 << ")\">log10 mean suboptimality</text>\n";
  for (const RateLevel& l : fit.levels) {
    const double x = px(std::log10(static_cast<double>(l.n)));
    if (l.ci_lo > 0.0 && l.ci_hi > l.ci_lo) {
      std::snprintf(buf, sizeof(buf),
                    "<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" "
                    "stroke=\"gray\"/>\n",
                    x, py(std::log10(l.ci_lo)), x, py(std::log10(l.ci_hi)));
      out << buf;
    }
    std::snprintf(
        buf, sizeof(buf),
        "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"4\" fill=\"steelblue\"/>\n", x,
        py(std::log10(l.mean)));
    out << buf;
  }
  if (!fit.levels.empty()) {
    const double n0 = fit.levels.front().n, n1 = fit.levels.back().n;
    std::snprintf(buf, sizeof(buf),
                  "<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" "
                  "stroke=\"firebrick\" stroke-dasharray=\"6 3\"/>\n",
                  px(std::log10(n0)), py(std::log10(fit.Predict(n0))),
                  px(std::log10(n1)), py(std::log10(fit.Predict(n1))));
    out << buf;
  }
  std::snprintf(buf, sizeof(buf),
                "<text x=\"%g\" y=\"%g\" font-family=\"sans-serif\" "
                "font-size=\"12\">slope %.3f, R2 %.3f</text>\n",
                kLeft + 10, kTop + 14, fit.slope, fit.r2);
  out << buf << "</svg>\n";
}

namespace {

Calibration Choose(std::vector<double> candidates,
                   const std::vector<std::vector<double>>& ratios,
                   double target) {
  // ratios[seed] holds gap_h / base_h for every step; covered at c iff all
  // are <= c.
  std::sort(candidates.begin(), candidates.end());
  Calibration out;
  out.candidates = candidates;
  for (double c : candidates) {
    int hit = 0;
    for (const auto& r : ratios) {
      hit += std::all_of(r.begin(), r.end(), [c](double x) { return x <= c; });
    }
    out.coverage.push_back(static_cast<double>(hit) / ratios.size());
  }
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (out.coverage[i] >= target) {
      out.chosen = candidates[i];
      out.met = true;
      return out;
    }
  }
  out.chosen = candidates.back();
  return out;
}

}  // namespace

Calibration CalibrateSlackConstant(const Instance& inst, const RewardClass& cls,
                                   const LinkFunction& link, int n,
                                   double delta, int seeds,
                                   std::uint64_t master_seed,
                                   std::vector<double> candidates,
                                   double target) {
  if (seeds < 1 || candidates.empty())
    throw InvalidInput("nothing to calibrate");
  const TabularMdp& mdp = inst.mdp;
  const std::vector<double> r_dense = DenseRewardTable(mdp, inst.r_star);
  const double base = SlackReward(cls, n, delta, 1.0);
  const Policy mu0 = PolicyOr(inst.mu0, mdp), mu1 = PolicyOr(inst.mu1, mdp);
  std::vector<std::vector<double>> ratios(seeds);
  ParallelFor(seeds, [&](std::size_t i) {
    Rng rng = DeriveRng(master_seed, {static_cast<std::uint64_t>(n), i});
    auto data =
        GeneratePreferenceDataset(mdp, inst.r_star, link, mu0, mu1, n, rng);
    RewardFit fit = FitRewardMle(cls, data, link);
    const double gap = fit.loglik - LogLikelihoodReward(r_dense, data, link);
    ratios[i] = {base > 0.0 ? gap / base : (gap > 0.0 ? kInf() : 0.0)};
  });
  return Choose(std::move(candidates), ratios, target);
}

Calibration CalibrateTransitionConstant(const Instance& inst,
                                        const TransitionClass& cls, int n,
                                        double delta, int seeds,
                                        std::uint64_t master_seed,
                                        std::vector<double> candidates,
                                        double target) {
  if (seeds < 1 || candidates.empty())
    throw InvalidInput("nothing to calibrate");
  const TabularMdp& mdp = inst.mdp;
  const Policy mu0 = PolicyOr(inst.mu0, mdp), mu1 = PolicyOr(inst.mu1, mdp);
  const LinkFunction link = SigmoidLink();
  std::vector<std::vector<double>> ratios(seeds);
  ParallelFor(seeds, [&](std::size_t i) {
    Rng rng = DeriveRng(master_seed, {static_cast<std::uint64_t>(n), i});
    auto data =
        GeneratePreferenceDataset(mdp, inst.r_star, link, mu0, mu1, n, rng);
    for (int h = 0; h + 1 < mdp.horizon(); ++h) {
      const auto counts = TransitionCounts(mdp, data, h);
      const auto mle = FitTransitionMle(cls.steps[h], mdp, data, h);
      const double gap = TransitionLogLikelihood(mle, counts) -
                         TransitionLogLikelihood(mdp.transitions(h), counts);
      const double base =
          SlackTransition(cls.steps[h], mdp.num_states(), mdp.num_actions(),
                          mdp.horizon(), n, delta, 1.0);
      ratios[i].push_back(base > 0.0 ? gap / base : (gap > 0.0 ? kInf() : 0.0));
    }
  });
  return Choose(std::move(candidates), ratios, target);
}

}  // namespace freehand
