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

#include "cli.h"

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>

#include "freehand/action_based.h"
#include "freehand/analysis.h"
#include "freehand/confidence.h"
#include "freehand/errors.h"
#include "freehand/harness.h"
#include "freehand/mle.h"
#include "freehand/planner.h"
#include "freehand/random.h"

namespace freehand {
namespace {

using nlohmann::json;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
};

// Writes to out_dir/file when --out is given, else to the stream.
class Sink {
 public:
  Sink(const Common& common, std::ostream& fallback)
      : common_(common), fallback_(fallback) {}

  void Write(const std::string& file,
             const std::function<void(std::ostream&)>& body) {
    if (common_.out_dir.empty()) {
      body(fallback_);
      return;
    }
    std::filesystem::create_directories(common_.out_dir);
    const auto path = std::filesystem::path(common_.out_dir) / file;
    std::ofstream f(path, std::ios::binary);
    if (!f) throw InvalidInput("cannot write '" + path.string() + "'");
    body(f);
  }

 private:
  const Common& common_;
  std::ostream& fallback_;
};

json ReadJsonFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open '" + path + "'");
  try {
    return json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::exception& e) {
    throw InvalidInput("'" + path + "' is not valid JSON: " + e.what());
  }
}

ExperimentConfig LoadConfig(const Common& common) {
  if (common.config.empty()) throw InvalidInput("--config is required");
  json j = ReadJsonFile(common.config);
  if (common.seed) j["seed"] = *common.seed;
  return ParseExperimentConfig(j);
}

// A config may be an experiment (with "instance") or a bare instance spec.
json InstanceSpec(const Common& common) {
  if (common.config.empty()) throw InvalidInput("--config is required");
  json j = ReadJsonFile(common.config);
  return j.contains("instance") ? j["instance"] : j;
}

Policy PolicyOrUniform(const std::optional<Policy>& p, const TabularMdp& mdp) {
  return p ? *p : Policy(UniformPolicy(mdp));
}

void Dump(std::ostream& out, const json& j) { out << j.dump(2) << '\n'; }

std::string Num(double x) {
  std::ostringstream s;
  s.precision(17);
  s << x;
  return s.str();
}

PreferenceDataset LoadPreferenceData(const std::string& path,
                                     const TabularMdp& mdp) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open '" + path + "'");
  return ReadPreferenceDataset(in, mdp);
}

ActionPreferenceDataset LoadActionData(const std::string& path,
                                       const TabularMdp& mdp) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open '" + path + "'");
  return ReadActionDataset(in, mdp);
}

TrajectoryMixture ReferenceLaw(const ExperimentConfig& cfg,
                               const TabularMdp& mdp, const Policy& mu1,
                               const PreferenceDataset& data) {
  if (cfg.mu_ref == "mu1_exact") {
    return TrajectoryDistribution(mdp, mu1, cfg.cap);
  }
  if (cfg.mu_ref == "custom") {
    return TrajectoryDistribution(mdp, PolicyFromJson(mdp, cfg.mu_ref_policy),
                                  cfg.cap);
  }
  return EmpiricalReference(data);
}

// --- subcommands -----------------------------------------------------------

struct GenInstanceArgs {
  std::string generator;
  int S = 1, A = 2, H = 2, N = 100, member = 1;
  double C = 2.0;
  std::string kind = "tr";
};

void GenInstance(const Common& common, const GenInstanceArgs& a, Sink& sink) {
  json spec;
  json meta;
  if (a.generator == "prop2") {
    spec = {
        {"generator", "prop2"}, {"S", a.S}, {"A", a.A}, {"H", a.H}, {"C", a.C}};
    meta = {{"C_st", a.C}, {"C_tr", std::pow(a.C, a.H)}};
  } else if (a.generator == "lower-bound") {
    spec = {{"generator", "lower_bound"},
            {"kind", a.kind},
            {"C", a.C},
            {"H", a.H},
            {"N", a.N},
            {"member", a.member}};
    const LowerBoundInstance lb =
        MakeLowerBoundInstance(ParseLowerBoundKind(a.kind), a.C, a.H, a.N);
    meta = {{"kind", a.kind},
            {"C", a.C},
            {"H", a.H},
            {"N", a.N},
            {"member", a.member},
            {"x", lb.x},
            {"two_state", lb.two_state},
            {"separation", lb.separation},
            {"kl_bound", lb.kl_bound},
            {"kl", InstancePairKl(lb)},
            {"lower_bound_rate", LowerBoundRate(lb.kind, a.C, a.H, a.N)}};
  } else if (a.generator == "inline") {
    spec = InstanceSpec(common);
  } else {
    throw InvalidInput("unknown generator '" + a.generator +
                       "' (expected prop2, lower-bound or inline)");
  }
  json j = InstanceToJson(MakeInstance(spec));
  if (!meta.empty()) j["meta"] = meta;
  sink.Write("instance.json", [&](std::ostream& o) { Dump(o, j); });
}

void GenData(const Common& common, int n, Sink& sink) {
  const ExperimentConfig cfg = LoadConfig(common);
  const Instance inst = MakeInstance(cfg.instance);
  Rng rng(CellSeed(cfg, n, 0));
  const LinkFunction link = LinkByName(cfg.link);
  if (cfg.algorithm == Algorithm::kFreehandAction) {
    const ActionDataLaws laws = inst.action_laws ? *inst.action_laws : [&] {
      json spec = cfg.instance;
      spec["action_laws"] = json::object();
      return *MakeInstance(spec).action_laws;
    }();
    auto data =
        GenerateActionDataset(inst.mdp, inst.r_star, link, laws, n, rng);
    sink.Write("data.txt",
               [&](std::ostream& o) { WriteActionDataset(o, data); });
  } else {
    auto data = GeneratePreferenceDataset(
        inst.mdp, inst.r_star, link, PolicyOrUniform(inst.mu0, inst.mdp),
        PolicyOrUniform(inst.mu1, inst.mdp), n, rng);
    sink.Write("data.txt", [&](std::ostream& o) {
      WritePreferenceDataset(o, inst.mdp, data);
    });
  }
}

void FitMle(const Common& common, const std::string& data_path, Sink& sink) {
  const ExperimentConfig cfg = LoadConfig(common);
  const Instance inst = MakeInstance(cfg.instance);
  const LinkFunction link = LinkByName(cfg.link);
  json j;
  if (cfg.algorithm == Algorithm::kFreehandAction) {
    const auto data = LoadActionData(data_path, inst.mdp);
    const AdvantageClass cls =
        MakeAdvantageClass(cfg.advantage_class, inst.mdp);
    const AdvantageFit fit =
        FitAdvantageMle(cls, inst.mdp, data, link, cfg.plan.solver);
    j = {{"tables", fit.tables},
         {"loglik", fit.loglik},
         {"iterations", fit.iterations}};
  } else {
    const auto data = LoadPreferenceData(data_path, inst.mdp);
    const RewardClass cls = MakeRewardClass(cfg.reward_class, inst.mdp);
    const RewardFit fit =
        FitRewardMle(cls, data, link, cfg.plan.solver, cfg.cap);
    j = {{"method", fit.method},
         {"loglik", fit.loglik},
         {"iterations", fit.iterations},
         {"grad_norm", fit.grad_norm},
         {"params", fit.model.params},
         {"values", fit.model.values},
         {"zeta", SlackReward(cls, static_cast<int>(data.size()), cfg.delta,
                              cfg.c_mle)}};
  }
  sink.Write("mle.json", [&](std::ostream& o) { Dump(o, j); });
}

void Plan(const Common& common, const std::string& data_path, Sink& sink) {
  const ExperimentConfig cfg = LoadConfig(common);
  const Instance inst = MakeInstance(cfg.instance);
  const TabularMdp& mdp = inst.mdp;
  const LinkFunction link = LinkByName(cfg.link);
  json j;
  if (cfg.algorithm == Algorithm::kFreehandAction) {
    const auto data = LoadActionData(data_path, mdp);
    const AdvantageClass cls = MakeAdvantageClass(cfg.advantage_class, mdp);
    const ActionRunResult run =
        RunFreehandAction(mdp, inst.r_star, data, cls, link, cfg.plan.solver);
    j = {{"policy", PolicyToJson(mdp, run.policy)},
         {"j_hat", run.value},
         {"j_optimal", run.optimal_value},
         {"suboptimality", run.suboptimality}};
  } else {
    const auto data = LoadPreferenceData(data_path, mdp);
    const RewardClass cls = MakeRewardClass(cfg.reward_class, mdp);
    const Policy mu1 = PolicyOrUniform(inst.mu1, mdp);
    const TrajectoryMixture mu_ref = ReferenceLaw(cfg, mdp, mu1, data);
    const RewardConfidenceSet set = BuildRewardConfidence(
        data, cls, link, cfg.delta, cfg.c_mle, cfg.plan.solver, cfg.cap);
    Policy pi;
    if (cfg.algorithm == Algorithm::kGreedyMleBaseline) {
      pi = SolveTrajectoryReward(mdp, set.mle().model.values).policy;
    } else {
      RobustPlanResult plan;
      if (cfg.algorithm == Algorithm::kFreehandTransition) {
        const TransitionConfidenceSet tset = BuildTransitionConfidence(
            mdp, data, MakeTransitionClass(cfg.transition_class, mdp),
            cfg.delta, cfg.c_p, cfg.per_row_transitions);
        plan = RobustPlanUnknown(mdp, set, tset, mu_ref, cfg.plan);
      } else {
        plan = RobustPlanKnown(mdp, set, mu_ref, cfg.plan);
      }
      pi = plan.policy;
      j["robust_value"] = plan.value;
      j["policy_index"] = plan.policy_index;
      j["inner_solves"] = plan.inner_solves;
      j["worst_reward"] = plan.reward.values;
    }
    j["policy"] = PolicyToJson(mdp, pi);
    j["zeta"] = set.zeta();
    j["loglik_hat"] = set.loglik_hat();
    j["j_hat"] = EvaluatePolicy(mdp, pi, inst.r_star, cfg.cap);
    j["j_mu1"] = EvaluatePolicy(mdp, mu1, inst.r_star, cfg.cap);
  }
  sink.Write("plan.json", [&](std::ostream& o) { Dump(o, j); });
}

void Run(const Common& common, int threads, Sink& sink, std::ostream& err) {
  const ExperimentConfig cfg = LoadConfig(common);
  const ExperimentResult result = RunExperiment(cfg, threads);
  sink.Write("results.csv",
             [&](std::ostream& o) { WriteResultsCsv(o, cfg, result); });
  if (common.out_dir.empty()) return;  // stdout carries only the results
  sink.Write("timing.csv", [&](std::ostream& o) { WriteTimingCsv(o, result); });
  try {
    const RateFit fit = FitRate(result);
    sink.Write("rates.csv", [&](std::ostream& o) { WriteRateCsv(o, fit); });
    sink.Write("rates.svg",
               [&](std::ostream& o) { WriteSvgPlot(o, fit, cfg.name); });
  } catch (const InsufficientLevels& e) {
    err << "note: no rate fit: " << e.what() << '\n';
  }
}

void Coeffs(const Common& common, double resolution, Sink& sink) {
  const json raw = common.config.empty() ? json() : ReadJsonFile(common.config);
  const Instance inst = MakeInstance(InstanceSpec(common));
  const TabularMdp& mdp = inst.mdp;
  const Policy mu0 = PolicyOrUniform(inst.mu0, mdp);
  const Policy mu1 = PolicyOrUniform(inst.mu1, mdp);
  const std::vector<double> r_star = DenseRewardTable(mdp, inst.r_star);
  const Policy target = inst.target
                            ? *inst.target
                            : Policy(SolveTrajectoryReward(mdp, r_star).policy);
  const TrajectoryMixture d0 = TrajectoryDistribution(mdp, mu0);
  const TrajectoryMixture d1 = TrajectoryDistribution(mdp, mu1);
  std::vector<std::tuple<std::string, double, std::string>> rows = {
      {"C_st", ConcentrabilityPerStep(mdp, target, d0), "exact"},
      {"C_tr", ConcentrabilityPerTrajectory(mdp, target, d0), "exact"},
      {"C_P_bound", ConcentrabilityTransitionBound(mdp, target, d0, d1),
       "exact"}};
  if (raw.contains("reward_class")) {
    const RewardClass cls = MakeRewardClass(raw["reward_class"], mdp);
    rows.emplace_back(
        "C_r",
        ConcentrabilityReward(cls, mdp, target, d1, d0, d1, r_star,
                              kDefaultEnumerationCap, resolution),
        Num(resolution));
  }
  sink.Write("coeffs.csv", [&](std::ostream& o) {
    o << "coefficient,value,resolution\n";
    for (const auto& [name, value, res] : rows) {
      o << name << ',' << Num(value) << ',' << res << '\n';
    }
  });
}

RateFit FitFromFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open '" + path + "'");
  return FitRateFromCsv(in);
}

}  // namespace

int RunCli(int argc, const char* const* argv, std::ostream& out,
           std::ostream& err) {
  CLI::App app{
      "freehand: robust planning from trajectory and action "
      "preferences"};
  app.set_version_flag("--version", std::string(Version()));
  app.require_subcommand(1);
  // Global options may also follow the subcommand.
  app.fallthrough();

  Common common;
  app.add_option("--config", common.config, "Config or instance JSON file")
      ->check(CLI::ExistingFile);
  app.add_option("--seed", common.seed, "Override the master seed");
  app.add_option("--out", common.out_dir,
                 "Output directory (default: write to stdout)");

  GenInstanceArgs gen;
  auto* gen_cmd = app.add_subcommand(
      "gen-instance", "Emit an instance JSON (prop2 | lower-bound | inline)");
  gen_cmd->add_option("generator", gen.generator)->required();
  gen_cmd->add_option("--S", gen.S, "States (prop2)");
  gen_cmd->add_option("--A", gen.A, "Actions (prop2)");
  gen_cmd->add_option("--H", gen.H, "Horizon");
  gen_cmd->add_option("--C", gen.C, "Concentrability parameter");
  gen_cmd->add_option("--N", gen.N, "Sample size (lower-bound)");
  gen_cmd->add_option("--kind", gen.kind, "st | tr (lower-bound)");
  gen_cmd->add_option("--member", gen.member, "1 | 2 (lower-bound)");

  int n = 100;
  auto* data_cmd = app.add_subcommand(
      "gen-data", "Sample a preference dataset (rep 0 seed)");
  data_cmd->add_option("--n", n, "Number of comparisons")->required();

  std::string data_path;
  auto* mle_cmd = app.add_subcommand("fit-mle", "Fit the reward MLE");
  mle_cmd->add_option("--data", data_path)
      ->required()
      ->check(CLI::ExistingFile);
  auto* plan_cmd = app.add_subcommand("plan", "Run the configured planner");
  plan_cmd->add_option("--data", data_path)
      ->required()
      ->check(CLI::ExistingFile);

  int threads = 0;
  auto* run_cmd = app.add_subcommand("run", "Run a seeded sweep");
  run_cmd->add_option("--threads", threads,
                      "Worker cap (0: FREEHAND_THREADS "
                      "or hardware)");

  double resolution = 0.1;
  auto* coeffs_cmd =
      app.add_subcommand("coeffs", "Print concentrability coefficients");
  coeffs_cmd->add_option("--resolution", resolution,
                         "Discretization for class suprema");

  std::string csv_path;
  auto* rates_cmd = app.add_subcommand("rates", "Fit a log-log rate");
  rates_cmd->add_option("csv", csv_path, "results or rates CSV")
      ->required()
      ->check(CLI::ExistingFile);
  std::string title = "suboptimality vs N";
  auto* plot_cmd = app.add_subcommand("plot", "Emit an SVG rate plot");
  plot_cmd->add_option("csv", csv_path, "results or rates CSV")
      ->required()
      ->check(CLI::ExistingFile);
  plot_cmd->add_option("--title", title);

  std::vector<std::string> args;
  for (int i = argc - 1; i > 0; --i) args.emplace_back(argv[i]);
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << Version() << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n' << app.help();
    return 1;
  }

  Sink sink(common, out);
  try {
    if (*gen_cmd) {
      GenInstance(common, gen, sink);
    } else if (*data_cmd) {
      GenData(common, n, sink);
    } else if (*mle_cmd) {
      FitMle(common, data_path, sink);
    } else if (*plan_cmd) {
      Plan(common, data_path, sink);
    } else if (*run_cmd) {
      Run(common, threads, sink, err);
    } else if (*coeffs_cmd) {
      Coeffs(common, resolution, sink);
    } else if (*rates_cmd) {
      const RateFit fit = FitFromFile(csv_path);
      sink.Write("rates.csv", [&](std::ostream& o) { WriteRateCsv(o, fit); });
    } else if (*plot_cmd) {
      const RateFit fit = FitFromFile(csv_path);
      sink.Write("rates.svg",
                 [&](std::ostream& o) { WriteSvgPlot(o, fit, title); });
    }
  } catch (const InvalidInput& e) {
    // Bad configs or missing flags are usage errors.
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

}  // namespace freehand
