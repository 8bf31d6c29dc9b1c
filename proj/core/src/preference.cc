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

#include "freehand/preference.h"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "freehand/errors.h"

namespace freehand {
namespace {

double LogSigmoid(double x) {
  return x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

const double kLogOfClamp = std::log(kLogClamp);

}  // namespace

double Sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

double LinkFunction::LogProb(double x) const {
  if (log_forward) return std::max(log_forward(x), kLogOfClamp);
  return std::log(std::max(forward(x), kLogClamp));
}

double LinkFunction::LogComplement(double x) const {
  if (log_forward) return std::max(log_forward(-x), kLogOfClamp);
  return std::log(std::max(1.0 - forward(x), kLogClamp));
}

LinkFunction SigmoidLink() {
  LinkFunction link;
  link.name = "sigmoid";
  link.forward = Sigmoid;
  link.derivative = [](double x) {
    double p = Sigmoid(x);
    return p * (1.0 - p);
  };
  link.log_forward = LogSigmoid;
  return link;
}

LinkFunction CustomLink(std::string name, std::function<double(double)> forward,
                        std::function<double(double)> derivative) {
  if (!forward || !derivative) {
    throw InvalidInput("custom links need both Phi and Phi'");
  }
  LinkFunction link;
  link.name = std::move(name);
  link.forward = std::move(forward);
  link.derivative = std::move(derivative);
  return link;
}

LinkFunction LinkByName(const std::string& name) {
  if (name == "sigmoid") return SigmoidLink();
  throw InvalidInput("unknown link '" + name + "'");
}

double PrefProb(const LinkFunction& link, const TabularMdp& mdp,
                const RewardFunction& r, TrajectoryId tau0, TrajectoryId tau1) {
  return PrefProb(link, RewardOf(mdp, r, tau0), RewardOf(mdp, r, tau1));
}

double ActionPrefProb(const LinkFunction& link,
                      const std::vector<double>& values, int num_actions, int s,
                      int a0, int a1) {
  return link.forward(values[s * num_actions + a1] -
                      values[s * num_actions + a0]);
}

double Kappa(const LinkFunction& link, double r_max) {
  if (!(r_max >= 0.0)) throw InvalidInput("r_max must be nonnegative");
  constexpr int kGrid = 10000;
  double lowest = std::min(link.derivative(-r_max), link.derivative(r_max));
  for (int i = 0; i <= kGrid; ++i) {
    double x = -r_max + 2.0 * r_max * i / kGrid;
    lowest = std::min(lowest, link.derivative(x));
  }
  if (!(lowest > 1e-300)) {
    throw DegenerateLink("inf Phi' over [-r_max, r_max] is not positive");
  }
  return 1.0 / lowest;
}

PreferenceDataset GeneratePreferenceDataset(const TabularMdp& mdp,
                                            const RewardFunction& r_star,
                                            const LinkFunction& link,
                                            const Policy& mu0,
                                            const Policy& mu1, int n,
                                            Rng& rng) {
  if (n < 1) throw InvalidInput("dataset size must be positive");
  ValidatePolicy(mdp, mu0);
  ValidatePolicy(mdp, mu1);
  PreferenceDataset data;
  data.records.reserve(n);
  const std::vector<double> r = DenseRewardTable(mdp, r_star);
  // Explicit laws are sampled by inverse cdf; policies are rolled out.
  struct Source {
    const TrajectoryMixture* law = nullptr;
    CategoricalSampler sampler;
  };
  auto make_source = [](const Policy& mu) {
    Source src;
    if (const auto* m = std::get_if<TrajectoryMixture>(&mu)) {
      src.law = m;
      src.sampler = CategoricalSampler(m->probs);
    }
    return src;
  };
  Source s0 = make_source(mu0), s1 = make_source(mu1);
  auto draw = [&](const Source& src, const Policy& mu) -> TrajectoryId {
    if (src.law != nullptr) return src.law->ids[src.sampler(rng)];
    return mdp.Encode(SampleTrajectory(mdp, mu, rng));
  };
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int i = 0; i < n; ++i) {
    PreferenceRecord rec;
    rec.tau0 = draw(s0, mu0);
    rec.tau1 = draw(s1, mu1);
    rec.o = unif(rng) < PrefProb(link, r[rec.tau0], r[rec.tau1]) ? 1 : 0;
    data.records.push_back(rec);
  }
  if (s0.law != nullptr) {
    data.mu0 = *s0.law;
  } else {
    data.mu0 = TrajectoryDistribution(mdp, mu0);
  }
  if (s1.law != nullptr) {
    data.mu1 = *s1.law;
  } else {
    data.mu1 = TrajectoryDistribution(mdp, mu1);
  }
  return data;
}

ActionPreferenceDataset GenerateActionDataset(const TabularMdp& mdp,
                                              const RewardFunction& r_star,
                                              const LinkFunction& link,
                                              const ActionDataLaws& laws, int n,
                                              Rng& rng) {
  if (n < 1) throw InvalidInput("dataset size must be positive");
  OptimalValues opt = ComputeOptimalValues(mdp, r_star);
  const int H = mdp.horizon(), A = mdp.num_actions();
  if (static_cast<int>(laws.state.size()) != H ||
      static_cast<int>(laws.a0.size()) != H ||
      static_cast<int>(laws.a1.size()) != H) {
    throw InvalidInput("action data laws need one entry per step");
  }
  const std::size_t S = mdp.num_states();
  for (int h = 0; h < H; ++h) {
    if (laws.state[h].size() != S || laws.a0[h].size() != S * A ||
        laws.a1[h].size() != S * A) {
      throw InvalidInput(
          "action data laws: state law needs S entries and "
          "action laws S * A entries per step");
    }
  }
  ActionPreferenceDataset data;
  data.laws = laws;
  data.steps.resize(H);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int h = 0; h < H; ++h) {
    CategoricalSampler states(laws.state[h]);
    auto& recs = data.steps[h];
    recs.reserve(n);
    for (int i = 0; i < n; ++i) {
      ActionRecord rec;
      rec.state = states(rng);
      rec.a0 = SampleIndex(laws.a0[h].data() + rec.state * A, A, rng);
      rec.a1 = SampleIndex(laws.a1[h].data() + rec.state * A, A, rng);
      double p =
          ActionPrefProb(link, opt.advantage[h], A, rec.state, rec.a0, rec.a1);
      rec.o = unif(rng) < p ? 1 : 0;
      recs.push_back(rec);
    }
  }
  return data;
}

namespace {

std::string FormatTrajectory(const Trajectory& tau) {
  std::string out;
  for (std::size_t h = 0; h < tau.size(); ++h) {
    if (h > 0) out += ',';
    out += std::to_string(tau[h].state) + ',' + std::to_string(tau[h].action);
  }
  return out;
}

Trajectory ParseTrajectory(const std::string& field, const TabularMdp& mdp) {
  Trajectory tau;
  std::stringstream ss(field);
  std::string a, b;
  while (std::getline(ss, a, ',')) {
    if (!std::getline(ss, b, ',')) {
      throw InvalidInput("odd number of indices in '" + field + "'");
    }
    tau.push_back({std::stoi(a), std::stoi(b)});
  }
  if (!mdp.InRange(tau)) {
    throw InvalidInput("trajectory '" + field + "' does not fit the MDP");
  }
  return tau;
}

bool SkipLine(const std::string& line) {
  auto pos = line.find_first_not_of(" \t\r");
  return pos == std::string::npos || line[pos] == '#';
}

}  // namespace

void WritePreferenceDataset(std::ostream& out, const TabularMdp& mdp,
                            const PreferenceDataset& data) {
  out << "# freehand preference dataset\n";
  out << "# H=" << mdp.horizon() << " S=" << mdp.num_states()
      << " A=" << mdp.num_actions() << " N=" << data.size() << "\n";
  out << "# tau0 tau1 o\n";
  for (const auto& rec : data.records) {
    out << FormatTrajectory(mdp.Decode(rec.tau0)) << ' '
        << FormatTrajectory(mdp.Decode(rec.tau1)) << ' ' << rec.o << '\n';
  }
}

PreferenceDataset ReadPreferenceDataset(std::istream& in,
                                        const TabularMdp& mdp) {
  PreferenceDataset data;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (SkipLine(line)) continue;
    std::stringstream ss(line);
    std::string t0, t1;
    int o = -1;
    try {
      if (!(ss >> t0 >> t1 >> o) || (o != 0 && o != 1)) {
        throw InvalidInput("expected 'tau0 tau1 o'");
      }
      PreferenceRecord rec;
      rec.tau0 = mdp.Encode(ParseTrajectory(t0, mdp));
      rec.tau1 = mdp.Encode(ParseTrajectory(t1, mdp));
      rec.o = o;
      data.records.push_back(rec);
    } catch (const std::exception& e) {
      throw InvalidInput("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (data.records.empty()) throw InvalidInput("dataset has no records");
  return data;
}

void WriteActionDataset(std::ostream& out,
                        const ActionPreferenceDataset& data) {
  out << "# freehand action-comparison dataset\n# h s a0 a1 o\n";
  for (std::size_t h = 0; h < data.steps.size(); ++h) {
    for (const auto& rec : data.steps[h]) {
      out << h << ' ' << rec.state << ' ' << rec.a0 << ' ' << rec.a1 << ' '
          << rec.o << '\n';
    }
  }
}

ActionPreferenceDataset ReadActionDataset(std::istream& in,
                                          const TabularMdp& mdp) {
  ActionPreferenceDataset data;
  data.steps.resize(mdp.horizon());
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (SkipLine(line)) continue;
    std::stringstream ss(line);
    int h, s, a0, a1, o;
    if (!(ss >> h >> s >> a0 >> a1 >> o) || h < 0 || h >= mdp.horizon() ||
        s < 0 || s >= mdp.num_states() || a0 < 0 || a0 >= mdp.num_actions() ||
        a1 < 0 || a1 >= mdp.num_actions() || (o != 0 && o != 1)) {
      throw InvalidInput("line " + std::to_string(lineno) +
                         ": expected 'h s a0 a1 o' in range");
    }
    data.steps[h].push_back({s, a0, a1, o});
  }
  return data;
}

}  // namespace freehand
