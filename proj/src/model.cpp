#include "mftg/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "mftg/errors.hpp"

namespace mftg {

int pack_index(std::span<const int> sizes, std::span<const int> coords) {
  if (sizes.size() != coords.size()) throw UsageError("pack_index: rank mismatch");
  int packed = 0;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (coords[i] < 0 || coords[i] >= sizes[i]) throw UsageError("pack_index: out of range");
    packed = packed * sizes[i] + coords[i];
  }
  return packed;
}

std::vector<int> unpack_index(std::span<const int> sizes, int packed) {
  std::vector<int> coords(sizes.size());
  for (int i = static_cast<int>(sizes.size()) - 1; i >= 0; --i) {
    coords[i] = packed % sizes[i];
    packed /= sizes[i];
  }
  if (packed != 0) throw UsageError("unpack_index: out of range");
  return coords;
}

int coordinate_of(std::span<const int> sizes, int packed, int coord) {
  for (int i = static_cast<int>(sizes.size()) - 1; i > coord; --i) packed /= sizes[i];
  return packed % sizes[coord];
}

FiniteNoiseLaw FiniteNoiseLaw::none() {
  return {FinitePmf::dirac(1, 0), {std::vector<double>{}}};
}

int DriftParams::joint_state_count() const {
  int k = 1;
  for (int i = 0; i < m; ++i) k *= G;
  return k;
}

double DriftParams::derived_cost_bound() const {
  double bound = 0.0;
  for (int i = 0; i < m; ++i) {
    double row = 1.0;
    for (int j = 0; j < m; ++j)
      if (j != i) row += std::abs(static_cast<double>(weights[i][j]));
    bound = std::max(bound, (G - 1.0) * row);
  }
  return bound;
}

void DriftParams::validate() const {
  if (G < 1 || m < 1) throw UsageError("drift config: G and m must be at least 1");
  if (static_cast<int>(targets.size()) != m) throw UsageError("drift config: need m targets");
  for (int t : targets)
    if (t < 0 || t >= G) throw UsageError("drift config: target outside the grid");
  if (static_cast<int>(weights.size()) != m) throw UsageError("drift config: weights must be m x m");
  for (int i = 0; i < m; ++i) {
    if (static_cast<int>(weights[i].size()) != m)
      throw UsageError("drift config: weights must be m x m");
    if (weights[i][i] != 0) throw UsageError("drift config: weight diagonal must be zero");
    for (int w : weights[i])
      if (w < -1 || w > 1) throw UsageError("drift config: weights must lie in {-1,0,1}");
  }
  if (!(gamma > 0.0 && gamma < 1.0)) throw UsageError("drift config: gamma must be inside (0,1)");
  if (variant == Variant::kPeriodic) {
    if (idio_weights.size() != 3) throw UsageError("drift config: idio_law needs 3 weights");
    FinitePmf law(idio_weights);  // validates mass
    const double mean = -law[0] + law[2];
    if (std::abs(mean) > 1e-15)
      throw UsageError("drift config: idiosyncratic law must have mean zero");
  }
  if (!initial.empty() && static_cast<int>(initial.size()) != joint_state_count())
    throw UsageError("drift config: initial law has wrong length");
}

int MftgSpec::num_joint_states() const {
  int k = 1;
  for (int s : state_sizes) k *= s;
  return k;
}

int MftgSpec::team_state(int joint, int team) const {
  return coordinate_of(state_sizes, joint, team);
}

MftgSpec build_drift_model(const DriftParams& params) {
  params.validate();
  const int G = params.G, m = params.m;
  const int K = params.joint_state_count();

  MftgSpec spec;
  spec.num_teams = m;
  spec.state_sizes.assign(m, G);
  spec.action_sizes.assign(m, G);
  spec.gamma = params.gamma;
  spec.cost_bound = params.cost_bound > 0.0 ? params.cost_bound : params.derived_cost_bound();
  spec.initial_joint =
      params.initial.empty() ? FinitePmf::uniform(K) : FinitePmf(params.initial);
  spec.drift = params;

  if (params.variant == DriftParams::Variant::kPeriodic) {
    FiniteNoiseLaw idio{FinitePmf(params.idio_weights),
                        {std::vector<double>{-1.0}, std::vector<double>{0.0},
                         std::vector<double>{1.0}}};
    spec.idio_laws.assign(m, idio);
  } else {
    spec.idio_laws.assign(m, FiniteNoiseLaw::none());
  }

  // Global noise payload layout: [u0, Z_1 ... Z_K].
  spec.sample_global = [K](Stream& stream) {
    std::vector<double> e;
    e.reserve(1 + K);
    e.push_back(stream.next_uniform());
    for (int k = 0; k < K; ++k) e.push_back(stream.next_exponential());
    return e;
  };
  spec.sample_team.assign(m, nullptr);

  const auto variant = params.variant;
  const auto zero_rule = params.zero_rule;
  spec.system_fn = [G, m, variant, zero_rule](int team, int /*x*/, int /*a*/,
                                              const JointLaw& bar_a,
                                              std::span<const double> idio,
                                              std::span<const double> /*team_noise*/,
                                              std::span<const double> global) -> int {
    const double u0 = global[0];
    PerturbationVector z(std::vector<double>(global.begin() + 1, global.end()));
    FinitePmf drawn = perturb(bar_a.joint_action_marginal(), z, zero_rule);
    const int joint_action = inverse_cdf_sample(drawn, u0);
    std::vector<int> sizes(m, G);
    int xi = coordinate_of(sizes, joint_action, team);
    if (variant == DriftParams::Variant::kPeriodic) {
      const int shift = static_cast<int>(idio[0]);
      xi = ((xi + shift) % G + G) % G;
    }
    return xi;
  };

  const std::vector<int> targets = params.targets;
  const std::vector<std::vector<int>> weights = params.weights;
  spec.cost_fn = [G, m, targets, weights](int team, int x, int /*a*/,
                                          const JointLaw& bar_a) -> double {
    double cost = std::abs(static_cast<double>(x - targets[team]));
    const FinitePmf states = bar_a.state_marginal();
    std::vector<int> sizes(m, G);
    // coordinate marginals of the joint state law
    for (int j = 0; j < m; ++j) {
      if (j == team || weights[team][j] == 0) continue;
      double expect = 0.0;
      for (int s = 0; s < states.size(); ++s) {
        if (states[s] == 0.0) continue;
        const int xj = coordinate_of(sizes, s, j);
        expect += states[s] * std::abs(static_cast<double>(x - xj));
      }
      cost += weights[team][j] * expect;
    }
    return cost;
  };

  return spec;
}

CommonNoise sample_common_noise(const NoiseArchitecture& arch, const MftgSpec& spec,
                                std::int64_t time, std::uint64_t replication) {
  CommonNoise noise;
  if (spec.sample_global) {
    Stream s = arch.stream(StreamKind::kGlobalCommon, 0, 0, time, replication);
    noise.global = spec.sample_global(s);
  }
  noise.team.resize(spec.num_teams);
  for (int i = 0; i < spec.num_teams; ++i) {
    if (i < static_cast<int>(spec.sample_team.size()) && spec.sample_team[i]) {
      Stream s = arch.stream(StreamKind::kTeamCommon, i, 0, time, replication);
      noise.team[i] = spec.sample_team[i](s);
    }
  }
  return noise;
}

std::vector<int> step_system(const MftgSpec& spec, std::span<const int> states,
                             std::span<const int> actions, const JointLaw& bar_a,
                             std::span<const std::span<const double>> idio,
                             const CommonNoise& common) {
  if (static_cast<int>(states.size()) != spec.num_teams ||
      static_cast<int>(actions.size()) != spec.num_teams)
    throw UsageError("step_system: need one state and action per team");
  std::vector<int> next(spec.num_teams);
  for (int i = 0; i < spec.num_teams; ++i) {
    next[i] = spec.system_fn(i, states[i], actions[i], bar_a, idio[i],
                             common.team[i], common.global);
    if (next[i] < 0 || next[i] >= spec.state_sizes[i])
      throw InvariantViolation("step_system: system function left the state space");
  }
  return next;
}

double stage_cost(const MftgSpec& spec, int team, int x, int a, const JointLaw& bar_a) {
  if (team < 0 || team >= spec.num_teams || x < 0 || x >= spec.state_sizes[team] || a < 0 ||
      a >= spec.action_sizes[team])
    throw UsageError("stage_cost: index out of range");
  return spec.cost_fn(team, x, a, bar_a);
}

double audit_cost_bound(const MftgSpec& spec, int evaluations, std::uint64_t seed) {
  Stream stream(mix64(seed ^ 0xa0761d6478bd642fULL));
  const int nx = spec.num_joint_states();
  int joint_actions = 1;
  for (int s : spec.action_sizes) joint_actions *= s;
  double worst = 0.0;
  for (int e = 0; e < evaluations; ++e) {
    const int team = static_cast<int>(stream.next_u64() % spec.num_teams);
    const int x = static_cast<int>(stream.next_u64() % spec.state_sizes[team]);
    const int a = static_cast<int>(stream.next_u64() % spec.action_sizes[team]);
    std::vector<double> w(static_cast<std::size_t>(nx) * joint_actions);
    for (double& v : w) v = stream.next_exponential();
    FinitePmf flat = FinitePmf::normalized(std::move(w));
    JointLaw bar_a(nx, spec.action_sizes,
                   std::vector<double>(flat.weights().begin(), flat.weights().end()));
    const double f = stage_cost(spec, team, x, a, bar_a);
    worst = std::max(worst, std::abs(f));
    if (std::abs(f) > spec.cost_bound)
      throw InvariantViolation("audit_cost_bound: |f| exceeds the declared bound");
  }
  return worst;
}

int certified_horizon(double gamma, double cost_bound, double tol) {
  if (!(gamma > 0.0 && gamma < 1.0) || tol <= 0.0 || cost_bound < 0.0)
    throw UsageError("certified_horizon: bad arguments");
  if (cost_bound == 0.0) return 1;
  const double target = tol * (1.0 - gamma) / cost_bound;
  if (target >= 1.0) return 1;
  return static_cast<int>(std::ceil(std::log(target) / std::log(gamma)));
}

namespace {

using nlohmann::json;

json parse_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw UsageError("cannot open config: " + path);
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw UsageError("malformed config " + path + ": " + e.what());
  }
  return j;
}

}  // namespace

DriftParams load_drift_config(const std::string& path) {
  const json j = parse_file(path);
  try {
    if (j.contains("model") && j.at("model") != "drift")
      throw UsageError("config " + path + ": unknown model kind");
    DriftParams p;
    p.G = j.at("G").get<int>();
    p.m = j.at("m").get<int>();
    p.targets = j.at("targets").get<std::vector<int>>();
    p.weights = j.at("weights").get<std::vector<std::vector<int>>>();
    p.gamma = j.at("gamma").get<double>();
    const std::string variant = j.value("variant", std::string("plain"));
    if (variant == "plain")
      p.variant = DriftParams::Variant::kPlain;
    else if (variant == "periodic")
      p.variant = DriftParams::Variant::kPeriodic;
    else
      throw UsageError("config " + path + ": variant must be \"plain\" or \"periodic\"");
    if (j.contains("idio_law")) p.idio_weights = j.at("idio_law").get<std::vector<double>>();
    if (j.contains("seeds")) {
      const auto& seeds = j.at("seeds");
      p.master_seed = seeds.is_object() ? seeds.at("master").get<std::uint64_t>()
                                        : seeds.get<std::uint64_t>();
    }
    p.cost_bound = j.value("C_f", 0.0);
    if (j.contains("initial")) {
      const auto& init = j.at("initial");
      if (init.is_string()) {
        if (init != "uniform") throw UsageError("config " + path + ": unknown initial law");
      } else if (init.is_object()) {
        const int atom = init.at("dirac").get<int>();
        std::vector<double> w(p.joint_state_count(), 0.0);
        if (atom < 0 || atom >= static_cast<int>(w.size()))
          throw UsageError("config " + path + ": dirac atom out of range");
        w[atom] = 1.0;
        p.initial = std::move(w);
      } else {
        p.initial = init.get<std::vector<double>>();
      }
    }
    const std::string zero_rule = j.value("zero_rule", std::string("normalizer"));
    if (zero_rule == "normalizer")
      p.zero_rule = ZeroRule::kNormalizerTrigger;
    else if (zero_rule == "literal")
      p.zero_rule = ZeroRule::kLiteralTrigger;
    else
      throw UsageError("config " + path + ": zero_rule must be \"normalizer\" or \"literal\"");
    p.validate();
    return p;
  } catch (const json::exception& e) {
    throw UsageError("config " + path + ": " + e.what());
  }
}

}  // namespace mftg
