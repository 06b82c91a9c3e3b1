#include "mftg/equilibrium.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <utility>

#include "mftg/errors.hpp"
#include "mftg/reconstruction.hpp"

namespace mftg {

void EquilibriumConfig::validate(const LiftedStateSpace& space) const {
  if (eta_states.empty() || eta_states.size() != eta_weights.size())
    throw UsageError("eta needs matching state and weight lists");
  const FinitePmf check(eta_weights);  // throws unless the weights form a pmf
  (void)check;
  for (int s : eta_states) {
    if (s < 0 || s >= space.size())
      throw UsageError("eta state is outside the enumerated space");
  }
  if (max_iterations < 1) throw UsageError("need at least one iteration");
  if (eps <= 0.0) throw UsageError("eps must be positive");
  if (simplex_resolution < 0)
    throw UsageError("simplex resolution cannot be negative");
}

namespace {

double eta_average(const EquilibriumConfig& config,
                   const std::vector<double>& values_per_state) {
  double v = 0.0;
  for (std::size_t k = 0; k < config.eta_states.size(); ++k)
    v += config.eta_weights[k] * values_per_state[config.eta_states[k]];
  return v;
}

struct BrRound {
  std::vector<BrResult> per_team;
};

BrRound best_responses(const MftgSpec& spec, const LiftedStateSpace& space,
                       const Level1Profile& profile,
                       const EquilibriumConfig& config) {
  BrOptions br;
  br.eps = config.eps;
  br.simplex_resolution = config.simplex_resolution;
  BrRound round;
  round.per_team.reserve(spec.num_teams);
  for (int i = 0; i < spec.num_teams; ++i)
    round.per_team.push_back(best_response(spec, space, profile, i,
                                           config.backend, config.kernel, br));
  return round;
}

}  // namespace

ExploitabilityResult exploitability(const MftgSpec& spec,
                                    const LiftedStateSpace& space,
                                    const Level1Profile& profile,
                                    const EquilibriumConfig& config) {
  config.validate(space);
  profile.validate(spec, space);
  DpOptions dp;
  dp.eps = config.eps;
  const DpResult held = policy_value_dp(spec, space, profile, config.backend,
                                        config.kernel, dp);
  const BrRound round = best_responses(spec, space, profile, config);

  ExploitabilityResult res;
  for (int i = 0; i < spec.num_teams; ++i) {
    const double v = eta_average(config, held.values[i]);
    const double b = eta_average(config, round.per_team[i].values);
    const double gap = v - b;
    if (gap < -2.0 * config.eps)
      throw InvariantViolation(
          "best response came out worse than the held policy");
    res.values.push_back(v);
    res.br_values.push_back(b);
    res.gaps.push_back(gap);
    res.total += gap;
  }
  res.nash_within_tol = res.total <= spec.num_teams * 2.0 * config.eps;
  return res;
}

namespace {

EquilibriumIterate make_iterate(const MftgSpec& spec,
                                const LiftedStateSpace& space,
                                const Level1Profile& profile,
                                const EquilibriumConfig& config,
                                int iteration) {
  const ExploitabilityResult ex =
      exploitability(spec, space, profile, config);
  EquilibriumIterate it;
  it.iteration = iteration;
  it.profile = profile;
  it.values = ex.values;
  it.gaps = ex.gaps;
  it.total_gap = ex.total;
  return it;
}

bool all_gaps_small(const std::vector<double>& gaps, double eps) {
  for (double g : gaps) {
    if (g > 2.0 * eps) return false;
  }
  return true;
}

}  // namespace

EquilibriumTrace best_response_dynamics(const MftgSpec& spec,
                                        const LiftedStateSpace& space,
                                        const Level1Profile& init,
                                        const EquilibriumConfig& config) {
  config.validate(space);
  init.validate(spec, space);
  EquilibriumTrace trace;
  Level1Profile profile = init;
  trace.iterates.push_back(make_iterate(spec, space, profile, config, 0));
  if (all_gaps_small(trace.iterates.back().gaps, config.eps)) {
    trace.status = SolveStatus::kConverged;
    return trace;
  }

  // the chosen grid indices identify a best-response profile exactly
  std::vector<std::vector<int>> signatures;
  for (int t = 1; t <= config.max_iterations; ++t) {
    std::vector<int> signature;
    if (config.order == UpdateOrder::kRoundRobin) {
      BrOptions br;
      br.eps = config.eps;
      br.simplex_resolution = config.simplex_resolution;
      for (int i = 0; i < spec.num_teams; ++i) {
        BrResult res = best_response(spec, space, profile, i, config.backend,
                                     config.kernel, br);
        signature.insert(signature.end(), res.chosen.begin(),
                         res.chosen.end());
        profile.teams[i] = std::move(res.policy);
      }
    } else {
      BrRound round = best_responses(spec, space, profile, config);
      for (int i = 0; i < spec.num_teams; ++i) {
        signature.insert(signature.end(), round.per_team[i].chosen.begin(),
                         round.per_team[i].chosen.end());
        profile.teams[i] = std::move(round.per_team[i].policy);
      }
    }
    profile.validate(spec, space);
    trace.iterates.push_back(make_iterate(spec, space, profile, config, t));

    if (all_gaps_small(trace.iterates.back().gaps, config.eps)) {
      trace.status = SolveStatus::kConverged;
      return trace;
    }
    if (!signatures.empty() && signatures.back() == signature) {
      // the responses reproduced themselves; gaps stay where they are
      trace.status = SolveStatus::kConverged;
      return trace;
    }
    if (std::find(signatures.begin(), signatures.end(), signature) !=
        signatures.end()) {
      trace.status = SolveStatus::kCycled;
      return trace;
    }
    signatures.push_back(std::move(signature));
  }
  trace.status = SolveStatus::kIterationCap;
  return trace;
}

EquilibriumTrace fictitious_play(const MftgSpec& spec,
                                 const LiftedStateSpace& space,
                                 const Level1Profile& init,
                                 const EquilibriumConfig& config) {
  config.validate(space);
  init.validate(spec, space);
  for (const auto& tp : init.teams) {
    if (tp.num_slots() != 1)
      throw UsageError("fictitious play starts from one action law per state");
  }
  EquilibriumTrace trace;
  Level1Profile profile = init;
  trace.iterates.push_back(make_iterate(spec, space, profile, config, 0));
  if (all_gaps_small(trace.iterates.back().gaps, config.eps)) {
    trace.status = SolveStatus::kConverged;
    return trace;
  }

  for (int t = 1; t <= config.max_iterations; ++t) {
    const BrRound round = best_responses(spec, space, profile, config);
    const double step = 1.0 / static_cast<double>(t);
    for (int i = 0; i < spec.num_teams; ++i) {
      for (int s = 0; s < space.size(); ++s) {
        const TeamStateActionLaw& held = profile.teams[i].actions[s][0];
        const TeamStateActionLaw& target =
            round.per_team[i].policy.actions[s][0];
        const int nx = held.num_states();
        const int na = held.num_actions();
        std::vector<double> w(static_cast<std::size_t>(nx) * na);
        for (int x = 0; x < nx; ++x) {
          for (int a = 0; a < na; ++a) {
            w[static_cast<std::size_t>(x) * na + a] =
                (1.0 - step) * held.at(x, a) + step * target.at(x, a);
          }
        }
        TeamStateActionLaw mixed(nx, na, std::move(w));
        if (admissibility_residual(mixed, space.state(s)) > kAdmissibleTol)
          throw InvariantViolation("averaged action law left the admissible set");
        profile.teams[i].actions[s][0] = std::move(mixed);
      }
    }
    profile.validate(spec, space);
    trace.iterates.push_back(make_iterate(spec, space, profile, config, t));
    if (all_gaps_small(trace.iterates.back().gaps, config.eps)) {
      trace.status = SolveStatus::kConverged;
      return trace;
    }
  }
  trace.status = SolveStatus::kIterationCap;
  return trace;
}

std::string equilibrium_trace_csv(const EquilibriumTrace& trace) {
  std::string out = "iteration,player,value,gap,total_gap\n";
  char buf[160];
  for (const auto& it : trace.iterates) {
    for (std::size_t i = 0; i < it.values.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%d,%zu,%.17g,%.17g,%.17g\n",
                    it.iteration, i, it.values[i], it.gaps[i], it.total_gap);
      out += buf;
    }
  }
  return out;
}

}  // namespace mftg
