#include "mftg/population.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "mftg/errors.hpp"
#include "mftg/parallel.hpp"

namespace mftg {

const FinitePmf& Level0Policy::action_pmf(int team, int own_state,
                                          const FinitePmf& mu, int slot) const {
  const Team& tp = teams.at(team);
  for (std::size_t k = 0; k < tp.keys.size(); ++k) {
    if (tp.keys[k].size() == mu.size() &&
        linf_distance(tp.keys[k], mu) <= key_tol)
      return tp.tables[k].at(slot).at(own_state);
  }
  if (!tp.base.empty()) return tp.base.at(slot).at(own_state);
  throw UsageError("policy has no table for the queried population state");
}

void Level0Policy::validate(const MftgSpec& spec) const {
  if (num_teams() != spec.num_teams)
    throw UsageError("policy must cover every team");
  for (int i = 0; i < num_teams(); ++i) {
    const Team& tp = teams[i];
    const int slots = tp.slot_weights.size();
    if (slots < 1) throw UsageError("policy needs at least one slot");
    auto check_table = [&](const std::vector<std::vector<FinitePmf>>& table) {
      if (static_cast<int>(table.size()) != slots)
        throw UsageError("policy table must cover every slot");
      for (const auto& per_state : table) {
        if (static_cast<int>(per_state.size()) != spec.state_sizes[i])
          throw UsageError("policy table must cover every own state");
        for (const auto& pmf : per_state) {
          if (pmf.size() != spec.action_sizes[i])
            throw UsageError("policy action pmf has the wrong size");
        }
      }
    };
    if (!tp.base.empty()) check_table(tp.base);
    if (tp.keys.size() != tp.tables.size())
      throw UsageError("policy keys and tables must pair up");
    for (const auto& table : tp.tables) check_table(table);
    if (tp.base.empty() && tp.tables.empty())
      throw UsageError("policy needs a base table or per-state tables");
  }
}

Level0Policy random_level0_policy(const MftgSpec& spec, int slots,
                                  std::uint64_t seed) {
  if (slots < 1) throw UsageError("policy needs at least one slot");
  Level0Policy pol;
  pol.teams.resize(spec.num_teams);
  Stream stream(mix64(seed ^ 0x243f6a8885a308d3ULL));
  for (int i = 0; i < spec.num_teams; ++i) {
    Level0Policy::Team& tp = pol.teams[i];
    tp.slot_weights = FinitePmf::uniform(slots);
    tp.base.resize(slots);
    for (int r = 0; r < slots; ++r) {
      tp.base[r].reserve(spec.state_sizes[i]);
      for (int x = 0; x < spec.state_sizes[i]; ++x) {
        std::vector<double> w(static_cast<std::size_t>(spec.action_sizes[i]));
        for (double& v : w) v = stream.next_exponential();
        tp.base[r].push_back(FinitePmf::normalized(std::move(w)));
      }
    }
  }
  return pol;
}

Level0Policy uniform_level0_policy(const MftgSpec& spec) {
  Level0Policy pol;
  pol.teams.resize(spec.num_teams);
  for (int i = 0; i < spec.num_teams; ++i) {
    Level0Policy::Team& tp = pol.teams[i];
    tp.slot_weights = FinitePmf::dirac(1, 0);
    tp.base = {std::vector<FinitePmf>(
        spec.state_sizes[i], FinitePmf::uniform(spec.action_sizes[i]))};
  }
  return pol;
}

Level0Policy constant_level0_policy(const MftgSpec& spec,
                                    std::span<const int> actions) {
  if (static_cast<int>(actions.size()) != spec.num_teams)
    throw UsageError("need one action per team");
  Level0Policy pol;
  pol.teams.resize(spec.num_teams);
  for (int i = 0; i < spec.num_teams; ++i) {
    Level0Policy::Team& tp = pol.teams[i];
    tp.slot_weights = FinitePmf::dirac(1, 0);
    tp.base = {std::vector<FinitePmf>(
        spec.state_sizes[i],
        FinitePmf::dirac(spec.action_sizes[i], actions[i]))};
  }
  return pol;
}

JointLaw empirical_joint(const MftgSpec& spec,
                         const std::vector<std::vector<int>>& states,
                         const std::vector<std::vector<int>>& actions) {
  const int m = spec.num_teams;
  if (static_cast<int>(states.size()) != m ||
      static_cast<int>(actions.size()) != m)
    throw UsageError("need one agent vector per team");
  // per-team empirical (state, action) pmfs
  std::vector<std::vector<double>> emp(m);
  for (int i = 0; i < m; ++i) {
    if (states[i].empty() || states[i].size() != actions[i].size())
      throw UsageError("agent state and action vectors must pair up");
    const int nx = spec.state_sizes[i];
    const int na = spec.action_sizes[i];
    emp[i].assign(static_cast<std::size_t>(nx) * na, 0.0);
    const double unit = 1.0 / static_cast<double>(states[i].size());
    for (std::size_t j = 0; j < states[i].size(); ++j) {
      const int x = states[i][j];
      const int a = actions[i][j];
      if (x < 0 || x >= nx || a < 0 || a >= na)
        throw UsageError("agent state or action out of range");
      emp[i][static_cast<std::size_t>(x) * na + a] += unit;
    }
  }
  const int nx = spec.num_joint_states();
  int joint_actions = 1;
  for (int s : spec.action_sizes) joint_actions *= s;
  std::vector<double> w(static_cast<std::size_t>(nx) * joint_actions, 0.0);
  std::vector<int> acts(m);
  for (int x = 0; x < nx; ++x) {
    for (int pa = 0; pa < joint_actions; ++pa) {
      int rem = pa;
      for (int i = m - 1; i >= 0; --i) {
        acts[i] = rem % spec.action_sizes[i];
        rem /= spec.action_sizes[i];
      }
      double v = 1.0;
      for (int i = 0; i < m; ++i) {
        v *= emp[i][static_cast<std::size_t>(spec.team_state(x, i)) *
                        spec.action_sizes[i] +
                    acts[i]];
        if (v == 0.0) break;
      }
      w[static_cast<std::size_t>(x) * joint_actions + pa] = v;
    }
  }
  return JointLaw(nx, spec.action_sizes, std::move(w));
}

int horizon_for_tolerance(const MftgSpec& spec, double tol) {
  return certified_horizon(spec.gamma, spec.cost_bound, tol);
}

namespace {

void check_sim_options(const MftgSpec& spec, const Level0Policy& policy,
                       const FinitePmf& mu0, const SimOptions& options) {
  policy.validate(spec);
  if (mu0.size() != spec.num_joint_states())
    throw UsageError("initial state has the wrong dimension");
  if (options.horizon < 1) throw UsageError("horizon must be at least 1");
  if (options.replications < 1)
    throw UsageError("need at least one replication");
  if (options.backend == KernelBackend::kClosedForm && !spec.drift)
    throw UsageError("closed_form simulation needs the drift family");
}

double truncation_bound(const MftgSpec& spec, int horizon) {
  return spec.cost_bound * std::pow(spec.gamma, horizon) / (1.0 - spec.gamma);
}

ValueEstimate reduce_values(const std::vector<std::vector<double>>& per_rep,
                            int num_teams, int horizon, double trunc) {
  const int reps = static_cast<int>(per_rep.size());
  ValueEstimate est;
  est.means.assign(num_teams, 0.0);
  est.ses.assign(num_teams, 0.0);
  est.replications = reps;
  est.horizon = horizon;
  est.truncation_bound = trunc;
  for (int i = 0; i < num_teams; ++i) {
    double mean = 0.0;
    for (int r = 0; r < reps; ++r) mean += per_rep[r][i];
    mean /= reps;
    est.means[i] = mean;
    if (reps > 1) {
      double ss = 0.0;
      for (int r = 0; r < reps; ++r) {
        const double d = per_rep[r][i] - mean;
        ss += d * d;
      }
      est.ses[i] = std::sqrt(ss / (reps - 1)) / std::sqrt(static_cast<double>(reps));
    }
  }
  return est;
}

// Per-step caches; valid only while the joint law and common noise of the
// step stay fixed (system and cost maps are pure in their arguments).
struct StepCache {
  std::vector<std::vector<double>> cost;   // [team][x*na+a], NaN = unfilled
  std::vector<std::vector<int>> next;      // [team][(x*na+a)*atoms+e], -1 = unfilled
  void reset(const MftgSpec& spec) {
    cost.resize(spec.num_teams);
    next.resize(spec.num_teams);
    for (int i = 0; i < spec.num_teams; ++i) {
      cost[i].assign(
          static_cast<std::size_t>(spec.state_sizes[i]) * spec.action_sizes[i],
          std::numeric_limits<double>::quiet_NaN());
      next[i].assign(static_cast<std::size_t>(spec.state_sizes[i]) *
                         spec.action_sizes[i] *
                         spec.idio_laws[i].weights.size(),
                     -1);
    }
  }
  double cost_at(const MftgSpec& spec, int i, int x, int a, const JointLaw& bar) {
    double& slot = cost[i][static_cast<std::size_t>(x) * spec.action_sizes[i] + a];
    if (std::isnan(slot)) slot = spec.cost_fn(i, x, a, bar);
    return slot;
  }
  int next_at(const MftgSpec& spec, int i, int x, int a, int e,
              const JointLaw& bar, const CommonNoise& common) {
    int& slot = next[i][(static_cast<std::size_t>(x) * spec.action_sizes[i] + a) *
                            spec.idio_laws[i].weights.size() +
                        e];
    if (slot < 0) {
      std::span<const double> team_payload;
      if (i < static_cast<int>(common.team.size())) team_payload = common.team[i];
      const int nxt = spec.system_fn(i, x, a, bar, spec.idio_laws[i].atoms[e],
                                     team_payload, common.global);
      if (nxt < 0 || nxt >= spec.state_sizes[i])
        throw InvariantViolation("system map left the declared state space");
      slot = nxt;
    }
    return slot;
  }
};

// Lifted team action induced by the policy at the given field and slot.
std::vector<TeamStateActionLaw> induced_actions(const MftgSpec& spec,
                                                const Level0Policy& policy,
                                                const FinitePmf& mu,
                                                const std::vector<int>& slots) {
  std::vector<TeamStateActionLaw> a_hats;
  a_hats.reserve(spec.num_teams);
  for (int i = 0; i < spec.num_teams; ++i) {
    KernelMatrix k(mu.size(), spec.action_sizes[i]);
    for (int x = 0; x < mu.size(); ++x)
      k.set_row(x, policy.action_pmf(i, spec.team_state(x, i), mu, slots[i]));
    a_hats.push_back(TeamStateActionLaw::from_mix(mu, k));
  }
  return a_hats;
}

struct FieldStep {
  FinitePmf next;
  int closed_form_action = -1;  // joint action drawn by the substitution
};

// One transition of the exactly tracked field under the selected mechanism.
FieldStep advance_field(const MftgSpec& spec, const JointLaw& xi,
                        std::span<const TeamStateActionLaw> a_hats,
                        const CommonNoise& common, KernelBackend backend) {
  if (backend == KernelBackend::kClosedForm) {
    if (common.global.empty())
      throw InvariantViolation("closed_form step needs the shared uniform draw");
    const int a = drift_sample_joint_action_closed_form(spec, a_hats,
                                                        common.global[0]);
    return FieldStep{drift_atom_state(spec, a), a};
  }
  return FieldStep{pushforward_once(spec, xi, common), -1};
}

}  // namespace

PopulationResult simulate_population(const MftgSpec& spec,
                                     const Level0Policy& policy,
                                     const std::vector<int>& agents_per_team,
                                     const FinitePmf& mu0,
                                     const SimOptions& options) {
  check_sim_options(spec, policy, mu0, options);
  const int m = spec.num_teams;
  if (static_cast<int>(agents_per_team.size()) != m)
    throw UsageError("need one agent count per team");
  for (int n : agents_per_team) {
    if (n < 1) throw UsageError("every team needs at least one agent");
  }
  const int T = options.horizon;
  const int reps = options.replications;

  std::vector<FinitePmf> margs;
  margs.reserve(m);
  std::vector<int> shape(spec.state_sizes.begin(), spec.state_sizes.end());
  for (int i = 0; i < m; ++i) {
    const int keep[1] = {i};
    margs.push_back(marginal(mu0, shape, keep));
  }

  const NoiseArchitecture arch(options.master_seed);
  std::vector<std::vector<double>> per_rep(
      reps, std::vector<double>(m, 0.0));
  std::vector<std::vector<TrajectoryRow>> traj(reps);

  parallel_for(reps, options.threads, [&](int rep) {
    std::vector<std::vector<int>> X(m), A(m);
    for (int i = 0; i < m; ++i) {
      X[i].resize(agents_per_team[i]);
      A[i].resize(agents_per_team[i]);
      for (int j = 0; j < agents_per_team[i]; ++j) {
        Stream s = arch.stream(StreamKind::kInitialState, i, j, 0,
                               static_cast<std::uint64_t>(rep));
        X[i][j] = inverse_cdf_sample(margs[i], s.next_uniform());
      }
    }
    FinitePmf track = mu0;
    std::vector<double> value(m, 0.0);
    double disc = 1.0;
    std::vector<int> slots(m, 0);
    StepCache cache;
    std::vector<double> agent_costs;
    const bool record = rep < options.trajectory_replications;

    for (int n = 0; n < T; ++n) {
      // what the policy observes
      FinitePmf mu_hat;
      if (options.policy_input == PolicyInput::kEmpirical) {
        std::vector<FinitePmf> emp;
        emp.reserve(m);
        for (int i = 0; i < m; ++i) {
          std::vector<double> cnt(static_cast<std::size_t>(spec.state_sizes[i]),
                                  0.0);
          const double unit = 1.0 / static_cast<double>(agents_per_team[i]);
          for (int x : X[i]) cnt[x] += unit;
          emp.push_back(FinitePmf(std::move(cnt)));
        }
        mu_hat = product(emp);
      } else {
        mu_hat = track;
      }

      for (int i = 0; i < m; ++i) {
        Stream s = arch.stream(StreamKind::kTeamRandomization, i, 0, n,
                               static_cast<std::uint64_t>(rep));
        slots[i] = inverse_cdf_sample(policy.teams[i].slot_weights,
                                      s.next_uniform());
      }
      for (int i = 0; i < m; ++i) {
        for (int j = 0; j < agents_per_team[i]; ++j) {
          const FinitePmf& pmf = policy.action_pmf(i, X[i][j], mu_hat, slots[i]);
          Stream s = arch.stream(StreamKind::kIndividualRandomization, i, j, n,
                                 static_cast<std::uint64_t>(rep));
          A[i][j] = inverse_cdf_sample(pmf, s.next_uniform());
        }
      }
      const JointLaw bar = empirical_joint(spec, X, A);

      cache.reset(spec);
      for (int i = 0; i < m; ++i) {
        // sort per-agent costs so team averages are invariant under agent
        // relabeling, bit for bit
        agent_costs.clear();
        for (int j = 0; j < agents_per_team[i]; ++j)
          agent_costs.push_back(cache.cost_at(spec, i, X[i][j], A[i][j], bar));
        std::sort(agent_costs.begin(), agent_costs.end());
        double sum = 0.0;
        for (double c : agent_costs) sum += c;
        value[i] += disc * sum / static_cast<double>(agents_per_team[i]);
      }

      if (record) {
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < agents_per_team[i]; ++j)
            traj[rep].push_back(TrajectoryRow{rep, n, i, j, X[i][j], A[i][j]});
      }

      const CommonNoise common =
          sample_common_noise(arch, spec, n + 1, static_cast<std::uint64_t>(rep));
      if (options.policy_input == PolicyInput::kTracked) {
        const std::vector<TeamStateActionLaw> a_hats =
            induced_actions(spec, policy, track, slots);
        const XiResult xi = reconstruct_xi(track, a_hats);
        track = advance_field(spec, xi.joint, a_hats, common, options.backend)
                    .next;
      }
      for (int i = 0; i < m; ++i) {
        for (int j = 0; j < agents_per_team[i]; ++j) {
          Stream s = arch.stream(StreamKind::kIdiosyncratic, i, j, n + 1,
                                 static_cast<std::uint64_t>(rep));
          const int e = spec.idio_laws[i].sample(s);
          X[i][j] = cache.next_at(spec, i, X[i][j], A[i][j], e, bar, common);
        }
      }
      disc *= spec.gamma;
    }
    per_rep[rep] = std::move(value);
  });

  PopulationResult out;
  out.value = reduce_values(per_rep, m, T, truncation_bound(spec, T));
  for (int r = 0; r < reps; ++r)
    out.trajectories.insert(out.trajectories.end(), traj[r].begin(),
                            traj[r].end());
  return out;
}

MeanFieldResult simulate_meanfield_level0(const MftgSpec& spec,
                                          const Level0Policy& policy,
                                          const FinitePmf& mu0,
                                          const SimOptions& options) {
  check_sim_options(spec, policy, mu0, options);
  const int m = spec.num_teams;
  const int T = options.horizon;
  const int reps = options.replications;
  constexpr int kXiCheckTimes = 8;

  const NoiseArchitecture arch(options.master_seed);
  std::vector<std::vector<double>> per_rep(reps, std::vector<double>(m, 0.0));
  std::vector<std::vector<TrajectoryRow>> traj(reps);
  double xi_residual = 0.0;  // written by replication 0 only

  parallel_for(reps, options.threads, [&](int rep) {
    // the representative joint profile is drawn from mu0 itself, so initial
    // cross-team correlation is preserved exactly
    std::vector<int> xs(m);
    {
      Stream s = arch.stream(StreamKind::kInitialState, 0, 0, 0,
                             static_cast<std::uint64_t>(rep));
      const int joint = inverse_cdf_sample(mu0, s.next_uniform());
      for (int i = 0; i < m; ++i) xs[i] = spec.team_state(joint, i);
    }
    FinitePmf mu = mu0;
    std::vector<double> value(m, 0.0);
    double disc = 1.0;
    std::vector<int> slots(m, 0), alphas(m, 0);
    const bool record = rep < options.trajectory_replications;

    for (int n = 0; n < T; ++n) {
      for (int i = 0; i < m; ++i) {
        Stream s = arch.stream(StreamKind::kTeamRandomization, i, 0, n,
                               static_cast<std::uint64_t>(rep));
        slots[i] = inverse_cdf_sample(policy.teams[i].slot_weights,
                                      s.next_uniform());
      }
      const std::vector<TeamStateActionLaw> a_hats =
          induced_actions(spec, policy, mu, slots);
      const XiResult xi = reconstruct_xi(mu, a_hats);

      if (rep == 0 && n < kXiCheckTimes) {
        // the tracked joint law must factor exactly as field times policy rows
        double worst = 0.0;
        const int joint_actions = xi.joint.num_joint_actions();
        std::vector<int> acts(m);
        for (int x = 0; x < mu.size(); ++x) {
          for (int pa = 0; pa < joint_actions; ++pa) {
            int rem = pa;
            for (int i = m - 1; i >= 0; --i) {
              acts[i] = rem % spec.action_sizes[i];
              rem /= spec.action_sizes[i];
            }
            double direct = mu[x];
            for (int i = 0; i < m && direct > 0.0; ++i)
              direct *= policy.action_pmf(i, spec.team_state(x, i), mu,
                                          slots[i])[acts[i]];
            worst = std::max(worst,
                             std::abs(direct - xi.joint.at_packed(x, pa)));
          }
        }
        xi_residual = std::max(xi_residual, worst);
      }

      for (int i = 0; i < m; ++i) {
        const FinitePmf& pmf = policy.action_pmf(i, xs[i], mu, slots[i]);
        Stream s = arch.stream(StreamKind::kIndividualRandomization, i, 0, n,
                               static_cast<std::uint64_t>(rep));
        alphas[i] = inverse_cdf_sample(pmf, s.next_uniform());
        value[i] += disc * spec.cost_fn(i, xs[i], alphas[i], xi.joint);
      }

      if (record) {
        for (int i = 0; i < m; ++i)
          traj[rep].push_back(TrajectoryRow{rep, n, i, 0, xs[i], alphas[i]});
      }

      const CommonNoise common =
          sample_common_noise(arch, spec, n + 1, static_cast<std::uint64_t>(rep));
      const FieldStep step =
          advance_field(spec, xi.joint, a_hats, common, options.backend);
      if (step.closed_form_action >= 0) {
        // representative agents follow the substituted draw plus their own
        // idiosyncratic shift
        const DriftParams& dp = *spec.drift;
        for (int i = 0; i < m; ++i) {
          Stream s = arch.stream(StreamKind::kIdiosyncratic, i, 0, n + 1,
                                 static_cast<std::uint64_t>(rep));
          const int e = spec.idio_laws[i].sample(s);
          int next = coordinate_of(spec.action_sizes, step.closed_form_action, i);
          if (dp.variant == DriftParams::Variant::kPeriodic) {
            const int shift =
                static_cast<int>(std::lround(spec.idio_laws[i].atoms[e][0]));
            next = ((next + shift) % dp.G + dp.G) % dp.G;
          }
          xs[i] = next;
        }
      } else {
        for (int i = 0; i < m; ++i) {
          Stream s = arch.stream(StreamKind::kIdiosyncratic, i, 0, n + 1,
                                 static_cast<std::uint64_t>(rep));
          const int e = spec.idio_laws[i].sample(s);
          std::span<const double> team_payload;
          if (i < static_cast<int>(common.team.size()))
            team_payload = common.team[i];
          const int nxt =
              spec.system_fn(i, xs[i], alphas[i], xi.joint,
                             spec.idio_laws[i].atoms[e], team_payload,
                             common.global);
          if (nxt < 0 || nxt >= spec.state_sizes[i])
            throw InvariantViolation("system map left the declared state space");
          xs[i] = nxt;
        }
      }
      mu = step.next;
      disc *= spec.gamma;
    }
    per_rep[rep] = std::move(value);
  });

  MeanFieldResult out;
  out.value = reduce_values(per_rep, m, T, truncation_bound(spec, T));
  for (int r = 0; r < reps; ++r)
    out.trajectories.insert(out.trajectories.end(), traj[r].begin(),
                            traj[r].end());
  out.xi_consistency_residual = xi_residual;
  return out;
}

double ChaosSweepResult::total_gap(int idx) const {
  double g = 0.0;
  for (std::size_t i = 0; i < j_mf.size(); ++i)
    g += std::abs(j_n[idx][i] - j_mf[i]);
  return g;
}

double ChaosSweepResult::total_gap_se(int idx) const {
  double s = 0.0;
  for (std::size_t i = 0; i < j_mf.size(); ++i) s += se[idx][i] + mf_se[i];
  return s;
}

double ChaosSweepResult::shrink_z_score() const {
  const int first = 0;
  const int last = static_cast<int>(agent_counts.size()) - 1;
  const double diff = total_gap(first) - total_gap(last);
  const double s1 = total_gap_se(first);
  const double s2 = total_gap_se(last);
  const double denom = std::sqrt(s1 * s1 + s2 * s2);
  if (denom == 0.0)
    return diff > 0.0 ? std::numeric_limits<double>::infinity()
                      : (diff < 0.0 ? -std::numeric_limits<double>::infinity()
                                    : 0.0);
  return diff / denom;
}

ChaosSweepResult propagation_of_chaos_sweep(
    const MftgSpec& spec, const Level0Policy& policy,
    const std::vector<int>& agent_counts, const FinitePmf& mu0,
    const SimOptions& options,
    const std::optional<std::vector<double>>& j_mf_override) {
  if (agent_counts.empty()) throw UsageError("need at least one agent count");
  ChaosSweepResult out;
  out.agent_counts = agent_counts;
  if (j_mf_override) {
    if (static_cast<int>(j_mf_override->size()) != spec.num_teams)
      throw UsageError("mean-field reference needs one value per team");
    out.j_mf = *j_mf_override;
    out.mf_se.assign(spec.num_teams, 0.0);
  } else {
    const MeanFieldResult mf = simulate_meanfield_level0(spec, policy, mu0, options);
    out.j_mf = mf.value.means;
    out.mf_se = mf.value.ses;
  }
  for (int n : agent_counts) {
    const std::vector<int> counts(spec.num_teams, n);
    const PopulationResult res =
        simulate_population(spec, policy, counts, mu0, options);
    out.j_n.push_back(res.value.means);
    out.se.push_back(res.value.ses);
  }
  return out;
}

}  // namespace mftg
