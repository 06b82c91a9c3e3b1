#include "mftg/lifted.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "mftg/errors.hpp"
#include "mftg/parallel.hpp"
#include "mftg/rng.hpp"

namespace mftg {

KernelBackend parse_backend(const std::string& name) {
  if (name == "closed_form") return KernelBackend::kClosedForm;
  if (name == "quadrature") return KernelBackend::kQuadrature;
  if (name == "mc") return KernelBackend::kMonteCarlo;
  throw UsageError("unknown kernel backend '" + name +
                   "' (expected closed_form, quadrature, or mc)");
}

std::string backend_name(KernelBackend backend) {
  switch (backend) {
    case KernelBackend::kClosedForm: return "closed_form";
    case KernelBackend::kQuadrature: return "quadrature";
    case KernelBackend::kMonteCarlo: return "mc";
  }
  throw UsageError("invalid kernel backend value");
}

LiftedStateSpace::LiftedStateSpace(int num_joint_states) : nx_(num_joint_states) {
  if (nx_ <= 0) throw UsageError("lifted state space needs a positive joint state count");
}

int LiftedStateSpace::find(const FinitePmf& mu, double tol) const {
  if (mu.size() != nx_) throw UsageError("candidate state has the wrong dimension");
  for (int i = 0; i < size(); ++i) {
    if (linf_distance(states_[i], mu) <= tol) return i;
  }
  return -1;
}

int LiftedStateSpace::find_or_add(FinitePmf mu, double tol) {
  const int found = find(mu, tol);
  if (found >= 0) return found;
  states_.push_back(std::move(mu));
  return size() - 1;
}

double LiftedKernelRow::mass() const {
  double total = 0.0;
  for (const auto& e : entries) total += e.second;
  return total;
}

FinitePmf row_pmf(const LiftedKernelRow& row, int space_size) {
  std::vector<double> w(static_cast<std::size_t>(space_size), 0.0);
  for (const auto& [idx, p] : row.entries) {
    if (idx < 0 || idx >= space_size)
      throw UsageError("kernel row entry outside the state space");
    w[idx] += p;
  }
  return FinitePmf(std::move(w));
}

namespace {

int resolve_state(LiftedStateSpace& space, FinitePmf mu, const KernelOptions& opt) {
  const int found = space.find(mu, opt.match_tol);
  if (found >= 0) return found;
  if (!opt.extend_space)
    throw InvariantViolation("one-step successor leaves the enumerated state space");
  if (space.size() >= opt.space_cap)
    throw UsageError("lifted state space exceeds the configured cap");
  return space.find_or_add(std::move(mu), opt.match_tol);
}

void add_mass(std::vector<std::pair<int, double>>& entries, int idx, double p) {
  for (auto& e : entries) {
    if (e.first == idx) {
      e.second += p;
      return;
    }
  }
  entries.emplace_back(idx, p);
}

TeamStateActionLaw constant_action_law(const MftgSpec& spec, int team,
                                       const FinitePmf& mu, int action) {
  const int na = spec.action_sizes[team];
  if (action < 0 || action >= na) throw UsageError("action index out of range");
  KernelMatrix k(mu.size(), na);
  const FinitePmf row = FinitePmf::dirac(na, action);
  for (int x = 0; x < mu.size(); ++x) k.set_row(x, row);
  return TeamStateActionLaw::from_mix(mu, k);
}

}  // namespace

FinitePmf pushforward_once(const MftgSpec& spec, const JointLaw& xi,
                           const CommonNoise& common) {
  const int m = spec.num_teams;
  const int nx = spec.num_joint_states();
  if (xi.num_states() != nx) throw UsageError("joint law does not match the model");
  if (static_cast<int>(spec.idio_laws.size()) != m)
    throw UsageError("model must declare one idiosyncratic law per team");

  // system_fn is pure, so each (team, state, action, atom) combination is
  // evaluated once per noise draw and reused across the support sweep.
  std::vector<int> atom_counts(m);
  std::vector<std::vector<int>> memo(m);
  for (int i = 0; i < m; ++i) {
    atom_counts[i] = spec.idio_laws[i].weights.size();
    memo[i].assign(static_cast<std::size_t>(spec.state_sizes[i]) *
                       spec.action_sizes[i] * atom_counts[i],
                   -1);
  }
  auto next_state = [&](int i, int x, int a, int e) {
    int& slot = memo[i][(static_cast<std::size_t>(x) * spec.action_sizes[i] + a) *
                            atom_counts[i] +
                        e];
    if (slot < 0) {
      std::span<const double> team_payload;
      if (i < static_cast<int>(common.team.size())) team_payload = common.team[i];
      const int nxt = spec.system_fn(i, x, a, xi, spec.idio_laws[i].atoms[e],
                                     team_payload, common.global);
      if (nxt < 0 || nxt >= spec.state_sizes[i])
        throw InvariantViolation("system map left the declared state space");
      slot = nxt;
    }
    return slot;
  };

  std::vector<double> out(static_cast<std::size_t>(nx), 0.0);
  const int joint_actions = xi.num_joint_actions();
  std::vector<int> xs(m), as(m), es(m), ns(m);
  for (int x = 0; x < nx; ++x) {
    for (int i = 0; i < m; ++i) xs[i] = spec.team_state(x, i);
    for (int pa = 0; pa < joint_actions; ++pa) {
      const double w = xi.at_packed(x, pa);
      if (w <= 0.0) continue;
      int rem = pa;
      for (int i = m - 1; i >= 0; --i) {
        as[i] = rem % spec.action_sizes[i];
        rem /= spec.action_sizes[i];
      }
      std::fill(es.begin(), es.end(), 0);
      for (;;) {
        double we = w;
        for (int i = 0; i < m; ++i) we *= spec.idio_laws[i].weights[es[i]];
        if (we > 0.0) {
          for (int i = 0; i < m; ++i) ns[i] = next_state(i, xs[i], as[i], es[i]);
          out[pack_index(spec.state_sizes, ns)] += we;
        }
        int d = m - 1;
        while (d >= 0 && ++es[d] == atom_counts[d]) {
          es[d] = 0;
          --d;
        }
        if (d < 0) break;
      }
    }
  }
  return FinitePmf(std::move(out));
}

FinitePmf drift_atom_state(const MftgSpec& spec, int joint_action) {
  if (!spec.drift) throw UsageError("successor atoms are specific to the drift family");
  const DriftParams& dp = *spec.drift;
  const int nx = spec.num_joint_states();
  if (joint_action < 0 || joint_action >= nx)
    throw UsageError("joint action index out of range");
  if (dp.variant == DriftParams::Variant::kPlain)
    return FinitePmf::dirac(nx, joint_action);
  const std::vector<int> coords = unpack_index(spec.action_sizes, joint_action);
  std::vector<FinitePmf> factors;
  factors.reserve(dp.m);
  for (int i = 0; i < dp.m; ++i) {
    std::vector<double> w(static_cast<std::size_t>(dp.G), 0.0);
    for (int e = -1; e <= 1; ++e) {
      const int x = ((coords[i] + e) % dp.G + dp.G) % dp.G;
      w[x] += dp.idio_weights[e + 1];
    }
    factors.push_back(FinitePmf(std::move(w)));
  }
  return product(factors);
}

int drift_sample_joint_action_closed_form(
    const MftgSpec& spec, std::span<const TeamStateActionLaw> a_hats, double u0) {
  if (!spec.drift) throw UsageError("closed-form sampling is specific to the drift family");
  std::vector<FinitePmf> margs;
  margs.reserve(a_hats.size());
  for (const auto& ah : a_hats) margs.push_back(ah.action_marginal());
  return inverse_cdf_sample(product(margs), u0);
}

namespace {

LiftedKernelRow closed_form_row(const MftgSpec& spec, LiftedStateSpace& space,
                                std::span<const TeamStateActionLaw> a_hats,
                                const KernelOptions& opt) {
  if (!spec.drift) throw UsageError("closed_form backend needs the drift family");
  std::vector<FinitePmf> margs;
  margs.reserve(a_hats.size());
  for (const auto& ah : a_hats) margs.push_back(ah.action_marginal());
  const FinitePmf joint = product(margs);
  LiftedKernelRow row;
  for (int pa = 0; pa < joint.size(); ++pa) {
    const double p = joint[pa];
    if (p <= 0.0) continue;
    add_mass(row.entries, resolve_state(space, drift_atom_state(spec, pa), opt), p);
  }
  return row;
}

LiftedKernelRow quadrature_row(const MftgSpec& spec, LiftedStateSpace& space,
                               const FinitePmf& mu,
                               std::span<const TeamStateActionLaw> a_hats,
                               const KernelOptions& opt) {
  if (!spec.drift) throw UsageError("quadrature backend needs the drift family");
  const XiResult xi = reconstruct_xi(mu, a_hats);
  const FinitePmf w = xi.joint.joint_action_marginal();
  const FinitePmf mean = perturbed_mean_quadrature(w);
  LiftedKernelRow row;
  for (int pa = 0; pa < mean.size(); ++pa) {
    const double p = mean[pa];
    if (p <= 0.0) continue;
    add_mass(row.entries, resolve_state(space, drift_atom_state(spec, pa), opt), p);
  }
  return row;
}

LiftedKernelRow mc_row(const MftgSpec& spec, LiftedStateSpace& space,
                       const FinitePmf& mu,
                       std::span<const TeamStateActionLaw> a_hats,
                       const KernelOptions& opt) {
  if (opt.mc_samples < 1) throw UsageError("mc backend needs at least one sample");
  const XiResult xi = reconstruct_xi(mu, a_hats);

  // Fixed-size draw blocks keep the reduction order independent of the
  // thread count: block partials are merged sequentially by block index.
  constexpr int kBlock = 4096;
  const int n = opt.mc_samples;
  const int blocks = (n + kBlock - 1) / kBlock;
  std::vector<std::vector<std::pair<FinitePmf, long long>>> partial(blocks);
  const NoiseArchitecture arch(opt.seed);
  parallel_for(blocks, opt.threads, [&](int b) {
    auto& local = partial[b];
    const int lo = b * kBlock;
    const int hi = std::min(n, lo + kBlock);
    for (int d = lo; d < hi; ++d) {
      const CommonNoise noise =
          sample_common_noise(arch, spec, 0, static_cast<std::uint64_t>(d));
      FinitePmf nu = pushforward_once(spec, xi.joint, noise);
      bool found = false;
      for (auto& e : local) {
        if (linf_distance(e.first, nu) <= opt.match_tol) {
          ++e.second;
          found = true;
          break;
        }
      }
      if (!found) local.emplace_back(std::move(nu), 1);
    }
  });

  LiftedKernelRow row;
  const double inv = 1.0 / static_cast<double>(n);
  for (auto& local : partial) {
    for (auto& [pmf, count] : local) {
      add_mass(row.entries, resolve_state(space, std::move(pmf), opt),
               static_cast<double>(count) * inv);
    }
  }
  return row;
}

}  // namespace

LiftedKernelRow kernel_row(const MftgSpec& spec, LiftedStateSpace& space,
                           const FinitePmf& mu,
                           std::span<const TeamStateActionLaw> a_hats,
                           KernelBackend backend, const KernelOptions& options) {
  if (static_cast<int>(a_hats.size()) != spec.num_teams)
    throw UsageError("need one state-action law per team");
  if (mu.size() != spec.num_joint_states() ||
      space.num_joint_states() != mu.size())
    throw UsageError("state dimensions do not match the model");
  for (int i = 0; i < spec.num_teams; ++i) {
    if (a_hats[i].num_states() != mu.size() ||
        a_hats[i].num_actions() != spec.action_sizes[i])
      throw UsageError("state-action law has the wrong shape");
    if (admissibility_residual(a_hats[i], mu) > kAdmissibleTol)
      throw InvariantViolation("kernel row requires admissible state-action laws");
  }

  LiftedKernelRow row;
  switch (backend) {
    case KernelBackend::kClosedForm:
      row = closed_form_row(spec, space, a_hats, options);
      break;
    case KernelBackend::kQuadrature:
      row = quadrature_row(spec, space, mu, a_hats, options);
      break;
    case KernelBackend::kMonteCarlo:
      row = mc_row(spec, space, mu, a_hats, options);
      break;
  }
  std::sort(row.entries.begin(), row.entries.end());
  if (std::abs(row.mass() - 1.0) > 1e-9)
    throw InvariantViolation("kernel row mass deviates from one");
  return row;
}

LiftedKernelRow kernel_row(const MftgSpec& spec, const LiftedStateSpace& space,
                           const FinitePmf& mu,
                           std::span<const TeamStateActionLaw> a_hats,
                           KernelBackend backend, const KernelOptions& options) {
  KernelOptions fixed = options;
  fixed.extend_space = false;
  // With extension disabled the space is only searched, never mutated.
  return kernel_row(spec, const_cast<LiftedStateSpace&>(space), mu, a_hats,
                    backend, fixed);
}

double density_q(const MftgSpec& spec, const FinitePmf& mu_prime,
                 const FinitePmf& mu,
                 std::span<const TeamStateActionLaw> a_hats,
                 KernelBackend backend) {
  if (!spec.drift) throw UsageError("transition density is specific to the drift family");
  if (backend == KernelBackend::kMonteCarlo)
    throw UsageError("density backend must be closed_form or quadrature");
  const int nx = spec.num_joint_states();
  LiftedStateSpace atoms(nx);
  for (int pa = 0; pa < nx; ++pa) atoms.find_or_add(drift_atom_state(spec, pa));
  const int target = atoms.find(mu_prime);
  if (target < 0) return 0.0;
  KernelOptions opt;
  opt.extend_space = false;
  const LiftedKernelRow row = kernel_row(spec, atoms, mu, a_hats, backend, opt);
  double p = 0.0;
  for (const auto& [idx, mass] : row.entries) {
    if (idx == target) p += mass;
  }
  return static_cast<double>(nx) * p;
}

double lift_cost_with_xi(const MftgSpec& spec, int team,
                         const TeamStateActionLaw& a_hat, const JointLaw& xi) {
  double total = 0.0;
  for (int x = 0; x < a_hat.num_states(); ++x) {
    const int own = spec.team_state(x, team);
    for (int a = 0; a < a_hat.num_actions(); ++a) {
      const double w = a_hat.at(x, a);
      if (w > 0.0) total += w * spec.cost_fn(team, own, a, xi);
    }
  }
  return total;
}

double lift_cost(const MftgSpec& spec, int team, const FinitePmf& mu,
                 std::span<const TeamStateActionLaw> a_hats) {
  if (team < 0 || team >= spec.num_teams) throw UsageError("team index out of range");
  if (static_cast<int>(a_hats.size()) != spec.num_teams)
    throw UsageError("need one state-action law per team");
  const XiResult xi = reconstruct_xi(mu, a_hats);
  return lift_cost_with_xi(spec, team, a_hats[team], xi.joint);
}

LiftedStateSpace enumerate_states(const MftgSpec& spec, const FinitePmf& mu0,
                                  KernelBackend backend,
                                  const KernelOptions& options) {
  const int nx = spec.num_joint_states();
  if (mu0.size() != nx) throw UsageError("initial state has the wrong dimension");
  LiftedStateSpace space(nx);
  KernelOptions opt = options;
  opt.extend_space = true;
  space.find_or_add(mu0, opt.match_tol);
  const int m = spec.num_teams;
  std::vector<int> profile(m, 0);
  // space.size() grows while we scan: breadth-first closure.
  for (int s = 0; s < space.size(); ++s) {
    const FinitePmf mu = space.state(s);  // copy, the backing vector may grow
    std::fill(profile.begin(), profile.end(), 0);
    for (;;) {
      std::vector<TeamStateActionLaw> a_hats;
      a_hats.reserve(m);
      for (int i = 0; i < m; ++i)
        a_hats.push_back(constant_action_law(spec, i, mu, profile[i]));
      kernel_row(spec, space, mu, a_hats, backend, opt);
      int d = m - 1;
      while (d >= 0 && ++profile[d] == spec.action_sizes[d]) {
        profile[d] = 0;
        --d;
      }
      if (d < 0) break;
    }
  }
  return space;
}

void Level1Profile::validate(const MftgSpec& spec,
                             const LiftedStateSpace& space) const {
  if (num_teams() != spec.num_teams)
    throw UsageError("profile must cover every team");
  for (int i = 0; i < num_teams(); ++i) {
    const Level1TeamPolicy& tp = teams[i];
    const int slots = tp.num_slots();
    if (slots < 1) throw UsageError("policy needs at least one slot");
    if (static_cast<int>(tp.actions.size()) != space.size())
      throw UsageError("policy must cover every enumerated state");
    for (int s = 0; s < space.size(); ++s) {
      if (static_cast<int>(tp.actions[s].size()) != slots)
        throw UsageError("policy slot count differs across states");
      for (int r = 0; r < slots; ++r) {
        const TeamStateActionLaw& law = tp.actions[s][r];
        if (law.num_states() != space.num_joint_states() ||
            law.num_actions() != spec.action_sizes[i])
          throw UsageError("state-action law has the wrong shape");
        if (admissibility_residual(law, space.state(s)) > kAdmissibleTol)
          throw InvariantViolation("policy slot is not admissible at its state");
      }
    }
    if (!tp.vertex.empty() && static_cast<int>(tp.vertex.size()) != space.size())
      throw UsageError("vertex table must cover every state");
  }
}

Level1Profile constant_action_profile(const MftgSpec& spec,
                                      const LiftedStateSpace& space,
                                      std::span<const int> actions) {
  if (static_cast<int>(actions.size()) != spec.num_teams)
    throw UsageError("need one action per team");
  Level1Profile prof;
  prof.teams.resize(spec.num_teams);
  for (int i = 0; i < spec.num_teams; ++i) {
    Level1TeamPolicy& tp = prof.teams[i];
    tp.slot_weights = FinitePmf::dirac(1, 0);
    tp.actions.reserve(space.size());
    tp.vertex.reserve(space.size());
    for (int s = 0; s < space.size(); ++s) {
      tp.actions.push_back({constant_action_law(spec, i, space.state(s), actions[i])});
      tp.vertex.push_back({actions[i]});
    }
  }
  return prof;
}

Level1Profile uniform_profile(const MftgSpec& spec,
                              const LiftedStateSpace& space) {
  Level1Profile prof;
  prof.teams.resize(spec.num_teams);
  for (int i = 0; i < spec.num_teams; ++i) {
    const int na = spec.action_sizes[i];
    Level1TeamPolicy& tp = prof.teams[i];
    tp.slot_weights = FinitePmf::dirac(1, 0);
    KernelMatrix k(space.num_joint_states(), na);
    const FinitePmf row = FinitePmf::uniform(na);
    for (int x = 0; x < space.num_joint_states(); ++x) k.set_row(x, row);
    for (int s = 0; s < space.size(); ++s) {
      tp.actions.push_back({TeamStateActionLaw::from_mix(space.state(s), k)});
      tp.vertex.push_back({-1});
    }
  }
  return prof;
}

namespace {

struct SlotCombos {
  std::vector<std::vector<int>> slots;  // per combo, slot index per team
  std::vector<double> weights;
};

// Product mixture over each listed team's slots; omitted teams keep slot 0.
SlotCombos slot_combos(const Level1Profile& profile,
                       const std::vector<int>& teams_included) {
  const int m = profile.num_teams();
  SlotCombos out;
  std::vector<int> idx(teams_included.size(), 0);
  for (;;) {
    std::vector<int> combo(m, 0);
    double w = 1.0;
    for (std::size_t j = 0; j < teams_included.size(); ++j) {
      const int team = teams_included[j];
      combo[team] = idx[j];
      w *= profile.teams[team].slot_weights[idx[j]];
    }
    if (w > 0.0) {
      out.slots.push_back(std::move(combo));
      out.weights.push_back(w);
    }
    int d = static_cast<int>(teams_included.size()) - 1;
    while (d >= 0 &&
           ++idx[d] == profile.teams[teams_included[d]].num_slots()) {
      idx[d] = 0;
      --d;
    }
    if (d < 0) break;
  }
  return out;
}

void check_discount(double gamma) {
  if (!(gamma > 0.0 && gamma < 1.0))
    throw UsageError("discount factor must lie strictly inside (0,1)");
}

// Sup-norm update threshold certifying a final error of at most eps.
double stop_threshold(double eps, double gamma) {
  return eps * (1.0 - gamma) / (2.0 * gamma);
}

void check_contraction(double delta, double prev_delta, double gamma) {
  if (prev_delta >= 0.0 && delta > gamma * prev_delta + 1e-9)
    throw InvariantViolation("value iteration broke the discount contraction bound");
}

}  // namespace

DpResult policy_value_dp(const MftgSpec& spec, const LiftedStateSpace& space,
                         const Level1Profile& profile, KernelBackend backend,
                         const KernelOptions& kernel_options,
                         const DpOptions& dp_options) {
  profile.validate(spec, space);
  check_discount(spec.gamma);
  const int m = spec.num_teams;
  const int S = space.size();

  std::vector<int> all_teams(m);
  for (int i = 0; i < m; ++i) all_teams[i] = i;
  const SlotCombos combos = slot_combos(profile, all_teams);
  const int C = static_cast<int>(combos.slots.size());

  std::vector<std::vector<LiftedKernelRow>> rows(
      S, std::vector<LiftedKernelRow>(C));
  std::vector<std::vector<double>> cost(
      S, std::vector<double>(static_cast<std::size_t>(C) * m, 0.0));
  KernelOptions row_opt = kernel_options;
  row_opt.threads = 1;
  parallel_for(S, kernel_options.threads, [&](int s) {
    const FinitePmf& mu = space.state(s);
    for (int c = 0; c < C; ++c) {
      std::vector<TeamStateActionLaw> a_hats;
      a_hats.reserve(m);
      for (int i = 0; i < m; ++i)
        a_hats.push_back(profile.teams[i].actions[s][combos.slots[c][i]]);
      const XiResult xi = reconstruct_xi(mu, a_hats);
      for (int i = 0; i < m; ++i)
        cost[s][static_cast<std::size_t>(c) * m + i] =
            lift_cost_with_xi(spec, i, a_hats[i], xi.joint);
      rows[s][c] = kernel_row(spec, space, mu, a_hats, backend, row_opt);
    }
  });

  std::vector<std::vector<double>> v(m, std::vector<double>(S, 0.0));
  std::vector<std::vector<double>> vn = v;
  const double gamma = spec.gamma;
  const double stop = stop_threshold(dp_options.eps, gamma);
  double prev_delta = -1.0;
  int it = 0;
  for (;;) {
    if (it >= dp_options.max_iterations)
      throw InvariantViolation("value iteration failed to reach its tolerance");
    ++it;
    double delta = 0.0;
    for (int s = 0; s < S; ++s) {
      for (int i = 0; i < m; ++i) {
        double acc = 0.0;
        for (int c = 0; c < C; ++c) {
          double cont = 0.0;
          for (const auto& [t, p] : rows[s][c].entries) cont += p * v[i][t];
          acc += combos.weights[c] *
                 (cost[s][static_cast<std::size_t>(c) * m + i] + gamma * cont);
        }
        vn[i][s] = acc;
        delta = std::max(delta, std::abs(acc - v[i][s]));
      }
    }
    v.swap(vn);
    check_contraction(delta, prev_delta, gamma);
    prev_delta = delta;
    if (delta <= stop) break;
  }
  return DpResult{std::move(v), it, prev_delta};
}

namespace {

// Own-action pmfs with denominator r covering the simplex, corners included.
std::vector<FinitePmf> simplex_points(int na, int r) {
  std::vector<FinitePmf> points;
  std::vector<int> c(na, 0);
  c[0] = r;
  for (;;) {
    std::vector<double> p(na);
    for (int a = 0; a < na; ++a) p[a] = static_cast<double>(c[a]) / r;
    points.push_back(FinitePmf(std::move(p)));
    // next composition in colexicographic order
    int d = 0;
    while (d < na - 1 && c[d] == 0) ++d;
    if (d == na - 1) break;
    const int moved = c[d];
    c[d] = 0;
    c[0] = moved - 1;
    ++c[d + 1];
  }
  return points;
}

}  // namespace

BrResult best_response(const MftgSpec& spec, const LiftedStateSpace& space,
                       const Level1Profile& profile, int player,
                       KernelBackend backend,
                       const KernelOptions& kernel_options,
                       const BrOptions& br_options) {
  profile.validate(spec, space);
  check_discount(spec.gamma);
  if (player < 0 || player >= spec.num_teams)
    throw UsageError("player index out of range");
  const int m = spec.num_teams;
  const int S = space.size();
  const int na = spec.action_sizes[player];
  const int nx = spec.num_joint_states();

  std::vector<int> opponents;
  for (int i = 0; i < m; ++i)
    if (i != player) opponents.push_back(i);
  const SlotCombos combos = slot_combos(profile, opponents);
  const int C = static_cast<int>(combos.slots.size());

  // Action grid: constant pure actions, or per-own-state simplex mixtures.
  std::vector<KernelMatrix> grid;
  std::vector<int> grid_vertex;
  if (br_options.simplex_resolution <= 0) {
    for (int a = 0; a < na; ++a) {
      KernelMatrix k(nx, na);
      const FinitePmf row = FinitePmf::dirac(na, a);
      for (int x = 0; x < nx; ++x) k.set_row(x, row);
      grid.push_back(std::move(k));
      grid_vertex.push_back(a);
    }
  } else {
    const auto points = simplex_points(na, br_options.simplex_resolution);
    const int n_own = spec.state_sizes[player];
    double total = 1.0;
    for (int x = 0; x < n_own; ++x) total *= static_cast<double>(points.size());
    if (total > 2.0e5)
      throw UsageError("simplex action grid too large; lower the resolution");
    std::vector<int> assign(n_own, 0);
    for (;;) {
      KernelMatrix k(nx, na);
      for (int x = 0; x < nx; ++x)
        k.set_row(x, points[assign[spec.team_state(x, player)]]);
      // a grid point is a vertex when every own state plays the same corner
      int corner = -1;
      bool pure = true;
      for (int x = 0; x < n_own && pure; ++x) {
        const int at = points[assign[x]].dirac_atom();
        if (at < 0 || (corner >= 0 && at != corner)) pure = false;
        if (corner < 0) corner = at;
      }
      grid.push_back(std::move(k));
      grid_vertex.push_back(pure ? corner : -1);
      int d = n_own - 1;
      while (d >= 0 && ++assign[d] == static_cast<int>(points.size())) {
        assign[d] = 0;
        --d;
      }
      if (d < 0) break;
    }
  }
  const int G = static_cast<int>(grid.size());

  std::vector<LiftedKernelRow> rows(static_cast<std::size_t>(S) * G * C);
  std::vector<double> cost(static_cast<std::size_t>(S) * G * C, 0.0);
  KernelOptions row_opt = kernel_options;
  row_opt.threads = 1;
  parallel_for(S * G, kernel_options.threads, [&](int sg) {
    const int s = sg / G;
    const int g = sg % G;
    const FinitePmf& mu = space.state(s);
    const TeamStateActionLaw own = TeamStateActionLaw::from_mix(mu, grid[g]);
    for (int c = 0; c < C; ++c) {
      std::vector<TeamStateActionLaw> a_hats;
      a_hats.reserve(m);
      for (int i = 0; i < m; ++i) {
        if (i == player)
          a_hats.push_back(own);
        else
          a_hats.push_back(profile.teams[i].actions[s][combos.slots[c][i]]);
      }
      const XiResult xi = reconstruct_xi(mu, a_hats);
      const std::size_t at = (static_cast<std::size_t>(s) * G + g) * C + c;
      cost[at] = lift_cost_with_xi(spec, player, a_hats[player], xi.joint);
      rows[at] = kernel_row(spec, space, mu, a_hats, backend, row_opt);
    }
  });

  std::vector<double> v(S, 0.0), vn(S, 0.0);
  std::vector<int> chosen(S, 0);
  const double gamma = spec.gamma;
  const double stop = stop_threshold(br_options.eps, gamma);
  double prev_delta = -1.0;
  int it = 0;
  for (;;) {
    if (it >= br_options.max_iterations)
      throw InvariantViolation("value iteration failed to reach its tolerance");
    ++it;
    double delta = 0.0;
    for (int s = 0; s < S; ++s) {
      double best = 0.0;
      int best_g = -1;
      for (int g = 0; g < G; ++g) {
        double q = 0.0;
        for (int c = 0; c < C; ++c) {
          const std::size_t at = (static_cast<std::size_t>(s) * G + g) * C + c;
          double cont = 0.0;
          for (const auto& [t, p] : rows[at].entries) cont += p * v[t];
          q += combos.weights[c] * (cost[at] + gamma * cont);
        }
        if (best_g < 0 || q < best) {
          best = q;
          best_g = g;
        }
      }
      vn[s] = best;
      chosen[s] = best_g;
      delta = std::max(delta, std::abs(best - v[s]));
    }
    v.swap(vn);
    check_contraction(delta, prev_delta, gamma);
    prev_delta = delta;
    if (delta <= stop) break;
  }

  BrResult out;
  out.values = std::move(v);
  out.chosen = chosen;
  out.iterations = it;
  Level1TeamPolicy tp;
  tp.slot_weights = FinitePmf::dirac(1, 0);
  tp.actions.reserve(S);
  tp.vertex.reserve(S);
  for (int s = 0; s < S; ++s) {
    tp.actions.push_back(
        {TeamStateActionLaw::from_mix(space.state(s), grid[chosen[s]])});
    tp.vertex.push_back({grid_vertex[chosen[s]]});
  }
  out.policy = std::move(tp);
  return out;
}

}  // namespace mftg
