#include "mftg/bridge.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "mftg/errors.hpp"
#include "mftg/json_io.hpp"
#include "mftg/reconstruction.hpp"

namespace mftg {

Level1Profile lift_policy(const MftgSpec& spec, const LiftedStateSpace& space,
                          const Level0Policy& level0) {
  level0.validate(spec);
  Level1Profile profile;
  profile.teams.resize(spec.num_teams);
  for (int i = 0; i < spec.num_teams; ++i) {
    Level1TeamPolicy& tp = profile.teams[i];
    tp.slot_weights = level0.teams[i].slot_weights;
    const int slots = tp.slot_weights.size();
    tp.actions.reserve(space.size());
    for (int s = 0; s < space.size(); ++s) {
      const FinitePmf& mu = space.state(s);
      std::vector<TeamStateActionLaw> per_slot;
      per_slot.reserve(slots);
      for (int r = 0; r < slots; ++r) {
        KernelMatrix k(mu.size(), spec.action_sizes[i]);
        for (int x = 0; x < mu.size(); ++x)
          k.set_row(x, level0.action_pmf(i, spec.team_state(x, i), mu, r));
        TeamStateActionLaw law = TeamStateActionLaw::from_mix(mu, k);
        if (admissibility_residual(law, mu) > 1e-12)
          throw InvariantViolation(
              "lifted policy component is not admissible at its state");
        per_slot.push_back(std::move(law));
      }
      tp.actions.push_back(std::move(per_slot));
    }
  }
  profile.validate(spec, space);
  return profile;
}

Level0Policy lower_policy(const MftgSpec& spec, const LiftedStateSpace& space,
                          const Level1Profile& level1) {
  level1.validate(spec, space);
  Level0Policy out;
  out.teams.resize(spec.num_teams);
  for (int i = 0; i < spec.num_teams; ++i) {
    Level0Policy::Team& tp = out.teams[i];
    const Level1TeamPolicy& src = level1.teams[i];
    tp.slot_weights = src.slot_weights;
    const int slots = src.num_slots();
    const int na = spec.action_sizes[i];
    const int nv = spec.state_sizes[i];
    tp.keys.reserve(space.size());
    tp.tables.reserve(space.size());
    for (int s = 0; s < space.size(); ++s) {
      tp.keys.push_back(space.state(s));
      std::vector<std::vector<FinitePmf>> table(slots);
      for (int r = 0; r < slots; ++r) {
        const TeamStateActionLaw& law = src.actions[s][r];
        std::vector<std::vector<double>> own(
            nv, std::vector<double>(static_cast<std::size_t>(na), 0.0));
        for (int x = 0; x < law.num_states(); ++x) {
          const int v = spec.team_state(x, i);
          for (int a = 0; a < na; ++a) own[v][a] += law.at(x, a);
        }
        table[r].reserve(nv);
        for (int v = 0; v < nv; ++v) {
          double mass = 0.0;
          for (double w : own[v]) mass += w;
          if (mass <= 0.0) {
            table[r].push_back(FinitePmf::uniform(na));
          } else {
            for (double& w : own[v]) w /= mass;
            table[r].push_back(FinitePmf::normalized(std::move(own[v])));
          }
        }
      }
      tp.tables.push_back(std::move(table));
    }
  }
  return out;
}

CorrespondenceReport equivalence_check(const MftgSpec& spec,
                                       const Level0Policy& level0,
                                       const LiftedStateSpace& space,
                                       const FinitePmf& mu0,
                                       const EquivalenceOptions& options) {
  const int s0 = space.find(mu0, options.kernel.match_tol);
  if (s0 < 0)
    throw UsageError("initial state is not in the enumerated space");

  const Level1Profile profile = lift_policy(spec, space, level0);

  CorrespondenceReport rep;
  rep.dp_eps = options.dp.eps;
  rep.lift_residuals.resize(spec.num_teams);
  for (int i = 0; i < spec.num_teams; ++i) {
    const Level1TeamPolicy& tp = profile.teams[i];
    rep.lift_residuals[i].resize(tp.num_slots());
    for (int r = 0; r < tp.num_slots(); ++r) {
      rep.lift_residuals[i][r].reserve(space.size());
      for (int s = 0; s < space.size(); ++s) {
        const double res =
            admissibility_residual(tp.actions[s][r], space.state(s));
        rep.lift_residuals[i][r].push_back(res);
        rep.max_lift_residual = std::max(rep.max_lift_residual, res);
      }
    }
  }
  rep.lift_ok = rep.max_lift_residual <= kAdmissibleTol;

  const DpResult dp = policy_value_dp(spec, space, profile, options.backend,
                                      options.kernel, options.dp);
  rep.dp_values.reserve(spec.num_teams);
  for (int i = 0; i < spec.num_teams; ++i)
    rep.dp_values.push_back(dp.values[i][s0]);

  SimOptions sim;
  sim.horizon = horizon_for_tolerance(spec, options.horizon_tol);
  sim.replications = options.replications;
  sim.master_seed = options.master_seed;
  sim.threads = options.threads;
  sim.backend = options.backend;
  const MeanFieldResult mf = simulate_meanfield_level0(spec, level0, mu0, sim);

  rep.sim_means = mf.value.means;
  rep.sim_ses = mf.value.ses;
  rep.truncation_bound = mf.value.truncation_bound;
  rep.horizon = sim.horizon;
  rep.replications = sim.replications;
  rep.xi_consistency_residual = mf.xi_consistency_residual;
  rep.xi_ok = rep.xi_consistency_residual <= 1e-12;

  rep.values_match = true;
  for (int i = 0; i < spec.num_teams; ++i) {
    const double gap = std::abs(rep.dp_values[i] - rep.sim_means[i]);
    const double bound =
        3.0 * rep.sim_ses[i] + rep.truncation_bound + 2.0 * rep.dp_eps;
    rep.gaps.push_back(gap);
    rep.bounds.push_back(bound);
    if (gap > bound) rep.values_match = false;
  }
  rep.pass = rep.values_match && rep.xi_ok && rep.lift_ok;
  return rep;
}

namespace {

nlohmann::ordered_json pmf_array(const FinitePmf& pmf) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (int k = 0; k < pmf.size(); ++k) arr.push_back(pmf[k]);
  return arr;
}

FinitePmf pmf_from(const nlohmann::json& arr, int expect_size,
                   const char* what) {
  if (!arr.is_array())
    throw UsageError(std::string(what) + " must be an array");
  std::vector<double> w;
  w.reserve(arr.size());
  for (const auto& v : arr) {
    if (!v.is_number())
      throw UsageError(std::string(what) + " entries must be numbers");
    w.push_back(v.get<double>());
  }
  if (expect_size >= 0 && static_cast<int>(w.size()) != expect_size)
    throw UsageError(std::string(what) + " has the wrong length");
  return FinitePmf(std::move(w));
}

nlohmann::ordered_json table_json(
    const std::vector<std::vector<FinitePmf>>& table) {
  nlohmann::ordered_json slots = nlohmann::ordered_json::array();
  for (const auto& per_state : table) {
    nlohmann::ordered_json states = nlohmann::ordered_json::array();
    for (const auto& pmf : per_state) states.push_back(pmf_array(pmf));
    slots.push_back(std::move(states));
  }
  return slots;
}

std::vector<std::vector<FinitePmf>> table_from(const nlohmann::json& j,
                                               int slots, int num_states,
                                               int num_actions) {
  if (!j.is_array() || static_cast<int>(j.size()) != slots)
    throw UsageError("policy table must have one entry per slot");
  std::vector<std::vector<FinitePmf>> table;
  table.reserve(j.size());
  for (const auto& per_state : j) {
    if (!per_state.is_array() ||
        static_cast<int>(per_state.size()) != num_states)
      throw UsageError("policy table must cover every own state");
    std::vector<FinitePmf> row;
    row.reserve(per_state.size());
    for (const auto& pmf : per_state)
      row.push_back(pmf_from(pmf, num_actions, "action pmf"));
    table.push_back(std::move(row));
  }
  return table;
}

nlohmann::json parse_text(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded()) throw UsageError("malformed JSON input");
  return j;
}

}  // namespace

std::string level0_policy_to_json(const Level0Policy& policy) {
  nlohmann::ordered_json j;
  j["schema_version"] = 1;
  j["kind"] = "level0_policy";
  j["key_tol"] = policy.key_tol;
  nlohmann::ordered_json teams = nlohmann::ordered_json::array();
  for (const auto& tp : policy.teams) {
    nlohmann::ordered_json t;
    t["slot_weights"] = pmf_array(tp.slot_weights);
    if (!tp.base.empty()) t["base"] = table_json(tp.base);
    if (!tp.keys.empty()) {
      nlohmann::ordered_json keys = nlohmann::ordered_json::array();
      for (const auto& key : tp.keys) keys.push_back(pmf_array(key));
      t["keys"] = std::move(keys);
      nlohmann::ordered_json tables = nlohmann::ordered_json::array();
      for (const auto& table : tp.tables) tables.push_back(table_json(table));
      t["tables"] = std::move(tables);
    }
    teams.push_back(std::move(t));
  }
  j["teams"] = std::move(teams);
  return dump_json17(j);
}

Level0Policy level0_policy_from_json(const std::string& text,
                                     const MftgSpec& spec) {
  const nlohmann::json j = parse_text(text);
  if (!j.is_object() || j.value("kind", "") != "level0_policy")
    throw UsageError("expected a level0_policy document");
  Level0Policy policy;
  policy.key_tol = j.value("key_tol", 1e-12);
  if (!j.contains("teams") || !j["teams"].is_array() ||
      static_cast<int>(j["teams"].size()) != spec.num_teams)
    throw UsageError("policy must cover every team");
  policy.teams.resize(spec.num_teams);
  for (int i = 0; i < spec.num_teams; ++i) {
    const nlohmann::json& t = j["teams"][i];
    Level0Policy::Team& tp = policy.teams[i];
    if (!t.contains("slot_weights"))
      throw UsageError("policy team needs slot_weights");
    tp.slot_weights = pmf_from(t["slot_weights"], -1, "slot_weights");
    const int slots = tp.slot_weights.size();
    if (t.contains("base"))
      tp.base = table_from(t["base"], slots, spec.state_sizes[i],
                           spec.action_sizes[i]);
    if (t.contains("keys") != t.contains("tables"))
      throw UsageError("policy keys and tables must pair up");
    if (t.contains("keys")) {
      for (const auto& key : t["keys"])
        tp.keys.push_back(pmf_from(key, spec.num_joint_states(), "policy key"));
      for (const auto& table : t["tables"])
        tp.tables.push_back(table_from(table, slots, spec.state_sizes[i],
                                       spec.action_sizes[i]));
    }
  }
  policy.validate(spec);
  return policy;
}

std::string level1_profile_to_json(const Level1Profile& profile) {
  nlohmann::ordered_json j;
  j["schema_version"] = 1;
  j["kind"] = "level1_profile";
  nlohmann::ordered_json teams = nlohmann::ordered_json::array();
  for (const auto& tp : profile.teams) {
    nlohmann::ordered_json t;
    t["slot_weights"] = pmf_array(tp.slot_weights);
    // outer array over lifted states, inner over slots
    nlohmann::ordered_json states = nlohmann::ordered_json::array();
    for (const auto& per_slot : tp.actions) {
      nlohmann::ordered_json slots = nlohmann::ordered_json::array();
      for (const auto& law : per_slot) {
        nlohmann::ordered_json entry;
        entry["num_states"] = law.num_states();
        entry["num_actions"] = law.num_actions();
        entry["weights"] = pmf_array(law.as_pmf());
        slots.push_back(std::move(entry));
      }
      states.push_back(std::move(slots));
    }
    t["actions"] = std::move(states);
    teams.push_back(std::move(t));
  }
  j["teams"] = std::move(teams);
  return dump_json17(j);
}

Level1Profile level1_profile_from_json(const std::string& text,
                                       const MftgSpec& spec,
                                       const LiftedStateSpace& space) {
  const nlohmann::json j = parse_text(text);
  if (!j.is_object() || j.value("kind", "") != "level1_profile")
    throw UsageError("expected a level1_profile document");
  if (!j.contains("teams") || !j["teams"].is_array() ||
      static_cast<int>(j["teams"].size()) != spec.num_teams)
    throw UsageError("profile must cover every team");
  Level1Profile profile;
  profile.teams.resize(spec.num_teams);
  for (int i = 0; i < spec.num_teams; ++i) {
    const nlohmann::json& t = j["teams"][i];
    Level1TeamPolicy& tp = profile.teams[i];
    if (!t.contains("slot_weights") || !t.contains("actions"))
      throw UsageError("profile team needs slot_weights and actions");
    tp.slot_weights = pmf_from(t["slot_weights"], -1, "slot_weights");
    const int slots = tp.slot_weights.size();
    if (!t["actions"].is_array() ||
        static_cast<int>(t["actions"].size()) != space.size())
      throw UsageError("profile actions must cover every lifted state");
    for (const auto& per_slot : t["actions"]) {
      if (!per_slot.is_array() || static_cast<int>(per_slot.size()) != slots)
        throw UsageError("profile actions must have one law per slot");
      std::vector<TeamStateActionLaw> laws;
      laws.reserve(per_slot.size());
      for (const auto& entry : per_slot) {
        if (!entry.is_object() || !entry.contains("weights"))
          throw UsageError("profile action entry needs weights");
        const int nx = entry.value("num_states", space.num_joint_states());
        const int na = entry.value("num_actions", spec.action_sizes[i]);
        FinitePmf flat = pmf_from(entry["weights"], nx * na, "action law");
        std::vector<double> w(flat.weights().begin(), flat.weights().end());
        laws.emplace_back(nx, na, std::move(w));
      }
      tp.actions.push_back(std::move(laws));
    }
  }
  profile.validate(spec, space);
  return profile;
}

std::string correspondence_report_json(const CorrespondenceReport& report) {
  nlohmann::ordered_json j;
  j["schema_version"] = 1;
  j["kind"] = "correspondence_report";
  j["pass"] = report.pass;
  j["values_match"] = report.values_match;
  j["lift_ok"] = report.lift_ok;
  j["xi_ok"] = report.xi_ok;
  j["dp_values"] = report.dp_values;
  j["sim_means"] = report.sim_means;
  j["sim_ses"] = report.sim_ses;
  j["gaps"] = report.gaps;
  j["bounds"] = report.bounds;
  j["truncation_bound"] = report.truncation_bound;
  j["dp_eps"] = report.dp_eps;
  j["horizon"] = report.horizon;
  j["replications"] = report.replications;
  j["xi_consistency_residual"] = report.xi_consistency_residual;
  j["max_lift_residual"] = report.max_lift_residual;
  j["lift_residuals"] = report.lift_residuals;
  return dump_json17(j);
}

}  // namespace mftg
