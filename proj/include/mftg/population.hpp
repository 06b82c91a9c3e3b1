#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "mftg/lifted.hpp"
#include "mftg/model.hpp"
#include "mftg/pmf.hpp"

namespace mftg {

// Stationary agent-level strategy: own state, population state, and a team
// randomization slot select an action pmf. Slot weights are the law of the
// per-stage team randomization draw.
struct Level0Policy {
  struct Team {
    FinitePmf slot_weights;
    // base[slot][own state]: used at any population state without a
    // dedicated table; may be empty when every relevant state has one.
    std::vector<std::vector<FinitePmf>> base;
    // Per-state tables: tables[k][slot][own state] applies when the queried
    // population state matches keys[k] in sup norm.
    std::vector<FinitePmf> keys;
    std::vector<std::vector<std::vector<FinitePmf>>> tables;
  };

  std::vector<Team> teams;
  double key_tol = 1e-12;

  int num_teams() const { return static_cast<int>(teams.size()); }
  int num_slots(int team) const { return teams.at(team).slot_weights.size(); }

  // Dedicated table if the state matches a key, else the base table; throws
  // when neither is available.
  const FinitePmf& action_pmf(int team, int own_state, const FinitePmf& mu,
                              int slot) const;

  void validate(const MftgSpec& spec) const;
};

// Slot-uniform policy with Dirichlet(1)-random action rows per (slot, state).
Level0Policy random_level0_policy(const MftgSpec& spec, int slots,
                                  std::uint64_t seed);
// Every slot and state plays the uniform action pmf.
Level0Policy uniform_level0_policy(const MftgSpec& spec);
// Single slot, every state plays the given fixed action per team.
Level0Policy constant_level0_policy(const MftgSpec& spec,
                                    std::span<const int> actions);

// What the policy sees as its population-state argument in the N-agent
// simulator: the empirical measure, or the exactly tracked reference field.
enum class PolicyInput { kEmpirical, kTracked };

struct SimOptions {
  int horizon = 1;
  int replications = 1;
  std::uint64_t master_seed = 1;
  int threads = 1;
  PolicyInput policy_input = PolicyInput::kEmpirical;
  // Mechanism driving level-0 transitions (and the tracked field): quadrature
  // and mc run the true push-forward; closed_form substitutes the
  // product-of-marginals draw of the drift family.
  KernelBackend backend = KernelBackend::kQuadrature;
  // Trajectory rows are recorded for replications below this index.
  int trajectory_replications = 0;
};

struct TrajectoryRow {
  int replication;
  int time;
  int team;
  int agent;
  int state;
  int action;
};

struct ValueEstimate {
  std::vector<double> means;  // per team
  std::vector<double> ses;    // sample std / sqrt(replications)
  int replications = 0;
  int horizon = 0;
  double truncation_bound = 0.0;  // C_f gamma^T / (1-gamma)
};

struct PopulationResult {
  ValueEstimate value;
  std::vector<TrajectoryRow> trajectories;
};

struct MeanFieldResult {
  ValueEstimate value;
  std::vector<TrajectoryRow> trajectories;  // representative agents
  // Largest entrywise gap, over the sampled check times, between the tracked
  // joint state-action law and the reconstruction of its marginals.
  double xi_consistency_residual = 0.0;
};

// Cross-team product of per-team empirical state-action measures.
JointLaw empirical_joint(const MftgSpec& spec,
                         const std::vector<std::vector<int>>& states,
                         const std::vector<std::vector<int>>& actions);

// Horizon whose truncation bias is at most tol (see certified_horizon).
int horizon_for_tolerance(const MftgSpec& spec, double tol);

PopulationResult simulate_population(const MftgSpec& spec,
                                     const Level0Policy& policy,
                                     const std::vector<int>& agents_per_team,
                                     const FinitePmf& mu0,
                                     const SimOptions& options);

MeanFieldResult simulate_meanfield_level0(const MftgSpec& spec,
                                          const Level0Policy& policy,
                                          const FinitePmf& mu0,
                                          const SimOptions& options);

struct ChaosSweepResult {
  std::vector<int> agent_counts;         // uniform across teams, per entry
  std::vector<double> j_mf;              // per team
  std::vector<double> mf_se;             // zero when an exact reference is given
  std::vector<std::vector<double>> j_n;  // [count index][team]
  std::vector<std::vector<double>> se;   // [count index][team]

  double total_gap(int idx) const;
  // Conservative: per-team standard errors added linearly.
  double total_gap_se(int idx) const;
  // One-sided z score for gap(first) > gap(last).
  double shrink_z_score() const;
};

// Finite-population values against the mean-field value for each agent count.
// j_mf_override supplies an exact reference (e.g. from policy_value_dp);
// otherwise the mean field is estimated by simulate_meanfield_level0.
ChaosSweepResult propagation_of_chaos_sweep(
    const MftgSpec& spec, const Level0Policy& policy,
    const std::vector<int>& agent_counts, const FinitePmf& mu0,
    const SimOptions& options,
    const std::optional<std::vector<double>>& j_mf_override = std::nullopt);

}  // namespace mftg
