#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mftg/pmf.hpp"
#include "mftg/reconstruction.hpp"
#include "mftg/rng.hpp"

namespace mftg {

// Row-major packing of integer tuples; first coordinate most significant, so
// packed order equals lexicographic tuple order.
int pack_index(std::span<const int> sizes, std::span<const int> coords);
std::vector<int> unpack_index(std::span<const int> sizes, int packed);
int coordinate_of(std::span<const int> sizes, int packed, int coord);

// Finitely supported noise: weight k carries payload atoms[k]. A single atom
// with an empty payload means "no noise of this kind".
struct FiniteNoiseLaw {
  FinitePmf weights;
  std::vector<std::vector<double>> atoms;

  static FiniteNoiseLaw none();
  bool trivial() const { return atoms.size() == 1 && atoms[0].empty(); }
  // inverse-CDF draw; returns the atom index
  int sample(Stream& stream) const { return inverse_cdf_sample(weights, stream.next_uniform()); }
};

// One step's shared randomness: the global component and one component per
// team, both as flat double payloads in a fixed documented order.
struct CommonNoise {
  std::vector<double> global;
  std::vector<std::vector<double>> team;
};

// Variants of the grid-walk example: the plain system function, and the
// periodic one with an extra per-agent shift modulo G.
struct DriftParams {
  int G = 0;
  int m = 0;
  std::vector<int> targets;                // per team, in [0, G)
  std::vector<std::vector<int>> weights;   // m x m, entries in {-1,0,1}, zero diagonal
  double gamma = 0.0;
  enum class Variant { kPlain, kPeriodic } variant = Variant::kPlain;
  std::vector<double> idio_weights;        // law on {-1,0,1}; periodic variant only
  std::uint64_t master_seed = 1;
  double cost_bound = 0.0;                 // 0 = derive the tight bound
  std::vector<double> initial;             // over G^m joint states; empty = uniform
  ZeroRule zero_rule = ZeroRule::kNormalizerTrigger;

  int joint_state_count() const;
  double derived_cost_bound() const;
  void validate() const;
};

// A full game instance: spaces, discount, dynamics, costs, noise laws.
struct MftgSpec {
  int num_teams = 0;
  std::vector<int> state_sizes;
  std::vector<int> action_sizes;
  double gamma = 0.0;
  double cost_bound = 0.0;
  FinitePmf initial_joint;  // over the joint state space

  // (team, own state, own action, joint law, idio payload, team payload,
  // global payload) -> next own state
  std::function<int(int, int, int, const JointLaw&, std::span<const double>,
                    std::span<const double>, std::span<const double>)>
      system_fn;
  // (team, own state, own action, joint law) -> stage cost
  std::function<double(int, int, int, const JointLaw&)> cost_fn;

  std::vector<FiniteNoiseLaw> idio_laws;                      // per team
  std::function<std::vector<double>(Stream&)> sample_global;  // may be empty
  std::vector<std::function<std::vector<double>(Stream&)>> sample_team;

  std::optional<DriftParams> drift;

  int num_joint_states() const;
  int team_state(int joint, int team) const;
  bool has_global_noise() const { return static_cast<bool>(sample_global); }
};

// The grid-walk instance: every team's next state is the matching coordinate
// of one shared draw from the Z-perturbed joint action marginal; costs pull
// toward a target and weigh distances to the other teams' positions.
MftgSpec build_drift_model(const DriftParams& params);

// Both variants' common-noise tuple at (time, replication) under the master
// seed; pure in all arguments.
CommonNoise sample_common_noise(const NoiseArchitecture& arch, const MftgSpec& spec,
                                std::int64_t time, std::uint64_t replication);

// Applies the system function to every team with the supplied noises.
std::vector<int> step_system(const MftgSpec& spec, std::span<const int> states,
                             std::span<const int> actions, const JointLaw& bar_a,
                             std::span<const std::span<const double>> idio,
                             const CommonNoise& common);

double stage_cost(const MftgSpec& spec, int team, int x, int a, const JointLaw& bar_a);

// Samples (team, state, action, random joint law) tuples and checks
// |f| <= cost_bound; returns the largest |f| seen, throws on violation.
double audit_cost_bound(const MftgSpec& spec, int evaluations, std::uint64_t seed);

// Horizon with truncation bias at most tol: smallest T with
// C_f gamma^T/(1-gamma) <= tol.
int certified_horizon(double gamma, double cost_bound, double tol);

// JSON model files; keys documented in the README.
DriftParams load_drift_config(const std::string& path);

}  // namespace mftg
