#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mftg/model.hpp"
#include "mftg/pmf.hpp"
#include "mftg/reconstruction.hpp"

namespace mftg {

// How one-step transition laws of the population state are evaluated.
//   kClosedForm  product-of-action-marginals row; exact only for models whose
//                perturbed-mean matches the plain marginal (see kernel-check)
//   kQuadrature  integrates the perturbed mean of the joint action marginal
//   kMonteCarlo  samples the common noise and pushes the full joint law
enum class KernelBackend { kClosedForm, kQuadrature, kMonteCarlo };

KernelBackend parse_backend(const std::string& name);
std::string backend_name(KernelBackend backend);

// Finite set of reachable population states (pmfs over joint team states).
// States are deduplicated up to sup-norm tolerance and addressed by index.
class LiftedStateSpace {
 public:
  explicit LiftedStateSpace(int num_joint_states);

  int num_joint_states() const { return nx_; }
  int size() const { return static_cast<int>(states_.size()); }
  const FinitePmf& state(int idx) const { return states_.at(idx); }

  // Index of a matching state, or -1.
  int find(const FinitePmf& mu, double tol = 1e-12) const;
  int find_or_add(FinitePmf mu, double tol = 1e-12);

  static constexpr int kDefaultCap = 10000;

 private:
  int nx_;
  std::vector<FinitePmf> states_;
};

struct KernelOptions {
  int mc_samples = 100000;
  std::uint64_t seed = 1;
  int threads = 1;
  // When false, a transition leaving the enumerated space is an error.
  bool extend_space = false;
  int space_cap = LiftedStateSpace::kDefaultCap;
  double match_tol = 1e-12;
};

// Sparse transition row over lifted state indices.
struct LiftedKernelRow {
  std::vector<std::pair<int, double>> entries;  // (state index, probability)
  double mass() const;
};

FinitePmf row_pmf(const LiftedKernelRow& row, int space_size);

// One common-noise realization pushed through the system map: the next joint
// state law given the current joint state-action law.
FinitePmf pushforward_once(const MftgSpec& spec, const JointLaw& xi,
                           const CommonNoise& common);

// Successor state atom of the drift family for one joint action: a point mass
// in the plain variant, the idiosyncratically smoothed atom in the periodic
// one.
FinitePmf drift_atom_state(const MftgSpec& spec, int joint_action);

// Joint action sampled from the product of per-team action marginals.
int drift_sample_joint_action_closed_form(
    const MftgSpec& spec, std::span<const TeamStateActionLaw> a_hats,
    double u0);

LiftedKernelRow kernel_row(const MftgSpec& spec, LiftedStateSpace& space,
                           const FinitePmf& mu,
                           std::span<const TeamStateActionLaw> a_hats,
                           KernelBackend backend, const KernelOptions& options);

// Transition density with respect to the uniform measure on the drift
// successor atoms. Zero off the atom set; row mass times atom count on it.
double density_q(const MftgSpec& spec, const FinitePmf& mu_prime,
                 const FinitePmf& mu,
                 std::span<const TeamStateActionLaw> a_hats,
                 KernelBackend backend);

// Expected stage cost of one team under the reconstructed joint law.
double lift_cost(const MftgSpec& spec, int team, const FinitePmf& mu,
                 std::span<const TeamStateActionLaw> a_hats);
double lift_cost_with_xi(const MftgSpec& spec, int team,
                         const TeamStateActionLaw& a_hat,
                         const JointLaw& xi);

// Closure of the initial state under every profile of constant pure actions.
LiftedStateSpace enumerate_states(const MftgSpec& spec, const FinitePmf& mu0,
                                  KernelBackend backend,
                                  const KernelOptions& options);

// Stationary randomized team policy on the lifted space: a fixed mixture over
// R deterministic-slot plans, each slot giving a state-action law per lifted
// state.
struct Level1TeamPolicy {
  FinitePmf slot_weights;
  // actions[state][slot]
  std::vector<std::vector<TeamStateActionLaw>> actions;
  // Pure constant-action slots record the action index; -1 otherwise.
  // vertex[state][slot], empty when unknown.
  std::vector<std::vector<int>> vertex;

  int num_slots() const { return slot_weights.size(); }
};

struct Level1Profile {
  std::vector<Level1TeamPolicy> teams;

  int num_teams() const { return static_cast<int>(teams.size()); }
  // Throws unless every slot law is admissible for its state within 1e-9.
  void validate(const MftgSpec& spec, const LiftedStateSpace& space) const;
};

// Profile where every team plays the same fixed action in every state.
Level1Profile constant_action_profile(const MftgSpec& spec,
                                      const LiftedStateSpace& space,
                                      std::span<const int> actions);
// Profile of uniform randomization over own actions, independent of state.
Level1Profile uniform_profile(const MftgSpec& spec,
                              const LiftedStateSpace& space);

struct DpOptions {
  double eps = 1e-8;
  int max_iterations = 10000000;
};

struct DpResult {
  // values[team][state]
  std::vector<std::vector<double>> values;
  int iterations = 0;
  double final_delta = 0.0;
};

// Evaluates the discounted cost of a stationary profile by value iteration,
// stopped once the sup-norm update certifies an error below eps/2.
DpResult policy_value_dp(const MftgSpec& spec, const LiftedStateSpace& space,
                         const Level1Profile& profile, KernelBackend backend,
                         const KernelOptions& kernel_options,
                         const DpOptions& dp_options);

struct BrOptions {
  double eps = 1e-8;
  int max_iterations = 10000000;
  // 0: optimize over constant pure actions only. r > 0: also search the
  // simplex grid of own-action mixtures with denominator r, applied per own
  // state.
  int simplex_resolution = 0;
};

struct BrResult {
  Level1TeamPolicy policy;      // single slot
  std::vector<double> values;   // per lifted state
  std::vector<int> chosen;      // grid index per state, ties to lowest
  int iterations = 0;
};

// Best response of one player against the others' fixed policies.
BrResult best_response(const MftgSpec& spec, const LiftedStateSpace& space,
                       const Level1Profile& profile, int player,
                       KernelBackend backend,
                       const KernelOptions& kernel_options,
                       const BrOptions& br_options);

}  // namespace mftg
