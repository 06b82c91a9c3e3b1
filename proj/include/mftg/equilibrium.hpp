#pragma once

#include <string>
#include <vector>

#include "mftg/lifted.hpp"
#include "mftg/model.hpp"

namespace mftg {

enum class UpdateOrder {
  kRoundRobin,  // team 0 responds first, later teams see the updates
  kSimultaneous
};

// Search configuration shared by exploitability and both solvers. eta is a
// finite mixture over enumerated lifted states; a single entry with weight 1
// recovers the fixed-initial-state case.
struct EquilibriumConfig {
  std::vector<int> eta_states;
  std::vector<double> eta_weights;
  int max_iterations = 100;
  double eps = 1e-8;
  KernelBackend backend = KernelBackend::kQuadrature;
  KernelOptions kernel;
  UpdateOrder order = UpdateOrder::kRoundRobin;
  int simplex_resolution = 0;  // 0 = vertex action grid

  void validate(const LiftedStateSpace& space) const;
};

struct ExploitabilityResult {
  std::vector<double> values;     // per team, E_eta under the profile
  std::vector<double> br_values;  // per team, E_eta after own best response
  std::vector<double> gaps;       // values - br_values, each >= -2*eps
  double total = 0.0;
  bool nash_within_tol = false;  // total <= num_teams * 2 * eps
};

// How much each team gains by deviating unilaterally to a best response,
// averaged over eta. Nonnegative up to twice the DP tolerance.
ExploitabilityResult exploitability(const MftgSpec& spec,
                                    const LiftedStateSpace& space,
                                    const Level1Profile& profile,
                                    const EquilibriumConfig& config);

enum class SolveStatus { kConverged, kCycled, kIterationCap };

struct EquilibriumIterate {
  int iteration;  // 0 = the initial profile, before any update
  Level1Profile profile;
  std::vector<double> values;
  std::vector<double> gaps;
  double total_gap;
};

struct EquilibriumTrace {
  std::vector<EquilibriumIterate> iterates;
  SolveStatus status = SolveStatus::kIterationCap;

  const EquilibriumIterate& final_iterate() const { return iterates.back(); }
  bool converged() const { return status == SolveStatus::kConverged; }
};

// Iterated best responses. Stops on a fixed point (converged), on a repeat
// of an earlier profile (cycled), or at the iteration cap. No convergence is
// guaranteed; a cycling or capped run is a legitimate reported outcome.
EquilibriumTrace best_response_dynamics(const MftgSpec& spec,
                                        const LiftedStateSpace& space,
                                        const Level1Profile& init,
                                        const EquilibriumConfig& config);

// Iteration t moves every action law 1/t of the way toward the team's best
// response, state by state. Averages stay admissible since all components
// share the state marginal. Requires a single-slot starting profile.
EquilibriumTrace fictitious_play(const MftgSpec& spec,
                                 const LiftedStateSpace& space,
                                 const Level1Profile& init,
                                 const EquilibriumConfig& config);

// columns: iteration,player,value,gap,total_gap
std::string equilibrium_trace_csv(const EquilibriumTrace& trace);

}  // namespace mftg
