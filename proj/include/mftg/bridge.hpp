#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mftg/lifted.hpp"
#include "mftg/model.hpp"
#include "mftg/pmf.hpp"
#include "mftg/population.hpp"

namespace mftg {

// Planner-side image of a closed-loop policy: mixture component r at lifted
// state mu is the admissible law mu(dx) pi^i(x^i, mu, r)(da^i), with the
// slot weights carried over unchanged.
Level1Profile lift_policy(const MftgSpec& spec, const LiftedStateSpace& space,
                          const Level0Policy& level0);

// Reverse construction. Each component's (own state, own action) marginal is
// disintegrated along the own state; own states the component never charges
// get uniform rows. Kernels that depend on other teams' coordinates lose
// that dependence, the lowered policy keeps only the own-state projection.
Level0Policy lower_policy(const MftgSpec& spec, const LiftedStateSpace& space,
                          const Level1Profile& level1);

struct EquivalenceOptions {
  KernelBackend backend = KernelBackend::kQuadrature;  // both levels
  KernelOptions kernel;
  DpOptions dp;
  int replications = 2000;
  // horizon chosen so the discounted tail is below this
  double horizon_tol = 1e-4;
  std::uint64_t master_seed = 1;
  int threads = 1;
};

struct CorrespondenceReport {
  // admissibility residual of each lifted component, [team][slot][state]
  std::vector<std::vector<std::vector<double>>> lift_residuals;
  double max_lift_residual = 0.0;

  std::vector<double> dp_values;  // per team, at the initial lifted state
  std::vector<double> sim_means;  // per team, Monte Carlo
  std::vector<double> sim_ses;
  std::vector<double> gaps;    // |dp - sim|
  std::vector<double> bounds;  // 3*se + truncation + 2*dp_eps
  double truncation_bound = 0.0;
  double dp_eps = 0.0;
  int horizon = 0;
  int replications = 0;

  // largest gap between the tracked joint law and the field-times-policy
  // product, sampled along the simulated chain; exact tracking keeps it at
  // floating-point noise
  double xi_consistency_residual = 0.0;

  bool lift_ok = false;     // max_lift_residual <= 1e-9
  bool xi_ok = false;       // xi_consistency_residual <= 1e-12
  bool values_match = false;
  bool pass = false;
};

// The two-level value comparison: dynamic programming on the lifted chain
// against Monte Carlo over representative agents, same kernel backend on
// both sides. Passing means every team's gap sits inside its certified bar.
CorrespondenceReport equivalence_check(const MftgSpec& spec,
                                       const Level0Policy& level0,
                                       const LiftedStateSpace& space,
                                       const FinitePmf& mu0,
                                       const EquivalenceOptions& options);

std::string level0_policy_to_json(const Level0Policy& policy);
Level0Policy level0_policy_from_json(const std::string& text,
                                     const MftgSpec& spec);

std::string level1_profile_to_json(const Level1Profile& profile);
Level1Profile level1_profile_from_json(const std::string& text,
                                       const MftgSpec& spec,
                                       const LiftedStateSpace& space);

std::string correspondence_report_json(const CorrespondenceReport& report);

}  // namespace mftg
