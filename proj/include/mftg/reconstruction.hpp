#pragma once

#include <span>
#include <vector>

#include "mftg/pmf.hpp"

namespace mftg {

// Hard cap on dense law tensors; bigger instances are rejected outright.
inline constexpr std::size_t kDenseEntryCap = 1'000'000;

// Admissibility thresholds: checks accept at 1e-9, validated pairs are held
// to 1e-12 at construction.
inline constexpr double kAdmissibleTol = 1e-9;
inline constexpr double kAdmissiblePairTol = 1e-12;

// Law over (joint state, one team's action), dense and state-major.
class TeamStateActionLaw {
 public:
  TeamStateActionLaw(int num_states, int num_actions, std::vector<double> weights);

  // base x kernel product construction; kernel must cover supp(base).
  static TeamStateActionLaw from_mix(const FinitePmf& base, const KernelMatrix& kernel);

  int num_states() const { return nx_; }
  int num_actions() const { return na_; }
  double at(int x, int a) const { return w_[static_cast<std::size_t>(x) * na_ + a]; }
  const FinitePmf& as_pmf() const { return flat_; }

  FinitePmf state_marginal() const;
  FinitePmf action_marginal() const;
  // Conditional action law per state; undefined on zero-mass states.
  KernelMatrix action_kernel() const;

 private:
  int nx_, na_;
  std::vector<double> w_;
  FinitePmf flat_;
};

// Law over (joint state, every team's action), dense; the measure the system
// function and stage costs consume.
class JointLaw {
 public:
  JointLaw(int num_states, std::vector<int> action_sizes, std::vector<double> weights);

  int num_states() const { return nx_; }
  const std::vector<int>& action_sizes() const { return na_; }
  int num_joint_actions() const { return joint_actions_; }
  // actions indexed separately per team
  double at(int x, std::span<const int> actions) const;
  // or with the teams' actions packed lexicographically
  double at_packed(int x, int packed_action) const {
    return w_[static_cast<std::size_t>(x) * joint_actions_ + packed_action];
  }
  const FinitePmf& as_pmf() const { return flat_; }

  FinitePmf state_marginal() const;
  FinitePmf joint_action_marginal() const;
  // pr over (joint state, team i's action)
  TeamStateActionLaw team_marginal(int team) const;

 private:
  int nx_;
  std::vector<int> na_;
  int joint_actions_;
  std::vector<double> w_;
  FinitePmf flat_;
};

// Lifted state plus one admissible action law; construction enforces the
// marginal match at 1e-12.
struct AdmissiblePair {
  FinitePmf mu;
  TeamStateActionLaw a_hat;
  AdmissiblePair(FinitePmf mu_in, TeamStateActionLaw a_hat_in);
};

// Largest state-marginal deviation |pr_x(a_hat) - mu|.
double admissibility_residual(const TeamStateActionLaw& a_hat, const FinitePmf& mu);

struct AdmissibilityReport {
  bool admissible;
  double residual;
};
AdmissibilityReport admissible(const TeamStateActionLaw& a_hat, const FinitePmf& mu,
                               double tol = kAdmissibleTol);

// Keeps a_hat's conditional kernel, swaps the state marginal for mu; states
// where the kernel is undefined but mu charges mass get uniform rows.
TeamStateActionLaw project_admissible(const FinitePmf& mu, const TeamStateActionLaw& a_hat);

struct XiResult {
  JointLaw joint;
  // true when an inadmissible input was projected onto the admissible set
  bool projected;
};

// The reconstruction operator: the unique joint law whose per-team
// (state, action) marginals are the a_hats and whose conditional kernels
// factorize as a product given the state. Inadmissible inputs are projected
// first and flagged.
XiResult reconstruct_xi(const FinitePmf& mu, std::span<const TeamStateActionLaw> a_hats);

struct XiCertificate {
  std::vector<double> marginal_residuals;  // per team, defining property (i)
  double product_residual;                 // conditional factorization, property (ii)
  // both residuals <= 1e-12: the candidate coincides with the reconstruction
  // within 1e-11 by the finite-space uniqueness argument
  bool certified;
};
XiCertificate verify_xi(const JointLaw& joint, const FinitePmf& mu,
                        std::span<const TeamStateActionLaw> a_hats);

}  // namespace mftg
