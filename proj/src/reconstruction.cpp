#include "mftg/reconstruction.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "mftg/errors.hpp"

namespace mftg {

namespace {

void check_dense_cap(std::size_t entries, const char* who) {
  if (entries > kDenseEntryCap)
    throw UsageError(std::string(who) + ": dense size " + std::to_string(entries) +
                     " exceeds the 1e6-entry cap");
}

}  // namespace

TeamStateActionLaw::TeamStateActionLaw(int num_states, int num_actions,
                                       std::vector<double> weights)
    : nx_(num_states), na_(num_actions), w_(std::move(weights)), flat_() {
  if (nx_ <= 0 || na_ <= 0) throw UsageError("TeamStateActionLaw: empty shape");
  check_dense_cap(static_cast<std::size_t>(nx_) * na_, "TeamStateActionLaw");
  if (w_.size() != static_cast<std::size_t>(nx_) * na_)
    throw UsageError("TeamStateActionLaw: weight count does not match shape");
  flat_ = FinitePmf(w_);
}

TeamStateActionLaw TeamStateActionLaw::from_mix(const FinitePmf& base,
                                                const KernelMatrix& kernel) {
  FinitePmf joint = mix(base, kernel);
  return TeamStateActionLaw(base.size(), kernel.cols(),
                            std::vector<double>(joint.weights().begin(), joint.weights().end()));
}

FinitePmf TeamStateActionLaw::state_marginal() const {
  std::vector<double> m(nx_, 0.0);
  for (int x = 0; x < nx_; ++x)
    for (int a = 0; a < na_; ++a) m[x] += at(x, a);
  return FinitePmf(std::move(m));
}

FinitePmf TeamStateActionLaw::action_marginal() const {
  std::vector<double> m(na_, 0.0);
  for (int x = 0; x < nx_; ++x)
    for (int a = 0; a < na_; ++a) m[a] += at(x, a);
  return FinitePmf(std::move(m));
}

KernelMatrix TeamStateActionLaw::action_kernel() const {
  return disintegrate(flat_, nx_, na_).kernel;
}

JointLaw::JointLaw(int num_states, std::vector<int> action_sizes, std::vector<double> weights)
    : nx_(num_states), na_(std::move(action_sizes)), joint_actions_(1), w_(std::move(weights)),
      flat_() {
  if (nx_ <= 0 || na_.empty()) throw UsageError("JointLaw: empty shape");
  for (int s : na_) {
    if (s <= 0) throw UsageError("JointLaw: empty action set");
    joint_actions_ *= s;
  }
  check_dense_cap(static_cast<std::size_t>(nx_) * joint_actions_, "JointLaw");
  if (w_.size() != static_cast<std::size_t>(nx_) * joint_actions_)
    throw UsageError("JointLaw: weight count does not match shape");
  flat_ = FinitePmf(w_);
}

double JointLaw::at(int x, std::span<const int> actions) const {
  if (actions.size() != na_.size()) throw UsageError("JointLaw::at: action count mismatch");
  int packed = 0;
  for (std::size_t i = 0; i < na_.size(); ++i) packed = packed * na_[i] + actions[i];
  return at_packed(x, packed);
}

FinitePmf JointLaw::state_marginal() const {
  std::vector<double> m(nx_, 0.0);
  for (int x = 0; x < nx_; ++x)
    for (int a = 0; a < joint_actions_; ++a) m[x] += at_packed(x, a);
  return FinitePmf(std::move(m));
}

FinitePmf JointLaw::joint_action_marginal() const {
  std::vector<double> m(joint_actions_, 0.0);
  for (int x = 0; x < nx_; ++x)
    for (int a = 0; a < joint_actions_; ++a) m[a] += at_packed(x, a);
  return FinitePmf(std::move(m));
}

TeamStateActionLaw JointLaw::team_marginal(int team) const {
  if (team < 0 || team >= static_cast<int>(na_.size()))
    throw UsageError("JointLaw::team_marginal: team out of range");
  // stride of team's coordinate inside the packed action index
  int inner = 1;
  for (std::size_t j = team + 1; j < na_.size(); ++j) inner *= na_[j];
  const int nt = na_[team];
  std::vector<double> m(static_cast<std::size_t>(nx_) * nt, 0.0);
  for (int x = 0; x < nx_; ++x)
    for (int a = 0; a < joint_actions_; ++a) {
      const int ai = (a / inner) % nt;
      m[static_cast<std::size_t>(x) * nt + ai] += at_packed(x, a);
    }
  return TeamStateActionLaw(nx_, nt, std::move(m));
}

double admissibility_residual(const TeamStateActionLaw& a_hat, const FinitePmf& mu) {
  if (a_hat.num_states() != mu.size())
    throw UsageError("admissibility_residual: state-space mismatch");
  return linf_distance(a_hat.state_marginal(), mu);
}

AdmissibilityReport admissible(const TeamStateActionLaw& a_hat, const FinitePmf& mu,
                               double tol) {
  const double r = admissibility_residual(a_hat, mu);
  return {r <= tol, r};
}

AdmissiblePair::AdmissiblePair(FinitePmf mu_in, TeamStateActionLaw a_hat_in)
    : mu(std::move(mu_in)), a_hat(std::move(a_hat_in)) {
  const double r = admissibility_residual(a_hat, mu);
  if (r > kAdmissiblePairTol)
    throw InvariantViolation("AdmissiblePair: state marginal off by " + std::to_string(r));
}

TeamStateActionLaw project_admissible(const FinitePmf& mu, const TeamStateActionLaw& a_hat) {
  if (a_hat.num_states() != mu.size())
    throw UsageError("project_admissible: state-space mismatch");
  const int na = a_hat.num_actions();
  KernelMatrix kernel = a_hat.action_kernel();
  KernelMatrix filled(mu.size(), na);
  const FinitePmf uniform_row = FinitePmf::uniform(na);
  for (int x = 0; x < mu.size(); ++x) {
    if (kernel.row_defined(x))
      filled.set_row(x, kernel.row(x));
    else if (mu[x] > 0.0)
      filled.set_row(x, uniform_row);
  }
  return TeamStateActionLaw::from_mix(mu, filled);
}

XiResult reconstruct_xi(const FinitePmf& mu, std::span<const TeamStateActionLaw> a_hats) {
  if (a_hats.empty()) throw UsageError("reconstruct_xi: no action laws");
  const int nx = mu.size();
  const int m = static_cast<int>(a_hats.size());
  std::vector<int> action_sizes(m);
  bool projected = false;

  std::vector<KernelMatrix> kernels;
  kernels.reserve(m);
  for (int i = 0; i < m; ++i) {
    if (a_hats[i].num_states() != nx) throw UsageError("reconstruct_xi: state-space mismatch");
    action_sizes[i] = a_hats[i].num_actions();
    const TeamStateActionLaw* law = &a_hats[i];
    TeamStateActionLaw fixed = *law;
    if (admissibility_residual(*law, mu) > kAdmissiblePairTol) {
      fixed = project_admissible(mu, *law);
      projected = true;
    }
    kernels.push_back(fixed.action_kernel());
  }

  int joint_actions = 1;
  for (int s : action_sizes) joint_actions *= s;
  check_dense_cap(static_cast<std::size_t>(nx) * joint_actions, "reconstruct_xi");

  std::vector<double> w(static_cast<std::size_t>(nx) * joint_actions, 0.0);
  std::vector<int> a(m, 0);
  for (int x = 0; x < nx; ++x) {
    if (mu[x] == 0.0) continue;
    std::fill(a.begin(), a.end(), 0);
    for (int packed = 0; packed < joint_actions; ++packed) {
      double v = mu[x];
      for (int i = 0; i < m && v != 0.0; ++i) v *= kernels[i].at(x, a[i]);
      w[static_cast<std::size_t>(x) * joint_actions + packed] = v;
      for (int i = m - 1; i >= 0; --i) {
        if (++a[i] < action_sizes[i]) break;
        a[i] = 0;
      }
    }
  }
  return {JointLaw(nx, std::move(action_sizes), std::move(w)), projected};
}

XiCertificate verify_xi(const JointLaw& joint, const FinitePmf& mu,
                        std::span<const TeamStateActionLaw> a_hats) {
  const int m = static_cast<int>(a_hats.size());
  XiCertificate cert;
  cert.marginal_residuals.resize(m, 0.0);
  for (int i = 0; i < m; ++i) {
    TeamStateActionLaw got = joint.team_marginal(i);
    cert.marginal_residuals[i] = linf_distance(got.as_pmf(), a_hats[i].as_pmf());
  }

  // Factorization, checked on conditionals: the candidate's action law given
  // x must be the product of the per-team conditional rows. States with mass
  // below 1e-12 are immaterial for the 1e-11 uniqueness certificate and are
  // skipped, as are states where a per-team conditional is undefined (those
  // already show up in the marginal residuals).
  cert.product_residual = 0.0;
  const auto& sizes = joint.action_sizes();
  const FinitePmf joint_state_marg = joint.state_marginal();
  std::vector<KernelMatrix> kernels;
  kernels.reserve(m);
  for (int i = 0; i < m; ++i) kernels.push_back(a_hats[i].action_kernel());
  std::vector<int> a(m, 0);
  for (int x = 0; x < joint.num_states(); ++x) {
    if (mu[x] <= 1e-12 || joint_state_marg[x] <= 0.0) continue;
    bool rows_defined = true;
    for (int i = 0; i < m; ++i) rows_defined = rows_defined && kernels[i].row_defined(x);
    if (!rows_defined) continue;
    std::fill(a.begin(), a.end(), 0);
    for (int packed = 0; packed < joint.num_joint_actions(); ++packed) {
      double lhs = joint.at_packed(x, packed) / joint_state_marg[x];
      double rhs = 1.0;
      for (int i = 0; i < m; ++i) rhs *= kernels[i].at(x, a[i]);
      cert.product_residual = std::max(cert.product_residual, std::abs(lhs - rhs));
      for (int i = m - 1; i >= 0; --i) {
        if (++a[i] < sizes[i]) break;
        a[i] = 0;
      }
    }
  }

  double worst = cert.product_residual;
  for (double r : cert.marginal_residuals) worst = std::max(worst, r);
  cert.certified = worst <= 1e-12;
  return cert;
}

}  // namespace mftg
