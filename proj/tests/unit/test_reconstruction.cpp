#include <doctest.h>

#include <cmath>
#include <vector>

#include "mftg/errors.hpp"
#include "mftg/model.hpp"
#include "mftg/reconstruction.hpp"
#include "mftg/rng.hpp"

using namespace mftg;

namespace {

KernelMatrix random_kernel(int nx, int na, Stream& stream) {
  KernelMatrix k(nx, na);
  for (int x = 0; x < nx; ++x) {
    std::vector<double> row(na);
    for (double& v : row) v = stream.next_exponential();
    k.set_row(x, FinitePmf::normalized(std::move(row)));
  }
  return k;
}

FinitePmf random_pmf(int n, Stream& stream) {
  std::vector<double> w(n);
  for (double& v : w) v = stream.next_exponential();
  return FinitePmf::normalized(std::move(w));
}

}  // namespace

TEST_SUITE("reconstruction") {

TEST_CASE("team law marginals and kernel") {
  const TeamStateActionLaw law(2, 2, {0.1, 0.2, 0.3, 0.4});
  CHECK(law.at(0, 1) == 0.2);
  CHECK(law.at(1, 0) == 0.3);
  const FinitePmf sm = law.state_marginal();
  CHECK(std::abs(sm[0] - 0.3) <= 1e-15);
  CHECK(std::abs(sm[1] - 0.7) <= 1e-15);
  const FinitePmf am = law.action_marginal();
  CHECK(std::abs(am[0] - 0.4) <= 1e-15);
  CHECK(std::abs(am[1] - 0.6) <= 1e-15);
  const KernelMatrix k = law.action_kernel();
  CHECK(std::abs(k.at(0, 1) - 2.0 / 3.0) <= 1e-15);
  CHECK(std::abs(k.at(1, 0) - 3.0 / 7.0) <= 1e-15);

  CHECK_THROWS_AS(TeamStateActionLaw(2, 2, {0.5, 0.5}), UsageError);
}

TEST_CASE("mix construction multiplies base by kernel rows") {
  const FinitePmf base({0.5, 0.5});
  KernelMatrix k(2, 2);
  k.set_row(0, FinitePmf({0.2, 0.8}));
  k.set_row(1, FinitePmf({0.6, 0.4}));
  const TeamStateActionLaw law = TeamStateActionLaw::from_mix(base, k);
  CHECK(law.at(0, 0) == 0.5 * 0.2);
  CHECK(law.at(0, 1) == 0.5 * 0.8);
  CHECK(law.at(1, 0) == 0.5 * 0.6);
  CHECK(law.at(1, 1) == 0.5 * 0.4);

  // a dead base atom needs no kernel row
  KernelMatrix partial(2, 2);
  partial.set_row(0, FinitePmf({1.0, 0.0}));
  const TeamStateActionLaw dead = TeamStateActionLaw::from_mix(FinitePmf({1.0, 0.0}), partial);
  CHECK(dead.at(1, 0) == 0.0);
  CHECK(dead.at(1, 1) == 0.0);
}

TEST_CASE("joint law indexing and marginals") {
  // 2 joint states, two teams with 2 actions each
  std::vector<double> w(8);
  for (int i = 0; i < 8; ++i) w[i] = (i + 1) / 36.0;
  const JointLaw joint(2, {2, 2}, w);
  CHECK(joint.num_joint_actions() == 4);
  const std::vector<int> a01{0, 1};
  CHECK(joint.at(1, a01) == joint.at_packed(1, 1));
  CHECK(joint.at_packed(1, 1) == 6.0 / 36.0);

  const FinitePmf sm = joint.state_marginal();
  CHECK(std::abs(sm[0] - 10.0 / 36.0) <= 1e-15);
  const FinitePmf jam = joint.joint_action_marginal();
  CHECK(std::abs(jam[2] - (3.0 + 7.0) / 36.0) <= 1e-15);

  const TeamStateActionLaw t1 = joint.team_marginal(1);
  // sum over team 0's action: (x=0, a1=0) collects cells 1/36 and 3/36
  CHECK(std::abs(t1.at(0, 0) - 4.0 / 36.0) <= 1e-15);
  CHECK(std::abs(t1.at(1, 1) - (6.0 + 8.0) / 36.0) <= 1e-15);
  CHECK_THROWS_AS(joint.team_marginal(2), UsageError);
}

TEST_CASE("admissibility residual detects a planted defect") {
  Stream stream(mix64(41));
  const FinitePmf mu = random_pmf(3, stream);
  const KernelMatrix k = random_kernel(3, 2, stream);
  const TeamStateActionLaw good = TeamStateActionLaw::from_mix(mu, k);
  CHECK(admissibility_residual(good, mu) <= 1e-15);
  CHECK(admissible(good, mu).admissible);
  CHECK_NOTHROW(AdmissiblePair(mu, good));

  // move 1e-6 of mass across states without breaking normalization
  std::vector<double> w;
  for (int x = 0; x < 3; ++x)
    for (int a = 0; a < 2; ++a) w.push_back(good.at(x, a));
  w[0] -= 1e-6;
  w[2] += 1e-6;
  const TeamStateActionLaw bent(3, 2, w);
  const auto report = admissible(bent, mu);
  CHECK_FALSE(report.admissible);
  CHECK(report.residual == doctest::Approx(1e-6).epsilon(1e-3));
  CHECK_THROWS_AS(AdmissiblePair(mu, bent), InvariantViolation);
}

TEST_CASE("projection swaps the marginal and keeps the kernel") {
  Stream stream(mix64(42));
  const KernelMatrix k = random_kernel(2, 3, stream);
  const TeamStateActionLaw a_hat = TeamStateActionLaw::from_mix(FinitePmf({0.3, 0.7}), k);
  const FinitePmf mu({0.5, 0.5});
  const TeamStateActionLaw proj = project_admissible(mu, a_hat);
  CHECK(admissibility_residual(proj, mu) <= 1e-15);
  const KernelMatrix kp = proj.action_kernel();
  for (int x = 0; x < 2; ++x)
    for (int a = 0; a < 3; ++a) CHECK(std::abs(kp.at(x, a) - k.at(x, a)) <= 1e-14);

  // mass pushed onto a state the source never visited gets a uniform row
  const TeamStateActionLaw corner =
      TeamStateActionLaw::from_mix(FinitePmf({1.0, 0.0}), k);
  const TeamStateActionLaw spread = project_admissible(mu, corner);
  for (int a = 0; a < 3; ++a) CHECK(spread.at(1, a) == doctest::Approx(0.5 / 3.0));
}

TEST_CASE("reconstruction equals the conditional product") {
  Stream stream(mix64(43));
  const FinitePmf mu = random_pmf(4, stream);
  std::vector<KernelMatrix> kernels;
  kernels.push_back(random_kernel(4, 2, stream));
  kernels.push_back(random_kernel(4, 3, stream));
  std::vector<TeamStateActionLaw> a_hats;
  for (const auto& k : kernels) a_hats.push_back(TeamStateActionLaw::from_mix(mu, k));

  const XiResult xi = reconstruct_xi(mu, a_hats);
  CHECK_FALSE(xi.projected);
  for (int x = 0; x < 4; ++x) {
    for (int a1 = 0; a1 < 2; ++a1) {
      for (int a2 = 0; a2 < 3; ++a2) {
        double v = mu[x];
        v *= kernels[0].at(x, a1);
        v *= kernels[1].at(x, a2);
        CHECK(std::abs(xi.joint.at_packed(x, a1 * 3 + a2) - v) <= 1e-15);
      }
    }
  }

  const XiCertificate cert = verify_xi(xi.joint, mu, a_hats);
  CHECK(cert.certified);
  for (double r : cert.marginal_residuals) CHECK(r <= 1e-12);
  CHECK(cert.product_residual <= 1e-12);

  // team marginals come back entrywise
  for (int i = 0; i < 2; ++i) {
    const TeamStateActionLaw got = xi.joint.team_marginal(i);
    for (int x = 0; x < 4; ++x)
      for (int a = 0; a < a_hats[i].num_actions(); ++a)
        CHECK(std::abs(got.at(x, a) - a_hats[i].at(x, a)) <= 1e-15);
  }
}

TEST_CASE("random sweep certifies and a planted defect does not") {
  Stream stream(mix64(44));
  for (int trial = 0; trial < 50; ++trial) {
    const int nx = 2 + static_cast<int>(stream.next_u64() % 5);
    const int m = 1 + static_cast<int>(stream.next_u64() % 3);
    const FinitePmf mu = random_pmf(nx, stream);
    std::vector<TeamStateActionLaw> a_hats;
    for (int i = 0; i < m; ++i) {
      const int na = 2 + static_cast<int>(stream.next_u64() % 3);
      a_hats.push_back(TeamStateActionLaw::from_mix(mu, random_kernel(nx, na, stream)));
    }
    const XiResult xi = reconstruct_xi(mu, a_hats);
    CHECK_FALSE(xi.projected);
    const XiCertificate cert = verify_xi(xi.joint, mu, a_hats);
    CHECK(cert.certified);
  }

  // correlated two-team law with the right marginals but no product structure
  const FinitePmf mu = FinitePmf::uniform(2);
  std::vector<double> w(2 * 4, 0.0);
  // state 0: actions perfectly correlated; state 1: anti-correlated
  w[0] = 0.25;
  w[3] = 0.25;
  w[4 + 1] = 0.25;
  w[4 + 2] = 0.25;
  const JointLaw tangled(2, {2, 2}, w);
  std::vector<TeamStateActionLaw> marg{tangled.team_marginal(0), tangled.team_marginal(1)};
  const XiCertificate cert = verify_xi(tangled, mu, marg);
  CHECK(cert.marginal_residuals[0] <= 1e-15);
  CHECK(cert.marginal_residuals[1] <= 1e-15);
  CHECK(cert.product_residual > 0.1);
  CHECK_FALSE(cert.certified);
}

TEST_CASE("inadmissible inputs are projected and flagged") {
  Stream stream(mix64(45));
  const FinitePmf mu({0.5, 0.5});
  const KernelMatrix k = random_kernel(2, 2, stream);
  const TeamStateActionLaw off = TeamStateActionLaw::from_mix(FinitePmf({0.4, 0.6}), k);
  std::vector<TeamStateActionLaw> a_hats{off};
  const XiResult xi = reconstruct_xi(mu, a_hats);
  CHECK(xi.projected);
  CHECK(linf_distance(xi.joint.state_marginal(), mu) <= 1e-12);
}

TEST_CASE("dense tensors above the cap are rejected") {
  const FinitePmf mu = FinitePmf::uniform(200);
  Stream stream(mix64(46));
  const KernelMatrix k = random_kernel(200, 80, stream);
  const TeamStateActionLaw a_hat = TeamStateActionLaw::from_mix(mu, k);
  std::vector<TeamStateActionLaw> a_hats{a_hat, a_hat};
  CHECK_THROWS_AS(reconstruct_xi(mu, a_hats), UsageError);
}

}  // TEST_SUITE
