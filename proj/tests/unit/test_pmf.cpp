#include <doctest.h>

#include <cmath>
#include <vector>

#include "mftg/errors.hpp"
#include "mftg/pmf.hpp"
#include "mftg/rng.hpp"

using namespace mftg;

TEST_SUITE("pmf") {

TEST_CASE("constructors validate mass and support") {
  FinitePmf p(std::vector<double>{0.25, 0.75});
  CHECK(p.size() == 2);
  CHECK(p[0] == 0.25);
  CHECK(p[1] == 0.75);

  CHECK_THROWS_AS(FinitePmf(std::vector<double>{0.5, 0.6}), InvariantViolation);
  CHECK_THROWS_AS(FinitePmf(std::vector<double>{-0.1, 1.1}), InvariantViolation);
  CHECK_THROWS_AS(FinitePmf(std::vector<double>{}), InvariantViolation);

  CHECK(FinitePmf::uniform(4)[2] == 0.25);
  CHECK(FinitePmf::dirac(3, 2)[2] == 1.0);
  CHECK(FinitePmf::dirac(3, 2).dirac_atom() == 2);
  CHECK(FinitePmf::uniform(2).dirac_atom() == -1);
  CHECK_THROWS_AS(FinitePmf::dirac(3, 3), InvariantViolation);

  FinitePmf n = FinitePmf::normalized({2.0, 6.0});
  CHECK(n[0] == doctest::Approx(0.25).epsilon(1e-15));
  CHECK_THROWS_AS(FinitePmf::normalized({0.0, 0.0}), InvariantViolation);
}

TEST_CASE("perturbation reweights and renormalizes") {
  FinitePmf mu(std::vector<double>{0.5, 0.5});
  FinitePmf out = perturb(mu, PerturbationVector({2.0, 1.0}));
  CHECK(std::abs(out[0] - 2.0 / 3.0) <= 1e-15);
  CHECK(std::abs(out[1] - 1.0 / 3.0) <= 1e-15);

  // zero normalizer falls back to uniform under either rule
  FinitePmf z = perturb(mu, PerturbationVector({0.0, 0.0}));
  CHECK(z == FinitePmf::uniform(2));

  // a zero entry off the support only matters to the literal rule
  FinitePmf point(std::vector<double>{0.0, 1.0});
  PerturbationVector partial({0.0, 2.0});
  CHECK(perturb(point, partial, ZeroRule::kNormalizerTrigger) == point);
  CHECK(perturb(point, partial, ZeroRule::kLiteralTrigger) ==
        FinitePmf::uniform(2));

  CHECK_THROWS_AS(perturb(mu, PerturbationVector({1.0, 1.0, 1.0})), UsageError);
}

TEST_CASE("inverse cdf walks half-open intervals") {
  FinitePmf mu(std::vector<double>{0.3, 0.2, 0.5});
  CHECK(inverse_cdf_sample(mu, 0.0) == 0);
  CHECK(inverse_cdf_sample(mu, 0.2999) == 0);
  CHECK(inverse_cdf_sample(mu, 0.3) == 1);
  CHECK(inverse_cdf_sample(mu, 0.5) == 2);
  CHECK(inverse_cdf_sample(mu, 0.9999) == 2);
  CHECK_THROWS_AS(inverse_cdf_sample(mu, 1.0), UsageError);
  CHECK_THROWS_AS(inverse_cdf_sample(mu, -0.1), UsageError);
}

TEST_CASE("inverse cdf frequencies match the law") {
  FinitePmf mu(std::vector<double>{0.3, 0.2, 0.5});
  Stream stream(12345);
  const int n = 100000;
  std::vector<int> counts(3, 0);
  for (int k = 0; k < n; ++k) counts[inverse_cdf_sample(mu, stream.next_uniform())]++;
  for (int a = 0; a < 3; ++a) {
    const double p = mu[a];
    const double se = std::sqrt(p * (1.0 - p) / n);
    CHECK(std::abs(counts[a] / static_cast<double>(n) - p) <= 4.0 * se);
  }
}

TEST_CASE("product measure in canonical order") {
  std::vector<FinitePmf> f{FinitePmf(std::vector<double>{0.5, 0.5}),
                           FinitePmf(std::vector<double>{0.3, 0.7})};
  FinitePmf joint = product(f);
  REQUIRE(joint.size() == 4);
  CHECK(joint[0] == 0.5 * 0.3);
  CHECK(joint[1] == 0.5 * 0.7);
  CHECK(joint[2] == 0.5 * 0.3);
  CHECK(joint[3] == 0.5 * 0.7);

  const std::vector<int> shape{2, 2};
  const int keep0[1] = {0};
  const int keep1[1] = {1};
  CHECK(linf_distance(marginal(joint, shape, keep0), f[0]) <= 1e-15);
  CHECK(linf_distance(marginal(joint, shape, keep1), f[1]) <= 1e-15);
}

TEST_CASE("marginal sums out dropped coordinates") {
  FinitePmf joint(std::vector<double>{0.1, 0.2, 0.3, 0.4});
  const std::vector<int> shape{2, 2};
  const int keep0[1] = {0};
  FinitePmf m0 = marginal(joint, shape, keep0);
  CHECK(m0[0] == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(m0[1] == doctest::Approx(0.7).epsilon(1e-15));
  const int keep_both[2] = {0, 1};
  CHECK(marginal(joint, shape, keep_both) == joint);
}

TEST_CASE("disintegrate then mix reproduces the joint") {
  Stream stream(777);
  std::vector<double> w(12);
  for (double& v : w) v = stream.next_exponential();
  FinitePmf joint = FinitePmf::normalized(std::move(w));
  Disintegration d = disintegrate(joint, 3, 4);
  CHECK(linf_distance(mix(d.base, d.kernel), joint) <= 1e-15);

  // a dead source atom leaves its kernel row undefined but the mix intact
  FinitePmf gappy(std::vector<double>{0.5, 0.5, 0.0, 0.0});
  Disintegration g = disintegrate(gappy, 2, 2);
  CHECK(g.base[1] == 0.0);
  CHECK_FALSE(g.kernel.row_defined(1));
  CHECK(linf_distance(mix(g.base, g.kernel), gappy) <= 1e-15);
}

TEST_CASE("quadrature mean of the perturbed law") {
  // a point mass is immune to reweighting
  FinitePmf point = FinitePmf::dirac(3, 1);
  CHECK(linf_distance(perturbed_mean_quadrature(point), point) <= 1e-12);

  // symmetry fixes the uniform law
  FinitePmf u5 = FinitePmf::uniform(5);
  CHECK(linf_distance(perturbed_mean_quadrature(u5), u5) <= 1e-10);

  // (1/3, 2/3): first component integrates to 2 ln 2 - 1, a strict shift off
  // the unperturbed mean 1/3
  FinitePmf skew(std::vector<double>{1.0 / 3.0, 2.0 / 3.0});
  FinitePmf mean = perturbed_mean_quadrature(skew);
  const double two_ln2_m1 = 2.0 * std::log(2.0) - 1.0;
  CHECK(std::abs(mean[0] - two_ln2_m1) <= 1e-9);
  CHECK(std::abs(mean[1] - (1.0 - two_ln2_m1)) <= 1e-9);
  double total = 0.0;
  for (int k = 0; k < mean.size(); ++k) total += mean[k];
  CHECK(std::abs(total - 1.0) <= 1e-9);

  // unsupported atoms stay at exactly zero
  FinitePmf spiked(std::vector<double>{0.9, 0.05, 0.05, 0.0});
  CHECK(perturbed_mean_quadrature(spiked)[3] == 0.0);
}

TEST_CASE("monte carlo mean agrees with quadrature") {
  Stream seeds(2024);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<double> w(4);
    for (double& v : w) v = seeds.next_exponential();
    FinitePmf mu = FinitePmf::normalized(std::move(w));
    FinitePmf quad = perturbed_mean_quadrature(mu);
    Stream stream(900 + trial);
    std::vector<double> se;
    std::vector<double> mc =
        perturbed_mean_mc(mu, 200000, stream, ZeroRule::kNormalizerTrigger, &se);
    for (int k = 0; k < mu.size(); ++k) {
      CHECK(se[k] > 0.0);
      CHECK(std::abs(mc[k] - quad[k]) <= 4.0 * se[k]);
    }
  }
}

}  // TEST_SUITE
