#include <doctest.h>

#include <cmath>
#include <vector>

#include "helpers.hpp"
#include "mftg/errors.hpp"
#include "mftg/lifted.hpp"
#include "mftg/model.hpp"

using namespace mftg;
using namespace mftg_test;

namespace {

// every own state plays the fixed action
TeamStateActionLaw constant_law(const MftgSpec& spec, int team, const FinitePmf& mu,
                                int action) {
  KernelMatrix k(mu.size(), spec.action_sizes[team]);
  const FinitePmf row = FinitePmf::dirac(spec.action_sizes[team], action);
  for (int x = 0; x < mu.size(); ++x) k.set_row(x, row);
  return TeamStateActionLaw::from_mix(mu, k);
}

TeamStateActionLaw mixed_law(const MftgSpec& spec, int team, const FinitePmf& mu,
                             const FinitePmf& action_row) {
  KernelMatrix k(mu.size(), spec.action_sizes[team]);
  for (int x = 0; x < mu.size(); ++x) k.set_row(x, action_row);
  return TeamStateActionLaw::from_mix(mu, k);
}

// single team, two states, identity walk, cost = own state
MftgSpec identity_spec(int num_actions) {
  MftgSpec spec;
  spec.num_teams = 1;
  spec.state_sizes = {2};
  spec.action_sizes = {num_actions};
  spec.gamma = 0.9;
  spec.cost_bound = 1.0;
  spec.initial_joint = FinitePmf::uniform(2);
  spec.idio_laws = {FiniteNoiseLaw::none()};
  spec.cost_fn = [](int, int x, int, const JointLaw&) { return static_cast<double>(x); };
  spec.system_fn = [](int, int x, int, const JointLaw&, std::span<const double>,
                      std::span<const double>, std::span<const double>) { return x; };
  return spec;
}

LiftedStateSpace two_point_space() {
  LiftedStateSpace space(2);
  space.find_or_add(FinitePmf::dirac(2, 0));
  space.find_or_add(FinitePmf::dirac(2, 1));
  return space;
}

KernelOptions mc_options(int samples) {
  KernelOptions opt;
  opt.mc_samples = samples;
  return opt;
}

}  // namespace

TEST_SUITE("lifted") {

TEST_CASE("backend names round trip") {
  for (const auto backend : {KernelBackend::kClosedForm, KernelBackend::kQuadrature,
                             KernelBackend::kMonteCarlo})
    CHECK(parse_backend(backend_name(backend)) == backend);
  CHECK(parse_backend("quadrature") == KernelBackend::kQuadrature);
  CHECK_THROWS_AS(parse_backend("bogus"), UsageError);
}

TEST_CASE("state space deduplicates up to tolerance") {
  LiftedStateSpace space(3);
  CHECK(space.find(FinitePmf::uniform(3)) == -1);
  CHECK(space.find_or_add(FinitePmf::uniform(3)) == 0);
  std::vector<double> nudged{1.0 / 3.0 + 1e-13, 1.0 / 3.0, 1.0 / 3.0 - 1e-13};
  CHECK(space.find_or_add(FinitePmf(nudged)) == 0);
  CHECK(space.find_or_add(FinitePmf::dirac(3, 1)) == 1);
  CHECK(space.size() == 2);
  CHECK(space.find(FinitePmf::dirac(3, 1)) == 1);
  CHECK_THROWS_AS(space.find(FinitePmf::uniform(4)), UsageError);
}

TEST_CASE("drift successor atoms") {
  const MftgSpec plain = build_drift_model(coupled_drift());
  const FinitePmf atom = drift_atom_state(plain, 5);
  CHECK(linf_distance(atom, FinitePmf::dirac(9, 5)) == 0.0);
  CHECK_THROWS_AS(drift_atom_state(plain, 9), UsageError);

  const MftgSpec periodic = build_drift_model(periodic_drift());
  const FinitePmf smoothed = drift_atom_state(periodic, 5);  // action (1,2)
  // each coordinate smears to (center-1, center, center+1) mod 3
  const int c12 = pack_index(periodic.state_sizes, std::vector<int>{1, 2});
  const int c00 = pack_index(periodic.state_sizes, std::vector<int>{0, 0});
  CHECK(smoothed[c12] == doctest::Approx(0.25));
  CHECK(smoothed[c00] == doctest::Approx(1.0 / 16.0));

  CHECK_THROWS_AS(drift_atom_state(identity_spec(1), 0), UsageError);
}

TEST_CASE("closed-form draw follows the product of action marginals") {
  const MftgSpec spec = build_drift_model(coupled_drift());
  const FinitePmf mu = FinitePmf::uniform(9);
  std::vector<TeamStateActionLaw> coordinated{constant_law(spec, 0, mu, 1),
                                              constant_law(spec, 1, mu, 2)};
  CHECK(drift_sample_joint_action_closed_form(spec, coordinated, 0.0) == 5);
  CHECK(drift_sample_joint_action_closed_form(spec, coordinated, 0.999) == 5);

  std::vector<TeamStateActionLaw> flat{mixed_law(spec, 0, mu, FinitePmf::uniform(3)),
                                       mixed_law(spec, 1, mu, FinitePmf::uniform(3))};
  CHECK(drift_sample_joint_action_closed_form(spec, flat, 0.0) == 0);
  CHECK(drift_sample_joint_action_closed_form(spec, flat, 0.999) == 8);
}

TEST_CASE("enumeration closes the drift family") {
  const MftgSpec spec = build_drift_model(coupled_drift());
  LiftedStateSpace space =
      enumerate_states(spec, FinitePmf::uniform(9), KernelBackend::kQuadrature, {});
  CHECK(space.size() == 10);
  CHECK(space.find(FinitePmf::uniform(9)) == 0);
  for (int s = 0; s < 9; ++s) CHECK(space.find(FinitePmf::dirac(9, s)) >= 1);

  const MftgSpec periodic = build_drift_model(periodic_drift());
  LiftedStateSpace smoothed =
      enumerate_states(periodic, FinitePmf::uniform(9), KernelBackend::kQuadrature, {});
  CHECK(smoothed.size() == 10);
  CHECK(smoothed.find(FinitePmf::dirac(9, 4)) == -1);
  CHECK(smoothed.find(drift_atom_state(periodic, 4)) >= 1);

  const MftgSpec single = build_drift_model(single_team_drift());
  LiftedStateSpace small =
      enumerate_states(single, FinitePmf::uniform(2), KernelBackend::kQuadrature, {});
  CHECK(small.size() == 3);
}

TEST_CASE("kernel backends coincide on coordinated actions") {
  const MftgSpec spec = build_drift_model(coupled_drift());
  LiftedStateSpace space =
      enumerate_states(spec, FinitePmf::uniform(9), KernelBackend::kQuadrature, {});
  const FinitePmf mu = FinitePmf::uniform(9);
  std::vector<TeamStateActionLaw> coordinated{constant_law(spec, 0, mu, 1),
                                              constant_law(spec, 1, mu, 2)};
  const int target = space.find(FinitePmf::dirac(9, 5));
  REQUIRE(target >= 0);

  for (const auto backend : {KernelBackend::kClosedForm, KernelBackend::kQuadrature,
                             KernelBackend::kMonteCarlo}) {
    const LiftedKernelRow row =
        kernel_row(spec, space, mu, coordinated, backend, mc_options(4096));
    REQUIRE(row.entries.size() == 1);
    CHECK(row.entries[0].first == target);
    CHECK(std::abs(row.entries[0].second - 1.0) <= 1e-12);
  }
}

TEST_CASE("kernel backends coincide on uniform randomization") {
  const MftgSpec spec = build_drift_model(coupled_drift());
  LiftedStateSpace space =
      enumerate_states(spec, FinitePmf::uniform(9), KernelBackend::kQuadrature, {});
  const FinitePmf mu = FinitePmf::uniform(9);
  std::vector<TeamStateActionLaw> flat{mixed_law(spec, 0, mu, FinitePmf::uniform(3)),
                                       mixed_law(spec, 1, mu, FinitePmf::uniform(3))};

  const FinitePmf closed =
      row_pmf(kernel_row(spec, space, mu, flat, KernelBackend::kClosedForm, {}),
              space.size());
  const FinitePmf quad =
      row_pmf(kernel_row(spec, space, mu, flat, KernelBackend::kQuadrature, {}),
              space.size());
  const int n = 50000;
  const FinitePmf mc =
      row_pmf(kernel_row(spec, space, mu, flat, KernelBackend::kMonteCarlo,
                         mc_options(n)),
              space.size());
  const double se = std::sqrt((1.0 / 9.0) * (8.0 / 9.0) / n);
  for (int s = 0; s < space.size(); ++s) {
    const double expected = s == 0 ? 0.0 : 1.0 / 9.0;
    CHECK(std::abs(closed[s] - expected) <= 1e-12);
    CHECK(std::abs(quad[s] - expected) <= 1e-9);
    CHECK(std::abs(mc[s] - expected) <= 4.0 * se);
  }
}

TEST_CASE("skewed marginals expose the closed-form defect") {
  const MftgSpec spec = build_drift_model(single_team_drift());
  LiftedStateSpace space =
      enumerate_states(spec, FinitePmf::uniform(2), KernelBackend::kQuadrature, {});
  const FinitePmf mu = FinitePmf::uniform(2);
  std::vector<double> skew{1.0 / 3.0, 2.0 / 3.0};
  std::vector<TeamStateActionLaw> a_hats{mixed_law(spec, 0, mu, FinitePmf(skew))};

  const int atom0 = space.find(FinitePmf::dirac(2, 0));
  REQUIRE(atom0 >= 0);
  const FinitePmf closed =
      row_pmf(kernel_row(spec, space, mu, a_hats, KernelBackend::kClosedForm, {}),
              space.size());
  const FinitePmf quad =
      row_pmf(kernel_row(spec, space, mu, a_hats, KernelBackend::kQuadrature, {}),
              space.size());
  const double exact = 2.0 * std::log(2.0) - 1.0;
  CHECK(std::abs(quad[atom0] - exact) <= 1e-9);
  CHECK(std::abs(closed[atom0] - 1.0 / 3.0) <= 1e-15);
  const double gap = quad[atom0] - closed[atom0];
  CHECK(gap > 1e-6);
  CHECK(std::abs(gap - (2.0 * std::log(2.0) - 4.0 / 3.0)) <= 1e-9);

  const int n = 50000;
  const FinitePmf mc =
      row_pmf(kernel_row(spec, space, mu, a_hats, KernelBackend::kMonteCarlo,
                         mc_options(n)),
              space.size());
  const double se = std::sqrt(exact * (1.0 - exact) / n);
  CHECK(std::abs(mc[atom0] - exact) <= 4.0 * se);
}

TEST_CASE("rows respect the enumerated space boundary") {
  const MftgSpec spec = build_drift_model(coupled_drift());
  LiftedStateSpace space(9);
  space.find_or_add(FinitePmf::uniform(9));
  const FinitePmf mu = FinitePmf::uniform(9);
  std::vector<TeamStateActionLaw> coordinated{constant_law(spec, 0, mu, 1),
                                              constant_law(spec, 1, mu, 2)};
  CHECK_THROWS_AS(
      kernel_row(spec, space, mu, coordinated, KernelBackend::kQuadrature, {}),
      InvariantViolation);

  KernelOptions opt;
  opt.extend_space = true;
  const LiftedKernelRow row =
      kernel_row(spec, space, mu, coordinated, KernelBackend::kQuadrature, opt);
  CHECK(space.size() == 2);
  CHECK(row.entries[0].first == 1);

  // action laws must match the queried population state
  std::vector<TeamStateActionLaw> off{constant_law(spec, 0, FinitePmf::dirac(9, 0), 1),
                                      constant_law(spec, 1, mu, 2)};
  CHECK_THROWS_AS(kernel_row(spec, space, mu, off, KernelBackend::kQuadrature, opt),
                  InvariantViolation);
}

TEST_CASE("transition density counts successor atoms") {
  const MftgSpec spec = build_drift_model(coupled_drift());
  const FinitePmf mu = FinitePmf::uniform(9);
  std::vector<TeamStateActionLaw> coordinated{constant_law(spec, 0, mu, 1),
                                              constant_law(spec, 1, mu, 2)};
  CHECK(std::abs(density_q(spec, FinitePmf::dirac(9, 5), mu, coordinated,
                           KernelBackend::kClosedForm) -
                 9.0) <= 1e-9);
  CHECK(std::abs(density_q(spec, FinitePmf::dirac(9, 5), mu, coordinated,
                           KernelBackend::kQuadrature) -
                 9.0) <= 1e-8);
  CHECK(density_q(spec, FinitePmf::dirac(9, 4), mu, coordinated,
                  KernelBackend::kClosedForm) == 0.0);
  CHECK(density_q(spec, FinitePmf::uniform(9), mu, coordinated,
                  KernelBackend::kClosedForm) == 0.0);

  DriftParams small;
  small.G = 2;
  small.m = 2;
  small.targets = {0, 1};
  small.weights = {{0, 1}, {-1, 0}};
  small.gamma = 0.9;
  const MftgSpec pair = build_drift_model(small);
  const FinitePmf mu4 = FinitePmf::uniform(4);
  std::vector<TeamStateActionLaw> flat{mixed_law(pair, 0, mu4, FinitePmf::uniform(2)),
                                       mixed_law(pair, 1, mu4, FinitePmf::uniform(2))};
  for (int atom = 0; atom < 4; ++atom) {
    const FinitePmf target = FinitePmf::dirac(4, atom);
    CHECK(std::abs(density_q(pair, target, mu4, flat, KernelBackend::kClosedForm) -
                   1.0) <= 1e-9);
    CHECK(std::abs(density_q(pair, target, mu4, flat, KernelBackend::kQuadrature) -
                   1.0) <= 1e-8);
  }
  CHECK_THROWS_AS(
      density_q(pair, mu4, mu4, flat, KernelBackend::kMonteCarlo), UsageError);
}

TEST_CASE("lifted cost integrates the stage cost") {
  const MftgSpec spec = build_drift_model(coupled_drift());
  const int s20 = pack_index(spec.state_sizes, std::vector<int>{2, 0});
  const FinitePmf mu = FinitePmf::dirac(9, s20);
  std::vector<TeamStateActionLaw> a_hats{constant_law(spec, 0, mu, 0),
                                         constant_law(spec, 1, mu, 0)};
  CHECK(lift_cost(spec, 0, mu, a_hats) == 4.0);
  CHECK(lift_cost(spec, 1, mu, a_hats) == 0.0);
  CHECK_THROWS_AS(lift_cost(spec, 2, mu, a_hats), UsageError);

  const MftgSpec flat_cost = [] {
    MftgSpec s = identity_spec(2);
    s.cost_fn = [](int, int, int, const JointLaw&) { return 3.25; };
    return s;
  }();
  const FinitePmf half = FinitePmf::uniform(2);
  std::vector<TeamStateActionLaw> mix{
      mixed_law(flat_cost, 0, half, FinitePmf(std::vector<double>{0.3, 0.7}))};
  CHECK(std::abs(lift_cost(flat_cost, 0, half, mix) - 3.25) <= 1e-12);

  const XiResult xi = reconstruct_xi(mu, a_hats);
  CHECK(lift_cost_with_xi(spec, 0, a_hats[0], xi.joint) ==
        lift_cost(spec, 0, mu, a_hats));
}

TEST_CASE("value iteration reproduces closed forms") {
  // constant cost: every state is worth c/(1-gamma)
  MftgSpec constant = identity_spec(1);
  constant.cost_fn = [](int, int, int, const JointLaw&) { return 1.0; };
  LiftedStateSpace space = two_point_space();
  const Level1Profile prof =
      constant_action_profile(constant, space, std::vector<int>{0});
  const DpResult dp = policy_value_dp(constant, space, prof,
                                      KernelBackend::kMonteCarlo, mc_options(64), {});
  REQUIRE(dp.values.size() == 1);
  for (double v : dp.values[0]) CHECK(std::abs(v - 10.0) <= 1e-8);
  CHECK(dp.iterations > 1);

  // deterministic two-state cycle
  MftgSpec cycle = identity_spec(1);
  cycle.cost_bound = 2.0;
  cycle.cost_fn = [](int, int x, int, const JointLaw&) { return x == 0 ? 1.0 : 2.0; };
  cycle.system_fn = [](int, int x, int, const JointLaw&, std::span<const double>,
                       std::span<const double>, std::span<const double>) { return 1 - x; };
  LiftedStateSpace cyc = two_point_space();
  const Level1Profile prof2 =
      constant_action_profile(cycle, cyc, std::vector<int>{0});
  const DpResult dp2 = policy_value_dp(cycle, cyc, prof2, KernelBackend::kMonteCarlo,
                                       mc_options(64), {});
  CHECK(std::abs(dp2.values[0][0] - 2.8 / 0.19) <= 1e-8);
  CHECK(std::abs(dp2.values[0][1] - 2.9 / 0.19) <= 1e-8);
}

TEST_CASE("duplicated slots do not change the value") {
  const MftgSpec spec = build_drift_model(coupled_drift());
  LiftedStateSpace space =
      enumerate_states(spec, FinitePmf::uniform(9), KernelBackend::kQuadrature, {});
  const Level1Profile single = uniform_profile(spec, space);
  Level1Profile doubled = single;
  for (auto& tp : doubled.teams) {
    tp.slot_weights = FinitePmf(std::vector<double>{0.5, 0.5});
    for (auto& per_state : tp.actions) per_state.push_back(per_state[0]);
    tp.vertex.clear();
  }
  const DpResult a = policy_value_dp(spec, space, single,
                                     KernelBackend::kQuadrature, {}, {});
  const DpResult b = policy_value_dp(spec, space, doubled,
                                     KernelBackend::kQuadrature, {}, {});
  for (int i = 0; i < 2; ++i)
    for (int s = 0; s < space.size(); ++s)
      CHECK(std::abs(a.values[i][s] - b.values[i][s]) <= 1e-12);
}

TEST_CASE("value iteration is thread-count invariant") {
  const MftgSpec spec = build_drift_model(coupled_drift());
  LiftedStateSpace space =
      enumerate_states(spec, FinitePmf::uniform(9), KernelBackend::kQuadrature, {});
  const Level1Profile prof = uniform_profile(spec, space);
  KernelOptions par;
  par.threads = 4;
  const DpResult one = policy_value_dp(spec, space, prof,
                                       KernelBackend::kQuadrature, {}, {});
  const DpResult four = policy_value_dp(spec, space, prof,
                                        KernelBackend::kQuadrature, par, {});
  CHECK(one.values == four.values);
  CHECK(one.iterations == four.iterations);
}

TEST_CASE("profile validation rejects off-marginal slots") {
  const MftgSpec spec = build_drift_model(coupled_drift());
  LiftedStateSpace space =
      enumerate_states(spec, FinitePmf::uniform(9), KernelBackend::kQuadrature, {});
  Level1Profile prof = uniform_profile(spec, space);
  CHECK_NOTHROW(prof.validate(spec, space));
  // rebuild one slot against the wrong population state
  prof.teams[0].actions[0][0] = constant_law(spec, 0, FinitePmf::dirac(9, 3), 0);
  CHECK_THROWS_AS(prof.validate(spec, space), InvariantViolation);

  Level1Profile wide = uniform_profile(spec, space);
  wide.teams[0].actions.pop_back();
  CHECK_THROWS_AS(wide.validate(spec, space), UsageError);
}

TEST_CASE("best response matches exhaustive search") {
  const MftgSpec spec = build_drift_model(single_team_drift());
  LiftedStateSpace space =
      enumerate_states(spec, FinitePmf::uniform(2), KernelBackend::kQuadrature, {});
  REQUIRE(space.size() == 3);
  const Level1Profile held = uniform_profile(spec, space);
  const BrResult br = best_response(spec, space, held, 0,
                                    KernelBackend::kQuadrature, {}, {});

  // every assignment of one pure action per enumerated state
  std::vector<double> best(space.size(), 0.0);
  bool first = true;
  for (int mask = 0; mask < 8; ++mask) {
    Level1Profile cand;
    cand.teams.resize(1);
    cand.teams[0].slot_weights = FinitePmf::dirac(1, 0);
    for (int s = 0; s < space.size(); ++s)
      cand.teams[0].actions.push_back(
          {constant_law(spec, 0, space.state(s), (mask >> s) & 1)});
    const DpResult dp = policy_value_dp(spec, space, cand,
                                        KernelBackend::kQuadrature, {}, {});
    for (int s = 0; s < space.size(); ++s)
      best[s] = first ? dp.values[0][s] : std::min(best[s], dp.values[0][s]);
    first = false;
  }
  for (int s = 0; s < space.size(); ++s)
    CHECK(std::abs(br.values[s] - best[s]) <= 2e-8);

  // moving toward the origin is optimal, and the policy is admissible
  for (int s = 0; s < space.size(); ++s) CHECK(br.chosen[s] == 0);
  Level1Profile wrapped;
  wrapped.teams = {br.policy};
  CHECK_NOTHROW(wrapped.validate(spec, space));
}

TEST_CASE("finer action grids never do worse") {
  const MftgSpec spec = build_drift_model(single_team_drift());
  LiftedStateSpace space =
      enumerate_states(spec, FinitePmf::uniform(2), KernelBackend::kQuadrature, {});
  const Level1Profile held = uniform_profile(spec, space);
  const BrResult vertex = best_response(spec, space, held, 0,
                                        KernelBackend::kQuadrature, {}, {});
  BrOptions fine;
  fine.simplex_resolution = 4;
  const BrResult refined = best_response(spec, space, held, 0,
                                         KernelBackend::kQuadrature, {}, fine);
  for (int s = 0; s < space.size(); ++s) {
    CHECK(refined.values[s] <= vertex.values[s] + 2e-8);
    // pure pull toward the origin is already optimal here
    CHECK(std::abs(refined.values[s] - vertex.values[s]) <= 2e-8);
  }

  BrOptions huge;
  huge.simplex_resolution = 500;
  CHECK_THROWS_AS(best_response(spec, space, held, 0, KernelBackend::kQuadrature,
                                {}, huge),
                  UsageError);
}

TEST_CASE("equivalent actions tie toward the lowest index") {
  const MftgSpec spec = identity_spec(2);  // both actions behave identically
  LiftedStateSpace space = two_point_space();
  const Level1Profile held = uniform_profile(spec, space);
  const BrResult br = best_response(spec, space, held, 0,
                                    KernelBackend::kMonteCarlo, mc_options(64), {});
  for (int s = 0; s < space.size(); ++s) CHECK(br.chosen[s] == 0);
}

}  // TEST_SUITE
