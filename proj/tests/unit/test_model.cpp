#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <vector>

#include "helpers.hpp"
#include "mftg/errors.hpp"
#include "mftg/io.hpp"
#include "mftg/model.hpp"

using namespace mftg;
using namespace mftg_test;

namespace {

// joint law putting all mass on one (joint state, joint action) cell
JointLaw point_law(const MftgSpec& spec, int joint_state, int packed_action) {
  const int nx = spec.num_joint_states();
  int na = 1;
  for (int s : spec.action_sizes) na *= s;
  std::vector<double> w(static_cast<std::size_t>(nx) * na, 0.0);
  w[static_cast<std::size_t>(joint_state) * na + packed_action] = 1.0;
  return JointLaw(nx, spec.action_sizes, std::move(w));
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("index packing is lexicographic") {
  const std::vector<int> sizes{3, 2, 2};
  int packed = 0;
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 2; ++b) {
      for (int c = 0; c < 2; ++c, ++packed) {
        const std::vector<int> coords{a, b, c};
        CHECK(pack_index(sizes, coords) == packed);
        CHECK(unpack_index(sizes, packed) == coords);
        CHECK(coordinate_of(sizes, packed, 0) == a);
        CHECK(coordinate_of(sizes, packed, 2) == c);
      }
    }
  }
}

TEST_CASE("drift validation rejects malformed instances") {
  DriftParams p = coupled_drift();
  p.weights[0][0] = 1;
  CHECK_THROWS_AS(p.validate(), UsageError);

  p = coupled_drift();
  p.targets[1] = 3;
  CHECK_THROWS_AS(p.validate(), UsageError);

  p = coupled_drift();
  p.gamma = 1.0;
  CHECK_THROWS_AS(p.validate(), UsageError);

  p = coupled_drift();
  p.variant = DriftParams::Variant::kPeriodic;  // no idio law given
  CHECK_THROWS_AS(p.validate(), UsageError);

  p = periodic_drift();
  p.idio_weights = {0.5, 0.5, 0.0};  // mean is not zero
  CHECK_THROWS_AS(p.validate(), UsageError);

  p = coupled_drift();
  p.initial.assign(5, 0.2);
  CHECK_THROWS_AS(p.validate(), UsageError);

  CHECK_NOTHROW(coupled_drift().validate());
  CHECK_NOTHROW(periodic_drift().validate());
}

TEST_CASE("drift cost bound and certified horizon") {
  CHECK(coupled_drift().derived_cost_bound() == 4.0);
  CHECK(single_team_drift().derived_cost_bound() == 1.0);
  CHECK(certified_horizon(0.9, 4.0, 1e-4) == 123);
  CHECK(certified_horizon(0.9, 0.0, 1e-4) == 1);
  CHECK_THROWS_AS(certified_horizon(1.0, 4.0, 1e-4), UsageError);
  CHECK_THROWS_AS(certified_horizon(0.9, 4.0, 0.0), UsageError);
}

TEST_CASE("drift cost pulls toward the target and couples teams") {
  const MftgSpec spec = build_drift_model(coupled_drift());
  // both teams parked at (2,0), any action; the cost is action-free
  const int s20 = pack_index(spec.state_sizes, std::vector<int>{2, 0});
  const JointLaw bar = point_law(spec, s20, 0);
  CHECK(stage_cost(spec, 0, 2, 0, bar) == 4.0);  // |2-0| + |2-0|
  CHECK(stage_cost(spec, 1, 0, 1, bar) == 0.0);  // |0-2|=2, minus |0-2|

  DriftParams avoid = coupled_drift();
  avoid.weights = {{0, -1}, {1, 0}};
  const MftgSpec spec2 = build_drift_model(avoid);
  const int s00 = pack_index(spec2.state_sizes, std::vector<int>{0, 0});
  CHECK(stage_cost(spec2, 0, 0, 0, point_law(spec2, s00, 0)) == 0.0);

  CHECK(audit_cost_bound(spec, 300, 5) <= spec.cost_bound);
  CHECK(audit_cost_bound(spec, 300, 5) > 0.0);
}

TEST_CASE("cost bound audit flags violations") {
  MftgSpec spec;
  spec.num_teams = 1;
  spec.state_sizes = {2};
  spec.action_sizes = {2};
  spec.gamma = 0.5;
  spec.cost_bound = 0.5;
  spec.initial_joint = FinitePmf::uniform(2);
  spec.idio_laws = {FiniteNoiseLaw::none()};
  spec.sample_team = {nullptr};
  spec.cost_fn = [](int, int, int, const JointLaw&) { return 1.0; };
  spec.system_fn = [](int, int, int, const JointLaw&, std::span<const double>,
                      std::span<const double>, std::span<const double>) { return 0; };
  CHECK_THROWS_AS(audit_cost_bound(spec, 10, 1), InvariantViolation);
}

TEST_CASE("drift system lands every team on the shared draw") {
  const MftgSpec spec = build_drift_model(coupled_drift());
  // a coordinated joint action law is immune to the perturbation
  const int s20 = pack_index(spec.state_sizes, std::vector<int>{2, 0});
  const int a12 = pack_index(spec.action_sizes, std::vector<int>{1, 2});
  const JointLaw bar = point_law(spec, s20, a12);

  NoiseArchitecture arch(3);
  const CommonNoise common = sample_common_noise(arch, spec, 1, 0);
  REQUIRE(common.global.size() == 1u + 9u);

  const std::vector<int> states{2, 0};
  const std::vector<int> actions{1, 2};
  std::vector<std::span<const double>> idio(2);
  const std::vector<int> next =
      step_system(spec, states, actions, bar, idio, common);
  CHECK(next == std::vector<int>{1, 2});
}

TEST_CASE("periodic variant shifts modulo the grid") {
  const MftgSpec spec = build_drift_model(periodic_drift());
  const int a12 = pack_index(spec.action_sizes, std::vector<int>{1, 2});
  const JointLaw bar = point_law(spec, 0, a12);
  std::vector<double> global{0.0};
  for (int k = 0; k < 9; ++k) global.push_back(1.0);
  const std::vector<double> shift_down{-1.0};
  const int next = spec.system_fn(0, 0, 1, bar, shift_down, {}, global);
  CHECK(next == 0);  // coordinate 1, shifted down, stays on the grid
  const std::vector<double> no_shift{0.0};
  CHECK(spec.system_fn(0, 0, 1, bar, no_shift, {}, global) == 1);
}

TEST_CASE("common noise is a pure function of time and replication") {
  const MftgSpec spec = build_drift_model(coupled_drift());
  NoiseArchitecture arch(17);
  const CommonNoise a = sample_common_noise(arch, spec, 5, 2);
  const CommonNoise b = sample_common_noise(arch, spec, 5, 2);
  CHECK(a.global == b.global);
  const CommonNoise c = sample_common_noise(arch, spec, 6, 2);
  CHECK(a.global != c.global);
}

TEST_CASE("config files round-trip") {
  namespace fs = std::filesystem;
  const std::string path = (fs::temp_directory_path() / "drift_cfg_test.json").string();
  write_text_file(path, R"({
    "model": "drift",
    "G": 3,
    "m": 2,
    "targets": [0, 2],
    "weights": [[0, 1], [-1, 0]],
    "gamma": 0.9,
    "variant": "plain",
    "seeds": {"master": 11},
    "initial": "uniform",
    "zero_rule": "normalizer"
  })");
  const DriftParams p = load_drift_config(path);
  CHECK(p.G == 3);
  CHECK(p.m == 2);
  CHECK(p.targets == std::vector<int>{0, 2});
  CHECK(p.weights[1][0] == -1);
  CHECK(p.gamma == 0.9);
  CHECK(p.master_seed == 11);
  CHECK(p.initial.empty());
  CHECK(p.variant == DriftParams::Variant::kPlain);

  write_text_file(path, R"({"model":"drift","G":2,"m":1,"targets":[0],
    "weights":[[0]],"gamma":0.9,"initial":{"dirac":1}})");
  const DriftParams q = load_drift_config(path);
  REQUIRE(q.initial.size() == 2);
  CHECK(q.initial[1] == 1.0);

  write_text_file(path, "{not json");
  CHECK_THROWS_AS(load_drift_config(path), UsageError);
  write_text_file(path, R"({"model":"other","G":2,"m":1,"targets":[0],
    "weights":[[0]],"gamma":0.9})");
  CHECK_THROWS_AS(load_drift_config(path), UsageError);
  CHECK_THROWS_AS(load_drift_config("/nonexistent/nope.json"), UsageError);
  std::remove(path.c_str());
}

}  // TEST_SUITE
