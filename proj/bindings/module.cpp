// Python bindings for the core operations. Everything returns plain python
// values (lists, dicts, strings); file output stays on the python side.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mftg/bridge.hpp"
#include "mftg/equilibrium.hpp"
#include "mftg/errors.hpp"
#include "mftg/io.hpp"
#include "mftg/lifted.hpp"
#include "mftg/model.hpp"
#include "mftg/pmf.hpp"
#include "mftg/population.hpp"
#include "mftg/reconstruction.hpp"
#include "mftg/rng.hpp"

namespace py = pybind11;
using namespace mftg;

namespace {

struct PyModel {
  DriftParams params;
  MftgSpec spec;
};

PyModel model_from_file(const std::string& path) {
  PyModel m;
  m.params = load_drift_config(path);
  m.spec = build_drift_model(m.params);
  return m;
}

std::vector<double> to_vector(std::span<const double> s) {
  return {s.begin(), s.end()};
}

ZeroRule zero_rule_of(const std::string& name) {
  if (name == "normalizer") return ZeroRule::kNormalizerTrigger;
  if (name == "literal") return ZeroRule::kLiteralTrigger;
  throw UsageError("unknown zero rule '" + name + "' (expected normalizer or literal)");
}

Level0Policy policy_of(const PyModel& m, const std::optional<std::string>& policy_json) {
  if (!policy_json) return uniform_level0_policy(m.spec);
  return level0_policy_from_json(*policy_json, m.spec);
}

KernelOptions kernel_options_of(int mc_samples, std::uint64_t seed, int threads) {
  KernelOptions ko;
  ko.mc_samples = mc_samples;
  ko.seed = seed;
  ko.threads = threads;
  return ko;
}

const char* status_name(SolveStatus s) {
  switch (s) {
    case SolveStatus::kConverged: return "converged";
    case SolveStatus::kCycled: return "cycled";
    case SolveStatus::kIterationCap: return "iteration-cap";
  }
  return "unknown";
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "finite-space laboratory for discounted mean field team games";

  py::register_exception<UsageError>(m, "UsageError", PyExc_ValueError);
  py::register_exception<InvariantViolation>(m, "InvariantViolation",
                                             PyExc_RuntimeError);

  py::class_<FinitePmf>(m, "Pmf")
      .def(py::init([](const std::vector<double>& w) { return FinitePmf(w); }),
           py::arg("weights"))
      .def_static("uniform", &FinitePmf::uniform, py::arg("size"))
      .def_static("dirac", &FinitePmf::dirac, py::arg("size"), py::arg("atom"))
      .def("__len__", &FinitePmf::size)
      .def("__getitem__",
           [](const FinitePmf& p, int i) {
             if (i < 0 || i >= p.size()) throw py::index_error();
             return p[i];
           })
      .def("__eq__",
           [](const FinitePmf& a, const FinitePmf& b) { return a == b; })
      .def_property_readonly(
          "weights", [](const FinitePmf& p) { return to_vector(p.weights()); })
      .def("__repr__", [](const FinitePmf& p) {
        std::string s = "Pmf([";
        for (int i = 0; i < p.size(); ++i) {
          if (i) s += ", ";
          s += fmt17(p[i]);
        }
        return s + "])";
      });

  m.def(
      "linf_distance",
      [](const FinitePmf& a, const FinitePmf& b) { return linf_distance(a, b); },
      py::arg("a"), py::arg("b"));

  m.def(
      "perturbed_mean_quadrature",
      [](const FinitePmf& mu) { return perturbed_mean_quadrature(mu); },
      py::arg("mu"),
      "Exact mean of the exponentially perturbed law, by adaptive quadrature.");

  m.def(
      "perturbed_mean_mc",
      [](const FinitePmf& mu, int samples, std::uint64_t seed,
         const std::string& zero_rule) {
        Stream stream(seed);
        std::vector<double> se;
        const std::vector<double> mean =
            perturbed_mean_mc(mu, samples, stream, zero_rule_of(zero_rule), &se);
        return py::make_tuple(mean, se);
      },
      py::arg("mu"), py::arg("samples"), py::arg("seed") = 1,
      py::arg("zero_rule") = "normalizer",
      "Monte Carlo mean of the perturbed law; returns (means, standard errors).");

  m.def(
      "reconstruct",
      [](const std::vector<double>& mu,
         const std::vector<std::vector<std::vector<double>>>& laws) {
        const FinitePmf base(mu);
        std::vector<TeamStateActionLaw> a_hats;
        a_hats.reserve(laws.size());
        for (const auto& table : laws) {
          const int nx = static_cast<int>(table.size());
          if (nx == 0) throw UsageError("reconstruct: empty state-action table");
          const int na = static_cast<int>(table.front().size());
          std::vector<double> flat;
          flat.reserve(static_cast<std::size_t>(nx) * static_cast<std::size_t>(na));
          for (const auto& row : table) {
            if (static_cast<int>(row.size()) != na)
              throw UsageError("reconstruct: ragged state-action table");
            flat.insert(flat.end(), row.begin(), row.end());
          }
          a_hats.emplace_back(nx, na, flat);
        }
        const XiResult xi = reconstruct_xi(base, a_hats);
        const XiCertificate cert = verify_xi(xi.joint, base, a_hats);
        py::dict d;
        d["joint"] = to_vector(xi.joint.as_pmf().weights());
        d["projected"] = xi.projected;
        d["marginal_residuals"] = cert.marginal_residuals;
        d["product_residual"] = cert.product_residual;
        d["certified"] = cert.certified;
        return d;
      },
      py::arg("mu"), py::arg("laws"),
      "Unique joint law with the given team state-action marginals over a "
      "shared population state; laws[i] is a (joint_state, action) table.");

  py::class_<PyModel>(m, "Model")
      .def_static("from_file", &model_from_file, py::arg("path"))
      .def_property_readonly("num_teams",
                             [](const PyModel& m) { return m.spec.num_teams; })
      .def_property_readonly(
          "num_joint_states",
          [](const PyModel& m) { return m.spec.num_joint_states(); })
      .def_property_readonly("grid_size",
                             [](const PyModel& m) { return m.params.G; })
      .def_property_readonly("gamma",
                             [](const PyModel& m) { return m.spec.gamma; })
      .def_property_readonly("cost_bound",
                             [](const PyModel& m) { return m.spec.cost_bound; })
      .def_property_readonly("variant",
                             [](const PyModel& m) {
                               return m.params.variant == DriftParams::Variant::kPlain
                                          ? "plain"
                                          : "periodic";
                             })
      .def_property_readonly(
          "initial", [](const PyModel& m) { return m.spec.initial_joint; })
      .def(
          "uniform_policy_json",
          [](const PyModel& m) {
            return level0_policy_to_json(uniform_level0_policy(m.spec));
          },
          "Agent-level policy of uniform randomization, as a json document.")
      .def(
          "random_policy_json",
          [](const PyModel& m, int slots, std::uint64_t seed) {
            return level0_policy_to_json(random_level0_policy(m.spec, slots, seed));
          },
          py::arg("slots") = 2, py::arg("seed") = 1,
          "Random stationary agent-level policy, as a json document.")
      .def(
          "enumerate_space",
          [](const PyModel& m, const std::string& backend, int mc_samples,
             std::uint64_t seed) {
            const LiftedStateSpace space =
                enumerate_states(m.spec, m.spec.initial_joint,
                                 parse_backend(backend),
                                 kernel_options_of(mc_samples, seed, 1));
            std::vector<std::vector<double>> out;
            out.reserve(static_cast<std::size_t>(space.size()));
            for (int s = 0; s < space.size(); ++s)
              out.push_back(to_vector(space.state(s).weights()));
            return out;
          },
          py::arg("backend") = "quadrature", py::arg("mc_samples") = 100000,
          py::arg("seed") = 1,
          "All population states reachable from the initial one.")
      .def(
          "dp_value",
          [](const PyModel& m, const std::optional<std::string>& policy_json,
             const std::string& backend, double dp_eps, int mc_samples,
             std::uint64_t seed) {
            const KernelBackend bk = parse_backend(backend);
            const KernelOptions ko = kernel_options_of(mc_samples, seed, 1);
            LiftedStateSpace space =
                enumerate_states(m.spec, m.spec.initial_joint, bk, ko);
            const Level0Policy policy = policy_of(m, policy_json);
            policy.validate(m.spec);
            const Level1Profile profile = lift_policy(m.spec, space, policy);
            DpOptions dp_opt;
            dp_opt.eps = dp_eps;
            const DpResult dp =
                policy_value_dp(m.spec, space, profile, bk, ko, dp_opt);
            py::dict d;
            d["values"] = dp.values;
            d["iterations"] = dp.iterations;
            d["final_delta"] = dp.final_delta;
            d["initial_state"] = space.find(m.spec.initial_joint);
            return d;
          },
          py::arg("policy_json") = std::nullopt,
          py::arg("backend") = "quadrature", py::arg("dp_eps") = 1e-8,
          py::arg("mc_samples") = 100000, py::arg("seed") = 1,
          "Population-level discounted cost of a lifted agent policy, per team "
          "and reachable state.")
      .def(
          "simulate",
          [](const PyModel& m, const std::optional<std::string>& policy_json,
             int horizon, int replications, std::uint64_t seed,
             const std::string& backend, int threads) {
            const Level0Policy policy = policy_of(m, policy_json);
            policy.validate(m.spec);
            SimOptions s;
            s.horizon = horizon > 0 ? horizon : horizon_for_tolerance(m.spec, 1e-4);
            s.replications = replications;
            s.master_seed = seed;
            s.threads = threads;
            s.backend = parse_backend(backend);
            const MeanFieldResult r =
                simulate_meanfield_level0(m.spec, policy, m.spec.initial_joint, s);
            py::dict d;
            d["means"] = r.value.means;
            d["ses"] = r.value.ses;
            d["horizon"] = r.value.horizon;
            d["replications"] = r.value.replications;
            d["truncation_bound"] = r.value.truncation_bound;
            d["xi_consistency_residual"] = r.xi_consistency_residual;
            return d;
          },
          py::arg("policy_json") = std::nullopt, py::arg("horizon") = 0,
          py::arg("replications") = 2000, py::arg("seed") = 1,
          py::arg("backend") = "quadrature", py::arg("threads") = 1,
          "Agent-level discounted cost along the exact population flow; "
          "horizon 0 picks the certified truncation horizon.")
      .def(
          "equivalence",
          [](const PyModel& m, const std::optional<std::string>& policy_json,
             int replications, std::uint64_t seed, const std::string& backend,
             double dp_eps, int mc_samples, int threads) {
            const Level0Policy policy = policy_of(m, policy_json);
            policy.validate(m.spec);
            const KernelBackend bk = parse_backend(backend);
            const KernelOptions ko = kernel_options_of(mc_samples, seed, threads);
            LiftedStateSpace space =
                enumerate_states(m.spec, m.spec.initial_joint, bk, ko);
            EquivalenceOptions opt;
            opt.backend = bk;
            opt.kernel = ko;
            opt.dp.eps = dp_eps;
            opt.replications = replications;
            opt.master_seed = seed;
            opt.threads = threads;
            const CorrespondenceReport rep = equivalence_check(
                m.spec, policy, space, m.spec.initial_joint, opt);
            py::dict d;
            d["dp_values"] = rep.dp_values;
            d["sim_means"] = rep.sim_means;
            d["sim_ses"] = rep.sim_ses;
            d["gaps"] = rep.gaps;
            d["bounds"] = rep.bounds;
            d["truncation_bound"] = rep.truncation_bound;
            d["dp_eps"] = rep.dp_eps;
            d["horizon"] = rep.horizon;
            d["replications"] = rep.replications;
            d["max_lift_residual"] = rep.max_lift_residual;
            d["xi_consistency_residual"] = rep.xi_consistency_residual;
            d["lift_ok"] = rep.lift_ok;
            d["xi_ok"] = rep.xi_ok;
            d["values_match"] = rep.values_match;
            d["pass"] = rep.pass;
            return d;
          },
          py::arg("policy_json") = std::nullopt, py::arg("replications") = 2000,
          py::arg("seed") = 1, py::arg("backend") = "quadrature",
          py::arg("dp_eps") = 1e-8, py::arg("mc_samples") = 100000,
          py::arg("threads") = 1,
          "Checks that the simulated agent-level value of a policy matches the "
          "population-level dp value of its lift, within certified error bars.")
      .def(
          "solve",
          [](const PyModel& m, const std::string& algorithm,
             const std::vector<int>& eta_states,
             const std::vector<double>& eta_weights, int max_iterations,
             double eps, const std::string& backend,
             const std::optional<std::vector<int>>& init_actions,
             const std::string& update_order, int simplex_resolution,
             int mc_samples, std::uint64_t seed) {
            const KernelBackend bk = parse_backend(backend);
            const KernelOptions ko = kernel_options_of(mc_samples, seed, 1);
            LiftedStateSpace space =
                enumerate_states(m.spec, m.spec.initial_joint, bk, ko);
            EquilibriumConfig ec;
            ec.eta_states = eta_states;
            ec.eta_weights = eta_weights;
            ec.max_iterations = max_iterations;
            ec.eps = eps;
            ec.backend = bk;
            ec.kernel = ko;
            if (update_order == "round_robin")
              ec.order = UpdateOrder::kRoundRobin;
            else if (update_order == "simultaneous")
              ec.order = UpdateOrder::kSimultaneous;
            else
              throw UsageError("unknown update order '" + update_order + "'");
            ec.simplex_resolution = simplex_resolution;
            const Level1Profile init =
                init_actions
                    ? constant_action_profile(m.spec, space, *init_actions)
                    : uniform_profile(m.spec, space);
            EquilibriumTrace trace;
            if (algorithm == "best_response")
              trace = best_response_dynamics(m.spec, space, init, ec);
            else if (algorithm == "fictitious_play")
              trace = fictitious_play(m.spec, space, init, ec);
            else
              throw UsageError("unknown algorithm '" + algorithm + "'");
            const EquilibriumIterate& last = trace.final_iterate();
            py::dict d;
            d["status"] = status_name(trace.status);
            d["converged"] = trace.converged();
            d["iterations"] = static_cast<int>(trace.iterates.size()) - 1;
            d["values"] = last.values;
            d["gaps"] = last.gaps;
            d["total_gap"] = last.total_gap;
            d["lifted_states"] = space.size();
            d["trace_csv"] = equilibrium_trace_csv(trace);
            d["profile_json"] = level1_profile_to_json(last.profile);
            return d;
          },
          py::arg("algorithm") = "best_response",
          py::arg("eta_states") = std::vector<int>{0},
          py::arg("eta_weights") = std::vector<double>{1.0},
          py::arg("max_iterations") = 100, py::arg("eps") = 1e-8,
          py::arg("backend") = "quadrature",
          py::arg("init_actions") = std::nullopt,
          py::arg("update_order") = "round_robin",
          py::arg("simplex_resolution") = 0, py::arg("mc_samples") = 100000,
          py::arg("seed") = 1,
          "Equilibrium search by best response dynamics or fictitious play.")
      .def(
          "poc",
          [](const PyModel& m, const std::vector<int>& agent_counts,
             const std::optional<std::string>& policy_json, int replications,
             int horizon, std::uint64_t seed, const std::string& backend,
             int threads) {
            SimOptions s;
            s.horizon = horizon > 0 ? horizon : horizon_for_tolerance(m.spec, 1e-4);
            s.replications = replications;
            s.master_seed = seed;
            s.threads = threads;
            s.backend = parse_backend(backend);
            const Level0Policy policy = policy_of(m, policy_json);
            policy.validate(m.spec);
            const ChaosSweepResult sweep = propagation_of_chaos_sweep(
                m.spec, policy, agent_counts, m.spec.initial_joint, s);
            std::vector<double> gaps;
            std::vector<double> gap_ses;
            for (std::size_t c = 0; c < sweep.agent_counts.size(); ++c) {
              gaps.push_back(sweep.total_gap(c));
              gap_ses.push_back(sweep.total_gap_se(c));
            }
            py::dict d;
            d["agent_counts"] = sweep.agent_counts;
            d["j_mf"] = sweep.j_mf;
            d["mf_se"] = sweep.mf_se;
            d["j_n"] = sweep.j_n;
            d["se"] = sweep.se;
            d["total_gaps"] = gaps;
            d["total_gap_ses"] = gap_ses;
            d["shrink_z_score"] = sweep.shrink_z_score();
            return d;
          },
          py::arg("agent_counts") = std::vector<int>{1, 10, 100},
          py::arg("policy_json") = std::nullopt, py::arg("replications") = 200,
          py::arg("horizon") = 0, py::arg("seed") = 1,
          py::arg("backend") = "quadrature", py::arg("threads") = 1,
          "Finite-population value gap against the mean field value, per "
          "agent count.");
}
