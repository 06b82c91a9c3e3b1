// Command line front end: loads one json experiment config, runs a
// subcommand, and writes csv tables plus a json summary into --out.
// Reruns with the same config and master seed produce byte-identical files.

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mftg/bridge.hpp"
#include "mftg/equilibrium.hpp"
#include "mftg/errors.hpp"
#include "mftg/io.hpp"
#include "mftg/json_io.hpp"
#include "mftg/lifted.hpp"
#include "mftg/model.hpp"
#include "mftg/pmf.hpp"
#include "mftg/population.hpp"
#include "mftg/reconstruction.hpp"
#include "mftg/rng.hpp"

namespace {

using nlohmann::json;
using nlohmann::ordered_json;
using namespace mftg;

struct CliArgs {
  std::string config_path;
  std::string out_dir;
  std::string backend_flag;
  std::uint64_t seed_flag = 0;
  bool seed_set = false;
  int threads = 1;
};

// Everything a subcommand needs: the parsed config, the model built from it,
// and the effective seed/backend/threads after flag overrides.
struct Run {
  json cfg;
  std::string config_path;
  DriftParams params;
  MftgSpec spec;
  std::uint64_t seed = 1;
  KernelBackend backend = KernelBackend::kQuadrature;
  int threads = 1;
  std::filesystem::path out;
  KernelOptions kernel;
  double dp_eps = 1e-8;
};

json parse_config(const std::string& path) {
  const std::string text = read_text_file(path);
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw UsageError("config " + path + ": " + e.what());
  }
}

// Paths inside the config resolve relative to the config file's directory.
std::string resolve_near_config(const Run& r, const std::string& rel) {
  const std::filesystem::path p(rel);
  if (p.is_absolute()) return rel;
  return (std::filesystem::path(r.config_path).parent_path() / p).string();
}

Run make_run(const CliArgs& args) {
  Run r;
  r.cfg = parse_config(args.config_path);
  if (!r.cfg.is_object())
    throw UsageError("config " + args.config_path + ": expected a json object");
  r.config_path = args.config_path;

  std::string model_path = args.config_path;
  if (r.cfg.contains("model_file")) {
    if (!r.cfg.at("model_file").is_string())
      throw UsageError("config model_file: expected a path string");
    model_path = resolve_near_config(r, r.cfg.at("model_file").get<std::string>());
  }
  r.params = load_drift_config(model_path);
  if (args.seed_set) r.params.master_seed = args.seed_flag;
  r.seed = r.params.master_seed;
  r.spec = build_drift_model(r.params);

  const std::string backend_str = args.backend_flag.empty()
      ? r.cfg.value("backend", std::string("quadrature"))
      : args.backend_flag;
  r.backend = parse_backend(backend_str);
  r.threads = args.threads;

  r.out = args.out_dir;
  std::error_code ec;
  std::filesystem::create_directories(r.out, ec);
  if (ec)
    throw UsageError("cannot create output directory " + args.out_dir + ": " +
                     ec.message());

  r.kernel.mc_samples = r.cfg.value("mc_samples", 100000);
  if (r.kernel.mc_samples < 1)
    throw UsageError("config mc_samples: need at least one sample");
  r.kernel.seed = r.seed;
  r.kernel.threads = r.threads;
  r.dp_eps = r.cfg.value("dp_eps", 1e-8);
  if (r.dp_eps <= 0.0) throw UsageError("config dp_eps: must be positive");
  return r;
}

std::string out_file(const Run& r, const char* name) {
  return (r.out / name).string();
}

ordered_json num_array(std::span<const double> v) {
  ordered_json a = ordered_json::array();
  for (double x : v) a.push_back(x);
  return a;
}

ordered_json int_array(std::span<const int> v) {
  ordered_json a = ordered_json::array();
  for (int x : v) a.push_back(x);
  return a;
}

// Common preamble of every summary document. Deliberately excludes the
// output directory and thread count so reruns byte-match across both.
ordered_json summary_head(const Run& r, const char* kind) {
  ordered_json j;
  j["schema_version"] = 1;
  j["kind"] = kind;
  j["master_seed"] = r.seed;
  j["backend"] = backend_name(r.backend);
  ordered_json model;
  model["G"] = r.params.G;
  model["m"] = r.params.m;
  model["gamma"] = r.params.gamma;
  model["variant"] =
      r.params.variant == DriftParams::Variant::kPlain ? "plain" : "periodic";
  model["cost_bound"] = r.spec.cost_bound;
  j["model"] = std::move(model);
  return j;
}

void write_summary(const Run& r, const char* name, const ordered_json& j) {
  write_text_file(out_file(r, name), dump_json17(j));
}

Level0Policy policy_from_config(const Run& r) {
  if (!r.cfg.contains("policy")) return uniform_level0_policy(r.spec);
  const json& p = r.cfg.at("policy");
  if (p.is_string()) {
    if (p.get<std::string>() == "uniform") return uniform_level0_policy(r.spec);
    throw UsageError("config policy: unknown shorthand '" +
                     p.get<std::string>() + "'");
  }
  if (!p.is_object()) throw UsageError("config policy: expected object or string");
  const std::string kind = p.value("kind", std::string("uniform"));
  if (kind == "uniform") return uniform_level0_policy(r.spec);
  if (kind == "random") {
    const int slots = p.value("slots", 2);
    return random_level0_policy(r.spec, slots, p.value("seed", r.seed));
  }
  if (kind == "constant") {
    const std::vector<int> actions = p.at("actions").get<std::vector<int>>();
    return constant_level0_policy(r.spec, actions);
  }
  if (kind == "file") {
    const std::string path = resolve_near_config(r, p.at("path").get<std::string>());
    return level0_policy_from_json(read_text_file(path), r.spec);
  }
  throw UsageError("config policy: unknown kind '" + kind + "'");
}

SimOptions sim_options(const Run& r, int default_replications) {
  SimOptions s;
  s.horizon = r.cfg.value(
      "horizon", horizon_for_tolerance(r.spec, r.cfg.value("horizon_tol", 1e-4)));
  s.replications = r.cfg.value("replications", default_replications);
  if (s.horizon < 1) throw UsageError("config horizon: need at least one step");
  if (s.replications < 1)
    throw UsageError("config replications: need at least one");
  s.master_seed = r.seed;
  s.threads = r.threads;
  s.backend = r.backend;
  const std::string input = r.cfg.value("policy_input", std::string("empirical"));
  if (input == "empirical") s.policy_input = PolicyInput::kEmpirical;
  else if (input == "tracked") s.policy_input = PolicyInput::kTracked;
  else throw UsageError("config policy_input: expected empirical or tracked");
  s.trajectory_replications = r.cfg.value("trajectory_replications", 0);
  return s;
}

EquilibriumConfig equilibrium_config(const Run& r) {
  EquilibriumConfig ec;
  ec.eta_states = {0};
  ec.eta_weights = {1.0};
  if (r.cfg.contains("eta")) {
    const json& e = r.cfg.at("eta");
    ec.eta_states = e.at("states").get<std::vector<int>>();
    ec.eta_weights = e.at("weights").get<std::vector<double>>();
  }
  ec.max_iterations = r.cfg.value("max_iterations", 100);
  ec.eps = r.cfg.value("eps", 1e-8);
  ec.backend = r.backend;
  ec.kernel = r.kernel;
  const std::string order = r.cfg.value("update_order", std::string("round_robin"));
  if (order == "round_robin") ec.order = UpdateOrder::kRoundRobin;
  else if (order == "simultaneous") ec.order = UpdateOrder::kSimultaneous;
  else throw UsageError("config update_order: expected round_robin or simultaneous");
  ec.simplex_resolution = r.cfg.value("simplex_resolution", 0);
  return ec;
}

// ---------------------------------------------------------------- perturb

struct NamedPmf {
  std::string name;
  FinitePmf mu;
};

std::vector<NamedPmf> base_pmfs(const Run& r) {
  std::vector<NamedPmf> out;
  if (r.cfg.contains("pmfs")) {
    for (const json& e : r.cfg.at("pmfs")) {
      const std::string name = e.at("name").get<std::string>();
      try {
        if (e.contains("uniform"))
          out.push_back({name, FinitePmf::uniform(e.at("uniform").get<int>())});
        else
          out.push_back({name, FinitePmf(e.at("weights").get<std::vector<double>>())});
      } catch (const InvariantViolation& iv) {
        throw UsageError("config pmfs entry '" + name + "': " + iv.what());
      }
    }
    if (out.empty()) throw UsageError("config pmfs: empty list");
    return out;
  }
  // Defaults: a spiked law on the model's joint space, the uniform law, and
  // a two-atom skewed law whose perturbed mean visibly leaves the base point.
  const int n = r.spec.num_joint_states();
  std::vector<double> spiked(static_cast<std::size_t>(n), 0.0);
  if (n >= 3) {
    spiked[0] = 0.9;
    spiked[1] = 0.05;
    spiked[2] = 0.05;
  } else if (n == 2) {
    spiked[0] = 0.9;
    spiked[1] = 0.1;
  } else {
    spiked[0] = 1.0;
  }
  out.push_back({"spiked", FinitePmf(spiked)});
  out.push_back({"uniform", FinitePmf::uniform(n)});
  out.push_back({"skewed", FinitePmf(std::vector<double>{1.0 / 3.0, 2.0 / 3.0})});
  return out;
}

int cmd_perturb_stats(const Run& r) {
  const std::vector<NamedPmf> bases = base_pmfs(r);
  const int samples = r.cfg.value("samples", 100000);
  const int sample_rows = r.cfg.value("sample_rows", 8);
  if (samples < 1) throw UsageError("config samples: need at least one");
  if (sample_rows < 0) throw UsageError("config sample_rows: negative");

  NoiseArchitecture arch(r.seed);
  CsvWriter draws(out_file(r, "perturb_samples.csv"),
                  {"pmf", "sample", "atom", "weight"});
  CsvWriter succ(out_file(r, "perturb_successors.csv"),
                 {"pmf", "sample", "successor"});
  CsvWriter means(out_file(r, "perturb_means.csv"),
                  {"pmf", "atom", "base", "mc_mean", "mc_se", "quadrature_mean",
                   "abs_gap"});

  ordered_json rows = ordered_json::array();
  for (std::size_t p = 0; p < bases.size(); ++p) {
    const FinitePmf& mu = bases[p].mu;
    const int n = mu.size();

    // A few explicit perturbation draws plus the successor atom each selects.
    Stream draw_stream =
        arch.stream(StreamKind::kGlobalCommon, 0, static_cast<int>(p), 0, 0);
    bool support_preserved = true;
    for (int s = 0; s < sample_rows; ++s) {
      std::vector<double> z(static_cast<std::size_t>(n));
      for (double& v : z) v = draw_stream.next_exponential();
      const FinitePmf zmu = perturb(mu, PerturbationVector(z), r.params.zero_rule);
      for (int k = 0; k < n; ++k) {
        draws.row({bases[p].name, fmt_int(s), fmt_int(k), fmt17(zmu[k])});
        if (zmu[k] > 0.0 && mu[k] == 0.0) support_preserved = false;
      }
      succ.row({bases[p].name, fmt_int(s),
                fmt_int(inverse_cdf_sample(zmu, draw_stream.next_uniform()))});
    }

    Stream mc_stream =
        arch.stream(StreamKind::kGlobalCommon, 0, static_cast<int>(p), 1, 0);
    std::vector<double> se;
    const std::vector<double> mc =
        perturbed_mean_mc(mu, samples, mc_stream, r.params.zero_rule, &se);
    const FinitePmf quad = perturbed_mean_quadrature(mu);

    double quad_sum = 0.0;
    double max_gap = 0.0;
    double mean_shift = 0.0;
    bool within = true;
    for (int k = 0; k < n; ++k) {
      const double gap = std::abs(mc[static_cast<std::size_t>(k)] - quad[k]);
      means.row({bases[p].name, fmt_int(k), fmt17(mu[k]),
                 fmt17(mc[static_cast<std::size_t>(k)]),
                 fmt17(se[static_cast<std::size_t>(k)]), fmt17(quad[k]),
                 fmt17(gap)});
      quad_sum += quad[k];
      max_gap = std::max(max_gap, gap);
      mean_shift = std::max(mean_shift, std::abs(quad[k] - mu[k]));
      within = within && gap <= 4.0 * se[static_cast<std::size_t>(k)] + 1e-12;
    }

    ordered_json e;
    e["name"] = bases[p].name;
    e["atoms"] = n;
    e["quadrature_sum"] = quad_sum;
    e["max_abs_gap_mc_vs_quadrature"] = max_gap;
    e["mc_within_4se"] = within;
    e["mean_shift_linf"] = mean_shift;
    e["support_preserved"] = support_preserved;
    rows.push_back(std::move(e));
  }
  draws.close();
  succ.close();
  means.close();

  ordered_json summary = summary_head(r, "perturb_stats");
  summary["samples"] = samples;
  summary["sample_rows"] = sample_rows;
  summary["pmfs"] = std::move(rows);
  write_summary(r, "perturb_stats_summary.json", summary);
  return 0;
}

// ----------------------------------------------------------------- kernel

// Lifted action for one team: a law on joint states times own actions whose
// state marginal is mu0, assembled from one action row per joint state.
TeamStateActionLaw law_from_rows(const MftgSpec& spec, const FinitePmf& mu0,
                                 int team,
                                 const std::vector<FinitePmf>& action_rows) {
  const int nx = spec.num_joint_states();
  KernelMatrix k(nx, spec.action_sizes[static_cast<std::size_t>(team)]);
  for (int x = 0; x < nx; ++x)
    k.set_row(x, action_rows[static_cast<std::size_t>(x)]);
  return TeamStateActionLaw::from_mix(mu0, k);
}

int cmd_kernel_check(const Run& r) {
  const int pairs = r.cfg.value("pairs", 8);
  if (pairs < 0) throw UsageError("config pairs: negative");
  const FinitePmf& mu0 = r.spec.initial_joint;
  LiftedStateSpace space =
      enumerate_states(r.spec, mu0, KernelBackend::kQuadrature, r.kernel);
  NoiseArchitecture arch(r.seed);

  struct Case {
    std::string name;
    std::vector<TeamStateActionLaw> a_hats;
  };
  std::vector<Case> cases;

  const std::size_t nx = static_cast<std::size_t>(r.spec.num_joint_states());
  // Coordinated: every team plays action 0 outright; the perturbed joint
  // action marginal is a point mass, so all backends must agree exactly.
  {
    std::vector<TeamStateActionLaw> laws;
    for (int i = 0; i < r.spec.num_teams; ++i) {
      const int na = r.spec.action_sizes[static_cast<std::size_t>(i)];
      std::vector<double> w(static_cast<std::size_t>(na), 0.0);
      w[0] = 1.0;
      laws.push_back(law_from_rows(r.spec, mu0, i,
                                   std::vector<FinitePmf>(nx, FinitePmf(w))));
    }
    cases.push_back({"coordinated", std::move(laws)});
  }
  // Uniform randomization: the perturbed mean equals the base by symmetry.
  {
    std::vector<TeamStateActionLaw> laws;
    for (int i = 0; i < r.spec.num_teams; ++i) {
      const int na = r.spec.action_sizes[static_cast<std::size_t>(i)];
      laws.push_back(law_from_rows(
          r.spec, mu0, i, std::vector<FinitePmf>(nx, FinitePmf::uniform(na))));
    }
    cases.push_back({"uniform", std::move(laws)});
  }
  // Skewed: action weights proportional to 1..na; the closed form keeps the
  // raw marginal while the true perturbed mean drifts away from it.
  {
    std::vector<TeamStateActionLaw> laws;
    for (int i = 0; i < r.spec.num_teams; ++i) {
      const int na = r.spec.action_sizes[static_cast<std::size_t>(i)];
      std::vector<double> w(static_cast<std::size_t>(na));
      for (int a = 0; a < na; ++a) w[static_cast<std::size_t>(a)] = a + 1.0;
      laws.push_back(law_from_rows(
          r.spec, mu0, i,
          std::vector<FinitePmf>(nx, FinitePmf::normalized(w))));
    }
    cases.push_back({"skewed", std::move(laws)});
  }
  for (int k = 0; k < pairs; ++k) {
    std::vector<TeamStateActionLaw> laws;
    for (int i = 0; i < r.spec.num_teams; ++i) {
      Stream st = arch.stream(StreamKind::kIndividualRandomization, i, k, 0, 0);
      const int na = r.spec.action_sizes[static_cast<std::size_t>(i)];
      std::vector<FinitePmf> rows;
      rows.reserve(nx);
      for (std::size_t x = 0; x < nx; ++x) {
        std::vector<double> w(static_cast<std::size_t>(na));
        for (double& v : w) v = st.next_exponential();
        rows.push_back(FinitePmf::normalized(w));
      }
      laws.push_back(law_from_rows(r.spec, mu0, i, rows));
    }
    cases.push_back({"random_" + fmt_int(k), std::move(laws)});
  }

  // Per-entry mc error is at most 0.5/sqrt(n) one sigma; allow four.
  const double tol_quad = 1e-9;
  const double tol_mc = 2.0 / std::sqrt(static_cast<double>(r.kernel.mc_samples));

  CsvWriter csv(out_file(r, "kernel_check.csv"),
                {"case", "mass_closed_form", "mass_quadrature", "mass_mc",
                 "linf_closed_vs_quadrature", "linf_quadrature_vs_mc",
                 "mc_within_tolerance", "closed_form_matches"});

  double max_cq = 0.0;
  double max_qm = 0.0;
  bool symmetric_ok = true;
  bool skew_flagged = false;
  bool all_mc_ok = true;
  ordered_json jcases = ordered_json::array();
  for (const Case& c : cases) {
    const LiftedKernelRow raw_cf =
        kernel_row(r.spec, space, mu0, c.a_hats, KernelBackend::kClosedForm, r.kernel);
    const LiftedKernelRow raw_q =
        kernel_row(r.spec, space, mu0, c.a_hats, KernelBackend::kQuadrature, r.kernel);
    const LiftedKernelRow raw_mc =
        kernel_row(r.spec, space, mu0, c.a_hats, KernelBackend::kMonteCarlo, r.kernel);
    const FinitePmf p_cf = row_pmf(raw_cf, space.size());
    const FinitePmf p_q = row_pmf(raw_q, space.size());
    const FinitePmf p_mc = row_pmf(raw_mc, space.size());

    const double cq = linf_distance(p_cf, p_q);
    const double qm = linf_distance(p_q, p_mc);
    const bool mc_ok = qm <= tol_mc;
    const bool cf_ok = cq <= tol_quad;
    max_cq = std::max(max_cq, cq);
    max_qm = std::max(max_qm, qm);
    all_mc_ok = all_mc_ok && mc_ok;
    if (c.name == "coordinated" || c.name == "uniform")
      symmetric_ok = symmetric_ok && cf_ok;
    if (c.name == "skewed") skew_flagged = cq > 1e-6;

    csv.row({c.name, fmt17(raw_cf.mass()), fmt17(raw_q.mass()),
             fmt17(raw_mc.mass()), fmt17(cq), fmt17(qm), mc_ok ? "1" : "0",
             cf_ok ? "1" : "0"});
    ordered_json e;
    e["name"] = c.name;
    e["mass_closed_form"] = raw_cf.mass();
    e["mass_quadrature"] = raw_q.mass();
    e["mass_mc"] = raw_mc.mass();
    e["linf_closed_vs_quadrature"] = cq;
    e["linf_quadrature_vs_mc"] = qm;
    e["mc_within_tolerance"] = mc_ok;
    e["closed_form_matches"] = cf_ok;
    jcases.push_back(std::move(e));
  }
  csv.close();

  ordered_json summary = summary_head(r, "kernel_check");
  summary["random_pairs"] = pairs;
  summary["mc_samples"] = r.kernel.mc_samples;
  summary["mc_tolerance"] = tol_mc;
  summary["lifted_states"] = space.size();
  summary["cases"] = std::move(jcases);
  summary["max_linf_closed_vs_quadrature"] = max_cq;
  summary["max_linf_quadrature_vs_mc"] = max_qm;
  summary["symmetric_cases_consistent"] = symmetric_ok;
  summary["skewed_gap_flagged"] = skew_flagged;
  summary["all_mc_within_tolerance"] = all_mc_ok;
  write_summary(r, "kernel_check_summary.json", summary);
  return 0;
}

// ------------------------------------------------------------------ value

void write_trajectories(const Run& r, const char* name,
                        const std::vector<TrajectoryRow>& rows) {
  if (rows.empty()) return;
  CsvWriter csv(out_file(r, name),
                {"replication", "time", "team", "agent", "state", "action"});
  for (const TrajectoryRow& t : rows)
    csv.row({fmt_int(t.replication), fmt_int(t.time), fmt_int(t.team),
             fmt_int(t.agent), fmt_int(t.state), fmt_int(t.action)});
  csv.close();
}

int cmd_value(const Run& r) {
  const Level0Policy policy = policy_from_config(r);
  policy.validate(r.spec);
  const SimOptions sim = sim_options(r, 2000);
  const FinitePmf& mu0 = r.spec.initial_joint;

  const MeanFieldResult mf = simulate_meanfield_level0(r.spec, policy, mu0, sim);

  LiftedStateSpace space = enumerate_states(r.spec, mu0, r.backend, r.kernel);
  const Level1Profile profile = lift_policy(r.spec, space, policy);
  profile.validate(r.spec, space);
  DpOptions dp_opt;
  dp_opt.eps = r.dp_eps;
  const DpResult dp =
      policy_value_dp(r.spec, space, profile, r.backend, r.kernel, dp_opt);
  const int s0 = space.find(mu0);
  if (s0 < 0)
    throw InvariantViolation(
        "initial population state missing from the enumerated space");

  CsvWriter csv(out_file(r, "value.csv"),
                {"team", "dp_value", "mc_mean", "mc_se", "abs_gap", "bound",
                 "within_bound"});
  bool all_within = true;
  ordered_json teams = ordered_json::array();
  for (int i = 0; i < r.spec.num_teams; ++i) {
    const double dpv = dp.values[static_cast<std::size_t>(i)][static_cast<std::size_t>(s0)];
    const double mean = mf.value.means[static_cast<std::size_t>(i)];
    const double se = mf.value.ses[static_cast<std::size_t>(i)];
    const double gap = std::abs(dpv - mean);
    const double bound = 3.0 * se + mf.value.truncation_bound + 2.0 * r.dp_eps;
    const bool ok = gap <= bound;
    all_within = all_within && ok;
    csv.row({fmt_int(i), fmt17(dpv), fmt17(mean), fmt17(se), fmt17(gap),
             fmt17(bound), ok ? "1" : "0"});
    ordered_json t;
    t["team"] = i;
    t["dp_value"] = dpv;
    t["mc_mean"] = mean;
    t["mc_se"] = se;
    t["abs_gap"] = gap;
    t["bound"] = bound;
    t["within_bound"] = ok;
    teams.push_back(std::move(t));
  }
  csv.close();
  write_trajectories(r, "value_trajectories.csv", mf.trajectories);

  ordered_json summary = summary_head(r, "value");
  summary["horizon"] = mf.value.horizon;
  summary["replications"] = mf.value.replications;
  summary["truncation_bound"] = mf.value.truncation_bound;
  summary["dp_eps"] = r.dp_eps;
  summary["dp_iterations"] = dp.iterations;
  summary["lifted_states"] = space.size();
  summary["xi_consistency_residual"] = mf.xi_consistency_residual;
  summary["teams"] = std::move(teams);
  summary["all_within_bound"] = all_within;
  write_summary(r, "value_summary.json", summary);
  return 0;
}

// ----------------------------------------------------------------- bridge

int cmd_bridge_check(const Run& r) {
  const Level0Policy policy = policy_from_config(r);
  policy.validate(r.spec);
  EquivalenceOptions opt;
  opt.backend = r.backend;
  opt.kernel = r.kernel;
  opt.dp.eps = r.dp_eps;
  opt.replications = r.cfg.value("replications", 2000);
  opt.horizon_tol = r.cfg.value("horizon_tol", 1e-4);
  if (opt.replications < 1)
    throw UsageError("config replications: need at least one");
  if (opt.horizon_tol <= 0.0)
    throw UsageError("config horizon_tol: must be positive");
  opt.master_seed = r.seed;
  opt.threads = r.threads;

  const FinitePmf& mu0 = r.spec.initial_joint;
  LiftedStateSpace space = enumerate_states(r.spec, mu0, r.backend, r.kernel);
  const CorrespondenceReport report =
      equivalence_check(r.spec, policy, space, mu0, opt);

  CsvWriter csv(out_file(r, "bridge_check.csv"),
                {"team", "dp_value", "sim_mean", "sim_se", "abs_gap", "bound",
                 "within_bound"});
  for (int i = 0; i < r.spec.num_teams; ++i) {
    const std::size_t k = static_cast<std::size_t>(i);
    csv.row({fmt_int(i), fmt17(report.dp_values[k]), fmt17(report.sim_means[k]),
             fmt17(report.sim_ses[k]), fmt17(report.gaps[k]),
             fmt17(report.bounds[k]),
             report.gaps[k] <= report.bounds[k] ? "1" : "0"});
  }
  csv.close();
  write_text_file(out_file(r, "bridge_check_summary.json"),
                  correspondence_report_json(report));
  return 0;
}

// ------------------------------------------------------------------ solve

Level1Profile initial_profile(const Run& r, const LiftedStateSpace& space) {
  if (!r.cfg.contains("init")) return uniform_profile(r.spec, space);
  const json& g = r.cfg.at("init");
  if (g.is_string()) {
    if (g.get<std::string>() == "uniform") return uniform_profile(r.spec, space);
    throw UsageError("config init: unknown shorthand '" + g.get<std::string>() +
                     "'");
  }
  if (!g.is_object()) throw UsageError("config init: expected object or string");
  const std::string kind = g.value("kind", std::string("uniform"));
  if (kind == "uniform") return uniform_profile(r.spec, space);
  if (kind == "constant") {
    const std::vector<int> actions = g.at("actions").get<std::vector<int>>();
    if (static_cast<int>(actions.size()) != r.spec.num_teams)
      throw UsageError("config init: one action per team");
    return constant_action_profile(r.spec, space, actions);
  }
  if (kind == "file") {
    const std::string path = resolve_near_config(r, g.at("path").get<std::string>());
    return level1_profile_from_json(read_text_file(path), r.spec, space);
  }
  throw UsageError("config init: unknown kind '" + kind + "'");
}

int cmd_solve(const Run& r) {
  const FinitePmf& mu0 = r.spec.initial_joint;
  LiftedStateSpace space = enumerate_states(r.spec, mu0, r.backend, r.kernel);
  const EquilibriumConfig ec = equilibrium_config(r);
  const Level1Profile init = initial_profile(r, space);
  init.validate(r.spec, space);

  const std::string algorithm =
      r.cfg.value("algorithm", std::string("best_response"));
  EquilibriumTrace trace;
  if (algorithm == "best_response")
    trace = best_response_dynamics(r.spec, space, init, ec);
  else if (algorithm == "fictitious_play")
    trace = fictitious_play(r.spec, space, init, ec);
  else
    throw UsageError(
        "config algorithm: expected best_response or fictitious_play");

  write_text_file(out_file(r, "solve_trace.csv"), equilibrium_trace_csv(trace));
  const EquilibriumIterate& last = trace.final_iterate();
  write_text_file(out_file(r, "solve_profile.json"),
                  level1_profile_to_json(last.profile));

  // Independent re-audit of the reported profile; for a converged run this
  // is the certificate that no team improves by more than twice eps.
  const ExploitabilityResult audit = exploitability(r.spec, space, last.profile, ec);

  const char* reason = "iteration-cap";
  if (trace.status == SolveStatus::kConverged) reason = "fixed-point";
  if (trace.status == SolveStatus::kCycled) reason = "cycle";

  ordered_json summary = summary_head(r, "solve");
  summary["algorithm"] = algorithm;
  summary["update_order"] =
      ec.order == UpdateOrder::kRoundRobin ? "round_robin" : "simultaneous";
  summary["eps"] = ec.eps;
  summary["max_iterations"] = ec.max_iterations;
  ordered_json eta;
  eta["states"] = int_array(ec.eta_states);
  eta["weights"] = num_array(ec.eta_weights);
  summary["eta"] = std::move(eta);
  summary["lifted_states"] = space.size();
  summary["status"] = trace.converged() ? "converged" : "not-converged";
  summary["stop_reason"] = reason;
  summary["iterations"] = static_cast<int>(trace.iterates.size()) - 1;
  summary["initial_total_gap"] = trace.iterates.front().total_gap;
  summary["final_total_gap"] = last.total_gap;
  summary["final_values"] = num_array(last.values);
  summary["final_gaps"] = num_array(last.gaps);
  ordered_json cert;
  cert["values"] = num_array(audit.values);
  cert["best_response_values"] = num_array(audit.br_values);
  cert["gaps"] = num_array(audit.gaps);
  cert["total_gap"] = audit.total;
  cert["nash_within_tol"] = audit.nash_within_tol;
  cert["certified"] = trace.converged() && audit.nash_within_tol;
  summary["certificate"] = std::move(cert);
  write_summary(r, "solve_summary.json", summary);
  return 0;
}

// -------------------------------------------------------------------- poc

int cmd_poc(const Run& r) {
  const Level0Policy policy = policy_from_config(r);
  policy.validate(r.spec);
  std::vector<int> counts{1, 10, 100, 1000};
  if (r.cfg.contains("agent_counts"))
    counts = r.cfg.at("agent_counts").get<std::vector<int>>();
  if (counts.empty()) throw UsageError("config agent_counts: empty list");
  for (int n : counts)
    if (n < 1) throw UsageError("config agent_counts: counts must be positive");
  const SimOptions sim = sim_options(r, 500);
  const FinitePmf& mu0 = r.spec.initial_joint;

  std::optional<std::vector<double>> reference;
  if (r.cfg.value("exact_reference", false)) {
    LiftedStateSpace space = enumerate_states(r.spec, mu0, r.backend, r.kernel);
    const Level1Profile profile = lift_policy(r.spec, space, policy);
    DpOptions dp_opt;
    dp_opt.eps = r.dp_eps;
    const DpResult dp =
        policy_value_dp(r.spec, space, profile, r.backend, r.kernel, dp_opt);
    const int s0 = space.find(mu0);
    if (s0 < 0)
      throw InvariantViolation(
          "initial population state missing from the enumerated space");
    std::vector<double> v;
    v.reserve(dp.values.size());
    for (const std::vector<double>& team : dp.values)
      v.push_back(team[static_cast<std::size_t>(s0)]);
    reference = std::move(v);
  }

  const ChaosSweepResult sweep =
      propagation_of_chaos_sweep(r.spec, policy, counts, mu0, sim, reference);

  CsvWriter csv(out_file(r, "poc.csv"),
                {"agents_per_team", "team", "j_n", "se", "j_mf", "mf_se",
                 "abs_gap"});
  ordered_json jcounts = ordered_json::array();
  for (std::size_t c = 0; c < sweep.agent_counts.size(); ++c) {
    for (int i = 0; i < r.spec.num_teams; ++i) {
      const std::size_t k = static_cast<std::size_t>(i);
      csv.row({fmt_int(sweep.agent_counts[c]), fmt_int(i),
               fmt17(sweep.j_n[c][k]), fmt17(sweep.se[c][k]),
               fmt17(sweep.j_mf[k]), fmt17(sweep.mf_se[k]),
               fmt17(std::abs(sweep.j_n[c][k] - sweep.j_mf[k]))});
    }
    ordered_json e;
    e["agents_per_team"] = sweep.agent_counts[c];
    e["total_gap"] = sweep.total_gap(c);
    e["total_gap_se"] = sweep.total_gap_se(c);
    jcounts.push_back(std::move(e));
  }
  csv.close();

  const double z = sweep.shrink_z_score();
  ordered_json summary = summary_head(r, "poc");
  summary["horizon"] = sim.horizon;
  summary["replications"] = sim.replications;
  summary["exact_reference"] = reference.has_value();
  summary["j_mf"] = num_array(sweep.j_mf);
  summary["mf_se"] = num_array(sweep.mf_se);
  summary["counts"] = std::move(jcounts);
  summary["shrink_z_score"] = z;
  // One-sided 95% test that the gap at the largest count undercuts the
  // gap at the smallest.
  summary["gap_shrinks_95"] = z > 1.6448536269514722;
  write_summary(r, "poc_summary.json", summary);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"finite-space laboratory for discounted mean field team games"};
  app.require_subcommand(1);
  CliArgs args;
  app.add_option("--config", args.config_path,
                 "experiment configuration (json)")
      ->required();
  CLI::Option* seed_opt =
      app.add_option("--seed", args.seed_flag, "master seed override");
  app.add_option("--backend", args.backend_flag,
                 "lifted kernel backend override")
      ->check(CLI::IsMember({"closed_form", "quadrature", "mc"}));
  app.add_option("--threads", args.threads, "worker threads")
      ->check(CLI::PositiveNumber);
  app.add_option("--out", args.out_dir, "output directory")->required();

  int (*run_cmd)(const Run&) = nullptr;
  const auto add_cmd = [&app, &run_cmd](const char* name, const char* desc,
                                        int (*fn)(const Run&)) {
    CLI::App* sc = app.add_subcommand(name, desc);
    sc->fallthrough();
    sc->callback([&run_cmd, fn] { run_cmd = fn; });
  };
  add_cmd("perturb-stats",
          "sampled perturbations and perturbed means for configured base pmfs",
          cmd_perturb_stats);
  add_cmd("kernel-check",
          "population kernel rows under all backends with discrepancy report",
          cmd_kernel_check);
  add_cmd("value",
          "agent-level simulated value against the population-level dp value",
          cmd_value);
  add_cmd("bridge-check",
          "policy lift round trip and two-level value equivalence audit",
          cmd_bridge_check);
  add_cmd("solve", "equilibrium search by best response dynamics or fictitious play",
          cmd_solve);
  add_cmd("poc", "finite-population convergence sweep toward the mean field value",
          cmd_poc);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    args.seed_set = seed_opt->count() > 0;
    const Run run = make_run(args);
    return run_cmd(run);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 1;
  } catch (const InvariantViolation& e) {
    std::cerr << "invariant violation: " << e.what() << '\n';
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
