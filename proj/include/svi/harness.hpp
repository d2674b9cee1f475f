#pragma once

// Experiment orchestration: resolved config -> study -> artifacts + provenance.json.

#include "svi/config.hpp"
#include "svi/studies.hpp"

#include <chrono>
#include <cstdlib>
#include <cstring>
#include <filesystem>

namespace svi::harness {

enum ExitCode : int { pass = 0, verdict_fail = 1, config_error = 2, runtime_error = 3 };

/// Command-line values that take precedence over the config file.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> workers;
  std::optional<std::string> out_dir;
  bool use_env_seed = true;  // SVI_SEED sits between the config and --seed
};

struct Outcome {
  int exit_code = pass;
  Json provenance;
  std::vector<std::string> errors;
  std::vector<std::string> artifacts;
};

/// Raised while turning a schema-valid config into model objects.
class BuildError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

namespace detail {

inline Vector broadcast(const Json& arr, Index n, const std::string& path) {
  const auto v = arr.get<std::vector<double>>();
  if (v.size() == 1) return Vector::Constant(n, v[0]);
  if (static_cast<Index>(v.size()) != n)
    throw BuildError(path + ": expected 1 or " + std::to_string(n) + " entries, got " + std::to_string(v.size()));
  return Eigen::Map<const Vector>(v.data(), n);
}

inline ConvexPotential build_potential(const Json& p, Index n, const std::string& path) {
  const std::string kind = p["kind"];
  if (kind == "zero") return ConvexPotential::zero(n);
  if (kind == "quadratic") return ConvexPotential::quadratic(broadcast(p["weights"], n, path + ".weights"));
  if (kind == "coulomb_log") {
    if (n < 2) throw BuildError(path + ": coulomb_log needs dimension >= 2");
    return ConvexPotential::coulomb_log(p["lambda"], n);
  }
  if (kind == "pairwise") {
    if (n < 2) throw BuildError(path + ": pairwise needs dimension >= 2");
    const double s = p["strength"];
    const auto g = p["pair"] == "log" ? PairFunction::log(s) : PairFunction::inverse_power(s, p["exponent"]);
    return ConvexPotential::pairwise(g, n);
  }
  const Json& set = p["set"];
  const std::string shape = set["shape"];
  const std::string sp = path + ".set";
  if (shape == "halfline") return ConvexPotential::indicator(ConvexSetSpec::halfline(broadcast(set["lower"], n, sp + ".lower")));
  if (shape == "box") {
    Vector lo = broadcast(set["lower"], n, sp + ".lower"), hi = broadcast(set["upper"], n, sp + ".upper");
    if ((hi - lo).minCoeff() < 0.0) throw BuildError(sp + ": lower must not exceed upper");
    return ConvexPotential::indicator(ConvexSetSpec::box(std::move(lo), std::move(hi)));
  }
  if (shape == "ball") return ConvexPotential::indicator(ConvexSetSpec::ball(broadcast(set["center"], n, sp + ".center"), set["radius"]));
  if (n < 2) throw BuildError(sp + ": ordered_cone needs dimension >= 2");
  return ConvexPotential::indicator(ConvexSetSpec::ordered_cone(n, set["min_gap"]));
}

inline OperatorA build_operator(const Json& o, Index n) {
  const std::string kind = o["kind"];
  if (kind == "zero") return OperatorA::zero();
  if (kind == "diagonal") return OperatorA::diagonal(broadcast(o["values"], n, "problem.operator.values"));
  const auto rows = o["rows"].get<std::vector<std::vector<double>>>();
  if (static_cast<Index>(rows.size()) != n) throw BuildError("problem.operator.rows: need " + std::to_string(n) + " rows");
  Matrix m(n, n);
  for (Index i = 0; i < n; ++i) {
    if (static_cast<Index>(rows[i].size()) != n)
      throw BuildError("problem.operator.rows[" + std::to_string(i) + "]: need " + std::to_string(n) + " entries");
    for (Index j = 0; j < n; ++j) m(i, j) = rows[i][j];
  }
  return OperatorA::linear(m);
}

inline DelayFunction build_delay(const Json& d) {
  const std::string kind = d["kind"];
  if (kind == "constant") return DelayFunction::constant(d["value"]);
  if (kind == "proportional") return DelayFunction::proportional(d["iota"]);
  if (kind == "full_path") return DelayFunction::full_path();
  return DelayFunction::table(d["times"].get<std::vector<double>>(), d["values"].get<std::vector<double>>());
}

inline LevyConfig build_levy(const Json& j, Index n) {
  const Json& m = j["marks"];
  const std::string kind = m["kind"];
  const double rate = j["intensity"];
  if (kind == "uniform")
    return LevyConfig::uniform_box(rate, broadcast(m["lower"], n, "problem.jumps.marks.lower"),
                                   broadcast(m["upper"], n, "problem.jumps.marks.upper"));
  if (kind == "gaussian")
    return LevyConfig::gaussian(rate, broadcast(m["mean"], n, "problem.jumps.marks.mean"),
                                broadcast(m["stddev"], n, "problem.jumps.marks.stddev"));
  std::vector<Vector> atoms;
  for (const auto& row : m["points"].get<std::vector<std::vector<double>>>()) {
    if (static_cast<Index>(row.size()) != n) throw BuildError("problem.jumps.marks.points: each atom needs dimension " + std::to_string(n));
    atoms.push_back(Eigen::Map<const Vector>(row.data(), n));
  }
  auto weights = m["weights"].get<std::vector<double>>();
  if (weights.empty()) weights.assign(atoms.size(), 1.0);
  return LevyConfig::discrete_atoms(rate, std::move(atoms), std::move(weights));
}

}  // namespace detail

/// Problem block plus numerics.T / numerics.dt into a ProblemSpec.
///   b = offset + current * X(t) + delayed * X(t - a(t)) + sup_gain |X_t|_inf 1 + distributed_gain int_{-w}^0 X(t+s) ds
///   sigma = diag(additive + linear X_i(t)),  f = scale * u + linear * X(t)
inline ProblemSpec build_problem(const Json& cfg) {
  const Json& p = cfg["problem"];
  const Json& num = cfg["numerics"];
  const Index n = p["dimension"].get<Index>();
  const double T = num["T"], dt = num["dt"], h = p["history"];
  ProblemSpec spec;
  spec.dimension = n;
  spec.horizon = T;
  spec.potential = detail::build_potential(p["potential"], n, "problem.potential");
  spec.op = detail::build_operator(p["operator"], n);
  spec.delay = detail::build_delay(p["delay"]);
  spec.initial_segment = CadlagPath::constant_history(detail::broadcast(p["x0"], n, "problem.x0"), h, T, dt);

  const Json& d = p["drift"];
  const Vector off = detail::broadcast(d["offset"], n, "problem.drift.offset");
  const Vector cur = detail::broadcast(d["current"], n, "problem.drift.current");
  const Vector lag = detail::broadcast(d["delayed"], n, "problem.drift.delayed");
  const double sup_gain = d["sup_gain"], dist_gain = d["distributed_gain"], width = d["distributed_width"];
  if (dist_gain != 0.0 && width > h + 1e-12)
    throw BuildError("problem.drift.distributed_width: window " + format_double(width) + " exceeds history " + format_double(h));
  const bool any_drift = off.any() || cur.any() || lag.any() || sup_gain != 0.0 || dist_gain != 0.0;
  if (any_drift) {
    const bool need_lag = lag.any();
    spec.drift = [=](double, const SegmentView& seg, Eigen::Ref<Vector> out) {
      out = off + cur.cwiseProduct(seg.current());
      if (need_lag) {
        Vector z(n);
        seg.delayed(z);
        out += lag.cwiseProduct(z);
      }
      if (sup_gain != 0.0) out.array() += sup_gain * seg.sup_norm();
      if (dist_gain != 0.0) out += dist_gain * seg.distributed(width, [](const Vector& x) { return x; });
    };
  }

  const Json& s = p["diffusion"];
  const double add = s["additive"], lin = s["linear"];
  spec.wiener = WienerSpec::diagonal(detail::broadcast(s["q"], n, "problem.diffusion.q"));
  if (add != 0.0 || lin != 0.0) {
    spec.diffusion = [add, lin](double, const SegmentView& seg, Eigen::Ref<Matrix> out) {
      out.setZero();
      out.diagonal() = (add + lin * seg.current().array()).matrix();
    };
  }

  const Json& j = p["jumps"];
  if (j["enabled"].get<bool>()) {
    spec.levy = detail::build_levy(j, n);
    const double scale = j["scale"], jl = j["linear"];
    spec.jump = [scale, jl](double, const SegmentView& seg, const Vector& mark, Eigen::Ref<Vector> out) {
      out = scale * mark + jl * seg.current();
    };
  }
  spec.validate();
  return spec;
}

inline Scheme build_scheme(const Json& cfg) {
  const Json& num = cfg["numerics"];
  return num["scheme"] == "prox" ? Scheme::prox() : Scheme::yosida(num["epsilon"]);
}

inline averaging::AveragingTemplate build_averaging(const Json& cfg) {
  const Json& a = cfg["averaging"];
  const double T = cfg["numerics"]["T"], dt = cfg["numerics"]["dt"];
  if (a["family"] == "deterministic") return averaging::deterministic_family(a["x0"], T, dt);
  averaging::SinusoidFamilyOptions opt;
  opt.jumps = a["jumps"];
  opt.x0 = a["x0"];
  opt.horizon = T;
  opt.delay = a["delay"];
  opt.history_dt = dt;
  opt.reflect = a["reflect"];
  if (opt.reflect && opt.x0 < 0.0) throw BuildError("averaging.x0: must be >= 0 with reflect = true");
  return averaging::sinusoid_family(opt);
}

inline galerkin::SpdeConfig build_spde(const Json& cfg) {
  const Json& s = cfg["spde"];
  galerkin::SpdeConfig g;
  g.modes = s["modes"];
  g.m0 = s["m0"];
  g.reaction.coeffs = s["reaction"].get<std::vector<double>>();
  if (g.reaction.degree() > 3) throw BuildError("spde.reaction: degree above 3 rejected");
  if (!(g.reaction.one_sided_beta() < kInf)) throw BuildError("spde.reaction: not one-sided Lipschitz");
  g.noise_q = detail::broadcast(s["q"], g.modes, "spde.q");
  if ((g.noise_q.array() < 0.0).any()) throw BuildError("spde.q: entries must be >= 0");
  if (s["potential"]["kind"] != "zero") g.potential = detail::build_potential(s["potential"], 1, "spde.potential");
  g.horizon = cfg["numerics"]["T"];
  g.dt = cfg["numerics"]["dt"];
  const Json& init = s["initial"];
  const std::string kind = init["kind"];
  const double amp = init["amplitude"];
  const int k = init["index"];
  if (kind == "mode") {
    if (k > g.modes) throw BuildError("spde.initial.index: exceeds spde.modes");
    g.initial_modes = [k, amp, m = g.modes](double) {
      Vector c = Vector::Zero(m);
      c(k - 1) = amp;
      return c;
    };
  } else if (kind == "constant") {
    g.initial_field = [amp](double, double) { return amp; };
  } else {
    g.initial_modes = [m = g.modes](double) { return Vector::Zero(m); };
  }
  try {
    galerkin::validate(g);
  } catch (const std::invalid_argument& e) {
    throw BuildError(e.what());
  }
  return g;
}

// ---------------------------------------------------------------------------

namespace detail {

struct Context {
  Json cfg;
  std::filesystem::path out;
  std::uint64_t seed = 0;
  unsigned workers = 1;
  std::vector<std::string> artifacts;
  std::vector<Verdict> verdicts;
  bool partial = false;

  bool wants(const std::string& fmt) const {
    const auto& f = cfg["output"]["formats"];
    return std::find(f.begin(), f.end(), fmt) != f.end();
  }

  void text(const std::string& name, const std::string& body) {
    write_text(out / name, body);
    artifacts.push_back(name);
  }

  void report(const ConvergenceReport& r, const std::string& stem) {
    if (wants("csv")) {
      write_report(r, out / (stem + ".csv"), ReportFormat::csv);
      artifacts.push_back(stem + ".csv");
    }
    if (wants("json")) {
      write_report(r, out / (stem + ".json"), ReportFormat::json);
      artifacts.push_back(stem + ".json");
    }
    verdicts.insert(verdicts.end(), r.verdicts.begin(), r.verdicts.end());
  }
};

inline std::size_t paths(const Context& c) { return c.cfg["mc"]["paths"].get<std::size_t>(); }

inline void run_simulate(Context& c) {
  const ProblemSpec spec = build_problem(c.cfg);
  const Scheme scheme = build_scheme(c.cfg);
  const double dt = c.cfg["numerics"]["dt"];
  const std::size_t n = paths(c);
  ConvergenceReport r;
  r.study = "simulate";
  r.columns = {"path", "x_sup", "eta_total_variation", "domain_violation", "jumps"};
  const auto rows = parallel_map(n, c.workers, [&](std::size_t i) {
    const SolutionPair sol = simulate(spec, dt, scheme, RngStream{c.seed, i});
    int jumps = 0;
    for (int k : sol.jump_counts) jumps += k;
    return std::make_pair(
        std::vector<double>{static_cast<double>(i), sol.x.sup_norm(0.0, spec.horizon),
                            total_variation(sol.eta, 0.0, spec.horizon), max_domain_violation(sol, spec.potential),
                            static_cast<double>(jumps)},
        n <= 16 ? trajectory_csv(sol) : std::string());
  });
  double worst = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    r.add_row(rows[i].first);
    worst = std::max(worst, rows[i].first[3]);
    if (!rows[i].second.empty()) {
      char name[40];
      std::snprintf(name, sizeof name, "trajectory_%04zu.csv", i);
      c.text(n == 1 ? "trajectory.csv" : name, rows[i].second);
    }
  }
  // Yosida paths are allowed to leave the domain by O(sqrt(eps)).
  const bool ok = scheme.kind == Scheme::Kind::yosida || worst <= 1e-9;
  r.add_verdict("criterion-6 state stays in the closed domain of phi", ok, "max violation " + format_double(worst));
  r.fingerprint = studies::fingerprint(c.seed, dt, n);
  r.fingerprint["scheme"] = scheme.name();
  c.report(r, "summary");
}

inline void run_converge_dt(Context& c) {
  const ProblemSpec spec = build_problem(c.cfg);
  const Json& num = c.cfg["numerics"];
  studies::RefinementOptions opt;
  opt.dt_grid = num["dt_grid"].get<std::vector<double>>();
  opt.dt_ref = num["reference_dt"];
  opt.paths = paths(c);
  opt.seed = c.seed;
  opt.workers = c.workers;
  opt.slope_min = num["slope_min"];
  opt.slope_max = num["slope_max"];
  c.report(studies::dt_refinement(spec, opt), "converge_dt");
}

inline void run_converge_yosida(Context& c) {
  const ProblemSpec spec = build_problem(c.cfg);
  const Json& num = c.cfg["numerics"];
  studies::YosidaOptions opt;
  opt.eps_grid = num["eps_grid"].get<std::vector<double>>();
  opt.dt = num["dt"];
  opt.paths = paths(c);
  opt.seed = c.seed;
  opt.workers = c.workers;
  opt.slope_min = num["slope_min"];
  opt.slope_max = num["slope_max"];
  c.report(studies::yosida_refinement(spec, opt), "converge_yosida");
}

inline void run_picard(Context& c) {
  const ProblemSpec spec = build_problem(c.cfg);
  const Json& num = c.cfg["numerics"];
  studies::PicardOptions opt;
  opt.dt = num["dt"];
  opt.paths = paths(c);
  opt.seed = c.seed;
  opt.workers = c.workers;
  opt.tol = num["tol"];
  opt.max_iter = num["max_iter"];
  c.report(studies::picard_study(spec, opt), "picard");
}

inline void run_averaging(Context& c) {
  studies::AveragingRun run;
  run.tpl = build_averaging(c.cfg);
  run.eps_grid = c.cfg["averaging"]["eps_grid"].get<std::vector<double>>();
  run.n_paths = paths(c);
  run.dt = c.cfg["numerics"]["dt"];
  run.seed = c.seed;
  run.workers = c.workers;
  run.record_runtime = c.cfg["output"]["record_runtime"];
  const ConvergenceReport r = studies::epsilon_sweep(run);
  for (const auto& row : r.rows)
    if (std::isnan(row[r.column("err_mean")])) c.partial = true;
  c.report(r, "averaging_sweep");
}

inline void run_spde(Context& c) {
  const galerkin::SpdeConfig g = build_spde(c.cfg);
  const double dt = c.cfg["numerics"]["dt"];
  const double burn = c.cfg["spde"]["burn_in"];
  if (!(burn < g.horizon)) throw BuildError("spde.burn_in: must be < numerics.T");
  const int cadence = c.cfg["output"]["snapshot_cadence"];
  const int points = c.cfg["output"]["snapshot_points"];
  const auto run = galerkin::simulate_spde(g, dt, RngStream{c.seed, 0}, cadence);
  c.text("snapshots.csv", snapshot_csv(run.snapshots, points));

  ConvergenceReport r;
  r.study = "spde";
  r.columns = {"mode", "second_moment_mean", "second_moment_se", "ou_reference"};
  bool finite = true;
  for (int k = 1; k <= g.modes; ++k) {
    const MeanSE m = studies::mode_second_moment(g, k, dt, burn, paths(c), c.seed, c.workers);
    const double lam = galerkin::eigenvalue(k);
    const double ref = g.noise_q(k - 1) / (2.0 * g.m0 * lam);
    r.add_row({static_cast<double>(k), m.mean, m.se, ref});
    finite = finite && std::isfinite(m.mean);
  }
  r.add_verdict("criterion-8 mode statistics finite", finite);
  r.fingerprint = studies::fingerprint(c.seed, dt, paths(c));
  r.fingerprint["modes"] = g.modes;
  c.report(r, "spde_modes");
}

inline void run_particles(Context& c) {
  const Json& p = c.cfg["particles"];
  studies::ParticleOptions opt;
  opt.count = p["count"];
  opt.lambda = p["lambda"];
  opt.sigma = p["sigma"];
  opt.spacing = p["spacing"];
  opt.horizon = c.cfg["numerics"]["T"];
  opt.dt = c.cfg["numerics"]["dt"];
  opt.paths = paths(c);
  opt.seed = c.seed;
  opt.workers = c.workers;
  const auto st = studies::particle_study(opt);
  ConvergenceReport r;
  r.study = "particles";
  r.columns = {"path", "min_gap"};
  for (std::size_t i = 0; i < st.path_min_gap.size(); ++i) r.add_row({static_cast<double>(i), st.path_min_gap[i]});
  r.add_verdict("criterion-7 strict ordering at every node", st.violations == 0,
                std::to_string(st.violations) + " violations, min gap " + format_double(st.min_gap));
  r.fingerprint = studies::fingerprint(c.seed, opt.dt, opt.paths);
  c.report(r, "particles");
}

inline void run_proptest(Context& c) {
  PropertyOptions opt;
  opt.samples = c.cfg["proptest"]["samples"];
  const double tol = c.cfg["proptest"]["tolerance"];
  c.report(studies::property_suite(studies::property_catalog(), opt, c.seed, tol, c.workers), "proptest");
}

inline std::optional<std::uint64_t> env_seed() {
  const char* v = std::getenv("SVI_SEED");
  if (!v || !*v) return std::nullopt;
  std::uint64_t s = 0;
  const auto res = std::from_chars(v, v + std::strlen(v), s);
  if (res.ec != std::errc() || *res.ptr != '\0') throw BuildError(std::string("SVI_SEED: not an unsigned integer: '") + v + "'");
  return s;
}

}  // namespace detail

/// Runs `command` on the config document `text`. Never throws; failures map to exit codes.
inline Outcome run(const std::string& command, const std::string& text, const Overrides& ov = {}) {
  Outcome o;
  const auto start = std::chrono::steady_clock::now();
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const Json::parse_error& e) {
    o.exit_code = config_error;
    o.errors.push_back(std::string("<document>: parse error: ") + e.what());
    return o;
  }
  if (!doc.is_object()) {
    o.exit_code = config_error;
    o.errors.push_back("<document>: top level must be an object");
    return o;
  }
  if (!doc.contains("command")) doc["command"] = command;
  else if (doc["command"] != command) {
    o.exit_code = config_error;
    o.errors.push_back("command: config names '" + doc["command"].dump() + "' but the CLI asked for '" + command + "'");
    return o;
  }

  config::Parsed parsed = config::resolve(doc);
  detail::Context c;
  try {
    if (!parsed.ok()) {
      for (const auto& e : parsed.errors) o.errors.push_back(e.path + ": " + e.message);
      o.exit_code = config_error;
      return o;
    }
    c.cfg = parsed.resolved;
    Json& mc = c.cfg["mc"];
    if (ov.use_env_seed)
      if (auto s = detail::env_seed()) mc["seed"] = *s;
    if (ov.seed) mc["seed"] = *ov.seed;
    if (ov.workers) mc["workers"] = *ov.workers;
    if (ov.out_dir) c.cfg["output"]["dir"] = *ov.out_dir;
    c.seed = mc["seed"].get<std::uint64_t>();
    c.workers = resolve_workers(mc["workers"].get<unsigned>());
    c.out = c.cfg["output"]["dir"].get<std::string>();
  } catch (const std::exception& e) {
    o.exit_code = config_error;
    o.errors.push_back(e.what());
    return o;
  }

  std::string error;
  try {
    if (command == "simulate") detail::run_simulate(c);
    else if (command == "converge-dt") detail::run_converge_dt(c);
    else if (command == "converge-yosida") detail::run_converge_yosida(c);
    else if (command == "picard") detail::run_picard(c);
    else if (command == "averaging-sweep") detail::run_averaging(c);
    else if (command == "spde") detail::run_spde(c);
    else if (command == "particles") detail::run_particles(c);
    else detail::run_proptest(c);
    o.exit_code = std::all_of(c.verdicts.begin(), c.verdicts.end(), [](const Verdict& v) { return v.passed; })
                      ? pass
                      : verdict_fail;
  } catch (const BuildError& e) {
    o.exit_code = config_error;
    error = e.what();
  } catch (const DimensionMismatch& e) {
    o.exit_code = config_error;
    error = e.what();
  } catch (const SimulationError& e) {
    o.exit_code = runtime_error;
    error = e.what();
    c.partial = true;
    try {
      c.text("partial_trajectory.csv", trajectory_csv(e.partial()));
    } catch (...) {
    }
  } catch (const std::invalid_argument& e) {
    // Raised by model validation before any path ran.
    o.exit_code = c.artifacts.empty() ? config_error : runtime_error;
    error = e.what();
  } catch (const std::exception& e) {
    o.exit_code = runtime_error;
    error = e.what();
    c.partial = true;
  }
  if (!error.empty()) o.errors.push_back(error);

  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  Json prov;
  prov["version"] = kVersion;
  prov["command"] = command;
  prov["seed"] = c.seed;
  prov["workers"] = c.workers;
  prov["wall_time_s"] = wall;
  prov["exit_code"] = o.exit_code;
  prov["partial"] = c.partial;
  prov["errors"] = o.errors;
  Json verdicts = Json::array();
  for (const auto& v : c.verdicts) verdicts.push_back({{"criterion", v.criterion}, {"passed", v.passed}, {"detail", v.detail}});
  prov["verdicts"] = std::move(verdicts);
  prov["artifacts"] = c.artifacts;
  prov["config"] = c.cfg;
  o.artifacts = c.artifacts;
  o.provenance = prov;
  try {
    write_text(c.out / "provenance.json", prov.dump(2) + "\n");
  } catch (const std::exception& e) {
    o.errors.push_back(e.what());
    if (o.exit_code == pass || o.exit_code == verdict_fail) o.exit_code = runtime_error;
  }
  return o;
}

}  // namespace svi::harness
