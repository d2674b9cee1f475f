#pragma once

// Refinement and Monte Carlo studies that produce ConvergenceReports.

#include "svi/averaging.hpp"
#include "svi/galerkin.hpp"
#include "svi/parallel.hpp"
#include "svi/properties.hpp"
#include "svi/report.hpp"

#include <chrono>

namespace svi {

inline constexpr const char* kVersion = "0.1.0";

namespace studies {

/// Least-squares slope of log y against log x.
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  require(x.size() == y.size() && x.size() >= 2, "loglog_slope: need two or more points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

inline Json fingerprint(std::uint64_t seed, double dt, std::size_t paths) {
  return Json{{"seed", seed}, {"version", kVersion}, {"dt", dt}, {"paths", paths}};
}

/// True when spec is the scalar half-line x >= 0 reflection, where the prox
/// scheme can be compared with the explicit Skorokhod map.
inline bool is_unit_halfline(const ProblemSpec& spec) {
  if (spec.dimension != 1) return false;
  const auto* ind = std::get_if<IndicatorPotential>(&spec.potential.kind());
  if (!ind) return false;
  const auto* hl = std::get_if<HalfLine>(&ind->set.shape());
  return hl && hl->lower.size() == 1 && hl->lower(0) == 0.0;
}

// ---------------------------------------------------------------------------
// dt refinement against a fine-grid reference on shared Brownian samples

struct RefinementOptions {
  std::vector<double> dt_grid;  // descending, each an integer multiple of dt_ref
  double dt_ref = 1e-4;
  std::size_t paths = 100;
  std::uint64_t seed = 0;
  unsigned workers = 1;
  double slope_min = 0.3;
  double slope_max = 1.2;
};

inline ConvergenceReport dt_refinement(const ProblemSpec& spec, const RefinementOptions& opt) {
  require(!spec.levy, "dt_refinement: jump problems cannot share coarsened noise");
  require(opt.dt_grid.size() >= 2, "dt_refinement: need two or more step sizes");
  std::vector<int> factors;
  for (double dt : opt.dt_grid) {
    const double f = dt / opt.dt_ref;
    require(std::abs(f - std::round(f)) < 1e-9 * f && f >= 1.0, "dt_refinement: dt must be a multiple of dt_ref");
    factors.push_back(static_cast<int>(std::lround(f)));
  }
  const bool oracle = is_unit_halfline(spec) && !spec.drift && !spec.op.matrix && !spec.op.nonlinear;
  const ProblemSpec driver_spec = without_potential(spec);
  struct PathOut {
    std::vector<double> err;
    double oracle_gap = 0.0;
  };
  const auto per_path = parallel_map(opt.paths, opt.workers, [&](std::size_t i) {
    const RngStream stream{opt.seed, i};
    const NoiseRecord fine = make_noise_record(spec.horizon, opt.dt_ref, spec.wiener, nullptr, stream);
    const SolutionPair ref = simulate(spec, Scheme::prox(), fine, stream);
    PathOut out;
    if (oracle) {
      const SolutionPair drv = simulate(driver_spec, Scheme::prox(), fine, stream);
      const SolutionPair sk = skorokhod_1d(drv.x);
      for (std::size_t k = 0; k < ref.state_count(); ++k)
        out.oracle_gap = std::max(out.oracle_gap, (ref.state(k) - sk.state(k)).norm());
    }
    for (int f : factors) {
      const NoiseRecord coarse = coarsen(fine, f);
      const SolutionPair x = simulate(spec, Scheme::prox(), coarse, stream);
      double e = 0.0;
      for (std::size_t k = 0; k < x.state_count(); ++k)
        e = std::max(e, (x.state(k) - ref.state(k * static_cast<std::size_t>(f))).norm());
      out.err.push_back(e);
    }
    return out;
  });

  ConvergenceReport r;
  r.study = "converge-dt";
  r.columns = {"dt", "n_paths", "err_mean", "err_se"};
  std::vector<MeanSE> stats;
  for (std::size_t j = 0; j < opt.dt_grid.size(); ++j) {
    std::vector<double> e;
    for (const auto& p : per_path) e.push_back(p.err[j]);
    stats.push_back(mean_se(e));
    r.add_row({opt.dt_grid[j], static_cast<double>(opt.paths), stats.back().mean, stats.back().se});
  }
  bool monotone = true;
  for (std::size_t j = 1; j < stats.size(); ++j)
    if (opt.dt_grid[j] < opt.dt_grid[j - 1] && !(stats[j].mean <= stats[j - 1].mean + 2.0 * stats[j - 1].se))
      monotone = false;
  std::vector<double> means;
  for (const auto& s : stats) means.push_back(s.mean);
  const double slope = loglog_slope(opt.dt_grid, means);
  r.add_verdict("criterion-4 error decays under dt refinement", monotone);
  r.add_verdict("criterion-4 log-log slope in range", slope >= opt.slope_min && slope <= opt.slope_max,
                "slope " + format_double(slope));
  r.fingerprint = fingerprint(opt.seed, opt.dt_ref, opt.paths);
  r.fingerprint["slope"] = slope;
  if (oracle) {
    double gap = 0.0;
    for (const auto& p : per_path) gap = std::max(gap, p.oracle_gap);
    r.fingerprint["oracle_gap"] = gap;
    r.add_verdict("criterion-4 prox equals Skorokhod oracle", gap <= 1e-12, "max gap " + format_double(gap));
  }
  r.sort_rows();
  return r;
}

// ---------------------------------------------------------------------------
// Yosida penalisation against the prox scheme (the Skorokhod oracle in 1-D)

struct YosidaOptions {
  std::vector<double> eps_grid;  // descending
  double dt = 1e-4;
  std::size_t paths = 100;
  std::uint64_t seed = 0;
  unsigned workers = 1;
  double slope_min = 0.3;
  double slope_max = 0.7;
};

inline ConvergenceReport yosida_refinement(const ProblemSpec& spec, const YosidaOptions& opt) {
  require(opt.eps_grid.size() >= 2, "yosida_refinement: need two or more eps values");
  for (double e : opt.eps_grid) require(e >= opt.dt, "yosida_refinement: every eps must be >= dt");
  const bool oracle = is_unit_halfline(spec) && !spec.drift && !spec.op.matrix && !spec.op.nonlinear && !spec.levy;
  const ProblemSpec driver_spec = without_potential(spec);
  const auto per_path = parallel_map(opt.paths, opt.workers, [&](std::size_t i) {
    const RngStream stream{opt.seed, i};
    const NoiseRecord noise =
        make_noise_record(spec.horizon, opt.dt, spec.wiener, spec.levy ? &*spec.levy : nullptr, stream);
    SolutionPair ref = oracle ? skorokhod_1d(simulate(driver_spec, Scheme::prox(), noise, stream).x)
                              : simulate(spec, Scheme::prox(), noise, stream);
    std::vector<double> err;
    for (double eps : opt.eps_grid) {
      const SolutionPair x = simulate(spec, Scheme::yosida(eps), noise, stream);
      double e = 0.0;
      for (std::size_t k = 0; k < x.state_count(); ++k) e = std::max(e, (x.state(k) - ref.state(k)).norm());
      err.push_back(e);
    }
    return err;
  });
  ConvergenceReport r;
  r.study = "converge-yosida";
  r.columns = {"epsilon", "n_paths", "dt", "err_mean", "err_se"};
  std::vector<double> means;
  for (std::size_t j = 0; j < opt.eps_grid.size(); ++j) {
    std::vector<double> e;
    for (const auto& p : per_path) e.push_back(p[j]);
    const MeanSE s = mean_se(e);
    means.push_back(s.mean);
    r.add_row({opt.eps_grid[j], static_cast<double>(opt.paths), opt.dt, s.mean, s.se});
  }
  bool monotone = true;
  for (std::size_t j = 1; j < means.size(); ++j)
    if (!(means[j] < means[j - 1])) monotone = false;
  const double slope = loglog_slope(opt.eps_grid, means);
  r.add_verdict("criterion-4 yosida error decreases monotonically in eps", monotone);
  r.add_verdict("criterion-4 yosida log-log slope in range", slope >= opt.slope_min && slope <= opt.slope_max,
                "slope " + format_double(slope));
  r.fingerprint = fingerprint(opt.seed, opt.dt, opt.paths);
  r.fingerprint["slope"] = slope;
  r.fingerprint["reference"] = oracle ? "skorokhod_1d" : "prox";
  r.sort_rows();
  return r;
}

// ---------------------------------------------------------------------------
// Picard iteration over many seeds

struct PicardOptions {
  double dt = 1e-3;
  std::size_t paths = 100;
  std::uint64_t seed = 0;
  unsigned workers = 1;
  double tol = 1e-10;
  int max_iter = 30;
};

inline ConvergenceReport picard_study(const ProblemSpec& spec, const PicardOptions& opt) {
  const auto runs = parallel_map(opt.paths, opt.workers, [&](std::size_t i) {
    return picard_solve(spec, opt.dt, RngStream{opt.seed, i}, opt.tol, opt.max_iter).residuals;
  });
  std::size_t longest = 0;
  bool monotone = true, converged = true;
  for (const auto& res : runs) {
    longest = std::max(longest, res.size());
    for (std::size_t n = 2; n < res.size(); ++n)
      if (!(res[n] < res[n - 1])) monotone = false;
    if (res.empty() || !(res.back() < opt.tol)) converged = false;
  }
  ConvergenceReport r;
  r.study = "picard";
  r.columns = {"iteration", "residual_max", "residual_mean", "active_paths"};
  for (std::size_t n = 0; n < longest; ++n) {
    double mx = 0.0, sum = 0.0;
    std::size_t active = 0;
    for (const auto& res : runs)
      if (n < res.size()) {
        mx = std::max(mx, res[n]);
        sum += res[n];
        ++active;
      }
    r.add_row({static_cast<double>(n + 1), mx, sum / static_cast<double>(active), static_cast<double>(active)});
  }
  r.add_verdict("criterion-5 residuals decrease after iteration 1", monotone);
  r.add_verdict("criterion-5 converged within max_iter on every path", converged,
                "longest run " + std::to_string(longest) + " iterations");
  r.fingerprint = fingerprint(opt.seed, opt.dt, opt.paths);
  return r;
}

// ---------------------------------------------------------------------------
// Averaging sweep

struct AveragingRun {
  averaging::AveragingTemplate tpl;
  std::vector<double> eps_grid;  // descending, in (0, 1)
  std::size_t n_paths = 100;
  double dt = 1e-3;
  std::uint64_t seed = 0;
  unsigned workers = 1;
  bool record_runtime = false;
};

/// Rows (epsilon, n_paths, dt, err_mean, err_se, sup4_moment, runtime_s). A
/// failed cell becomes a NaN row and a failed verdict; the sweep continues.
inline ConvergenceReport epsilon_sweep(const AveragingRun& run) {
  require(!run.eps_grid.empty(), "epsilon_sweep: empty eps grid");
  for (std::size_t i = 0; i < run.eps_grid.size(); ++i) {
    require(run.eps_grid[i] > 0.0 && run.eps_grid[i] < 1.0, "epsilon_sweep: eps must lie in (0, 1)");
    if (i) require(run.eps_grid[i] < run.eps_grid[i - 1], "epsilon_sweep: eps grid must be descending");
  }
  const double eps_min = run.eps_grid.back();
  if (run.dt > eps_min / 10.0 * (1.0 + 1e-12))
    throw std::invalid_argument("epsilon_sweep: dt must be <= min eps / 10");

  ConvergenceReport r;
  r.study = "averaging-sweep";
  r.columns = {"epsilon", "n_paths", "dt", "err_mean", "err_se", "sup4_moment", "runtime_s"};
  std::vector<averaging::CoupledError> cells;
  std::vector<bool> ok;
  Json partition = Json::array();
  for (double eps : run.eps_grid) {
    const auto t0 = std::chrono::steady_clock::now();
    try {
      cells.push_back(averaging::coupled_error(run.tpl, eps, run.n_paths, run.dt, run.seed, run.workers));
      ok.push_back(true);
    } catch (const std::exception& e) {
      cells.push_back({std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN(),
                       std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN(), {}});
      ok.push_back(false);
      r.add_verdict("cell eps=" + format_double(eps), false, e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const auto& c = cells.back();
    r.add_row({eps, static_cast<double>(run.n_paths), run.dt, c.mean, c.se, c.sup4_mean,
               run.record_runtime ? secs : 0.0});
    partition.push_back(std::sqrt(eps));  // eps theta(eps) with theta = eps^{-1/2}
  }

  // Paired standard error of consecutive differences (both cells share noise path by path).
  bool monotone = true;
  std::string detail;
  for (std::size_t i = 1; i < cells.size(); ++i) {
    if (!ok[i] || !ok[i - 1]) {
      monotone = false;
      continue;
    }
    std::vector<double> diff;
    for (std::size_t p = 0; p < run.n_paths; ++p) diff.push_back(cells[i].paths[p].err - cells[i - 1].paths[p].err);
    const double se = mean_se(diff).se;
    if (!(cells[i].mean <= cells[i - 1].mean + 2.0 * se)) {
      monotone = false;
      detail += "rise at eps=" + format_double(run.eps_grid[i]) + "; ";
    }
  }
  r.add_verdict("criterion-9 error non-increasing within 2 SE", monotone, detail);
  const double first = cells.front().mean, last = cells.back().mean;
  const bool ratio_ok = (last < 0.2 * first) || (first == 0.0 && last == 0.0);
  r.add_verdict("criterion-9 error(eps_min) < 0.2 error(eps_max)", ratio_ok,
                "ratio " + format_double(first > 0.0 ? last / first : 0.0));
  bool bounded = true;
  for (const auto& c : cells)
    if (!(c.sup4_mean <= 2.0 * cells.front().sup4_mean)) bounded = false;
  r.add_verdict("criterion-9 E sup|X|^4 within 2x of the largest eps", bounded);
  r.fingerprint = fingerprint(run.seed, run.dt, run.n_paths);
  r.fingerprint["partition_delta"] = partition;
  r.sort_rows();
  return r;
}

// ---------------------------------------------------------------------------
// Interacting particles

struct ParticleOptions {
  int count = 5;
  double lambda = 0.5;
  double sigma = 1.0;
  double spacing = 1.0;
  double horizon = 1.0;
  double dt = 1e-3;
  std::size_t paths = 1000;
  std::uint64_t seed = 0;
  unsigned workers = 1;
};

inline ProblemSpec particle_problem(const ParticleOptions& opt) {
  ProblemSpec spec;
  const Index d = opt.count;
  spec.dimension = d;
  spec.potential = ConvexPotential::coulomb_log(opt.lambda, d);
  spec.horizon = opt.horizon;
  Vector x0(d);
  for (Index i = 0; i < d; ++i) x0(i) = opt.spacing * (static_cast<double>(i) - 0.5 * static_cast<double>(d - 1));
  spec.initial_segment = CadlagPath::constant_history(x0, 0.0, opt.horizon, opt.dt);
  spec.wiener = WienerSpec::isotropic(d);
  const double s = opt.sigma;
  spec.diffusion = [s](double, const SegmentView&, Eigen::Ref<Matrix> out) {
    out.setZero();
    out.diagonal().setConstant(s);
  };
  return spec;
}

struct ParticleStats {
  std::size_t violations = 0;  // nodes, summed over paths, that are not strictly ordered
  double min_gap = kInf;
  std::vector<double> path_min_gap;
};

inline ParticleStats particle_study(const ParticleOptions& opt) {
  const ProblemSpec spec = particle_problem(opt);
  const auto per_path = parallel_map(opt.paths, opt.workers, [&](std::size_t i) {
    const SolutionPair sol = simulate(spec, opt.dt, Scheme::prox(), RngStream{opt.seed, i});
    std::pair<std::size_t, double> out{0, kInf};
    for (std::size_t k = 0; k < sol.x.size(); ++k) {
      const auto x = sol.x.node(k);
      if (!detail::strictly_ordered(x)) ++out.first;
      for (Index j = 1; j < x.size(); ++j) out.second = std::min(out.second, x(j) - x(j - 1));
    }
    return out;
  });
  ParticleStats st;
  for (const auto& [v, g] : per_path) {
    st.violations += v;
    st.min_gap = std::min(st.min_gap, g);
    st.path_min_gap.push_back(g);
  }
  return st;
}

// ---------------------------------------------------------------------------
// Galerkin mode statistics

/// Time average of X_k^2 over [burn_in, T] per path (trapezoid on nodes), then the path mean.
inline MeanSE mode_second_moment(const galerkin::SpdeConfig& cfg, int mode_index, double dt, double burn_in,
                                 std::size_t paths, std::uint64_t seed, unsigned workers) {
  require(mode_index >= 1 && mode_index <= cfg.modes, "mode_second_moment: mode index out of range");
  require(burn_in >= 0.0 && burn_in < cfg.horizon, "mode_second_moment: burn_in must lie in [0, T)");
  galerkin::SpdeConfig local = cfg;
  local.dt = dt;
  const ProblemSpec spec = galerkin::build_spectral_problem(local);
  const auto k = static_cast<Index>(mode_index - 1);
  const auto avg = parallel_map(paths, workers, [&](std::size_t i) {
    const SolutionPair sol = simulate(spec, dt, Scheme::prox(), RngStream{seed, i});
    double acc = 0.0, span = 0.0;
    for (std::size_t n = 0; n + 1 < sol.state_count(); ++n) {
      const double t0 = sol.state_time(n), t1 = sol.state_time(n + 1);
      if (t0 < burn_in - 1e-12) continue;
      const double a = sol.state(n)(k), b = sol.state(n + 1)(k);
      acc += 0.5 * (t1 - t0) * (a * a + b * b);
      span += t1 - t0;
    }
    return acc / span;
  });
  return mean_se(avg);
}

// ---------------------------------------------------------------------------
// Resolvent property catalog

inline std::vector<ConvexPotential> property_catalog() {
  std::vector<ConvexPotential> c;
  c.push_back(ConvexPotential::zero(3));
  c.push_back(ConvexPotential::quadratic((Vector(3) << 1.0, 0.5, 2.0).finished()));
  c.push_back(ConvexPotential::indicator(ConvexSetSpec::halfline(Vector::Zero(2))));
  c.push_back(ConvexPotential::indicator(
      ConvexSetSpec::box((Vector(3) << -1.0, -1.0, -1.0).finished(), (Vector(3) << 1.0, 2.0, 1.0).finished())));
  c.push_back(ConvexPotential::indicator(ConvexSetSpec::ball((Vector(2) << 0.2, -0.1).finished(), 1.0)));
  c.push_back(ConvexPotential::indicator(ConvexSetSpec::ordered_cone(3, 0.0)));
  c.push_back(ConvexPotential::coulomb_log(1.0, 2));
  c.push_back(ConvexPotential::coulomb_log(0.5, 4));
  c.push_back(ConvexPotential::pairwise(PairFunction{PairFunction::Kind::inverse_power, 1.0, 1.0}, 3));
  return c;
}

inline ConvergenceReport property_suite(const std::vector<ConvexPotential>& catalog, const PropertyOptions& opt,
                                        std::uint64_t seed, double tolerance, unsigned workers = 1) {
  const auto results = parallel_map(catalog.size(), workers, [&](std::size_t i) {
    return check_resolvent_properties(catalog[i], RngStream{seed, i}, opt);
  });
  ConvergenceReport r;
  r.study = "proptest";
  r.columns = {"potential_index", "nonexpansive", "envelope", "envelope_min", "chain", "monotone", "cross",
               "interior_bound", "subgradient"};
  bool ok = true;
  Json names = Json::array();
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& p = results[i];
    r.add_row({static_cast<double>(i), p.nonexpansive, p.envelope, p.envelope_min, p.chain, p.monotone, p.cross,
               p.interior_bound, p.subgradient});
    names.push_back(p.potential);
    const bool pass = p.worst() <= tolerance && p.subgradient <= 1e-9;
    ok = ok && pass;
    if (!pass) r.add_verdict("criterion-1 " + p.potential, false, "worst " + format_double(p.worst()));
  }
  r.add_verdict("criterion-1 resolvent properties within tolerance", ok);
  r.fingerprint = Json{{"seed", seed}, {"version", kVersion}, {"samples", opt.samples}, {"potentials", names}};
  return r;
}

}  // namespace studies
}  // namespace svi
