#pragma once

// Sine-Galerkin reduction of a 1-D reaction-diffusion SVI on (0, 1) with
// Dirichlet boundary. Modes e_k = sqrt(2) sin(k pi x); pointwise maps are
// applied on the interior collocation points x_j = j / M, M = 2N + 2, and
// projected back with the discrete sine transform.

#include "svi/integrator.hpp"

#include <numbers>

namespace svi::galerkin {

using PointwiseFn = std::function<double(double t, double x, double u)>;
using PointwiseJumpFn = std::function<double(double t, double x, double u, const Vector& mark)>;

inline double eigenvalue(int k) {
  require(k >= 1, "galerkin: mode index starts at 1");
  const double a = k * std::numbers::pi;
  return a * a;
}

inline double mode(int k, double x) { return std::numbers::sqrt2 * std::sin(k * std::numbers::pi * x); }

/// u(x) = sum_k c_k sqrt(2) sin(k pi x).
inline double field_eval(const Eigen::Ref<const Vector>& c, double x) {
  double u = 0.0;
  for (Index k = 0; k < c.size(); ++k) u += c(k) * mode(static_cast<int>(k + 1), x);
  return u;
}

/// <f, e_k> for k = 1..N by Gauss-Legendre on (0, 1).
template <class F>
Vector project_function(F&& f, int modes, int nodes = 0) {
  require(modes >= 1, "project_function: modes >= 1");
  const int q = nodes > 0 ? nodes : std::max(64, 4 * modes);
  std::vector<double> xs, ws;
  svi::detail::gauss_legendre(q, xs, ws);
  Vector c = Vector::Zero(modes);
  for (int i = 0; i < q; ++i) {
    const double x = 0.5 * (xs[static_cast<std::size_t>(i)] + 1.0);
    const double w = ws[static_cast<std::size_t>(i)];
    const double fx = f(x);
    for (int k = 1; k <= modes; ++k) c(k - 1) += w * fx * mode(k, x);
  }
  return c;
}

/// g(u) = sum_i c_i u^i with degree <= 3.
struct Reaction {
  std::vector<double> coeffs;

  double operator()(double u) const {
    double v = 0.0;
    for (std::size_t i = coeffs.size(); i-- > 0;) v = v * u + coeffs[i];
    return v;
  }
  double c(std::size_t i) const { return i < coeffs.size() ? coeffs[i] : 0.0; }

  int degree() const {
    for (std::size_t i = coeffs.size(); i-- > 0;)
      if (coeffs[i] != 0.0) return static_cast<int>(i);
    return 0;
  }

  /// Smallest beta >= 0 with (u1 - u2)(g(u1) - g(u2)) >= -beta |u1 - u2|^2; inf if none.
  double one_sided_beta() const {
    const double c1 = c(1), c2 = c(2), c3 = c(3);
    if (c3 > 0.0) return std::max(0.0, -(c1 - c2 * c2 / (3.0 * c3)));
    if (c3 == 0.0 && c2 == 0.0) return std::max(0.0, -c1);
    return kInf;
  }
};

struct SpdeConfig {
  int modes = 1;
  double m0 = 1.0;
  Reaction reaction;
  // b = b1(u(t)) + b2(u(t - delta1)) + int_{-delta2}^0 b3(u(t + s)) ds, same for sigma and f.
  PointwiseFn b1, b2, b3;
  PointwiseFn sigma1, sigma2, sigma3;
  PointwiseJumpFn f1, f2, f3;
  DelayFunction delta1 = DelayFunction::constant(0.0);
  DelayFunction delta2 = DelayFunction::constant(0.0);
  double history = 0.0;  // h0
  std::optional<ConvexPotential> potential;  // scalar, applied pointwise
  Vector noise_q;                            // per mode; empty = no noise
  std::optional<LevyConfig> levy;
  double horizon = 1.0;
  double dt = 1e-3;  // grid of the initial segment
  /// Initial field phi(t, x) on [-h0, 0] x (0, 1); ignored if initial_modes is set.
  std::function<double(double t, double x)> initial_field;
  std::function<Vector(double t)> initial_modes;
};

struct Collocation {
  Vector points;  // interior points
  Matrix E;       // points x modes
  Matrix P;       // modes x points, P E = I
};

inline Collocation collocation(int modes) {
  const int m = 2 * modes + 2;
  const int np = 2 * modes + 1;
  Collocation c{Vector(np), Matrix(np, modes), Matrix(modes, np)};
  for (int j = 0; j < np; ++j) {
    c.points(j) = static_cast<double>(j + 1) / m;
    for (int k = 0; k < modes; ++k) c.E(j, k) = mode(k + 1, c.points(j));
  }
  c.P = c.E.transpose() / static_cast<double>(m);
  return c;
}

inline void validate(const SpdeConfig& cfg) {
  require(cfg.modes >= 1, "spde: modes must be >= 1");
  require(cfg.m0 > 0.0, "spde: m0 must be positive");
  require(cfg.horizon > 0.0 && cfg.dt > 0.0, "spde: horizon and dt must be positive");
  require(cfg.reaction.degree() <= 3, "spde: reaction polynomial degree above 3 rejected");
  require(cfg.reaction.one_sided_beta() < kInf, "spde: reaction is not one-sided Lipschitz");
  if (cfg.potential) require(cfg.potential->dimension() == 1, "spde: pointwise potential must be scalar");
  if (cfg.noise_q.size() > 0) {
    require(cfg.noise_q.size() == cfg.modes, "spde: noise_q needs one entry per mode");
    require((cfg.noise_q.array() >= 0.0).all(), "spde: noise_q entries must be >= 0");
  }
  require(cfg.history >= 0.0, "spde: history must be >= 0");
  cfg.delta1.validate(cfg.history, cfg.horizon);
  cfg.delta2.validate(cfg.history, cfg.horizon);
  if ((cfg.f1 || cfg.f2 || cfg.f3)) require(cfg.levy.has_value(), "spde: jump maps need a levy block");
  // Explicit treatment of -m0 lambda_N.
  const double stiff = cfg.m0 * eigenvalue(cfg.modes) * cfg.dt;
  if (!(stiff < 2.0))
    throw std::invalid_argument("spde: dt * m0 * lambda_N = " + std::to_string(stiff) + " >= 2 (unstable)");
}

namespace detail {

struct PointwiseSum {
  PointwiseFn now, lagged, distributed;
  bool any() const { return now || lagged || distributed; }

  // Field values of the three-term coefficient at the collocation points.
  void eval(double t, const SegmentView& seg, const Collocation& col, const DelayFunction& d1,
            const DelayFunction& d2, Vector& field, Vector& out) const {
    out.setZero();
    const Index np = col.points.size();
    if (now) {
      field.noalias() = col.E * seg.current();
      for (Index j = 0; j < np; ++j) out(j) += now(t, col.points(j), field(j));
    }
    if (lagged) {
      field.noalias() = col.E * seg.at(seg.time() - d1(t));
      for (Index j = 0; j < np; ++j) out(j) += lagged(t, col.points(j), field(j));
    }
    if (distributed) {
      const double width = d2(t);
      if (width > 0.0) {
        out += seg.distributed(width, [&](const Vector& c) {
          Vector u = col.E * c;
          for (Index j = 0; j < np; ++j) u(j) = distributed(t, col.points(j), u(j));
          return u;
        });
      }
    }
  }
};

}  // namespace detail

/// Finite-dimensional ProblemSpec for the first N modes.
inline ProblemSpec build_spectral_problem(const SpdeConfig& cfg) {
  validate(cfg);
  const int n = cfg.modes;
  auto col = std::make_shared<const Collocation>(collocation(n));
  ProblemSpec spec;
  spec.dimension = n;
  spec.horizon = cfg.horizon;

  Vector diag(n);
  for (int k = 0; k < n; ++k) diag(k) = -cfg.m0 * eigenvalue(k + 1);
  spec.op = OperatorA::diagonal(diag);
  spec.op.m0 = cfg.m0;
  spec.op.beta = cfg.reaction.one_sided_beta();
  if (cfg.reaction.degree() > 0 || cfg.reaction.c(0) != 0.0) {
    const Reaction g = cfg.reaction;
    spec.op.nonlinear = [g, col](double, const Eigen::Ref<const Vector>& x, Eigen::Ref<Vector> out) {
      Vector u = col->E * x;
      for (Index j = 0; j < u.size(); ++j) u(j) = g(u(j));
      out.noalias() = -(col->P * u);
    };
  }

  if (cfg.potential) {
    spec.potential = ConvexPotential::collocated(*cfg.potential, col->E, col->P,
                                                 1.0 / static_cast<double>(2 * n + 2));
  } else {
    spec.potential = ConvexPotential::zero(n);
  }

  const DelayFunction d1 = cfg.delta1, d2 = cfg.delta2;
  const detail::PointwiseSum bsum{cfg.b1, cfg.b2, cfg.b3};
  if (bsum.any()) {
    spec.drift = [bsum, col, d1, d2](double t, const SegmentView& seg, Eigen::Ref<Vector> out) {
      thread_local Vector field, vals;
      field.resize(col->points.size());
      vals.resize(col->points.size());
      bsum.eval(t, seg, *col, d1, d2, field, vals);
      out.noalias() = col->P * vals;
    };
  }

  if (cfg.noise_q.size() > 0) {
    spec.wiener = WienerSpec::diagonal(cfg.noise_q);
    const detail::PointwiseSum ssum{cfg.sigma1, cfg.sigma2, cfg.sigma3};
    if (ssum.any()) {
      spec.diffusion = [ssum, col, d1, d2](double t, const SegmentView& seg, Eigen::Ref<Matrix> out) {
        thread_local Vector field, vals;
        field.resize(col->points.size());
        vals.resize(col->points.size());
        ssum.eval(t, seg, *col, d1, d2, field, vals);
        out.noalias() = col->P * vals.asDiagonal() * col->E;
      };
    } else {
      // Additive modal noise: sigma = I.
      spec.diffusion = [](double, const SegmentView&, Eigen::Ref<Matrix> out) { out.setIdentity(); };
    }
  } else {
    spec.wiener = WienerSpec::diagonal(Vector::Zero(n));
  }

  if (cfg.levy) {
    spec.levy = cfg.levy;
    if (cfg.f1 || cfg.f2 || cfg.f3) {
      const PointwiseJumpFn f1 = cfg.f1, f2 = cfg.f2, f3 = cfg.f3;
      spec.jump = [f1, f2, f3, col, d1, d2](double t, const SegmentView& seg, const Vector& mark,
                                            Eigen::Ref<Vector> out) {
        const Index np = col->points.size();
        Vector vals = Vector::Zero(np);
        if (f1) {
          const Vector u = col->E * seg.current();
          for (Index j = 0; j < np; ++j) vals(j) += f1(t, col->points(j), u(j), mark);
        }
        if (f2) {
          const Vector u = col->E * seg.at(seg.time() - d1(t));
          for (Index j = 0; j < np; ++j) vals(j) += f2(t, col->points(j), u(j), mark);
        }
        if (f3 && d2(t) > 0.0) {
          vals += seg.distributed(d2(t), [&](const Vector& c) {
            Vector u = col->E * c;
            for (Index j = 0; j < np; ++j) u(j) = f3(t, col->points(j), u(j), mark);
            return u;
          });
        }
        out.noalias() = col->P * vals;
      };
    }
  }

  spec.delay = DelayFunction::constant(cfg.history);
  auto initial = [&cfg, n](double t, Eigen::Ref<Vector> out) {
    if (cfg.initial_modes) out = cfg.initial_modes(t);
    else if (cfg.initial_field) out = project_function([&](double x) { return cfg.initial_field(t, x); }, n);
    else out.setZero();
  };
  spec.initial_segment = CadlagPath::from_function(n, cfg.history, cfg.horizon, cfg.dt, initial);
  return spec;
}

struct Snapshot {
  double t = 0.0;
  Vector modes;
};

struct SpdeRun {
  SolutionPair solution;
  std::vector<Snapshot> snapshots;
};

/// Runs the prox scheme on the spectral problem; a snapshot every `cadence` steps (and at T).
inline SpdeRun simulate_spde(const SpdeConfig& cfg, double dt, const RngStream& rng, int cadence = 0) {
  SpdeConfig local = cfg;
  local.dt = dt;
  const ProblemSpec spec = build_spectral_problem(local);
  SpdeRun run{simulate(spec, dt, Scheme::prox(), rng), {}};
  if (cadence > 0) {
    const std::size_t count = run.solution.state_count();
    for (std::size_t k = 0; k < count; k += static_cast<std::size_t>(cadence))
      run.snapshots.push_back({run.solution.state_time(k), Vector(run.solution.state(k))});
    if ((count - 1) % static_cast<std::size_t>(cadence) != 0)
      run.snapshots.push_back({run.solution.state_time(count - 1), Vector(run.solution.state(count - 1))});
  }
  return run;
}

/// V-norm weights 1 + lambda_k.
inline Vector v_norm_weights(int modes) {
  Vector w(modes);
  for (int k = 0; k < modes; ++k) w(k) = 1.0 + eigenvalue(k + 1);
  return w;
}

}  // namespace svi::galerkin
