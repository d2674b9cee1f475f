#pragma once

// Coefficients oscillating at t / eps, their closed-form time averages, and
// coupled simulation of the fast system against the averaged one.

#include "svi/integrator.hpp"
#include "svi/parallel.hpp"

#include <chrono>
#include <numbers>
#include <variant>

namespace svi::averaging {

struct Sinusoid {
  double amplitude = 1.0;
  double omega = 1.0;
  double phase = 0.0;
  double offset = 0.0;
};

/// l0 + c exp(-rate t); integrable deviation from l0.
struct Decaying {
  double l0 = 1.0;
  double c = 1.0;
  double rate = 1.0;
};

/// Periodic piecewise-linear profile through (times[i], values[i]) on [0, period).
struct PeriodicTable {
  std::vector<double> times;
  std::vector<double> values;
  double period = 1.0;
};

class TimeProfile {
 public:
  using Kind = std::variant<Sinusoid, Decaying, PeriodicTable>;

  TimeProfile() : kind_(Sinusoid{0.0, 0.0, 0.0, 1.0}) {}
  TimeProfile(Sinusoid s) : kind_(s) {
    require(s.omega >= 0.0, "sinusoid: omega must be >= 0");
  }
  TimeProfile(Decaying d) : kind_(d) {
    require(d.rate > 0.0, "decaying profile: rate must be positive");
  }
  TimeProfile(PeriodicTable p) : kind_(std::move(p)) {
    const auto& t = std::get<PeriodicTable>(kind_);
    require(t.period > 0.0, "periodic table: period must be positive");
    require(!t.times.empty() && t.times.size() == t.values.size(), "periodic table: times and values must match");
    require(t.times.front() >= 0.0 && t.times.back() < t.period, "periodic table: knots must lie in [0, period)");
    for (std::size_t i = 1; i < t.times.size(); ++i)
      require(t.times[i] > t.times[i - 1], "periodic table: knots must increase");
  }

  static TimeProfile constant(double v) { return Sinusoid{0.0, 0.0, 0.0, v}; }

  const Kind& kind() const { return kind_; }

  double operator()(double t) const {
    return std::visit(
        [t](const auto& p) -> double {
          using P = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<P, Sinusoid>) {
            return p.offset + p.amplitude * std::sin(p.omega * t + p.phase);
          } else if constexpr (std::is_same_v<P, Decaying>) {
            return p.l0 + p.c * std::exp(-p.rate * t);
          } else {
            return table_value(p, t);
          }
        },
        kind_);
  }

  /// Long-run mean lim (1/T) int_0^T k(s) ds.
  double mean() const {
    return std::visit(
        [](const auto& p) -> double {
          using P = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<P, Sinusoid>) {
            return p.omega == 0.0 ? p.offset + p.amplitude * std::sin(p.phase) : p.offset;
          } else if constexpr (std::is_same_v<P, Decaying>) {
            return p.l0;
          } else {
            return table_integral(p, p.period) / p.period;
          }
        },
        kind_);
  }

  /// Exact (1/T1) int_0^T1 k(s) ds.
  double window_mean(double T1) const {
    require(T1 > 0.0, "window_mean: T1 must be positive");
    return std::visit(
        [T1](const auto& p) -> double {
          using P = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<P, Sinusoid>) {
            if (p.omega == 0.0) return p.offset + p.amplitude * std::sin(p.phase);
            return p.offset + p.amplitude * (std::cos(p.phase) - std::cos(p.omega * T1 + p.phase)) / (p.omega * T1);
          } else if constexpr (std::is_same_v<P, Decaying>) {
            return p.l0 + p.c * (-std::expm1(-p.rate * T1)) / (p.rate * T1);
          } else {
            return table_integral(p, T1) / T1;
          }
        },
        kind_);
  }

  /// Angular rate that a time step has to resolve.
  double frequency() const {
    return std::visit(
        [](const auto& p) -> double {
          using P = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<P, Sinusoid>) {
            return p.amplitude == 0.0 ? 0.0 : p.omega;
          } else if constexpr (std::is_same_v<P, Decaying>) {
            return p.c == 0.0 ? 0.0 : p.rate;
          } else {
            double gap = p.period - p.times.back() + p.times.front();
            for (std::size_t i = 1; i < p.times.size(); ++i) gap = std::min(gap, p.times[i] - p.times[i - 1]);
            return 2.0 * std::numbers::pi / gap;
          }
        },
        kind_);
  }

  bool is_constant() const { return frequency() == 0.0; }

 private:
  static double table_value(const PeriodicTable& p, double t) {
    double s = std::fmod(t, p.period);
    if (s < 0.0) s += p.period;
    const auto& ts = p.times;
    const auto& vs = p.values;
    const std::size_t n = ts.size();
    if (n == 1) return vs[0];
    if (s < ts.front() || s >= ts.back()) {
      // Wrap-around segment from the last knot to the first knot of the next period.
      const double t0 = ts.back();
      const double t1 = ts.front() + p.period;
      const double ss = s < ts.front() ? s + p.period : s;
      const double w = (ss - t0) / (t1 - t0);
      return (1.0 - w) * vs.back() + w * vs.front();
    }
    const auto it = std::upper_bound(ts.begin(), ts.end(), s);
    const std::size_t i = static_cast<std::size_t>(it - ts.begin()) - 1;
    const double w = (s - ts[i]) / (ts[i + 1] - ts[i]);
    return (1.0 - w) * vs[i] + w * vs[i + 1];
  }

  // int_0^T of the profile; exact for the piecewise-linear interpolant.
  static double table_integral(const PeriodicTable& p, double T) {
    std::vector<double> knots{0.0};
    for (double t : p.times)
      if (t > 0.0) knots.push_back(t);
    knots.push_back(p.period);
    auto one_period_upto = [&](double s) {
      double acc = 0.0;
      for (std::size_t i = 0; i + 1 < knots.size() && knots[i] < s; ++i) {
        const double a = knots[i];
        const double b = std::min(knots[i + 1], s);
        acc += 0.5 * (b - a) * (table_value(p, a) + table_value(p, std::nextafter(b, a)));
      }
      return acc;
    };
    const double full = std::floor(T / p.period);
    const double rem = T - full * p.period;
    return full * one_period_upto(p.period) + one_period_upto(rem);
  }

  Kind kind_;
};

enum class Composition { additive, multiplicative };

using DriftShape = std::function<void(const SegmentView& seg, Eigen::Ref<Vector> out)>;
using DiffusionShape = std::function<void(const SegmentView& seg, Eigen::Ref<Matrix> out)>;
using JumpShape = std::function<void(const SegmentView& seg, const Vector& mark, Eigen::Ref<Vector> out)>;

/// additive: base + k(t) perturb; multiplicative: k(t) base.
template <class Shape>
struct OscillatingCoefficient {
  Shape base;
  Shape perturb;
  TimeProfile profile;
  Composition composition = Composition::multiplicative;

  bool empty() const { return !base && !perturb; }

  template <class Out, class... Args>
  void eval_with_factor(double k, Out& out, Out& scratch, const SegmentView& seg, const Args&... args) const {
    out.setZero();
    if (composition == Composition::additive) {
      if (base) base(seg, args..., out);
      if (perturb && k != 0.0) {
        perturb(seg, args..., scratch);
        out += k * scratch;
      }
    } else if (base) {
      base(seg, args..., out);
      out *= k;
    }
  }
};

/// Time-independent data plus oscillating b, sigma, f. The operator A and
/// potential do not oscillate.
struct AveragingTemplate {
  Index dimension = 1;
  ConvexPotential potential = ConvexPotential::zero(1);
  OperatorA op;
  OscillatingCoefficient<DriftShape> drift;
  OscillatingCoefficient<DiffusionShape> diffusion;
  OscillatingCoefficient<JumpShape> jump;
  DelayFunction delay = DelayFunction::constant(0.0);
  CadlagPath initial_segment;
  double horizon = 1.0;
  WienerSpec wiener = WienerSpec::isotropic(1);
  std::optional<LevyConfig> levy;

  double max_frequency() const {
    double w = 0.0;
    if (!drift.empty()) w = std::max(w, drift.profile.frequency());
    if (!diffusion.empty()) w = std::max(w, diffusion.profile.frequency());
    if (!jump.empty()) w = std::max(w, jump.profile.frequency());
    return w;
  }
};

namespace detail {

/// Coefficients at time k(t * time_factor), scaled by `amp` (drift and
/// compensated jumps) and `sigma_amp` (diffusion). `averaged` freezes k at its mean.
inline ProblemSpec assemble(const AveragingTemplate& tpl, double time_factor, bool averaged, double amp,
                            double sigma_amp) {
  ProblemSpec spec;
  spec.dimension = tpl.dimension;
  spec.potential = tpl.potential;
  spec.op = tpl.op;
  spec.delay = tpl.delay;
  spec.initial_segment = tpl.initial_segment;
  spec.horizon = tpl.horizon;
  spec.wiener = tpl.wiener;
  spec.levy = tpl.levy;
  const Index n = tpl.dimension;
  const Index m = tpl.wiener.modes();

  if (!tpl.drift.empty()) {
    const auto c = tpl.drift;
    const double mean = c.profile.mean();
    spec.drift = [c, mean, time_factor, averaged, amp, n](double t, const SegmentView& seg, Eigen::Ref<Vector> out) {
      thread_local Vector o, s;
      o.resize(n);
      s.resize(n);
      c.eval_with_factor(averaged ? mean : c.profile(t * time_factor), o, s, seg);
      out = amp * o;
    };
  }
  if (!tpl.diffusion.empty()) {
    const auto c = tpl.diffusion;
    const double mean = c.profile.mean();
    spec.diffusion = [c, mean, time_factor, averaged, sigma_amp, n, m](double t, const SegmentView& seg,
                                                                       Eigen::Ref<Matrix> out) {
      thread_local Matrix o, s;
      o.resize(n, m);
      s.resize(n, m);
      c.eval_with_factor(averaged ? mean : c.profile(t * time_factor), o, s, seg);
      out = sigma_amp * o;
    };
  }
  if (!tpl.jump.empty()) {
    const auto c = tpl.jump;
    const double mean = c.profile.mean();
    spec.jump = [c, mean, time_factor, averaged, n](double t, const SegmentView& seg, const Vector& mark,
                                                    Eigen::Ref<Vector> out) {
      thread_local Vector o, s;
      o.resize(n);
      s.resize(n);
      c.eval_with_factor(averaged ? mean : c.profile(t * time_factor), o, s, seg, mark);
      out = o;
    };
  }
  return spec;
}

}  // namespace detail

/// dX = b(t/eps, X_t) dt + sigma(t/eps, X_t) dW + int f(t/eps, X_t, u) dN~ + ...
inline ProblemSpec fast_problem(const AveragingTemplate& tpl, double eps) {
  require(eps > 0.0, "fast_problem: eps must be positive");
  return detail::assemble(tpl, 1.0 / eps, false, 1.0, 1.0);
}

/// The system with b, sigma, f replaced by their long-run time averages.
inline ProblemSpec averaged_problem(const AveragingTemplate& tpl) { return detail::assemble(tpl, 1.0, true, 1.0, 1.0); }

/// Y(t) = X^eps(eps t) written as its own equation on [0, T / eps]:
/// eps b(t, .), sqrt(eps) sigma(t, .), intensity eps nu, eps A, eps phi,
/// delay a(eps t) / eps, history phi(eps t). Segment queries stay in the
/// original clock through segment_time_scale = eps.
inline ProblemSpec rescaled_problem(const AveragingTemplate& tpl, double eps) {
  require(eps > 0.0, "rescaled_problem: eps must be positive");
  ProblemSpec spec = detail::assemble(tpl, 1.0, false, eps, std::sqrt(eps));
  spec.potential = tpl.potential.scaled(eps);
  if (!tpl.op.is_zero()) {
    OperatorA op = tpl.op;
    if (op.matrix) *op.matrix *= eps;
    if (op.nonlinear) {
      auto inner = op.nonlinear;
      op.nonlinear = [inner, eps](double t, const Eigen::Ref<const Vector>& x, Eigen::Ref<Vector> out) {
        inner(eps * t, x, out);
        out *= eps;
      };
    }
    spec.op = std::move(op);
  }
  if (tpl.levy) spec.levy = tpl.levy->with_intensity_scaled(eps);
  spec.delay = tpl.delay.time_rescaled(eps);
  spec.horizon = tpl.horizon / eps;
  const CadlagPath& h = tpl.initial_segment;
  CadlagPath y(h.dimension(), h.delay_horizon() / eps, spec.horizon, h.interpolation());
  y.reserve(h.size());
  for (std::size_t i = 0; i < h.size(); ++i) y.push_back(h.time(i) / eps, h.node(i));
  spec.initial_segment = std::move(y);
  spec.segment_time_scale = eps;
  return spec;
}

/// dt has to resolve the fastest profile at scale eps.
inline void check_resolution(const AveragingTemplate& tpl, double eps, double dt) {
  const double w = tpl.max_frequency();
  if (dt * w / eps > 0.5 * (1.0 + 1e-12))
    throw std::invalid_argument("averaging: dt * omega / eps = " + std::to_string(dt * w / eps) +
                                " > 0.5 (oscillation under-resolved)");
}

inline SolutionPair simulate_fast(const AveragingTemplate& tpl, double eps, double dt, const RngStream& rng) {
  require(eps > 0.0 && dt > 0.0, "simulate_fast: eps and dt must be positive");
  check_resolution(tpl, eps, dt);
  return simulate(fast_problem(tpl, eps), dt, Scheme::prox(), rng);
}

/// Numerical time average over [0, T1] of a coefficient at a fixed segment.
struct TimeAverage {
  Matrix numeric;      // (1/T1) int_0^T1 c(s) ds, composite Gauss-Legendre
  Matrix window_exact; // same window, closed form
  Matrix long_run;     // catalog average (b-bar)
  double deviation = 0.0;  // (1/T1) int_0^T1 |c(s) - numeric|^2 ds
};

namespace detail {

template <class Eval>
TimeAverage time_average(const TimeProfile& profile, double T1, Eval&& eval_at_factor) {
  require(T1 > 0.0, "time_average_coefficient: T1 must be positive");
  constexpr int order = 8;
  std::vector<double> xs, ws;
  svi::detail::gauss_legendre(order, xs, ws);
  const double w = profile.frequency();
  const double per_panel = w > 0.0 ? std::min(1.0, 0.5 / w) : T1;
  const long panels = std::max(16L, static_cast<long>(std::ceil(T1 / per_panel)));
  const double h = T1 / static_cast<double>(panels);
  TimeAverage r;
  const Matrix probe = eval_at_factor(0.0);
  r.numeric = Matrix::Zero(probe.rows(), probe.cols());
  std::vector<Matrix> samples;
  std::vector<double> weights;
  // First pass: mean. Second pass: deviation about it.
  for (int pass = 0; pass < 2; ++pass) {
    Matrix acc = Matrix::Zero(probe.rows(), probe.cols());
    double dev = 0.0;
    for (long p = 0; p < panels; ++p) {
      const double a = h * static_cast<double>(p);
      for (int q = 0; q < order; ++q) {
        const double s = a + 0.5 * h * (xs[static_cast<std::size_t>(q)] + 1.0);
        const double wq = h * ws[static_cast<std::size_t>(q)];
        const Matrix v = eval_at_factor(profile(s));
        if (pass == 0) acc += wq * v;
        else dev += wq * (v - r.numeric).squaredNorm();
      }
    }
    if (pass == 0) r.numeric = acc / T1;
    else r.deviation = dev / T1;
  }
  r.window_exact = eval_at_factor(profile.window_mean(T1));
  r.long_run = eval_at_factor(profile.mean());
  return r;
}

}  // namespace detail

inline TimeAverage time_average_coefficient(const OscillatingCoefficient<DriftShape>& c, double T1,
                                            const SegmentView& probe) {
  const Index n = probe.dimension();
  return detail::time_average(c.profile, T1, [&](double k) {
    Vector o(n), s(n);
    c.eval_with_factor(k, o, s, probe);
    return Matrix(o);
  });
}

inline TimeAverage time_average_coefficient(const OscillatingCoefficient<DiffusionShape>& c, double T1,
                                            const SegmentView& probe, Index modes) {
  const Index n = probe.dimension();
  return detail::time_average(c.profile, T1, [&](double k) {
    Matrix o(n, modes), s(n, modes);
    c.eval_with_factor(k, o, s, probe);
    return o;
  });
}

inline TimeAverage time_average_coefficient(const OscillatingCoefficient<JumpShape>& c, double T1,
                                            const SegmentView& probe, const Vector& mark) {
  const Index n = probe.dimension();
  return detail::time_average(c.profile, T1, [&](double k) {
    Vector o(n), s(n);
    c.eval_with_factor(k, o, s, probe, mark);
    return Matrix(o);
  });
}

struct PathErrors {
  double err = 0.0;   // sup_k |X^eps - Xbar|^2 over grid nodes of [0, T]
  double sup4 = 0.0;  // sup over [-h, T] of |X^eps|^4
};

struct CoupledError {
  double mean = 0.0;
  double se = 0.0;
  double sup4_mean = 0.0;
  double sup4_se = 0.0;
  std::vector<PathErrors> paths;
};

/// Monte Carlo estimate of E sup |X^eps - Xbar|^2; path i of both systems is
/// driven by the noise of stream (seed, i).
inline CoupledError coupled_error(const AveragingTemplate& tpl, double eps, std::size_t n_paths, double dt,
                                  std::uint64_t seed, unsigned workers = 1) {
  require(n_paths >= 1, "coupled_error: n_paths >= 1");
  check_resolution(tpl, eps, dt);
  const ProblemSpec fast = fast_problem(tpl, eps);
  const ProblemSpec avg = averaged_problem(tpl);
  const auto paths = parallel_map(n_paths, workers, [&](std::size_t i) {
    const RngStream stream{seed, i};
    const NoiseRecord noise =
        make_noise_record(tpl.horizon, dt, tpl.wiener, tpl.levy ? &*tpl.levy : nullptr, stream);
    const SolutionPair xe = simulate(fast, Scheme::prox(), noise, stream);
    const SolutionPair xb = simulate(avg, Scheme::prox(), noise, stream);
    PathErrors e;
    for (std::size_t k = 0; k < xe.state_count(); ++k)
      e.err = std::max(e.err, (xe.state(k) - xb.state(k)).squaredNorm());
    const double s = xe.x.sup_norm();
    e.sup4 = s * s * s * s;
    return e;
  });
  CoupledError out;
  std::vector<double> a, b;
  a.reserve(n_paths);
  b.reserve(n_paths);
  for (const auto& p : paths) {
    a.push_back(p.err);
    b.push_back(p.sup4);
  }
  const MeanSE ea = mean_se(a), eb = mean_se(b);
  out.mean = ea.mean;
  out.se = ea.se;
  out.sup4_mean = eb.mean;
  out.sup4_se = eb.se;
  out.paths = paths;
  return out;
}

/// Max node distance between X^eps(eps t_k) and the directly integrated
/// time-changed equation on {t_k}, both driven by the same samples.
inline double rescaling_identity_check(const AveragingTemplate& tpl, double eps, double dt, const RngStream& rng) {
  require(eps > 0.0 && dt > 0.0, "rescaling_identity_check: eps and dt must be positive");
  // X^eps lives on [0, eps T] with step eps dt.
  AveragingTemplate short_tpl = tpl;
  short_tpl.horizon = eps * tpl.horizon;
  const ProblemSpec fast = fast_problem(short_tpl, eps);
  const NoiseRecord noise =
      make_noise_record(short_tpl.horizon, eps * dt, tpl.wiener, tpl.levy ? &*tpl.levy : nullptr, rng);
  const SolutionPair x = simulate(fast, Scheme::prox(), noise, rng);

  const ProblemSpec ys = rescaled_problem(short_tpl, eps);
  const NoiseRecord ynoise = rescale_time(noise, eps);
  const SolutionPair y = simulate(ys, Scheme::prox(), ynoise, rng);
  if (x.state_count() != y.state_count()) throw std::runtime_error("rescaling_identity_check: grid mismatch");
  double worst = 0.0;
  for (std::size_t k = 0; k < x.state_count(); ++k) worst = std::max(worst, (x.state(k) - y.state(k)).norm());
  return worst;
}

// ---------------------------------------------------------------------------
// Catalog

struct SinusoidFamilyOptions {
  bool jumps = false;
  double x0 = 1.0;
  double horizon = 1.0;
  double delay = 0.1;  // gamma0 for the lagged drift term
  double history_dt = 1e-3;
  bool reflect = true;  // half-line x >= 0
};

/// Scalar family: b = -X(t) + sin(t) (1 + 0.5 tanh X(t - gamma0)) (additive sinusoid, mean 0),
/// sigma = (1 + e^{-t}) (0.3 + 0.1 sin X(t)) (multiplicative decaying, mean 1),
/// f = 0.3 u with uniform marks on [-1, 1], intensity 2 (time-constant).
inline AveragingTemplate sinusoid_family(const SinusoidFamilyOptions& opt = {}) {
  AveragingTemplate tpl;
  tpl.dimension = 1;
  tpl.potential = opt.reflect ? ConvexPotential::indicator(ConvexSetSpec::halfline(Vector::Zero(1)))
                              : ConvexPotential::zero(1);
  tpl.horizon = opt.horizon;
  tpl.delay = DelayFunction::constant(opt.delay);
  tpl.initial_segment = CadlagPath::constant_history(Vector::Constant(1, opt.x0), opt.delay, opt.horizon,
                                                     opt.history_dt);
  tpl.wiener = WienerSpec::isotropic(1);
  tpl.drift.composition = Composition::additive;
  tpl.drift.profile = Sinusoid{1.0, 1.0, 0.0, 0.0};
  tpl.drift.base = [](const SegmentView& seg, Eigen::Ref<Vector> out) { out(0) = -seg.current()(0); };
  tpl.drift.perturb = [](const SegmentView& seg, Eigen::Ref<Vector> out) {
    Vector lag(1);
    seg.delayed(lag);
    out(0) = 1.0 + 0.5 * std::tanh(lag(0));
  };
  tpl.diffusion.composition = Composition::multiplicative;
  tpl.diffusion.profile = Decaying{1.0, 1.0, 1.0};
  tpl.diffusion.base = [](const SegmentView& seg, Eigen::Ref<Matrix> out) {
    out(0, 0) = 0.3 + 0.1 * std::sin(seg.current()(0));
  };
  if (opt.jumps) {
    tpl.levy = LevyConfig::uniform_box(2.0, Vector::Constant(1, -1.0), Vector::Constant(1, 1.0));
    tpl.jump.composition = Composition::multiplicative;
    tpl.jump.profile = TimeProfile::constant(1.0);
    tpl.jump.base = [](const SegmentView&, const Vector& mark, Eigen::Ref<Vector> out) { out(0) = 0.3 * mark(0); };
  }
  return tpl;
}

/// Deterministic scalar ODE dx = x (1 + sin(t / eps)) dt against dx = x dt.
inline AveragingTemplate deterministic_family(double x0, double horizon, double history_dt) {
  AveragingTemplate tpl;
  tpl.dimension = 1;
  tpl.horizon = horizon;
  tpl.initial_segment = CadlagPath::constant_history(Vector::Constant(1, x0), 0.0, horizon, history_dt);
  tpl.wiener = WienerSpec::diagonal(Vector::Zero(1));
  tpl.drift.composition = Composition::multiplicative;
  tpl.drift.profile = Sinusoid{1.0, 1.0, 0.0, 1.0};
  tpl.drift.base = [](const SegmentView& seg, Eigen::Ref<Vector> out) { out(0) = seg.current()(0); };
  return tpl;
}

/// sup_k (X^eps(t_k) - Xbar(t_k))^2 for deterministic_family from the exact
/// solutions x0 exp(t + eps (1 - cos(t / eps))) and x0 exp(t).
inline double deterministic_oracle(double x0, double eps, const std::vector<double>& grid) {
  double worst = 0.0;
  for (double t : grid) {
    const double d = x0 * std::exp(t) * std::expm1(eps * (1.0 - std::cos(t / eps)));
    worst = std::max(worst, d * d);
  }
  return worst;
}

}  // namespace svi::averaging
