#pragma once

// Time stepping for dX in b dt + sigma dW + int f dN~ + A(X) dt - d phi(X) dt:
// proximal-splitting Euler, Yosida-penalised Euler, successive (Picard)
// approximation, the 1-D Skorokhod reflection oracle, and diagnostics for
// the solution concept (finite variation of eta, variational inequality,
// energy equality).

#include "svi/problem.hpp"

#include <cmath>
#include <span>
#include <string>
#include <vector>

namespace svi {

struct Scheme {
  enum class Kind { prox, yosida };
  Kind kind = Kind::prox;
  double epsilon = 0.0;

  static Scheme prox() { return {Kind::prox, 0.0}; }
  static Scheme yosida(double eps) {
    require(eps > 0.0, "yosida scheme: eps must be positive");
    return {Kind::yosida, eps};
  }
  std::string name() const { return kind == Kind::prox ? "prox" : "yosida"; }
};

/// A step failed; the path up to the failing node is attached.
class SimulationError : public std::runtime_error {
 public:
  SimulationError(const std::string& what, SolutionPair partial)
      : std::runtime_error(what), partial_(std::move(partial)) {}
  const SolutionPair& partial() const { return partial_; }

 private:
  SolutionPair partial_;
};

/// Evaluates the explicit part of one step for a fixed problem, reusing its buffers.
class StepEngine {
 public:
  explicit StepEngine(const ProblemSpec& spec)
      : spec_(&spec),
        ax_(spec.dimension),
        b_(spec.dimension),
        f_(spec.dimension),
        comp_(spec.dimension),
        sigma_(spec.dimension, spec.wiener.modes()) {
    if (spec.levy) quad_ = mark_quadrature(*spec.levy);
  }

  const ProblemSpec& spec() const { return *spec_; }

  /// y = x + (A x + b - nu(U) E f) dt + sigma dW + sum_jumps f(mark).
  /// Coefficients read `seg`, the operator A reads x.
  void predictor(double t, const Eigen::Ref<const Vector>& x, const SegmentView& seg, double dt,
                 const Eigen::Ref<const Vector>& dW, std::span<const JumpEvent> jumps, Eigen::Ref<Vector> y) {
    const ProblemSpec& s = *spec_;
    y = x;
    if (!s.op.is_zero()) {
      s.op.apply(t, x, ax_);
      y += dt * ax_;
    }
    if (s.drift) {
      s.drift(t, seg, b_);
      y += dt * b_;
    }
    if (s.diffusion) {
      s.diffusion(t, seg, sigma_);
      y.noalias() += sigma_ * dW;
    }
    if (s.jump && s.levy) {
      compensator(t, seg);
      y -= dt * comp_;
      for (const auto& ev : jumps) {
        s.jump(t, seg, ev.mark, f_);
        y += f_;
      }
    }
  }

  /// comp = nu(U) E[f(t, seg, u)], left in comp().
  void compensator(double t, const SegmentView& seg) {
    comp_.setZero();
    if (!spec_->jump || !spec_->levy) return;
    for (std::size_t q = 0; q < quad_.nodes.size(); ++q) {
      spec_->jump(t, seg, quad_.nodes[q], f_);
      comp_ += quad_.weights[q] * f_;
    }
    comp_ *= spec_->levy->total_intensity;
  }

  const Vector& comp() const { return comp_; }
  const MarkQuadrature& quadrature() const { return quad_; }

 private:
  const ProblemSpec* spec_;
  MarkQuadrature quad_;
  Vector ax_, b_, f_, comp_;
  Matrix sigma_;
};

struct StepResult {
  Vector x_next;
  Vector d_eta;
};

/// One proximal-splitting step: x_next = J_dt(y), d_eta = y - x_next.
inline StepResult prox_euler_step(const Vector& x, const SegmentView& seg, double t, double dt, const Vector& dW,
                                  std::span<const JumpEvent> jumps, const ProblemSpec& spec) {
  require(dt > 0.0, "prox_euler_step: dt must be positive");
  StepEngine engine(spec);
  Vector y(x.size());
  engine.predictor(t, x, seg, dt, dW, jumps, y);
  StepResult r{Vector(x.size()), Vector()};
  spec.potential.resolvent_into(dt, y, r.x_next);
  r.d_eta = y - r.x_next;
  return r;
}

/// One explicit step of the Yosida-penalised equation: the subdifferential is
/// replaced by (1/eps) D phi_eps evaluated at x. Requires dt <= eps.
inline Vector yosida_penalized_step(const Vector& x, const SegmentView& seg, double t, double dt, const Vector& dW,
                                    std::span<const JumpEvent> jumps, const ProblemSpec& spec, double eps) {
  require(dt > 0.0 && eps > 0.0, "yosida_penalized_step: dt and eps must be positive");
  if (dt > eps * (1.0 + 1e-12)) throw std::invalid_argument("yosida_penalized_step: dt > eps (stiff penalty)");
  StepEngine engine(spec);
  Vector y(x.size());
  engine.predictor(t, x, seg, dt, dW, jumps, y);
  const Vector penalty = (x - spec.potential.resolvent(eps, x)) / eps;
  return y - dt * penalty;
}

namespace detail {

inline SolutionPair start_solution(const ProblemSpec& spec, const NoiseRecord& noise, const Scheme& scheme) {
  require(!noise.grid.empty() && noise.grid.front() == 0.0, "simulate: noise grid must start at 0");
  require(std::abs(noise.horizon() - spec.horizon) <= 1e-9 * spec.horizon, "simulate: noise horizon differs from T");
  require(noise.modes() == spec.wiener.modes(), "simulate: noise modes differ from the Wiener spec");
  const bool jumps = spec.levy.has_value();
  const Interpolation interp = jumps ? Interpolation::piecewise_constant : Interpolation::linear;
  SolutionPair sol;
  sol.x = spec.initial_segment;
  sol.x.set_interpolation(interp);
  sol.x.reserve(spec.initial_segment.size() + noise.grid.size());
  sol.history_nodes = spec.initial_segment.size();
  sol.eta = CadlagPath(spec.dimension, 0.0, spec.horizon, interp);
  sol.eta.reserve(noise.grid.size());
  sol.eta.push_back(0.0, Vector::Zero(spec.dimension));
  sol.jump_counts.reserve(noise.grid.size());
  sol.jump_counts.push_back(0);
  sol.dt = noise.nominal_dt;
  sol.scheme = scheme.name();
  sol.epsilon = scheme.epsilon;
  return sol;
}

inline bool finite(const Eigen::Ref<const Vector>& v) { return v.allFinite(); }

}  // namespace detail

/// Runs the scheme on a given noise record. Coefficients are frozen at the
/// left node of every interval; a jump landing at grid[k+1] enters the
/// predictor of interval k and the resolvent is applied after it.
inline SolutionPair simulate(const ProblemSpec& spec, const Scheme& scheme, const NoiseRecord& noise,
                             const RngStream& stream = {}) {
  spec.validate();
  if (scheme.kind == Scheme::Kind::yosida && noise.nominal_dt > scheme.epsilon * (1.0 + 1e-12))
    throw std::invalid_argument("simulate: yosida scheme requires dt <= eps");
  SolutionPair sol = detail::start_solution(spec, noise, scheme);
  sol.stream = stream;

  StepEngine engine(spec);
  const Index n = spec.dimension;
  Vector x = spec.initial_value();
  Vector y(n), x_next(n), eta = Vector::Zero(n), d_eta(n), relaxed(n);
  const double scale = spec.segment_time_scale;

  for (Index k = 0; k < noise.steps(); ++k) {
    const double t = noise.grid[static_cast<std::size_t>(k)];
    const double dt = noise.grid[static_cast<std::size_t>(k + 1)] - t;
    const SegmentView seg(sol.x, t, t - spec.delay(t), scale);
    engine.predictor(t, x, seg, dt, noise.increments.row(k).transpose(), noise.jumps_in_step(k), y);
    try {
      if (scheme.kind == Scheme::Kind::prox) {
        spec.potential.resolvent_into(dt, y, x_next);
        d_eta = y - x_next;
      } else {
        spec.potential.resolvent_into(scheme.epsilon, x, relaxed);
        d_eta = (dt / scheme.epsilon) * (x - relaxed);
        x_next = y - d_eta;
      }
    } catch (const std::exception& e) {
      throw SimulationError(std::string("simulate: step at t = ") + std::to_string(t) + " failed: " + e.what(),
                            std::move(sol));
    }
    if (!detail::finite(x_next))
      throw SimulationError("simulate: non-finite state at t = " + std::to_string(t), std::move(sol));
    eta += d_eta;
    sol.x.push_back(noise.grid[static_cast<std::size_t>(k + 1)], x_next);
    sol.eta.push_back(noise.grid[static_cast<std::size_t>(k + 1)], eta);
    sol.jump_counts.push_back(noise.jump_count(k));
    x = x_next;
  }
  return sol;
}

/// Samples the noise for stream `rng` and runs the scheme; T/dt must be an integer.
inline SolutionPair simulate(const ProblemSpec& spec, double dt, const Scheme& scheme, const RngStream& rng) {
  const NoiseRecord noise =
      make_noise_record(spec.horizon, dt, spec.wiener, spec.levy ? &*spec.levy : nullptr, rng);
  return simulate(spec, scheme, noise, rng);
}

/// The same problem with phi = 0 (plain Euler-Maruyama driver).
inline ProblemSpec without_potential(ProblemSpec spec) {
  spec.potential = ConvexPotential::zero(spec.dimension);
  return spec;
}

/// Exact Skorokhod reflection at 0 of a scalar discrete driver:
/// eta(t) = max(0, max_{s <= t} -Y(s)), X = Y + eta. Nodes before t = 0 are
/// kept as history.
inline SolutionPair skorokhod_1d(const CadlagPath& driver) {
  require(driver.dimension() == 1, "skorokhod_1d: driver must be scalar");
  require(!driver.empty(), "skorokhod_1d: empty driver");
  std::size_t first = driver.locate(0.0);
  if (driver.time(first) < 0.0 && first + 1 < driver.size()) ++first;
  SolutionPair sol;
  sol.x = CadlagPath(1, driver.delay_horizon(), driver.horizon(), driver.interpolation());
  sol.eta = CadlagPath(1, 0.0, driver.horizon(), driver.interpolation());
  for (std::size_t i = 0; i < first; ++i) sol.x.push_back(driver.time(i), driver.node(i));
  sol.history_nodes = first + 1;
  sol.scheme = "skorokhod";
  double running = 0.0;
  Vector v(1), e(1);
  for (std::size_t i = first; i < driver.size(); ++i) {
    const double y = driver.node(i)(0);
    running = std::max(running, -y);
    e(0) = running;
    v(0) = y + running;
    sol.x.push_back(driver.time(i), v);
    sol.eta.push_back(driver.time(i), e);
    sol.jump_counts.push_back(0);
  }
  if (driver.size() > first + 1) sol.dt = driver.time(first + 1) - driver.time(first);
  return sol;
}

// ---------------------------------------------------------------------------
// Successive approximation

struct PicardResult {
  SolutionPair solution;
  std::vector<double> residuals;  // sup-node distance between iterates n and n-1, n = 1, 2, ...
  bool converged = false;
};

/// X^0 = phi on [-h, 0] and phi(0) on [0, T]; iterate n runs the prox scheme
/// with b, sigma, f read from the segment of X^{n-1} and A, d phi acting on
/// X^n, all iterates sharing one noise record.
inline PicardResult picard_solve(const ProblemSpec& spec, const NoiseRecord& noise, double tol, int max_iter,
                                 const RngStream& stream = {}) {
  spec.validate();
  require(tol > 0.0 && max_iter >= 1, "picard_solve: tol > 0 and max_iter >= 1 required");
  const Scheme scheme = Scheme::prox();
  const Index n = spec.dimension;
  const double scale = spec.segment_time_scale;
  StepEngine engine(spec);

  SolutionPair previous = detail::start_solution(spec, noise, scheme);
  {
    const Vector x0 = spec.initial_value();
    for (Index k = 0; k < noise.steps(); ++k) {
      previous.x.push_back(noise.grid[static_cast<std::size_t>(k + 1)], x0);
      previous.eta.push_back(noise.grid[static_cast<std::size_t>(k + 1)], Vector::Zero(n));
      previous.jump_counts.push_back(noise.jump_count(k));
    }
  }

  PicardResult result;
  Vector y(n), x_next(n), eta(n);
  for (int iter = 1; iter <= max_iter; ++iter) {
    SolutionPair current = detail::start_solution(spec, noise, scheme);
    current.stream = stream;
    Vector x = spec.initial_value();
    eta.setZero();
    double residual = 0.0;
    for (Index k = 0; k < noise.steps(); ++k) {
      const double t = noise.grid[static_cast<std::size_t>(k)];
      const double dt = noise.grid[static_cast<std::size_t>(k + 1)] - t;
      const SegmentView seg(previous.x, t, t - spec.delay(t), scale);
      engine.predictor(t, x, seg, dt, noise.increments.row(k).transpose(), noise.jumps_in_step(k), y);
      spec.potential.resolvent_into(dt, y, x_next);
      if (!detail::finite(x_next))
        throw SimulationError("picard_solve: non-finite state at t = " + std::to_string(t), std::move(current));
      eta += y - x_next;
      current.x.push_back(noise.grid[static_cast<std::size_t>(k + 1)], x_next);
      current.eta.push_back(noise.grid[static_cast<std::size_t>(k + 1)], eta);
      current.jump_counts.push_back(noise.jump_count(k));
      residual = std::max(residual, (x_next - previous.state(static_cast<std::size_t>(k + 1))).norm());
      x = x_next;
    }
    result.residuals.push_back(residual);
    previous = std::move(current);
    if (residual < tol) {
      result.converged = true;
      break;
    }
  }
  result.solution = std::move(previous);
  return result;
}

inline PicardResult picard_solve(const ProblemSpec& spec, double dt, const RngStream& rng, double tol,
                                 int max_iter) {
  const NoiseRecord noise =
      make_noise_record(spec.horizon, dt, spec.wiener, spec.levy ? &*spec.levy : nullptr, rng);
  return picard_solve(spec, noise, tol, max_iter, rng);
}

// ---------------------------------------------------------------------------
// Diagnostics

/// Sum of |increments| of eta over [s, t], endpoints interpolated.
inline double total_variation(const CadlagPath& eta, double s, double t) {
  require(!eta.empty(), "total_variation: empty path");
  require(s < t, "total_variation: empty window");
  require(s >= eta.first_time() - 1e-12 && t <= eta.last_time() + 1e-12, "total_variation: window outside path");
  const Index n = eta.dimension();
  Vector prev(n), cur(n);
  eta.value_at(s, prev);
  double total = 0.0;
  for (std::size_t i = eta.locate(s) + 1; i < eta.size() && eta.time(i) < t; ++i) {
    if (eta.time(i) <= s) continue;
    total += (eta.left_limit(i) - prev).norm();
    total += (eta.node(i) - eta.left_limit(i)).norm();
    prev = eta.node(i);
  }
  eta.value_at(t, cur);
  const std::size_t last = eta.locate(t);
  if (eta.time(last) == t && eta.time(last) > s) {
    total += (eta.left_limit(last) - prev).norm() + (eta.node(last) - eta.left_limit(last)).norm();
  } else {
    total += (cur - prev).norm();
  }
  return total;
}

/// Discrete form of <X(t) - alpha(t), d eta(t)> >= (phi(X(t)) - phi(alpha(t))) dt
/// summed over the steps inside [s, t]; each increment of eta is paired with
/// the state at its right node. Returns -inf when X leaves dom phi.
inline double check_variational_inequality(const SolutionPair& sol, const CadlagPath& alpha,
                                           const ConvexPotential& phi, double s, double t) {
  require(s < t, "check_variational_inequality: empty window");
  const Index n = sol.x.dimension();
  Vector a(n);
  double slack = 0.0;
  for (std::size_t k = 0; k + 1 < sol.state_count(); ++k) {
    const double t0 = sol.state_time(k);
    const double t1 = sol.state_time(k + 1);
    if (t0 < s - 1e-12 || t1 > t + 1e-12) continue;
    alpha.value_at(t1, a);
    const double phi_a = phi.evaluate(a);
    if (phi_a == kInf)
      throw std::invalid_argument("check_variational_inequality: alpha leaves the domain at t = " + std::to_string(t1));
    const auto x1 = sol.state(k + 1);
    const double phi_x = phi.evaluate(x1);
    if (phi_x == kInf) return -kInf;
    const Vector d_eta = sol.eta.node(k + 1) - sol.eta.node(k);
    slack += (x1 - a).dot(d_eta) - (phi_x - phi_a) * (t1 - t0);
  }
  return slack;
}

/// Largest distance of a state node from the closure of dom phi.
inline double max_domain_violation(const SolutionPair& sol, const ConvexPotential& phi) {
  double worst = 0.0;
  for (std::size_t i = 0; i < sol.x.size(); ++i) worst = std::max(worst, phi.domain_distance(sol.x.node(i)));
  return worst;
}

/// max_k | |X(t_k)|^2 - R(t_k) | where R assembles the right-hand side of the
/// energy equality from the discrete sums (left-point Ito sums, with the Ito
/// corrections tr(sigma Q sigma^T) dt and sum |f|^2 over jumps).
inline double energy_residual(const SolutionPair& sol, const ProblemSpec& spec, const NoiseRecord& noise) {
  if (static_cast<Index>(sol.state_count()) != noise.steps() + 1)
    throw std::invalid_argument("energy_residual: noise record does not match the solution grid");
  const Index n = spec.dimension;
  StepEngine engine(spec);
  Vector ax(n), b(n), f(n), x(n);
  Matrix sigma(n, spec.wiener.modes());
  const Vector& q = spec.wiener.covariance_diag;
  double rhs = sol.state(0).squaredNorm();
  double worst = 0.0;
  for (Index k = 0; k < noise.steps(); ++k) {
    const auto kk = static_cast<std::size_t>(k);
    const double t = noise.grid[kk];
    const double dt = noise.grid[kk + 1] - t;
    x = sol.state(kk);
    const SegmentView seg(sol.x, t, t - spec.delay(t), spec.segment_time_scale);
    double inc = 0.0;
    if (!spec.op.is_zero()) {
      spec.op.apply(t, x, ax);
      inc += 2.0 * x.dot(ax) * dt;
    }
    if (spec.drift) {
      spec.drift(t, seg, b);
      inc += 2.0 * x.dot(b) * dt;
    }
    if (spec.diffusion) {
      spec.diffusion(t, seg, sigma);
      inc += 2.0 * x.dot(sigma * noise.increments.row(k).transpose());
      inc += (sigma.array().square().rowwise() * q.transpose().array()).sum() * dt;
    }
    if (spec.jump && spec.levy) {
      engine.compensator(t, seg);
      inc -= 2.0 * x.dot(engine.comp()) * dt;
      for (const auto& ev : noise.jumps_in_step(k)) {
        spec.jump(t, seg, ev.mark, f);
        inc += 2.0 * x.dot(f) + f.squaredNorm();
      }
    }
    const Vector d_eta = sol.eta.node(kk + 1) - sol.eta.node(kk);
    inc -= 2.0 * x.dot(d_eta);
    rhs += inc;
    worst = std::max(worst, std::abs(sol.state(kk + 1).squaredNorm() - rhs));
  }
  return worst;
}

}  // namespace svi
