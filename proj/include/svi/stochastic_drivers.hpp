#pragma once

// Wiener increments with diagonal covariance, finite-activity Poisson random
// measures, compensator bookkeeping, and the per-path noise record shared by
// coupled simulations.

#include "svi/core.hpp"
#include "svi/rng.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <span>
#include <variant>
#include <vector>

namespace svi {

using IncrementTable = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct WienerSpec {
  Vector covariance_diag;  // q_j >= 0, one per mode

  static WienerSpec diagonal(Vector q) {
    require(q.size() > 0, "WienerSpec: at least one mode");
    require(q.minCoeff() >= 0.0, "WienerSpec: covariance entries must be nonnegative");
    return WienerSpec{std::move(q)};
  }
  static WienerSpec isotropic(Index modes, double q = 1.0) { return diagonal(Vector::Constant(modes, q)); }

  Index modes() const { return covariance_diag.size(); }
  double trace() const { return covariance_diag.sum(); }
};

struct UniformBoxMarks {
  Vector lower;
  Vector upper;
};

struct GaussianMarks {
  Vector mean;
  Vector stddev;
};

struct DiscreteAtomMarks {
  std::vector<Vector> atoms;
  std::vector<double> weights;  // normalised to sum 1
};

using MarkSampler = std::variant<UniformBoxMarks, GaussianMarks, DiscreteAtomMarks>;

struct JumpEvent {
  double time = 0.0;
  Vector mark;
};

/// Finite Levy measure nu = total_intensity * (mark distribution).
struct LevyConfig {
  Index mark_dimension = 1;
  double total_intensity = 0.0;
  MarkSampler sampler;

  static LevyConfig uniform_box(double intensity, Vector lower, Vector upper) {
    require_dimension("uniform marks", lower.size(), upper.size());
    require((upper - lower).minCoeff() >= 0.0, "uniform marks: lower <= upper required");
    const Index d = lower.size();
    return make(intensity, d, UniformBoxMarks{std::move(lower), std::move(upper)});
  }
  static LevyConfig gaussian(double intensity, Vector mean, Vector stddev) {
    require_dimension("gaussian marks", mean.size(), stddev.size());
    require(stddev.minCoeff() >= 0.0, "gaussian marks: stddev must be nonnegative");
    const Index d = mean.size();
    return make(intensity, d, GaussianMarks{std::move(mean), std::move(stddev)});
  }
  static LevyConfig discrete_atoms(double intensity, std::vector<Vector> atoms, std::vector<double> weights) {
    require(!atoms.empty() && atoms.size() == weights.size(), "discrete marks: atoms and weights must match");
    double total = 0.0;
    for (double w : weights) {
      require(w >= 0.0, "discrete marks: weights must be nonnegative");
      total += w;
    }
    require(total > 0.0, "discrete marks: weights must not all vanish");
    for (double& w : weights) w /= total;
    const Index d = atoms.front().size();
    for (const auto& a : atoms) require_dimension("discrete marks", d, a.size());
    return make(intensity, d, DiscreteAtomMarks{std::move(atoms), std::move(weights)});
  }

  /// Same mark law, intensity multiplied by c.
  LevyConfig with_intensity_scaled(double c) const {
    LevyConfig out = *this;
    out.total_intensity *= c;
    require(out.total_intensity > 0.0 && std::isfinite(out.total_intensity), "levy: intensity must stay finite");
    return out;
  }

  Vector sample_mark(RandomEngine& eng) const {
    return std::visit(
        [&](const auto& s) -> Vector {
          using S = std::decay_t<decltype(s)>;
          Vector m(mark_dimension);
          if constexpr (std::is_same_v<S, UniformBoxMarks>) {
            for (Index i = 0; i < m.size(); ++i) m(i) = eng.uniform(s.lower(i), s.upper(i));
          } else if constexpr (std::is_same_v<S, GaussianMarks>) {
            for (Index i = 0; i < m.size(); ++i) m(i) = s.mean(i) + s.stddev(i) * eng.normal();
          } else {
            double u = eng.uniform();
            std::size_t k = 0;
            for (; k + 1 < s.weights.size(); ++k) {
              if (u < s.weights[k]) break;
              u -= s.weights[k];
            }
            m = s.atoms[k];
          }
          return m;
        },
        sampler);
  }

 private:
  static LevyConfig make(double intensity, Index d, MarkSampler s) {
    require(intensity > 0.0 && std::isfinite(intensity), "levy: total intensity must be positive and finite");
    require(d > 0, "levy: mark dimension must be positive");
    return LevyConfig{d, intensity, std::move(s)};
  }
};

// ---------------------------------------------------------------------------
// Expectations over the mark law

/// Nodes and probability weights representing the mark distribution.
struct MarkQuadrature {
  std::vector<Vector> nodes;
  std::vector<double> weights;
};

namespace detail {

// Golub-Welsch for a symmetric Jacobi matrix with zero diagonal; weights are
// normalised to a probability measure.
inline void golub_welsch(const std::vector<double>& offdiag, std::vector<double>& nodes,
                         std::vector<double>& weights) {
  const Index n = static_cast<Index>(offdiag.size()) + 1;
  Matrix jac = Matrix::Zero(n, n);
  for (Index k = 0; k + 1 < n; ++k) jac(k, k + 1) = jac(k + 1, k) = offdiag[static_cast<std::size_t>(k)];
  Eigen::SelfAdjointEigenSolver<Matrix> es(jac);
  nodes.assign(static_cast<std::size_t>(n), 0.0);
  weights.assign(static_cast<std::size_t>(n), 0.0);
  for (Index i = 0; i < n; ++i) {
    nodes[static_cast<std::size_t>(i)] = es.eigenvalues()(i);
    const double v0 = es.eigenvectors()(0, i);
    weights[static_cast<std::size_t>(i)] = v0 * v0;
  }
}

/// Gauss-Legendre rule on [-1, 1], weights summing to 1.
inline void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights) {
  std::vector<double> b;
  for (int k = 1; k < n; ++k) b.push_back(k / std::sqrt(4.0 * k * k - 1.0));
  golub_welsch(b, nodes, weights);
}

/// Gauss-Hermite rule for the standard normal law.
inline void gauss_hermite(int n, std::vector<double>& nodes, std::vector<double>& weights) {
  std::vector<double> b;
  for (int k = 1; k < n; ++k) b.push_back(std::sqrt(static_cast<double>(k)));
  golub_welsch(b, nodes, weights);
}

}  // namespace detail

inline MarkQuadrature mark_quadrature(const LevyConfig& cfg) {
  MarkQuadrature q;
  const Index d = cfg.mark_dimension;
  if (const auto* atoms = std::get_if<DiscreteAtomMarks>(&cfg.sampler)) {
    q.nodes = atoms->atoms;
    q.weights = atoms->weights;
    return q;
  }
  if (d > 3) {
    // Fixed-stream Monte Carlo for high-dimensional marks.
    constexpr int samples = 4096;
    RandomEngine eng(RngStream{0x6d61726b71756164ULL, static_cast<std::uint64_t>(d)});
    for (int i = 0; i < samples; ++i) {
      q.nodes.push_back(cfg.sample_mark(eng));
      q.weights.push_back(1.0 / samples);
    }
    return q;
  }
  const int per_dim = d == 1 ? 24 : (d == 2 ? 12 : 8);
  std::vector<double> x1, w1;
  const bool uniform = std::holds_alternative<UniformBoxMarks>(cfg.sampler);
  if (uniform) detail::gauss_legendre(per_dim, x1, w1);
  else detail::gauss_hermite(per_dim, x1, w1);

  std::vector<int> idx(static_cast<std::size_t>(d), 0);
  while (true) {
    Vector node(d);
    double w = 1.0;
    for (Index i = 0; i < d; ++i) {
      const auto k = static_cast<std::size_t>(idx[static_cast<std::size_t>(i)]);
      w *= w1[k];
      if (uniform) {
        const auto& s = std::get<UniformBoxMarks>(cfg.sampler);
        node(i) = s.lower(i) + 0.5 * (s.upper(i) - s.lower(i)) * (x1[k] + 1.0);
      } else {
        const auto& s = std::get<GaussianMarks>(cfg.sampler);
        node(i) = s.mean(i) + s.stddev(i) * x1[k];
      }
    }
    q.nodes.push_back(std::move(node));
    q.weights.push_back(w);
    Index i = 0;
    while (i < d && ++idx[static_cast<std::size_t>(i)] == per_dim) idx[static_cast<std::size_t>(i++)] = 0;
    if (i == d) break;
  }
  return q;
}

/// (t - s) nu(U) E[integrand(mark)].
template <class Integrand>
Vector compensator_integral(const LevyConfig& cfg, const MarkQuadrature& quad, Integrand&& integrand, double s,
                            double t) {
  Vector acc;
  for (std::size_t i = 0; i < quad.nodes.size(); ++i) {
    Vector v = integrand(quad.nodes[i]);
    if (acc.size() == 0) acc = Vector::Zero(v.size());
    acc += quad.weights[i] * v;
  }
  return (t - s) * cfg.total_intensity * acc;
}

template <class Integrand>
Vector compensator_integral(const LevyConfig& cfg, Integrand&& integrand, double s, double t) {
  return compensator_integral(cfg, mark_quadrature(cfg), std::forward<Integrand>(integrand), s, t);
}

/// sum over events in (s, t] of integrand(mark) minus the compensator on [s, t].
template <class Integrand>
Vector compensated_jump_sum(const LevyConfig& cfg, std::span<const JumpEvent> events, Integrand&& integrand,
                            double s, double t) {
  Vector total = compensator_integral(cfg, integrand, s, t);
  total = -total;
  for (const auto& ev : events)
    if (ev.time > s && ev.time <= t) total += integrand(ev.mark);
  return total;
}

// ---------------------------------------------------------------------------
// Samplers

/// Row k holds the increments over [grid[k], grid[k+1]]; entry (k, j) ~ N(0, q_j dt_k).
inline IncrementTable sample_wiener_increments(const WienerSpec& spec, std::span<const double> grid,
                                               const RngStream& rng) {
  require(grid.size() >= 2, "sample_wiener_increments: grid needs at least two nodes");
  const auto steps = static_cast<Index>(grid.size() - 1);
  const Index modes = spec.modes();
  IncrementTable out(steps, modes);
  RandomEngine eng(rng);
  const Vector sd_unit = spec.covariance_diag.cwiseSqrt();
  for (Index k = 0; k < steps; ++k) {
    const double dt = grid[static_cast<std::size_t>(k + 1)] - grid[static_cast<std::size_t>(k)];
    require(dt > 0.0, "sample_wiener_increments: grid must be strictly increasing");
    const double sq = std::sqrt(dt);
    for (Index j = 0; j < modes; ++j) {
      const double z = eng.normal();
      out(k, j) = sd_unit(j) == 0.0 ? 0.0 : sd_unit(j) * sq * z;
    }
  }
  return out;
}

/// Events of the Poisson random measure on (0, T], in time order.
inline std::vector<JumpEvent> sample_jump_events(const LevyConfig& cfg, double horizon, const RngStream& rng) {
  require(horizon > 0.0, "sample_jump_events: horizon must be positive");
  RandomEngine eng(rng);
  std::vector<JumpEvent> events;
  double t = 0.0;
  while (true) {
    t += eng.exponential(cfg.total_intensity);
    if (t > horizon) break;
    events.push_back(JumpEvent{t, cfg.sample_mark(eng)});
  }
  return events;
}

// ---------------------------------------------------------------------------
// Noise record of one path

/// Uniform grid 0, dt, ..., T; T/dt must be an integer.
inline std::vector<double> uniform_grid(double horizon, double dt) {
  require(dt > 0.0 && horizon > 0.0, "uniform_grid: dt and T must be positive");
  const double ratio = horizon / dt;
  const auto n = static_cast<long long>(std::llround(ratio));
  require(n >= 1 && std::abs(ratio - static_cast<double>(n)) <= 1e-9 * std::max(1.0, ratio),
          "uniform_grid: T/dt must be an integer");
  std::vector<double> grid(static_cast<std::size_t>(n + 1));
  for (long long k = 0; k < n; ++k) grid[static_cast<std::size_t>(k)] = static_cast<double>(k) * dt;
  grid.back() = horizon;
  return grid;
}

/// Everything random about one path: the simulation grid (uniform nodes plus
/// jump times), Wiener increments per interval, and the jump events.
struct NoiseRecord {
  std::vector<double> grid;
  IncrementTable increments;
  std::vector<JumpEvent> jumps;
  std::vector<std::size_t> jump_offset;  // step k owns jumps [offset[k], offset[k+1]), landing at grid[k+1]
  double nominal_dt = 0.0;

  Index steps() const { return static_cast<Index>(grid.size()) - 1; }
  double horizon() const { return grid.back(); }
  Index modes() const { return increments.cols(); }

  std::span<const JumpEvent> jumps_in_step(Index k) const {
    const auto b = jump_offset[static_cast<std::size_t>(k)];
    const auto e = jump_offset[static_cast<std::size_t>(k) + 1];
    return std::span<const JumpEvent>(jumps.data() + b, e - b);
  }
  int jump_count(Index k) const { return static_cast<int>(jumps_in_step(k).size()); }
};

inline NoiseRecord make_noise_record(double horizon, double dt, const WienerSpec& wiener, const LevyConfig* levy,
                                     const RngStream& rng) {
  NoiseRecord rec;
  rec.nominal_dt = dt;
  const std::vector<double> base = uniform_grid(horizon, dt);
  if (levy) rec.jumps = sample_jump_events(*levy, horizon, rng.child(1));

  rec.grid.reserve(base.size() + rec.jumps.size());
  std::vector<std::size_t> lands_at;  // grid index each jump lands on
  lands_at.reserve(rec.jumps.size());
  std::size_t j = 0;
  for (std::size_t k = 0; k < base.size(); ++k) {
    while (j < rec.jumps.size() && rec.jumps[j].time < base[k]) {
      if (rec.grid.empty() || rec.grid.back() < rec.jumps[j].time) rec.grid.push_back(rec.jumps[j].time);
      lands_at.push_back(rec.grid.size() - 1);
      ++j;
    }
    rec.grid.push_back(base[k]);
    while (j < rec.jumps.size() && rec.jumps[j].time == base[k]) {
      lands_at.push_back(rec.grid.size() - 1);
      ++j;
    }
  }
  rec.jump_offset.assign(rec.grid.size(), 0);
  {
    std::size_t e = 0;
    for (std::size_t k = 0; k + 1 < rec.grid.size(); ++k) {
      rec.jump_offset[k] = e;
      while (e < lands_at.size() && lands_at[e] == k + 1) ++e;
    }
    rec.jump_offset.back() = e;
  }
  rec.increments = sample_wiener_increments(wiener, rec.grid, rng.child(0));
  return rec;
}

/// Aggregates blocks of `factor` consecutive steps (jump-free records only).
inline NoiseRecord coarsen(const NoiseRecord& fine, int factor) {
  require(factor >= 1, "coarsen: factor must be positive");
  require(fine.jumps.empty(), "coarsen: records with jumps cannot be coarsened");
  require(fine.steps() % factor == 0, "coarsen: step count must be divisible by the factor");
  NoiseRecord out;
  out.nominal_dt = fine.nominal_dt * factor;
  const Index coarse_steps = fine.steps() / factor;
  out.increments = IncrementTable::Zero(coarse_steps, fine.modes());
  out.grid.reserve(static_cast<std::size_t>(coarse_steps + 1));
  for (Index k = 0; k <= coarse_steps; ++k) out.grid.push_back(fine.grid[static_cast<std::size_t>(k * factor)]);
  for (Index k = 0; k < coarse_steps; ++k)
    for (int i = 0; i < factor; ++i) out.increments.row(k) += fine.increments.row(k * factor + i);
  out.jump_offset.assign(out.grid.size(), 0);
  return out;
}

/// Time change t -> t / eps: grid and jump times divided by eps, Wiener
/// increments divided by sqrt(eps).
inline NoiseRecord rescale_time(const NoiseRecord& rec, double eps) {
  require(eps > 0.0, "rescale_time: eps must be positive");
  NoiseRecord out = rec;
  for (double& t : out.grid) t /= eps;
  for (auto& ev : out.jumps) ev.time /= eps;
  out.increments /= std::sqrt(eps);
  out.nominal_dt /= eps;
  return out;
}

}  // namespace svi
