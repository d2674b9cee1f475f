#pragma once

#include "svi/convex_analysis.hpp"
#include "svi/path_segments.hpp"
#include "svi/stochastic_drivers.hpp"

#include <Eigen/Eigenvalues>

#include <functional>
#include <optional>
#include <string>

namespace svi {

/// b(t, X_t) written into out (dimension n).
using DriftFn = std::function<void(double t, const SegmentView& seg, Eigen::Ref<Vector> out)>;
/// sigma(t, X_t) written into out (n x K, K Wiener modes).
using DiffusionFn = std::function<void(double t, const SegmentView& seg, Eigen::Ref<Matrix> out)>;
/// f(t, X_t, u) written into out (dimension n).
using JumpFn = std::function<void(double t, const SegmentView& seg, const Vector& mark, Eigen::Ref<Vector> out)>;

/// The monotone operator A(t, .). A linear part M (A x = M x) plus an
/// optional nonlinear callback; both may be absent (A = 0).
struct OperatorA {
  std::optional<Matrix> matrix;
  std::function<void(double t, const Eigen::Ref<const Vector>& x, Eigen::Ref<Vector> out)> nonlinear;
  double m0 = 0.0;    // coercivity constant, metadata
  double beta = 0.0;  // one-sided bound, metadata

  static OperatorA zero() { return {}; }
  static OperatorA linear(Matrix m) {
    OperatorA op;
    op.matrix = std::move(m);
    return op;
  }
  static OperatorA diagonal(const Vector& d) { return linear(d.asDiagonal()); }

  bool is_zero() const { return !matrix && !nonlinear; }

  /// out = A(t, x); out must not alias x.
  void apply(double t, const Eigen::Ref<const Vector>& x, Eigen::Ref<Vector> out) const {
    if (matrix) out.noalias() = *matrix * x;
    else out.setZero();
    if (nonlinear) {
      Vector extra(x.size());
      nonlinear(t, x, extra);
      out += extra;
    }
  }

  /// Largest eigenvalue of (M + M^T)/2, the one-sided bound of the linear part.
  double one_sided_bound() const {
    if (!matrix) return 0.0;
    const Matrix sym = 0.5 * (*matrix + matrix->transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> es(sym);
    return es.eigenvalues().maxCoeff();
  }
};

/// Full data of a delay-path-dependent SVI with jumps.
struct ProblemSpec {
  Index dimension = 1;
  ConvexPotential potential = ConvexPotential::zero(1);
  OperatorA op;
  DriftFn drift;          // empty: zero
  DiffusionFn diffusion;  // empty: zero
  JumpFn jump;            // empty: zero
  DelayFunction delay = DelayFunction::constant(0.0);
  CadlagPath initial_segment;
  double horizon = 1.0;
  WienerSpec wiener = WienerSpec::isotropic(1);
  std::optional<LevyConfig> levy;
  /// Physical time per stored time unit for segment views (1 except for time-changed problems).
  double segment_time_scale = 1.0;

  double delay_horizon() const { return initial_segment.delay_horizon(); }
  Vector initial_value() const { return Vector(initial_segment.back()); }

  void validate() const {
    require(dimension > 0, "problem: dimension must be positive");
    require(horizon > 0.0, "problem: horizon must be positive");
    require_dimension("problem potential", dimension, potential.dimension());
    require(!initial_segment.empty(), "problem: initial segment is empty");
    require_dimension("problem initial segment", dimension, initial_segment.dimension());
    require(initial_segment.last_time() == 0.0, "problem: initial segment must end at t = 0");
    if (op.matrix) {
      require(op.matrix->rows() == dimension && op.matrix->cols() == dimension, "problem: operator A shape");
    }
    delay.validate(initial_segment.delay_horizon(), horizon);
    for (std::size_t i = 0; i < initial_segment.size(); ++i) {
      const double dist = potential.domain_distance(initial_segment.node(i));
      require(dist <= 1e-9 * (1.0 + initial_segment.node(i).norm()),
              "problem: initial segment leaves the closure of the potential's domain");
    }
  }
};

/// (X, eta) on a common grid, eta(0) = 0.
struct SolutionPair {
  CadlagPath x;
  CadlagPath eta;
  std::vector<int> jump_counts;  // per node of x on [0, T]; 0 for history nodes
  std::size_t history_nodes = 1; // nodes of x on [-h, 0]; the last one is t = 0
  double dt = 0.0;
  std::string scheme;
  double epsilon = 0.0;
  RngStream stream;

  /// Node of x at the k-th grid point of [0, T].
  Eigen::Map<const Vector> state(std::size_t k) const { return x.node(history_nodes - 1 + k); }
  double state_time(std::size_t k) const { return x.time(history_nodes - 1 + k); }
  std::size_t state_count() const { return x.size() - history_nodes + 1; }
};

}  // namespace svi
