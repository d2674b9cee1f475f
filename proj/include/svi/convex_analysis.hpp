#pragma once

// Convex potentials on R^n: evaluation, resolvents (I + eps d phi)^{-1},
// Moreau-Yosida envelopes and their gradients, and Euclidean projections
// onto the convex sets that define indicator potentials.

#include "svi/core.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

namespace svi {

// ---------------------------------------------------------------------------
// Convex sets

struct HalfLine {
  Vector lower;  // x_i >= lower_i for every coordinate
};

struct Box {
  Vector lower;
  Vector upper;
};

struct Ball {
  Vector center;
  double radius = 1.0;
};

/// { x : x^{i+1} - x^i >= min_gap }; the closure of the strict ordering x^1 < ... < x^d.
struct OrderedCone {
  Index dim = 2;
  double min_gap = 0.0;
};

namespace detail {

/// Pool-adjacent-violators: in-place least-squares nondecreasing fit with unit weights.
inline void isotonic_nondecreasing(Eigen::Ref<Vector> y) {
  const Index n = y.size();
  std::vector<double> level;
  std::vector<Index> count;
  level.reserve(static_cast<std::size_t>(n));
  count.reserve(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    level.push_back(y(i));
    count.push_back(1);
    while (level.size() > 1 && level[level.size() - 2] > level.back()) {
      const double c1 = static_cast<double>(count[count.size() - 2]);
      const double c2 = static_cast<double>(count.back());
      const double merged = (c1 * level[level.size() - 2] + c2 * level.back()) / (c1 + c2);
      const Index merged_count = count[count.size() - 2] + count.back();
      level.pop_back();
      count.pop_back();
      level.back() = merged;
      count.back() = merged_count;
    }
  }
  Index pos = 0;
  for (std::size_t b = 0; b < level.size(); ++b)
    for (Index k = 0; k < count[b]; ++k) y(pos++) = level[b];
}

inline void project_ordered(const Eigen::Ref<const Vector>& x, double gap, Eigen::Ref<Vector> out) {
  const Index n = x.size();
  for (Index i = 0; i < n; ++i) out(i) = x(i) - gap * static_cast<double>(i);
  isotonic_nondecreasing(out);
  for (Index i = 0; i < n; ++i) out(i) += gap * static_cast<double>(i);
}

inline bool strictly_ordered(const Eigen::Ref<const Vector>& x) {
  for (Index i = 1; i < x.size(); ++i)
    if (!(x(i) > x(i - 1))) return false;
  return true;
}

inline double domain_tolerance(const Eigen::Ref<const Vector>& x) {
  return 1e-10 * (1.0 + (x.size() ? x.cwiseAbs().maxCoeff() : 0.0));
}

}  // namespace detail

class ConvexSetSpec {
 public:
  using Shape = std::variant<HalfLine, Box, Ball, OrderedCone>;

  static ConvexSetSpec halfline(Vector lower) {
    require(lower.size() > 0, "halfline: empty lower bound");
    return ConvexSetSpec(HalfLine{std::move(lower)});
  }
  static ConvexSetSpec box(Vector lower, Vector upper) {
    require(lower.size() > 0, "box: empty bounds");
    require_dimension("box bounds", lower.size(), upper.size());
    require((upper - lower).minCoeff() > 0.0, "box: lower < upper required (nonempty interior)");
    return ConvexSetSpec(Box{std::move(lower), std::move(upper)});
  }
  static ConvexSetSpec ball(Vector center, double radius) {
    require(center.size() > 0, "ball: empty center");
    require(radius > 0.0 && std::isfinite(radius), "ball: radius must be positive");
    return ConvexSetSpec(Ball{std::move(center), radius});
  }
  static ConvexSetSpec ordered_cone(Index dim, double min_gap = 0.0) {
    require(dim >= 1, "ordered_cone: dimension must be positive");
    require(min_gap >= 0.0, "ordered_cone: min_gap must be nonnegative");
    return ConvexSetSpec(OrderedCone{dim, min_gap});
  }

  const Shape& shape() const { return shape_; }

  Index dimension() const {
    return std::visit(
        [](const auto& s) -> Index {
          using S = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<S, HalfLine>) return s.lower.size();
          else if constexpr (std::is_same_v<S, Box>) return s.lower.size();
          else if constexpr (std::is_same_v<S, Ball>) return s.center.size();
          else return s.dim;
        },
        shape_);
  }

  bool contains(const Eigen::Ref<const Vector>& x, double tol = 0.0) const {
    require_dimension("ConvexSetSpec::contains", dimension(), x.size());
    return std::visit(
        [&](const auto& s) -> bool {
          using S = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<S, HalfLine>) {
            return ((x - s.lower).array() >= -tol).all();
          } else if constexpr (std::is_same_v<S, Box>) {
            return ((x - s.lower).array() >= -tol).all() && ((s.upper - x).array() >= -tol).all();
          } else if constexpr (std::is_same_v<S, Ball>) {
            return (x - s.center).norm() <= s.radius + tol;
          } else {
            for (Index i = 1; i < x.size(); ++i)
              if (x(i) - x(i - 1) < s.min_gap - tol) return false;
            return true;
          }
        },
        shape_);
  }

  void project_into(const Eigen::Ref<const Vector>& x, Eigen::Ref<Vector> out) const {
    require_dimension("ConvexSetSpec::project", dimension(), x.size());
    std::visit(
        [&](const auto& s) {
          using S = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<S, HalfLine>) {
            out = x.cwiseMax(s.lower);
          } else if constexpr (std::is_same_v<S, Box>) {
            out = x.cwiseMax(s.lower).cwiseMin(s.upper);
          } else if constexpr (std::is_same_v<S, Ball>) {
            const double dist = (x - s.center).norm();
            if (dist <= s.radius) out = x;
            else out = s.center + (s.radius / dist) * (x - s.center);
          } else {
            detail::project_ordered(x, s.min_gap, out);
          }
        },
        shape_);
  }

  Vector project(const Vector& x) const {
    Vector out(x.size());
    project_into(x, out);
    return out;
  }

  /// Signed radius of the largest origin-centred ball inside the set
  /// (0: origin on the boundary, negative: origin outside).
  double origin_clearance() const {
    return std::visit(
        [](const auto& s) -> double {
          using S = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<S, HalfLine>) {
            return (-s.lower).minCoeff();
          } else if constexpr (std::is_same_v<S, Box>) {
            return std::min((-s.lower).minCoeff(), s.upper.minCoeff());
          } else if constexpr (std::is_same_v<S, Ball>) {
            return s.radius - s.center.norm();
          } else {
            return s.dim == 1 ? kInf : -s.min_gap;
          }
        },
        shape_);
  }

  std::string describe() const {
    std::ostringstream os;
    std::visit(
        [&](const auto& s) {
          using S = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<S, HalfLine>) os << "halfline";
          else if constexpr (std::is_same_v<S, Box>) os << "box";
          else if constexpr (std::is_same_v<S, Ball>) os << "ball(r=" << s.radius << ")";
          else os << "ordered_cone(gap=" << s.min_gap << ")";
        },
        shape_);
    os << "[" << dimension() << "]";
    return os.str();
  }

 private:
  explicit ConvexSetSpec(Shape shape) : shape_(std::move(shape)) {}
  Shape shape_;
};

inline Vector project(const ConvexSetSpec& set, const Vector& x) { return set.project(x); }

// ---------------------------------------------------------------------------
// Pair interaction g(r), r > 0, convex and C^1 on (0, inf) with g(0+) = +inf.

struct PairFunction {
  enum class Kind { log, inverse_power };
  Kind kind = Kind::log;
  double strength = 1.0;
  double exponent = 1.0;

  static PairFunction log(double strength) {
    require(strength > 0.0, "pair function: strength must be positive");
    return {Kind::log, strength, 0.0};
  }
  static PairFunction inverse_power(double strength, double exponent) {
    require(strength > 0.0, "pair function: strength must be positive");
    require(exponent > 0.0, "pair function: exponent must be positive");
    return {Kind::inverse_power, strength, exponent};
  }

  double value(double r) const {
    if (!(r > 0.0)) return kInf;
    if (kind == Kind::log) return -strength * std::log(r);
    return strength * std::pow(r, -exponent);
  }
  double d1(double r) const {
    if (kind == Kind::log) return -strength / r;
    return -strength * exponent * std::pow(r, -exponent - 1.0);
  }
  double d2(double r) const {
    if (kind == Kind::log) return strength / (r * r);
    return strength * exponent * (exponent + 1.0) * std::pow(r, -exponent - 2.0);
  }
  /// Rough equilibrium gap for two coincident particles at resolvent parameter eps.
  double natural_gap(double eps) const {
    if (kind == Kind::log) return std::sqrt(2.0 * eps * strength);
    return std::pow(2.0 * eps * strength * exponent, 1.0 / (exponent + 2.0));
  }
};

// ---------------------------------------------------------------------------
// Potentials

class ConvexPotential;

struct ZeroPotential {};

/// phi(x) = 1/2 sum_i w_i x_i^2
struct QuadraticPotential {
  Vector weights;
};

struct IndicatorPotential {
  ConvexSetSpec set;
};

/// phi(x) = -lambda sum_{i<j} ln(x^j - x^i) on the strict ordering, +inf elsewhere.
struct CoulombLogPotential {
  double lambda = 1.0;
};

/// phi(x) = sum_{i<j} g(x^j - x^i) on the strict ordering, +inf elsewhere.
struct PairwisePotential {
  PairFunction g;
};

/// A scalar potential applied pointwise to a field sampled at collocation
/// points: phi(c) = w * sum_j psi((E c)_j). The resolvent is the mass-lumped
/// approximation P J^psi(E c) and is not an exact proximal map.
struct CollocatedPotential {
  std::shared_ptr<const ConvexPotential> pointwise;
  Matrix evaluation;  // collocation points x modes
  Matrix projection;  // modes x collocation points
  double weight = 1.0;
};

struct NewtonOptions {
  double tolerance = 1e-12;  // on || v - u + eps grad phi(v) ||, scaled by (1 + |u|_inf)
  int max_iterations = 100;
};

struct ResolventStats {
  double residual = 0.0;
  int iterations = 0;
};

class ConvexPotential {
 public:
  using Kind = std::variant<ZeroPotential, QuadraticPotential, IndicatorPotential, CoulombLogPotential,
                            PairwisePotential, CollocatedPotential>;

  static ConvexPotential zero(Index dim) {
    require(dim > 0, "zero potential: dimension must be positive");
    return ConvexPotential(ZeroPotential{}, dim);
  }
  static ConvexPotential quadratic(Vector weights) {
    require(weights.size() > 0, "quadratic potential: empty weights");
    require(weights.minCoeff() >= 0.0, "quadratic potential: weights must be nonnegative");
    const Index dim = weights.size();
    return ConvexPotential(QuadraticPotential{std::move(weights)}, dim);
  }
  static ConvexPotential indicator(ConvexSetSpec set) {
    const Index dim = set.dimension();
    require(set.contains(Vector::Zero(dim)), "indicator potential: the set must contain the origin");
    return ConvexPotential(IndicatorPotential{std::move(set)}, dim);
  }
  static ConvexPotential coulomb_log(double lambda, Index particles) {
    require(lambda > 0.0, "coulomb_log: lambda must be positive");
    require(particles >= 2, "coulomb_log: at least two particles");
    return ConvexPotential(CoulombLogPotential{lambda}, particles);
  }
  static ConvexPotential pairwise(PairFunction g, Index particles) {
    require(particles >= 1, "pairwise_g: at least one particle");
    return ConvexPotential(PairwisePotential{g}, particles);
  }
  static ConvexPotential collocated(const ConvexPotential& pointwise, Matrix evaluation, Matrix projection,
                                    double weight) {
    require(pointwise.dimension() == 1, "collocated potential: pointwise potential must be scalar");
    require(evaluation.cols() == projection.rows() && evaluation.rows() == projection.cols(),
            "collocated potential: evaluation/projection shapes disagree");
    require(weight > 0.0, "collocated potential: weight must be positive");
    const Index dim = evaluation.cols();
    return ConvexPotential(CollocatedPotential{std::make_shared<const ConvexPotential>(pointwise),
                                               std::move(evaluation), std::move(projection), weight},
                           dim);
  }

  /// c * phi, c > 0. The resolvent of c*phi at eps is the resolvent of phi at c*eps.
  ConvexPotential scaled(double c) const {
    require(c > 0.0 && std::isfinite(c), "potential scale must be positive");
    ConvexPotential out = *this;
    out.scale_ *= c;
    return out;
  }

  const Kind& kind() const { return kind_; }
  Index dimension() const { return dim_; }
  double scale() const { return scale_; }

  template <class K>
  bool is() const {
    return std::holds_alternative<K>(kind_);
  }

  std::string name() const {
    return std::visit(
        [&](const auto& k) -> std::string {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, ZeroPotential>) return "zero";
          else if constexpr (std::is_same_v<K, QuadraticPotential>) return "quadratic";
          else if constexpr (std::is_same_v<K, IndicatorPotential>) return "indicator:" + k.set.describe();
          else if constexpr (std::is_same_v<K, CoulombLogPotential>) return "coulomb_log";
          else if constexpr (std::is_same_v<K, PairwisePotential>) return "pairwise_g";
          else return "collocated:" + k.pointwise->name();
        },
        kind_);
  }

  /// phi(0) = 0 <= phi everywhere. Interaction potentials fail this and are
  /// admitted with the flag cleared.
  bool satisfies_h4() const {
    return std::visit(
        [](const auto& k) -> bool {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, CoulombLogPotential> || std::is_same_v<K, PairwisePotential>)
            return false;
          else if constexpr (std::is_same_v<K, CollocatedPotential>)
            return k.pointwise->satisfies_h4();
          else
            return true;
        },
        kind_);
  }

  bool origin_in_interior() const {
    if (const auto* ind = std::get_if<IndicatorPotential>(&kind_)) return ind->set.origin_clearance() > 0.0;
    if (const auto* col = std::get_if<CollocatedPotential>(&kind_)) return col->pointwise->origin_in_interior();
    return satisfies_h4();
  }

  /// Differentiable on the interior of its domain with an exact gradient.
  bool is_smooth() const { return !is<IndicatorPotential>() && !is<CollocatedPotential>(); }

  bool exact_resolvent() const { return !is<CollocatedPotential>(); }

  double evaluate(const Eigen::Ref<const Vector>& x) const {
    require_dimension("ConvexPotential::evaluate", dim_, x.size());
    const double raw = std::visit(
        [&](const auto& k) -> double {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, ZeroPotential>) {
            return 0.0;
          } else if constexpr (std::is_same_v<K, QuadraticPotential>) {
            return 0.5 * (k.weights.array() * x.array().square()).sum();
          } else if constexpr (std::is_same_v<K, IndicatorPotential>) {
            return k.set.contains(x, detail::domain_tolerance(x)) ? 0.0 : kInf;
          } else if constexpr (std::is_same_v<K, CoulombLogPotential>) {
            return pair_sum(PairFunction{PairFunction::Kind::log, k.lambda, 0.0}, x);
          } else if constexpr (std::is_same_v<K, PairwisePotential>) {
            return pair_sum(k.g, x);
          } else {
            const Vector field = k.evaluation * x;
            double total = 0.0;
            for (Index j = 0; j < field.size(); ++j) {
              total += k.pointwise->evaluate(field.segment(j, 1));
              if (!std::isfinite(total)) return kInf;
            }
            return k.weight * total;
          }
        },
        kind_);
    return raw == kInf ? kInf : scale_ * raw;
  }

  bool in_domain(const Eigen::Ref<const Vector>& x) const { return evaluate(x) < kInf; }

  /// Gradient of a smooth potential at a point of its domain.
  void gradient_into(const Eigen::Ref<const Vector>& x, Eigen::Ref<Vector> out) const {
    require_dimension("ConvexPotential::gradient", dim_, x.size());
    std::visit(
        [&](const auto& k) {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, ZeroPotential>) {
            out.setZero();
          } else if constexpr (std::is_same_v<K, QuadraticPotential>) {
            out = k.weights.cwiseProduct(x);
          } else if constexpr (std::is_same_v<K, CoulombLogPotential>) {
            pair_gradient(PairFunction{PairFunction::Kind::log, k.lambda, 0.0}, x, out);
          } else if constexpr (std::is_same_v<K, PairwisePotential>) {
            pair_gradient(k.g, x, out);
          } else {
            throw std::invalid_argument("gradient: potential '" + name() + "' is not smooth");
          }
        },
        kind_);
    out *= scale_;
  }

  Vector gradient(const Vector& x) const {
    Vector out(x.size());
    gradient_into(x, out);
    return out;
  }

  /// Nearest point of the closure of the effective domain.
  void project_domain_into(const Eigen::Ref<const Vector>& x, Eigen::Ref<Vector> out) const {
    std::visit(
        [&](const auto& k) {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, IndicatorPotential>) {
            k.set.project_into(x, out);
          } else if constexpr (std::is_same_v<K, CoulombLogPotential> || std::is_same_v<K, PairwisePotential>) {
            detail::project_ordered(x, 0.0, out);
          } else if constexpr (std::is_same_v<K, CollocatedPotential>) {
            const Vector field = k.evaluation * x;
            Vector projected(field.size());
            for (Index j = 0; j < field.size(); ++j)
              k.pointwise->project_domain_into(field.segment(j, 1), projected.segment(j, 1));
            out = k.projection * projected;
          } else {
            out = x;
          }
        },
        kind_);
  }

  /// Distance from x to the closure of the effective domain.
  double domain_distance(const Eigen::Ref<const Vector>& x) const {
    Vector p(x.size());
    project_domain_into(x, p);
    return (x - p).norm();
  }

  /// J_eps(u) = (I + eps d phi)^{-1}(u), written into out (out may not alias u).
  void resolvent_into(double eps, const Eigen::Ref<const Vector>& u, Eigen::Ref<Vector> out,
                      ResolventStats* stats = nullptr, const NewtonOptions& opts = {}) const {
    require(eps > 0.0 && std::isfinite(eps), "resolvent: eps must be positive");
    require_dimension("ConvexPotential::resolvent", dim_, u.size());
    const double e = eps * scale_;
    if (stats) *stats = {};
    std::visit(
        [&](const auto& k) {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, ZeroPotential>) {
            out = u;
          } else if constexpr (std::is_same_v<K, QuadraticPotential>) {
            out = u.cwiseQuotient((1.0 + e * k.weights.array()).matrix());
          } else if constexpr (std::is_same_v<K, IndicatorPotential>) {
            k.set.project_into(u, out);
          } else if constexpr (std::is_same_v<K, CoulombLogPotential>) {
            const PairFunction g{PairFunction::Kind::log, k.lambda, 0.0};
            if (dim_ == 2) coulomb_pair_closed_form(k.lambda, e, u, out, stats);
            else pair_newton(g, e, u, out, stats, opts);
          } else if constexpr (std::is_same_v<K, PairwisePotential>) {
            pair_newton(k.g, e, u, out, stats, opts);
          } else {
            const Vector field = k.evaluation * u;
            Vector relaxed(field.size());
            for (Index j = 0; j < field.size(); ++j)
              k.pointwise->resolvent_into(e, field.segment(j, 1), relaxed.segment(j, 1));
            out = k.projection * relaxed;
          }
        },
        kind_);
  }

  Vector resolvent(double eps, const Vector& u, ResolventStats* stats = nullptr,
                   const NewtonOptions& opts = {}) const {
    Vector out(u.size());
    resolvent_into(eps, u, out, stats, opts);
    return out;
  }

 private:
  ConvexPotential(Kind kind, Index dim) : kind_(std::move(kind)), dim_(dim) {}

  static double pair_sum(const PairFunction& g, const Eigen::Ref<const Vector>& x) {
    const Index n = x.size();
    double total = 0.0;
    for (Index i = 0; i < n; ++i)
      for (Index j = i + 1; j < n; ++j) {
        const double r = x(j) - x(i);
        if (!(r > 0.0)) return kInf;
        total += g.value(r);
      }
    return total;
  }

  static void pair_gradient(const PairFunction& g, const Eigen::Ref<const Vector>& x, Eigen::Ref<Vector> out) {
    const Index n = x.size();
    out.setZero();
    for (Index i = 0; i < n; ++i)
      for (Index j = i + 1; j < n; ++j) {
        const double gp = g.d1(x(j) - x(i));
        out(j) += gp;
        out(i) -= gp;
      }
  }

  // Two particles: the gap r = v2 - v1 solves r^2 - w r - 2 eps lambda = 0 with
  // w = u2 - u1, and the centre of mass is preserved.
  static void coulomb_pair_closed_form(double lambda, double e, const Eigen::Ref<const Vector>& u,
                                       Eigen::Ref<Vector> out, ResolventStats* stats) {
    const double w = u(1) - u(0);
    const double disc = std::sqrt(w * w + 8.0 * e * lambda);
    // Cancellation-free root for w < 0.
    const double gap = w >= 0.0 ? 0.5 * (w + disc) : 4.0 * e * lambda / (disc - w);
    const double centre = 0.5 * (u(0) + u(1));
    out(0) = centre - 0.5 * gap;
    out(1) = centre + 0.5 * gap;
    if (stats) {
      const double g = -e * lambda / gap;
      stats->residual = std::hypot(out(0) - u(0) - g, out(1) - u(1) + g);
      stats->iterations = 0;
    }
  }

  // Damped Newton on F(v) = 1/2 |v - u|^2 + e sum g(v_j - v_i); steps are
  // halved until the iterate stays strictly ordered.
  void pair_newton(const PairFunction& g, double e, const Eigen::Ref<const Vector>& u, Eigen::Ref<Vector> out,
                   ResolventStats* stats, const NewtonOptions& opts) const {
    const Index n = u.size();
    if (n == 1) {
      out = u;
      return;
    }
    const double tol = opts.tolerance * (1.0 + u.cwiseAbs().maxCoeff());
    Vector v(n), grad(n), trial(n), trial_grad(n), step(n);
    Matrix hess(n, n);
    detail::project_ordered(u, 0.5 * g.natural_gap(e), v);

    auto objective = [&](const Vector& p) { return 0.5 * (p - u).squaredNorm() + e * pair_sum(g, p); };
    auto residual_into = [&](const Vector& p, Vector& r) {
      pair_gradient(g, p, r);
      r = p - u + e * r;
    };

    residual_into(v, grad);
    double res = grad.norm();
    int it = 0;
    bool at_roundoff = false;
    for (; it < opts.max_iterations && res > tol; ++it) {
      hess.setIdentity();
      for (Index i = 0; i < n; ++i)
        for (Index j = i + 1; j < n; ++j) {
          const double c = e * g.d2(v(j) - v(i));
          hess(i, i) += c;
          hess(j, j) += c;
          hess(i, j) -= c;
          hess(j, i) -= c;
        }
      step = hess.llt().solve(-grad);
      // Tight clusters: the residual floor sits above tol, the step does not.
      if (step.lpNorm<Eigen::Infinity>() <= 8.0 * std::numeric_limits<double>::epsilon() *
                                                (1.0 + v.cwiseAbs().maxCoeff())) {
        at_roundoff = true;
        break;
      }

      double t = 1.0;
      trial = v + step;
      while (!detail::strictly_ordered(trial) && t > 1e-300) {
        t *= 0.5;
        trial = v + t * step;
      }
      residual_into(trial, trial_grad);
      double trial_res = trial_grad.norm();
      if (!(trial_res < res)) {
        // Armijo backtracking on the strictly convex objective.
        const double f0 = objective(v);
        const double slope = grad.dot(step);
        while (t > 1e-300) {
          const double ft = objective(trial);
          if (ft <= f0 + 1e-4 * t * slope) break;
          t *= 0.5;
          trial = v + t * step;
        }
        residual_into(trial, trial_grad);
        trial_res = trial_grad.norm();
        if (!(t > 1e-300) || !detail::strictly_ordered(trial)) break;
      }
      v = trial;
      grad = trial_grad;
      res = trial_res;
    }
    if (stats) *stats = {res, it};
    if (!(res <= tol) && !at_roundoff) throw ResolventFailure("pairwise resolvent: Newton did not converge", res, it);
    out = v;
  }

  Kind kind_;
  Index dim_;
  double scale_ = 1.0;
};

// ---------------------------------------------------------------------------
// Free-function surface

inline double evaluate(const ConvexPotential& phi, const Vector& x) { return phi.evaluate(x); }

inline Vector resolvent(const ConvexPotential& phi, double eps, const Vector& u) { return phi.resolvent(eps, u); }

/// D phi_eps(u) = u - J_eps(u).
inline Vector yosida_gradient(const ConvexPotential& phi, double eps, const Vector& u) {
  return u - phi.resolvent(eps, u);
}

/// phi_eps(u) = inf_v { 1/2 |v - u|^2 + eps phi(v) }, evaluated at the minimiser J_eps(u).
inline double moreau_envelope(const ConvexPotential& phi, double eps, const Vector& u) {
  const Vector j = phi.resolvent(eps, u);
  return 0.5 * (u - j).squaredNorm() + eps * phi.evaluate(j);
}

/// M0 = sup_{|h| <= 1} phi(gamma0 h) for the catalog kinds where it is available in closed form.
inline double origin_ball_bound(const ConvexPotential& phi, double gamma0) {
  require(gamma0 > 0.0, "origin_ball_bound: gamma0 must be positive");
  return std::visit(
      [&](const auto& k) -> double {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, ZeroPotential>) return 0.0;
        else if constexpr (std::is_same_v<K, QuadraticPotential>)
          return phi.scale() * 0.5 * k.weights.maxCoeff() * gamma0 * gamma0;
        else if constexpr (std::is_same_v<K, IndicatorPotential>)
          return k.set.origin_clearance() >= gamma0 ? 0.0 : kInf;
        else
          return kInf;
      },
      phi.kind());
}

/// eps M0 + <D phi_eps(u), u> - gamma0 |D phi_eps(u)|; nonnegative whenever the
/// ball of radius gamma0 about the origin lies where phi <= M0.
inline double interior_bound_slack(const ConvexPotential& phi, double eps, const Vector& u, double gamma0,
                                   double m0) {
  const Vector d = yosida_gradient(phi, eps, u);
  return eps * m0 + d.dot(u) - gamma0 * d.norm();
}

}  // namespace svi
