#pragma once

// Cadlag paths on a time grid over [-h, T], delay functions, and the
// three-branch segment view X_t used by path-dependent coefficients.

#include "svi/core.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace svi {

enum class Interpolation { linear, piecewise_constant };

/// Right-continuous path stored at grid nodes. Between nodes the path is
/// linear (diffusion segments) or held constant (jump segments); for the
/// latter the left limit at node i is the value at node i-1.
class CadlagPath {
 public:
  CadlagPath() = default;
  CadlagPath(Index dim, double h, double horizon, Interpolation interp = Interpolation::linear)
      : dim_(dim), h_(h), horizon_(horizon), interp_(interp) {
    require(dim > 0, "CadlagPath: dimension must be positive");
    require(h >= 0.0, "CadlagPath: delay horizon must be nonnegative");
  }

  /// Constant initial segment on [-h, 0] sampled every dt (a single node at 0 when h = 0).
  static CadlagPath constant_history(const Vector& x0, double h, double horizon, double dt,
                                     Interpolation interp = Interpolation::linear) {
    CadlagPath p(x0.size(), h, horizon, interp);
    p.fill_history([&](double, Eigen::Ref<Vector> out) { out = x0; }, dt);
    return p;
  }

  template <class F>
  static CadlagPath from_function(Index dim, double h, double horizon, double dt, F&& f,
                                  Interpolation interp = Interpolation::linear) {
    CadlagPath p(dim, h, horizon, interp);
    p.fill_history(std::forward<F>(f), dt);
    return p;
  }

  Index dimension() const { return dim_; }
  double delay_horizon() const { return h_; }
  double horizon() const { return horizon_; }
  Interpolation interpolation() const { return interp_; }
  void set_interpolation(Interpolation interp) { interp_ = interp; }

  std::size_t size() const { return times_.size(); }
  bool empty() const { return times_.empty(); }
  double time(std::size_t i) const { return times_[i]; }
  const std::vector<double>& times() const { return times_; }
  double first_time() const { return times_.front(); }
  double last_time() const { return times_.back(); }

  Eigen::Map<const Vector> node(std::size_t i) const { return Eigen::Map<const Vector>(data_.data() + i * dim_, dim_); }
  Eigen::Map<const Vector> back() const { return node(size() - 1); }

  Eigen::Map<const Vector> left_limit(std::size_t i) const {
    if (interp_ == Interpolation::piecewise_constant && i > 0) return node(i - 1);
    return node(i);
  }

  void reserve(std::size_t nodes) {
    times_.reserve(nodes);
    data_.reserve(nodes * static_cast<std::size_t>(dim_));
  }

  /// Extends the path in place; t must exceed the last node time.
  void push_back(double t, const Eigen::Ref<const Vector>& x) {
    require_dimension("CadlagPath::append", dim_, x.size());
    if (!times_.empty() && !(t > times_.back()))
      throw std::invalid_argument("CadlagPath::append: time " + std::to_string(t) +
                                  " does not exceed last node " + std::to_string(times_.back()));
    times_.push_back(t);
    data_.insert(data_.end(), x.data(), x.data() + dim_);
  }

  void truncate(std::size_t nodes) {
    times_.resize(std::min(nodes, times_.size()));
    data_.resize(times_.size() * static_cast<std::size_t>(dim_));
  }

  /// Index of the last node with time <= t (0 if t precedes the first node).
  std::size_t locate(double t) const {
    const auto it = std::upper_bound(times_.begin(), times_.end(), t);
    return it == times_.begin() ? 0 : static_cast<std::size_t>(it - times_.begin()) - 1;
  }

  void value_at(double t, Eigen::Ref<Vector> out) const {
    std::size_t i = locate(t);
    if (interp_ == Interpolation::piecewise_constant) {
      // A lookup a few ulps short of a node (time-changed clocks) takes that node.
      if (i + 1 < size() && times_[i + 1] - t <= 1e-13 * std::max(1.0, std::abs(t))) ++i;
      out = node(i);
      return;
    }
    if (i + 1 >= size() || t <= times_[i]) {
      out = node(i);
      return;
    }
    const double w = (t - times_[i]) / (times_[i + 1] - times_[i]);
    out = (1.0 - w) * node(i) + w * node(i + 1);
  }

  Vector value_at(double t) const {
    Vector out(dim_);
    value_at(t, out);
    return out;
  }

  /// Largest norm over [s, t]: endpoint values, nodes inside, and left limits at interior nodes.
  double sup_norm(double s, double t) const {
    require(!empty(), "sup_norm: empty path");
    require(s <= t, "sup_norm: empty window");
    double best = std::max(value_at(s).norm(), value_at(t).norm());
    for (std::size_t i = locate(s); i < size() && times_[i] <= t; ++i) {
      if (times_[i] < s) continue;
      best = std::max(best, node(i).norm());
      if (times_[i] > s) best = std::max(best, left_limit(i).norm());
    }
    return best;
  }

  double sup_norm() const { return sup_norm(first_time(), last_time()); }

 private:
  template <class F>
  void fill_history(F&& f, double dt) {
    Vector x(dim_);
    if (h_ == 0.0) {
      f(0.0, x);
      push_back(0.0, x);
      return;
    }
    require(dt > 0.0, "history sampling step must be positive");
    const auto n = static_cast<long long>(std::ceil(h_ / dt - 1e-9));
    for (long long k = 0; k <= n; ++k) {
      const double t = k == n ? 0.0 : -h_ + static_cast<double>(k) * (h_ / static_cast<double>(n));
      f(t, x);
      push_back(t, x);
    }
  }

  Index dim_ = 0;
  double h_ = 0.0;
  double horizon_ = 0.0;
  Interpolation interp_ = Interpolation::linear;
  std::vector<double> times_;
  std::vector<double> data_;
};

/// Functional copy of CadlagPath::push_back.
inline CadlagPath append(CadlagPath path, double t, const Vector& x) {
  path.push_back(t, x);
  return path;
}

inline double sup_norm(const CadlagPath& path, double s, double t) { return path.sup_norm(s, t); }

// ---------------------------------------------------------------------------

/// Delay a: [0, T] -> [0, h]; the segment at time t looks back to t - a(t).
class DelayFunction {
 public:
  enum class Kind { constant, proportional, full_path, table };

  static DelayFunction constant(double gamma0) {
    require(gamma0 >= 0.0, "delay: constant must be nonnegative");
    return DelayFunction(Kind::constant, gamma0, 0.0, {}, {});
  }
  static DelayFunction proportional(double iota) {
    require(iota >= 0.0 && iota <= 1.0, "delay: proportional factor must lie in [0, 1]");
    return DelayFunction(Kind::proportional, 0.0, iota, {}, {});
  }
  static DelayFunction full_path() { return DelayFunction(Kind::full_path, 0.0, 1.0, {}, {}); }
  static DelayFunction table(std::vector<double> times, std::vector<double> values) {
    require(times.size() == values.size() && !times.empty(), "delay table: times and values must match");
    for (std::size_t i = 1; i < times.size(); ++i)
      require(times[i] > times[i - 1], "delay table: times must increase");
    for (double v : values) require(v >= 0.0, "delay table: values must be nonnegative");
    return DelayFunction(Kind::table, 0.0, 0.0, std::move(times), std::move(values));
  }

  Kind kind() const { return kind_; }

  double operator()(double t) const {
    switch (kind_) {
      case Kind::constant: return gamma0_;
      case Kind::proportional: return iota_ * t;
      case Kind::full_path: return t;
      case Kind::table: {
        if (t <= times_.front()) return values_.front();
        if (t >= times_.back()) return values_.back();
        const auto it = std::upper_bound(times_.begin(), times_.end(), t);
        const std::size_t i = static_cast<std::size_t>(it - times_.begin()) - 1;
        const double w = (t - times_[i]) / (times_[i + 1] - times_[i]);
        return (1.0 - w) * values_[i] + w * values_[i + 1];
      }
    }
    return 0.0;
  }

  /// Checks a maps [0, T] into [0, h] on a fine sample grid.
  void validate(double h, double horizon) const {
    constexpr int samples = 1024;
    for (int k = 0; k <= samples; ++k) {
      const double t = horizon * k / samples;
      const double a = (*this)(t);
      if (!(a >= 0.0 && a <= h + 1e-12 * std::max(1.0, h)))
        throw std::invalid_argument("delay: a(t) leaves [0, h] at t = " + std::to_string(t));
      if (!(t - a >= -h - 1e-12 * std::max(1.0, h))) throw std::invalid_argument("delay: t - a(t) precedes -h");
    }
  }

  /// Delay for the time-changed path Y(t) = X(eps t): a_Y(t) = a(eps t) / eps.
  DelayFunction time_rescaled(double eps) const {
    switch (kind_) {
      case Kind::constant: return constant(gamma0_ / eps);
      case Kind::proportional: return proportional(iota_);
      case Kind::full_path: return full_path();
      case Kind::table: {
        std::vector<double> t = times_, v = values_;
        for (double& x : t) x /= eps;
        for (double& x : v) x /= eps;
        return table(std::move(t), std::move(v));
      }
    }
    return *this;
  }

 private:
  DelayFunction(Kind k, double gamma0, double iota, std::vector<double> times, std::vector<double> values)
      : kind_(k), gamma0_(gamma0), iota_(iota), times_(std::move(times)), values_(std::move(values)) {}

  Kind kind_;
  double gamma0_;
  double iota_;
  std::vector<double> times_;
  std::vector<double> values_;
};

// ---------------------------------------------------------------------------

/// Lazy view of the segment X_t:
///   r in [-h, t - a(t)]  ->  X(t - a(t))
///   r in [t - a(t), t]   ->  X(r)
///   r in [t, T]          ->  X(t)
/// Queries are in "physical" time; the underlying path may be stored in a
/// time coordinate scaled by 1/time_scale (physical = stored * time_scale).
class SegmentView {
 public:
  SegmentView(const CadlagPath& path, double t_stored, double cut_stored, double time_scale = 1.0)
      : path_(&path), t_(t_stored), cut_(std::min(cut_stored, t_stored)), scale_(time_scale) {
    const std::size_t i = path.locate(t_);
    if (path.time(i) == t_ || i + 1 == path.size()) {
      head_index_ = i;
    } else {
      head_ = path.value_at(t_);
    }
  }

  double time() const { return t_ * scale_; }
  double cut_time() const { return cut_ * scale_; }
  double time_scale() const { return scale_; }
  Index dimension() const { return path_->dimension(); }
  const CadlagPath& path() const { return *path_; }

  /// X(t), the third branch.
  Eigen::Map<const Vector> current() const {
    if (head_.size() > 0) return Eigen::Map<const Vector>(head_.data(), head_.size());
    return path_->node(head_index_);
  }

  /// X(t - a(t)), the first branch.
  void delayed(Eigen::Ref<Vector> out) const { path_->value_at(cut_, out); }

  void at(double r_physical, Eigen::Ref<Vector> out) const {
    const double r = r_physical / scale_;
    if (r >= t_) out = current();
    else path_->value_at(std::max(r, cut_), out);
  }

  Vector at(double r_physical) const {
    Vector out(dimension());
    at(r_physical, out);
    return out;
  }

  /// sup over the whole segment; it never looks past t.
  double sup_norm() const {
    return std::max(path_->sup_norm(cut_, t_), current().norm());
  }

  /// Trapezoidal rule for int_{-delta}^{0} kernel(X(t + s)) ds over the stored
  /// nodes inside the window, endpoints interpolated.
  template <class Kernel>
  Vector distributed(double delta_physical, Kernel&& kernel) const {
    const double delta = delta_physical / scale_;
    require(delta >= 0.0, "distributed delay: window must be nonnegative");
    const double lo = std::max(t_ - delta, cut_);
    if (!(t_ - delta >= path_->first_time() - 1e-12 * std::max(1.0, std::abs(t_))))
      throw std::invalid_argument("distributed delay: window exits the stored path");
    Vector x(dimension());
    at(lo * scale_, x);
    Vector prev_val = kernel(x);
    Vector acc = Vector::Zero(prev_val.size());
    if (delta == 0.0) return acc;
    // Constant first branch contributes when the window reaches past the cut.
    if (t_ - delta < cut_) acc += (cut_ - (t_ - delta)) * prev_val;
    double prev_t = lo;
    for (std::size_t i = path_->locate(lo) + 1; i < path_->size() && path_->time(i) < t_; ++i) {
      const double ti = path_->time(i);
      if (ti <= lo) continue;
      Vector v = kernel(Vector(path_->left_limit(i)));
      acc += 0.5 * (ti - prev_t) * (prev_val + v);
      prev_val = kernel(Vector(path_->node(i)));
      prev_t = ti;
    }
    Vector v = kernel(Vector(current()));
    acc += 0.5 * (t_ - prev_t) * (prev_val + v);
    return scale_ * acc;
  }

 private:
  const CadlagPath* path_;
  double t_;
  double cut_;
  double scale_;
  std::size_t head_index_ = 0;
  Vector head_;
};

/// Segment of `path` at physical time t under delay a.
inline SegmentView segment(const CadlagPath& path, double t, const DelayFunction& a) {
  if (!(t >= 0.0 && t <= path.horizon() * (1.0 + 1e-12) + 1e-15))
    throw std::out_of_range("segment: t outside [0, T]");
  return SegmentView(path, t, t - a(t));
}

template <class Kernel>
Vector eval_distributed_delay(const CadlagPath& path, double t, const DelayFunction& delta, Kernel&& kernel) {
  const double d = delta(t);
  if (t - d < path.first_time() - 1e-12) throw std::invalid_argument("distributed delay: window exits [-h, T]");
  SegmentView view(path, t, t - d);
  return view.distributed(d, std::forward<Kernel>(kernel));
}

}  // namespace svi
