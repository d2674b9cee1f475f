#include "svi/svi.hpp"

#include <gtest/gtest.h>

using namespace svi;

namespace {

// X(s) = s on [-h, T] sampled every dt.
CadlagPath ramp(double h, double T, double dt) {
  CadlagPath p(1, h, T);
  const auto n = static_cast<long>(std::llround((T + h) / dt));
  for (long k = 0; k <= n; ++k) p.push_back(-h + k * dt, Vector::Constant(1, -h + k * dt));
  return p;
}

}  // namespace

TEST(Segment, FirstBranchIsFrozenAtCut) {
  const CadlagPath p = ramp(1.0, 2.0, 0.01);
  const SegmentView s = segment(p, 1.5, DelayFunction::constant(1.0));
  EXPECT_NEAR(s.at(-0.7)(0), 0.5, 1e-12);
  EXPECT_NEAR(s.at(-1.0)(0), 0.5, 1e-12);
}

TEST(Segment, MiddleBranchFollowsPath) {
  const CadlagPath p = ramp(1.0, 2.0, 0.01);
  const SegmentView s = segment(p, 1.5, DelayFunction::constant(1.0));
  EXPECT_NEAR(s.at(1.0)(0), 1.0, 1e-12);
  EXPECT_NEAR(s.at(0.75)(0), 0.75, 1e-12);
}

TEST(Segment, ThirdBranchIsCurrentValue) {
  const CadlagPath p = ramp(1.0, 2.0, 0.01);
  const SegmentView s = segment(p, 1.5, DelayFunction::constant(1.0));
  EXPECT_NEAR(s.at(1.9)(0), 1.5, 1e-12);
  EXPECT_NEAR(s.current()(0), 1.5, 1e-12);
}

TEST(Segment, ZeroDelayErasesHistory) {
  const CadlagPath p = ramp(1.0, 2.0, 0.01);
  const SegmentView s = segment(p, 1.2, DelayFunction::constant(0.0));
  for (double r : {-1.0, -0.3, 0.0, 0.6, 1.2, 2.0}) EXPECT_NEAR(s.at(r)(0), 1.2, 1e-12);
}

TEST(Segment, FullPathDelayUsesThreeBranchFormula) {
  // a(t) = t: first branch holds X(0) on [-h, 0].
  const CadlagPath p = ramp(1.0, 2.0, 0.01);
  const SegmentView s = segment(p, 1.0, DelayFunction::full_path());
  EXPECT_NEAR(s.at(-0.5)(0), 0.0, 1e-12);
  EXPECT_NEAR(s.at(0.4)(0), 0.4, 1e-12);
}

TEST(Segment, ContinuousAtKnots) {
  const CadlagPath p = ramp(1.0, 2.0, 0.01);
  const SegmentView s = segment(p, 1.5, DelayFunction::constant(0.8));
  EXPECT_NEAR(s.at(0.7 - 1e-9)(0), s.at(0.7 + 1e-9)(0), 1e-8);
  EXPECT_NEAR(s.at(1.5 - 1e-9)(0), s.at(1.5 + 1e-9)(0), 1e-8);
}

TEST(Segment, NeverSeesTheFuture) {
  const CadlagPath p = ramp(1.0, 2.0, 0.01);
  const SegmentView s = segment(p, 0.5, DelayFunction::constant(1.0));
  EXPECT_LE(s.sup_norm(), p.sup_norm(-1.0, 0.5) + 1e-15);
  // Window is [-0.5, 0.5]; X(-1) = -1 is frozen out.
  EXPECT_NEAR(s.sup_norm(), 0.5, 1e-12);
}

TEST(Distributed, LinearPathIsExact) {
  const CadlagPath p = ramp(1.0, 2.0, 0.01);
  const Vector v = eval_distributed_delay(p, 1.0, DelayFunction::constant(1.0), [](const Vector& x) { return x; });
  EXPECT_NEAR(v(0), 0.5, 1e-13);
}

TEST(Distributed, ConstantKernel) {
  const CadlagPath p = ramp(1.0, 2.0, 0.01);
  const Vector v = eval_distributed_delay(p, 1.3, DelayFunction::constant(0.37),
                                          [](const Vector&) { return Vector::Constant(2, 3.0); });
  EXPECT_NEAR(v(0), 3.0 * 0.37, 1e-13);
  EXPECT_NEAR(v(1), 3.0 * 0.37, 1e-13);
}

TEST(Distributed, SquareRefinement) {
  CadlagPath p(1, 1.0, 2.0);
  for (long k = 0; k <= 3000; ++k) {
    const double s = -1.0 + k * 1e-3;
    p.push_back(s, Vector::Constant(1, s * s));
  }
  const Vector v = eval_distributed_delay(p, 1.0, DelayFunction::constant(1.0), [](const Vector& x) { return x; });
  EXPECT_NEAR(v(0), 1.0 / 3.0, 1e-5);
}

TEST(SupNorm, ConstantPath) {
  const CadlagPath p = CadlagPath::constant_history((Vector(2) << 3.0, 4.0).finished(), 1.0, 1.0, 0.1);
  EXPECT_DOUBLE_EQ(p.sup_norm(), 5.0);
}

TEST(SupNorm, MaxOfNorms) {
  CadlagPath p(1, 0.0, 2.0);
  p.push_back(0.0, Vector::Constant(1, 0.0));
  p.push_back(1.0, Vector::Constant(1, -3.0));
  p.push_back(2.0, Vector::Constant(1, 2.0));
  EXPECT_DOUBLE_EQ(p.sup_norm(0.0, 2.0), 3.0);
}

TEST(SupNorm, LeftLimitAtJumpCounts) {
  CadlagPath p(1, 0.0, 2.0, Interpolation::piecewise_constant);
  p.push_back(0.0, Vector::Constant(1, 0.0));
  p.push_back(0.5, Vector::Constant(1, 5.0));
  p.push_back(1.0, Vector::Constant(1, 1.0));
  p.push_back(2.0, Vector::Constant(1, 1.0));
  EXPECT_DOUBLE_EQ(p.sup_norm(0.9, 1.0 + 1e-9), 5.0);
  EXPECT_DOUBLE_EQ(p.left_limit(2)(0), 5.0);
}

TEST(Append, GrowsAndIsMonotone) {
  const CadlagPath p = CadlagPath::constant_history(Vector::Constant(1, 1.0), 0.5, 1.0, 0.1);
  const double before = p.sup_norm();
  const CadlagPath q = append(p, 0.1, Vector::Constant(1, -4.0));
  EXPECT_EQ(q.size(), p.size() + 1);
  EXPECT_GE(q.sup_norm(), before);
  const SegmentView s = segment(q, 0.1, DelayFunction::constant(0.5));
  EXPECT_EQ(s.at(0.7)(0), -4.0);
  EXPECT_THROW(append(q, 0.1, Vector::Constant(1, 0.0)), std::invalid_argument);
}

TEST(Delay, ValidateRejectsOutOfRange) {
  EXPECT_NO_THROW(DelayFunction::constant(0.5).validate(0.5, 1.0));
  EXPECT_THROW(DelayFunction::constant(0.6).validate(0.5, 1.0), std::invalid_argument);
  EXPECT_THROW(DelayFunction::full_path().validate(0.5, 1.0), std::invalid_argument);
  EXPECT_NO_THROW(DelayFunction::proportional(0.5).validate(0.5, 1.0));
}

TEST(Delay, TableInterpolates) {
  const auto d = DelayFunction::table({0.0, 1.0}, {0.2, 0.4});
  EXPECT_DOUBLE_EQ(d(0.5), 0.30000000000000004);
  EXPECT_DOUBLE_EQ(d(2.0), 0.4);
}

TEST(Delay, TimeRescaled) {
  EXPECT_DOUBLE_EQ(DelayFunction::constant(0.1).time_rescaled(0.01)(3.0), 10.0);
  EXPECT_DOUBLE_EQ(DelayFunction::proportional(0.5).time_rescaled(0.01)(3.0), 1.5);
}
