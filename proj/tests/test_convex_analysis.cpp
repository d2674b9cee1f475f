#include "svi/svi.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace svi;

namespace {

Vector v1(double a) { return Vector::Constant(1, a); }
Vector v2(double a, double b) { return (Vector(2) << a, b).finished(); }

ConvexPotential halfline() { return ConvexPotential::indicator(ConvexSetSpec::halfline(Vector::Zero(1))); }

}  // namespace

TEST(Evaluate, QuadraticHalfSquare) { EXPECT_DOUBLE_EQ(ConvexPotential::quadratic(v1(1.0)).evaluate(v1(3.0)), 4.5); }

TEST(Evaluate, IndicatorOutsideIsInfinite) { EXPECT_EQ(halfline().evaluate(v1(-1.0)), kInf); }

TEST(Evaluate, CoulombUnitGap) { EXPECT_DOUBLE_EQ(ConvexPotential::coulomb_log(1.0, 2).evaluate(v2(0.0, 1.0)), 0.0); }

TEST(Evaluate, CoulombOutOfOrderIsInfinite) { EXPECT_EQ(ConvexPotential::coulomb_log(1.0, 2).evaluate(v2(1.0, 0.0)), kInf); }

TEST(Resolvent, QuadraticClosedForm) { EXPECT_DOUBLE_EQ(resolvent(ConvexPotential::quadratic(v1(1.0)), 0.5, v1(3.0))(0), 2.0); }

TEST(Resolvent, IndicatorIsProjectionForAnyEps) {
  for (double eps : {1e-6, 0.5, 7.0, 1e6}) EXPECT_EQ(resolvent(halfline(), eps, v1(-1.0))(0), 0.0);
}

TEST(Resolvent, CoulombPairMatchesGapQuadratic) {
  // g solves g^2 - w g - 2 eps lambda = 0; for u = 0, eps = lambda = 1 that is g = sqrt 2,
  // so the pair sits at -+ 1/sqrt 2 around the preserved centre.
  const auto phi = ConvexPotential::coulomb_log(1.0, 2);
  const Vector v = resolvent(phi, 1.0, v2(0.0, 0.0));
  EXPECT_NEAR(v(0), -1.0 / std::numbers::sqrt2, 1e-14);
  EXPECT_NEAR(v(1), 1.0 / std::numbers::sqrt2, 1e-14);
  EXPECT_LT((v + 1.0 * phi.gradient(v) - v2(0.0, 0.0)).norm(), 1e-12);
}

TEST(Resolvent, CoulombResidualOnRandomInputs) {
  const auto phi = ConvexPotential::coulomb_log(0.7, 2);
  RandomEngine eng(RngStream{3, 0});
  for (int i = 0; i < 200; ++i) {
    const Vector u = v2(eng.uniform(-3, 3), eng.uniform(-3, 3));
    const double eps = std::exp(eng.uniform(std::log(1e-3), 0.0));
    const Vector v = resolvent(phi, eps, u);
    EXPECT_LT((v + eps * phi.gradient(v) - u).norm(), 1e-12);
    const double w = u(1) - u(0);
    const double g = 0.5 * (w + std::sqrt(w * w + 8 * eps * 0.7));
    EXPECT_NEAR(v(1) - v(0), g, 1e-10 * (1 + g));
    EXPECT_NEAR(v.sum(), u.sum(), 1e-12 * (1 + u.norm()));
  }
}

TEST(Resolvent, PairwiseLogNewtonMatchesCoulombClosedForm) {
  const auto newton = ConvexPotential::pairwise(PairFunction::log(1.3), 2);
  const auto closed = ConvexPotential::coulomb_log(1.3, 2);
  RandomEngine eng(RngStream{4, 0});
  for (int i = 0; i < 200; ++i) {
    const Vector u = v2(eng.uniform(-3, 3), eng.uniform(-3, 3));
    const double eps = std::exp(eng.uniform(std::log(1e-3), 0.0));
    EXPECT_LT((resolvent(newton, eps, u) - resolvent(closed, eps, u)).norm(), 1e-10);
  }
}

TEST(Resolvent, CoulombManyParticlesStaysOrdered) {
  const auto phi = ConvexPotential::coulomb_log(0.5, 5);
  const Vector u = Vector::Zero(5);
  const Vector v = resolvent(phi, 0.1, u);
  for (Index i = 1; i < 5; ++i) EXPECT_GT(v(i), v(i - 1));
  EXPECT_LT((v + 0.1 * phi.gradient(v) - u).norm(), 1e-10);
}

TEST(Resolvent, ScaledPotentialShiftsEps) {
  const auto phi = ConvexPotential::quadratic(v1(1.0));
  EXPECT_DOUBLE_EQ(resolvent(phi.scaled(2.0), 0.25, v1(3.0))(0), resolvent(phi, 0.5, v1(3.0))(0));
}

TEST(Envelope, ZeroAtOrigin) {
  for (const auto& phi : studies::property_catalog()) {
    if (!phi.satisfies_h4()) continue;
    EXPECT_EQ(moreau_envelope(phi, 0.3, Vector::Zero(phi.dimension())), 0.0) << phi.name();
    EXPECT_EQ(yosida_gradient(phi, 0.3, Vector::Zero(phi.dimension())).norm(), 0.0) << phi.name();
  }
}

TEST(Envelope, IndicatorIsHalfSquaredDistance) { EXPECT_DOUBLE_EQ(moreau_envelope(halfline(), 1.0, v1(-2.0)), 2.0); }

TEST(Envelope, QuadraticIdentity) { EXPECT_DOUBLE_EQ(moreau_envelope(ConvexPotential::quadratic(v1(1.0)), 1.0, v1(2.0)), 1.0); }

TEST(YosidaGradient, Indicator) { EXPECT_DOUBLE_EQ(yosida_gradient(halfline(), 1.0, v1(-3.0))(0), -3.0); }

TEST(YosidaGradient, Quadratic) { EXPECT_DOUBLE_EQ(yosida_gradient(ConvexPotential::quadratic(v1(1.0)), 0.5, v1(3.0))(0), 1.0); }

TEST(Project, Ball) {
  const Vector p = project(ConvexSetSpec::ball(Vector::Zero(2), 1.0), v2(3.0, 4.0));
  EXPECT_DOUBLE_EQ(p(0), 0.6);
  EXPECT_DOUBLE_EQ(p(1), 0.8);
}

TEST(Project, Box) {
  const Vector p = project(ConvexSetSpec::box(Vector::Zero(2), Vector::Ones(2)), v2(-1.0, 0.5));
  EXPECT_EQ(p, v2(0.0, 0.5));
}

TEST(Project, OrderedConePoolsViolators) {
  EXPECT_EQ(project(ConvexSetSpec::ordered_cone(2), v2(2.0, 1.0)), v2(1.5, 1.5));
  const Vector x = (Vector(4) << 3.0, 1.0, 2.0, 0.0).finished();
  const Vector p = project(ConvexSetSpec::ordered_cone(4), x);
  for (Index i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(p(i), 1.5);
}

TEST(Project, OrderedConeWithGap) {
  const Vector p = project(ConvexSetSpec::ordered_cone(2, 1.0), v2(0.0, 0.0));
  EXPECT_DOUBLE_EQ(p(0), -0.5);
  EXPECT_DOUBLE_EQ(p(1), 0.5);
}

TEST(Construction, IndicatorMustContainOrigin) {
  EXPECT_THROW(ConvexPotential::indicator(ConvexSetSpec::halfline(v1(1.0))), std::invalid_argument);
  EXPECT_THROW(ConvexPotential::indicator(ConvexSetSpec::ball(v1(5.0), 1.0)), std::invalid_argument);
}

TEST(Construction, InteractionPotentialsAreFlaggedNonH4) {
  EXPECT_FALSE(ConvexPotential::coulomb_log(1.0, 3).satisfies_h4());
  EXPECT_FALSE(ConvexPotential::pairwise(PairFunction::inverse_power(1.0, 1.0), 3).satisfies_h4());
  EXPECT_TRUE(halfline().satisfies_h4());
  EXPECT_FALSE(halfline().origin_in_interior());
  EXPECT_TRUE(ConvexPotential::indicator(ConvexSetSpec::ball(Vector::Zero(2), 1.0)).origin_in_interior());
}

TEST(Convexity, SampledChords) {
  RandomEngine eng(RngStream{5, 0});
  for (const auto& phi : studies::property_catalog()) {
    const Index n = phi.dimension();
    for (int i = 0; i < 500; ++i) {
      Vector x(n), y(n);
      for (Index k = 0; k < n; ++k) x(k) = eng.uniform(-3, 3), y(k) = eng.uniform(-3, 3);
      const double fx = phi.evaluate(x), fy = phi.evaluate(y);
      if (fx == kInf || fy == kInf) continue;
      const double th = eng.uniform();
      const double mid = phi.evaluate(th * x + (1 - th) * y);
      EXPECT_LE(mid, th * fx + (1 - th) * fy + 1e-10 * (1 + std::abs(fx) + std::abs(fy))) << phi.name();
    }
  }
}

TEST(Properties, CatalogHoldsOnSmallSample) {
  PropertyOptions opt;
  opt.samples = 500;
  const auto r = studies::property_suite(studies::property_catalog(), opt, 12, 1e-8);
  EXPECT_TRUE(r.passed());
  EXPECT_EQ(r.rows.size(), studies::property_catalog().size());
}

TEST(Properties, InteriorBoundHoldsForBall) {
  const auto phi = ConvexPotential::indicator(ConvexSetSpec::ball(v2(0.2, -0.1), 1.0));
  const double m0 = origin_ball_bound(phi, 0.5);
  EXPECT_LT(m0, kInf);
  RandomEngine eng(RngStream{6, 0});
  for (int i = 0; i < 1000; ++i) {
    const Vector u = v2(eng.uniform(-3, 3), eng.uniform(-3, 3));
    EXPECT_GE(interior_bound_slack(phi, std::exp(eng.uniform(-7, 0)), u, 0.5, m0), -1e-12);
  }
}
