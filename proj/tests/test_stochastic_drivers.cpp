#include "svi/svi.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace svi;

TEST(Wiener, IncrementVariance) {
  const auto grid = uniform_grid(1000.0, 0.01);
  const IncrementTable inc = sample_wiener_increments(WienerSpec::isotropic(1), grid, RngStream{1, 0});
  ASSERT_EQ(inc.rows(), 100000);
  const double mean = inc.col(0).mean();
  const double var = (inc.col(0).array() - mean).square().sum() / (inc.rows() - 1);
  EXPECT_NEAR(var, 0.01, 0.03 * 0.01);
}

TEST(Wiener, DegenerateModeIsZero) {
  const auto grid = uniform_grid(1.0, 0.01);
  const IncrementTable inc = sample_wiener_increments(WienerSpec::diagonal(Vector::Zero(1)), grid, RngStream{1, 0});
  EXPECT_EQ(inc.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Wiener, TerminalVarianceOverPaths) {
  const auto grid = uniform_grid(1.0, 0.01);
  std::vector<double> ends(100000);
  for (std::size_t i = 0; i < ends.size(); ++i)
    ends[i] = sample_wiener_increments(WienerSpec::isotropic(1), grid, RngStream{2, i}).sum();
  const MeanSE m = mean_se(ends);
  double var = 0.0;
  for (double e : ends) var += (e - m.mean) * (e - m.mean);
  var /= static_cast<double>(ends.size() - 1);
  EXPECT_NEAR(var, 1.0, 0.03);
}

TEST(Wiener, CovarianceScalesModes) {
  const auto grid = uniform_grid(100.0, 0.01);
  const IncrementTable inc =
      sample_wiener_increments(WienerSpec::diagonal((Vector(2) << 1.0, 4.0).finished()), grid, RngStream{9, 0});
  const double r = inc.col(1).squaredNorm() / inc.col(0).squaredNorm();
  EXPECT_NEAR(r, 4.0, 0.2);
}

TEST(Poisson, CountMeanAndVariance) {
  const auto cfg = LevyConfig::uniform_box(2.0, Vector::Constant(1, -1.0), Vector::Constant(1, 1.0));
  std::vector<double> counts(100000);
  for (std::size_t i = 0; i < counts.size(); ++i)
    counts[i] = static_cast<double>(sample_jump_events(cfg, 3.0, RngStream{3, i}).size());
  const MeanSE m = mean_se(counts);
  double var = 0.0;
  for (double c : counts) var += (c - m.mean) * (c - m.mean);
  var /= static_cast<double>(counts.size() - 1);
  EXPECT_NEAR(m.mean, 6.0, 0.02 * 6.0);
  EXPECT_NEAR(var, 6.0, 0.05 * 6.0);
}

TEST(Poisson, EventsOrderedInsideHorizon) {
  const auto cfg = LevyConfig::gaussian(5.0, Vector::Zero(2), Vector::Ones(2));
  const auto ev = sample_jump_events(cfg, 4.0, RngStream{4, 1});
  ASSERT_FALSE(ev.empty());
  for (std::size_t i = 0; i < ev.size(); ++i) {
    EXPECT_GT(ev[i].time, 0.0);
    EXPECT_LE(ev[i].time, 4.0);
    EXPECT_EQ(ev[i].mark.size(), 2);
    if (i) {
      EXPECT_GE(ev[i].time, ev[i - 1].time);
    }
  }
}

TEST(Poisson, Deterministic) {
  const auto cfg = LevyConfig::uniform_box(2.0, Vector::Constant(1, -1.0), Vector::Constant(1, 1.0));
  const auto a = sample_jump_events(cfg, 3.0, RngStream{42, 0});
  const auto b = sample_jump_events(cfg, 3.0, RngStream{42, 0});
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].time, b[i].time);
    EXPECT_EQ(a[i].mark, b[i].mark);
  }
}

TEST(Compensator, ConstantIntegrandDiscreteAtoms) {
  const auto cfg = LevyConfig::discrete_atoms(
      1.7, {Vector::Constant(1, 0.3), Vector::Constant(1, 2.0)}, {0.25, 0.75});
  const Vector c = compensator_integral(cfg, [](const Vector&) { return Vector::Constant(2, 3.0); }, 0.5, 2.5);
  EXPECT_DOUBLE_EQ(c(0), 3.0 * 1.7 * 2.0);
  EXPECT_DOUBLE_EQ(c(1), 3.0 * 1.7 * 2.0);
}

TEST(Compensator, SymmetricAtomsCancel) {
  const auto cfg = LevyConfig::discrete_atoms(2.0, {Vector::Constant(1, 1.0), Vector::Constant(1, -1.0)}, {0.5, 0.5});
  EXPECT_EQ(compensator_integral(cfg, [](const Vector& u) { return u; }, 0.0, 1.0)(0), 0.0);
}

TEST(Compensator, QuadratureExactForPolynomialMarks) {
  const auto uni = LevyConfig::uniform_box(2.0, Vector::Constant(1, 0.0), Vector::Constant(1, 1.0));
  EXPECT_NEAR(compensator_integral(uni, [](const Vector& u) { return Vector(u.array().square()); }, 0, 1)(0),
              2.0 / 3.0, 1e-14);
  const auto gau = LevyConfig::gaussian(1.0, Vector::Constant(1, 1.0), Vector::Constant(1, 2.0));
  EXPECT_NEAR(compensator_integral(gau, [](const Vector& u) { return Vector(u.array().square()); }, 0, 1)(0), 5.0,
              1e-12);
}

TEST(Compensator, CompensatedSumHasMeanZero) {
  const auto cfg = LevyConfig::uniform_box(2.0, Vector::Constant(1, 0.0), Vector::Constant(1, 1.0));
  const auto f = [](const Vector& u) { return Vector(u.array().square()); };
  std::vector<double> sums(100000);
  for (std::size_t i = 0; i < sums.size(); ++i) {
    const auto ev = sample_jump_events(cfg, 1.0, RngStream{5, i});
    sums[i] = compensated_jump_sum(cfg, ev, f, 0.0, 1.0)(0);
  }
  const MeanSE m = mean_se(sums);
  EXPECT_LT(std::abs(m.mean), 3.0 * m.se);
}

TEST(NoiseRecord, JumpTimesJoinTheGrid) {
  const auto cfg = LevyConfig::uniform_box(20.0, Vector::Constant(1, -1.0), Vector::Constant(1, 1.0));
  const NoiseRecord rec = make_noise_record(1.0, 0.1, WienerSpec::isotropic(1), &cfg, RngStream{6, 0});
  ASSERT_FALSE(rec.jumps.empty());
  EXPECT_EQ(rec.grid.front(), 0.0);
  EXPECT_EQ(rec.grid.back(), 1.0);
  std::size_t total = 0;
  for (Index k = 0; k < rec.steps(); ++k) {
    EXPECT_LT(rec.grid[k], rec.grid[k + 1]);
    for (const auto& ev : rec.jumps_in_step(k)) EXPECT_EQ(ev.time, rec.grid[static_cast<std::size_t>(k + 1)]);
    total += rec.jumps_in_step(k).size();
  }
  EXPECT_EQ(total, rec.jumps.size());
}

TEST(NoiseRecord, CoarsenSumsIncrements) {
  const NoiseRecord fine = make_noise_record(1.0, 0.01, WienerSpec::isotropic(2), nullptr, RngStream{7, 0});
  const NoiseRecord coarse = coarsen(fine, 4);
  ASSERT_EQ(coarse.steps(), 25);
  EXPECT_NEAR(coarse.increments.row(3).sum(), fine.increments.middleRows(12, 4).sum(), 1e-15);
  EXPECT_NEAR(coarse.increments.sum(), fine.increments.sum(), 1e-12);
}

TEST(NoiseRecord, RescaleTime) {
  const auto cfg = LevyConfig::uniform_box(5.0, Vector::Constant(1, -1.0), Vector::Constant(1, 1.0));
  const NoiseRecord rec = make_noise_record(1.0, 0.1, WienerSpec::isotropic(1), &cfg, RngStream{8, 0});
  const NoiseRecord r = rescale_time(rec, 0.25);
  EXPECT_EQ(r.grid.back(), 4.0);
  EXPECT_EQ(r.increments(0, 0), rec.increments(0, 0) / 0.5);
  for (std::size_t i = 0; i < rec.jumps.size(); ++i) EXPECT_EQ(r.jumps[i].time, rec.jumps[i].time / 0.25);
}

TEST(Rng, ChildStreamsDiffer) {
  const RngStream s{1, 2};
  EXPECT_NE(s.child(0), s.child(1));
  RandomEngine a(s.child(0)), b(s.child(1));
  EXPECT_NE(a.uniform(), b.uniform());
}

TEST(Parallel, WorkerCountDoesNotChangeResults) {
  auto f = [](std::size_t i) {
    RandomEngine e(RngStream{11, i});
    return e.normal();
  };
  const auto one = parallel_map(257, 1, f);
  const auto four = parallel_map(257, 4, f);
  EXPECT_EQ(one, four);
  EXPECT_EQ(mean_se(one).mean, mean_se(four).mean);
}

TEST(Parallel, RethrowsLowestFailure) {
  try {
    parallel_map(50, 3, [](std::size_t i) -> int {
      if (i == 7 || i == 30) throw std::runtime_error("fail " + std::to_string(i));
      return 0;
    });
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("fail 7"), std::string::npos);
  }
}
