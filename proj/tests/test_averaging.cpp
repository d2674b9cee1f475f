#include "svi/svi.hpp"

#include <gtest/gtest.h>

#include <numbers>

using namespace svi;
using namespace svi::averaging;

namespace {

OscillatingCoefficient<DriftShape> pure_sine() {
  OscillatingCoefficient<DriftShape> c;
  c.composition = Composition::additive;
  c.profile = Sinusoid{1.0, 1.0, 0.0, 0.0};
  c.perturb = [](const SegmentView&, Eigen::Ref<Vector> out) { out.setOnes(); };
  return c;
}

const CadlagPath& probe_path() {
  static const CadlagPath p = CadlagPath::constant_history(Vector::Constant(1, 0.7), 0.0, 1.0, 0.1);
  return p;
}

AveragingTemplate time_independent() {
  AveragingTemplate tpl = sinusoid_family();
  tpl.drift.profile = TimeProfile::constant(0.0);
  tpl.diffusion.profile = TimeProfile::constant(1.0);
  return tpl;
}

}  // namespace

TEST(TimeAverage, FullPeriodMeanIsZero) {
  const SegmentView probe(probe_path(), 0.0, 0.0);
  const TimeAverage a = time_average_coefficient(pure_sine(), 2 * std::numbers::pi, probe);
  EXPECT_NEAR(a.numeric(0, 0), 0.0, 1e-14);
  EXPECT_NEAR(a.window_exact(0, 0), 0.0, 1e-15);
  EXPECT_NEAR(a.deviation, 0.5, 1e-12);
}

TEST(TimeAverage, LongWindow) {
  const SegmentView probe(probe_path(), 0.0, 0.0);
  const double T1 = 1e4;
  const TimeAverage a = time_average_coefficient(pure_sine(), T1, probe);
  EXPECT_LT(std::abs(a.numeric(0, 0)), 2e-4);
  EXPECT_NEAR(a.numeric(0, 0), (1 - std::cos(T1)) / T1, 1e-12);
  EXPECT_EQ(a.long_run(0, 0), 0.0);
}

TEST(TimeAverage, ConstantCoefficient) {
  OscillatingCoefficient<DriftShape> c;
  c.composition = Composition::multiplicative;
  c.profile = TimeProfile::constant(2.5);
  c.base = [](const SegmentView& s, Eigen::Ref<Vector> out) { out = s.current(); };
  const SegmentView probe(probe_path(), 0.0, 0.0);
  const TimeAverage a = time_average_coefficient(c, 3.0, probe);
  EXPECT_NEAR(a.numeric(0, 0), 1.75, 1e-14);
  EXPECT_EQ(a.window_exact(0, 0), 1.75);
  EXPECT_EQ(a.long_run(0, 0), 1.75);
  EXPECT_LT(a.deviation, 1e-28);
}

TEST(TimeAverage, DecayingProfileWindowMean) {
  const TimeProfile p = Decaying{1.0, 1.0, 1.0};
  EXPECT_NEAR(p.window_mean(2.0), 1.0 + (1 - std::exp(-2.0)) / 2.0, 1e-15);
  EXPECT_EQ(p.mean(), 1.0);
}

TEST(TimeAverage, PeriodicTableMean) {
  const TimeProfile p = PeriodicTable{{0.0, 0.5}, {1.0, 3.0}, 1.0};
  EXPECT_NEAR(p.mean(), p.window_mean(7.0), 1e-12);
}

TEST(SimulateFast, TimeIndependentMatchesAveraged) {
  const AveragingTemplate tpl = time_independent();
  const SolutionPair a = simulate_fast(tpl, 0.01, 1e-3, RngStream{1, 0});
  const SolutionPair b = simulate(averaged_problem(tpl), 1e-3, Scheme::prox(), RngStream{1, 0});
  ASSERT_EQ(a.x.size(), b.x.size());
  for (std::size_t k = 0; k < a.x.size(); ++k) EXPECT_EQ(a.x.node(k)(0), b.x.node(k)(0));
}

TEST(SimulateFast, EpsOneIsTheUnscaledProblem) {
  const AveragingTemplate tpl = sinusoid_family();
  ProblemSpec direct;
  direct.potential = tpl.potential;
  direct.horizon = tpl.horizon;
  direct.delay = tpl.delay;
  direct.initial_segment = tpl.initial_segment;
  direct.drift = [](double t, const SegmentView& seg, Eigen::Ref<Vector> out) {
    Vector lag(1);
    seg.delayed(lag);
    out(0) = -seg.current()(0) + std::sin(t) * (1.0 + 0.5 * std::tanh(lag(0)));
  };
  direct.diffusion = [](double t, const SegmentView& seg, Eigen::Ref<Matrix> out) {
    out(0, 0) = (1.0 + std::exp(-t)) * (0.3 + 0.1 * std::sin(seg.current()(0)));
  };
  const SolutionPair a = simulate_fast(tpl, 1.0, 1e-3, RngStream{2, 0});
  const SolutionPair b = simulate(direct, 1e-3, Scheme::prox(), RngStream{2, 0});
  double gap = 0.0;
  for (std::size_t k = 0; k < a.x.size(); ++k) gap = std::max(gap, std::abs(a.x.node(k)(0) - b.x.node(k)(0)));
  EXPECT_LT(gap, 1e-14);
}

TEST(SimulateFast, OscillationPeriod) {
  AveragingTemplate tpl;
  tpl.horizon = 1.0;
  tpl.initial_segment = CadlagPath::constant_history(Vector::Zero(1), 0.0, 1.0, 1e-4);
  tpl.wiener = WienerSpec::diagonal(Vector::Zero(1));
  tpl.drift = pure_sine();
  const double eps = 0.05, dt = 1e-4;
  const SolutionPair s = simulate_fast(tpl, eps, dt, RngStream{});
  std::vector<double> peaks;
  for (std::size_t k = 1; k + 1 < s.state_count(); ++k)
    if (s.state(k)(0) > s.state(k - 1)(0) && s.state(k)(0) >= s.state(k + 1)(0)) peaks.push_back(s.state_time(k));
  ASSERT_GE(peaks.size(), 2u);
  for (std::size_t i = 1; i < peaks.size(); ++i) EXPECT_NEAR(peaks[i] - peaks[i - 1], 2 * std::numbers::pi * eps, 2 * dt);
}

TEST(SimulateFast, ResolutionGuard) {
  EXPECT_THROW(simulate_fast(sinusoid_family(), 1e-3, 1e-3, RngStream{}), std::invalid_argument);
}

TEST(CoupledError, TimeIndependentIsZero) {
  for (double eps : {0.5, 0.02}) EXPECT_EQ(coupled_error(time_independent(), eps, 20, 1e-3, 3).mean, 0.0);
}

TEST(CoupledError, DeterministicMatchesOracle) {
  const double x0 = 0.1, eps = 0.1, dt = 1e-6;
  const AveragingTemplate tpl = deterministic_family(x0, 1.0, dt);
  const CoupledError e = coupled_error(tpl, eps, 1, dt, 0);
  EXPECT_NEAR(e.mean, deterministic_oracle(x0, eps, uniform_grid(1.0, dt)), 1e-6);
}

TEST(CoupledError, Deterministic) {
  const AveragingTemplate tpl = sinusoid_family();
  const CoupledError a = coupled_error(tpl, 0.1, 1, 1e-3, 77);
  const CoupledError b = coupled_error(tpl, 0.1, 1, 1e-3, 77);
  EXPECT_EQ(a.mean, b.mean);
  EXPECT_EQ(a.sup4_mean, b.sup4_mean);
}

TEST(CoupledError, WorkerInvariant) {
  SinusoidFamilyOptions o;
  o.jumps = true;
  const AveragingTemplate tpl = sinusoid_family(o);
  const CoupledError a = coupled_error(tpl, 0.1, 40, 1e-3, 5, 1);
  const CoupledError b = coupled_error(tpl, 0.1, 40, 1e-3, 5, 4);
  EXPECT_EQ(a.mean, b.mean);
  EXPECT_EQ(a.se, b.se);
  EXPECT_EQ(a.sup4_mean, b.sup4_mean);
}

TEST(EpsilonSweep, TimeIndependentAllZero) {
  studies::AveragingRun run;
  run.tpl = time_independent();
  run.eps_grid = {0.5, 0.1, 0.02};
  run.n_paths = 10;
  run.dt = 1e-3;
  const ConvergenceReport r = studies::epsilon_sweep(run);
  EXPECT_EQ(r.rows.size(), 3u);
  for (const auto& row : r.rows) EXPECT_EQ(row[r.column("err_mean")], 0.0);
  EXPECT_TRUE(r.passed());
}

TEST(EpsilonSweep, DeterministicStrictlyDecreasing) {
  studies::AveragingRun run;
  run.tpl = deterministic_family(0.1, 1.0, 1e-4);
  run.eps_grid = {0.5, 0.1, 0.02};
  run.n_paths = 1;
  run.dt = 1e-4;
  const ConvergenceReport r = studies::epsilon_sweep(run);
  ASSERT_EQ(r.rows.size(), 3u);
  // Rows are ascending in eps.
  EXPECT_LT(r.rows[0][3], r.rows[1][3]);
  EXPECT_LT(r.rows[1][3], r.rows[2][3]);
  EXPECT_EQ(r.columns, (std::vector<std::string>{"epsilon", "n_paths", "dt", "err_mean", "err_se", "sup4_moment", "runtime_s"}));
  for (const auto& row : r.rows) EXPECT_EQ(row[6], 0.0);
}

TEST(EpsilonSweep, RejectsCoarseDt) {
  studies::AveragingRun run;
  run.tpl = time_independent();
  run.eps_grid = {0.5, 0.01};
  run.dt = 1e-2;
  EXPECT_THROW(studies::epsilon_sweep(run), std::invalid_argument);
}

TEST(Rescaling, EpsOneIsExact) {
  EXPECT_EQ(rescaling_identity_check(sinusoid_family(), 1.0, 1e-3, RngStream{4, 0}), 0.0);
}

TEST(Rescaling, SmallEps) {
  AveragingTemplate tpl = sinusoid_family();
  tpl.horizon = 100.0;
  EXPECT_LT(rescaling_identity_check(tpl, 0.01, 1e-2, RngStream{5, 0}), 1e-12);
}

TEST(Rescaling, WithJumps) {
  SinusoidFamilyOptions o;
  o.jumps = true;
  AveragingTemplate tpl = sinusoid_family(o);
  const double eps = 0.1;
  tpl.horizon = 5.0 / eps;
  const NoiseRecord probe = make_noise_record(eps * tpl.horizon, eps * 1e-2, tpl.wiener, &*tpl.levy, RngStream{6, 0});
  ASSERT_FALSE(probe.jumps.empty());
  EXPECT_LT(rescaling_identity_check(tpl, eps, 1e-2, RngStream{6, 0}), 1e-12);
}
