#include "svi/svi.hpp"

#include <gtest/gtest.h>

#include <filesystem>

using namespace svi;

namespace {

ConvergenceReport sample(std::size_t rows) {
  ConvergenceReport r;
  r.study = "demo";
  r.columns = {"dt", "err_mean", "err_se"};
  for (std::size_t i = 0; i < rows; ++i) r.add_row({0.1 / (i + 1), 1.0 / 3.0 * i, 1e-17 * i});
  r.add_verdict("criterion-4 demo", true, "ok");
  return r;
}

std::size_t lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST(Report, EmptyIsHeaderOnly) { EXPECT_EQ(to_csv(sample(0)), "dt,err_mean,err_se\n"); }

TEST(Report, ThreeRowsFourLines) { EXPECT_EQ(lines(to_csv(sample(3))), 4u); }

TEST(Report, CsvJsonRoundTrip) {
  ConvergenceReport r = sample(3);
  r.add_row({0.5, std::numeric_limits<double>::quiet_NaN(), kInf});
  const ConvergenceReport a = report_from_csv(to_csv(r));
  const ConvergenceReport b = report_from_json(Json::parse(to_json(r).dump()));
  ASSERT_EQ(a.rows.size(), r.rows.size());
  EXPECT_EQ(a.columns, r.columns);
  EXPECT_EQ(b.columns, r.columns);
  EXPECT_EQ(b.verdicts, r.verdicts);
  for (std::size_t i = 0; i < r.rows.size(); ++i)
    for (std::size_t j = 0; j < r.columns.size(); ++j) {
      const double x = r.rows[i][j];
      if (std::isnan(x)) {
        EXPECT_TRUE(std::isnan(a.rows[i][j]) && std::isnan(b.rows[i][j]));
      } else {
        EXPECT_EQ(a.rows[i][j], x);
        EXPECT_EQ(b.rows[i][j], x);
      }
    }
}

TEST(Report, FormatDoubleRoundTrips) {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, 123456789.123, -2.5e-17, 0.0})
    EXPECT_EQ(parse_double(format_double(v)), v);
  EXPECT_EQ(format_double(0.5), "0.5");
  EXPECT_THROW(parse_double("1.5x"), std::invalid_argument);
}

TEST(Report, SortIsAscendingAndStable) {
  ConvergenceReport r;
  r.columns = {"x", "tag"};
  r.add_row({2.0, 0.0});
  r.add_row({1.0, 1.0});
  r.add_row({2.0, 2.0});
  r.sort_rows();
  EXPECT_EQ(r.rows[0][1], 1.0);
  EXPECT_EQ(r.rows[1][1], 0.0);
  EXPECT_EQ(r.rows[2][1], 2.0);
}

TEST(Report, RaggedRowRejected) {
  ConvergenceReport r = sample(0);
  EXPECT_THROW(r.add_row({1.0}), std::invalid_argument);
}

TEST(Report, WriteAndReadBack) {
  const auto dir = std::filesystem::temp_directory_path() / "svi_report_test";
  std::filesystem::remove_all(dir);
  const ConvergenceReport r = sample(2);
  write_report(r, dir / "a" / "r.csv", ReportFormat::csv);
  write_report(r, dir / "r.json", ReportFormat::json);
  EXPECT_EQ(read_text(dir / "a" / "r.csv"), to_csv(r));
  EXPECT_EQ(report_from_json(Json::parse(read_text(dir / "r.json"))).rows, r.rows);
  std::filesystem::remove_all(dir);
}

TEST(Report, WriteFailureThrows) {
  EXPECT_THROW(write_text("/proc/svi_cannot_write/x.csv", "x"), std::exception);
}

TEST(Report, TrajectoryCsvHeaderAndRows) {
  ProblemSpec s;
  s.dimension = 2;
  s.potential = ConvexPotential::zero(2);
  s.wiener = WienerSpec::isotropic(2);
  s.horizon = 0.2;
  s.delay = DelayFunction::constant(0.1);
  s.initial_segment = CadlagPath::constant_history(Vector::Ones(2), 0.1, 0.2, 0.1);
  const SolutionPair sol = simulate(s, 0.1, Scheme::prox(), RngStream{});
  EXPECT_EQ(trajectory_csv(sol), "t,x_1,x_2,eta_1,eta_2,njumps\n-0.1,1,1,0,0,0\n0,1,1,0,0,0\n0.1,1,1,0,0,0\n0.2,1,1,0,0,0\n");
}

TEST(Report, SnapshotCsvLongFormat) {
  const std::vector<galerkin::Snapshot> snaps{{0.0, (Vector(1) << 1.0).finished()}, {0.5, (Vector(1) << 0.0).finished()}};
  const std::string csv = snapshot_csv(snaps, 3);
  EXPECT_EQ(lines(csv), 7u);
  EXPECT_EQ(csv.substr(0, 6), "t,x,u\n");
  EXPECT_NE(csv.find("0,0.5,1.414213562373095"), std::string::npos);
}
