#include "svi/svi.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <sys/wait.h>

using namespace svi;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("svi_harness_" + name);
  fs::remove_all(p);
  return p;
}

std::string config_text(const std::string& name) { return read_text(fs::path(SVI_SOURCE_DIR) / "configs" / name); }

harness::Overrides into(const fs::path& dir) {
  harness::Overrides o;
  o.out_dir = dir.string();
  o.use_env_seed = false;
  return o;
}

const char* kSmallSim = R"({
  "problem": {"dimension": 1, "x0": [0.2],
              "potential": {"kind": "indicator", "set": {"shape": "halfline", "lower": [0.0]}},
              "diffusion": {"additive": 1.0},
              "jumps": {"enabled": true, "intensity": 3.0, "marks": {"kind": "uniform", "lower": [-1], "upper": [1]}}},
  "numerics": {"T": 1.0, "dt": 0.01},
  "mc": {"paths": 6, "seed": 11}
})";

int shell(const std::string& cmd) {
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST(Harness, NullDynamicsStayPut) {
  const fs::path dir = scratch("null");
  const auto o = harness::run("simulate", config_text("simulate_null.json"), into(dir));
  ASSERT_EQ(o.exit_code, harness::pass) << (o.errors.empty() ? "" : o.errors[0]);
  const std::string csv = read_text(dir / "trajectory.csv");
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "t,x_1,x_2,eta_1,eta_2,njumps");
  int rows = 0;
  while (std::getline(in, line)) {
    EXPECT_EQ(line.substr(line.find(',')), ",0.5,-0.25,0,0,0");
    ++rows;
  }
  EXPECT_EQ(rows, 11);
  EXPECT_TRUE(fs::exists(dir / "provenance.json"));
  EXPECT_EQ(o.provenance["seed"].get<int>(), 7);
}

TEST(Harness, ByteIdenticalReruns) {
  const fs::path a = scratch("det_a"), b = scratch("det_b");
  ASSERT_EQ(harness::run("simulate", kSmallSim, into(a)).exit_code, harness::pass);
  ASSERT_EQ(harness::run("simulate", kSmallSim, into(b)).exit_code, harness::pass);
  for (const char* f : {"summary.csv", "summary.json", "trajectory_0000.csv", "trajectory_0005.csv"})
    EXPECT_EQ(read_text(a / f), read_text(b / f)) << f;
}

TEST(Harness, WorkerCountDoesNotChangeResults) {
  const fs::path a = scratch("w1"), b = scratch("w3");
  auto oa = into(a), ob = into(b);
  oa.workers = 1;
  ob.workers = 3;
  ASSERT_EQ(harness::run("simulate", kSmallSim, oa).exit_code, harness::pass);
  ASSERT_EQ(harness::run("simulate", kSmallSim, ob).exit_code, harness::pass);
  EXPECT_EQ(read_text(a / "summary.csv"), read_text(b / "summary.csv"));
}

TEST(Harness, SeedPrecedence) {
  const fs::path dir = scratch("seed");
  auto ov = into(dir);
  ov.use_env_seed = true;
  ::unsetenv("SVI_SEED");
  EXPECT_EQ(harness::run("simulate", config_text("simulate_null.json"), ov).provenance["seed"].get<int>(), 7);
  ::setenv("SVI_SEED", "5", 1);
  EXPECT_EQ(harness::run("simulate", config_text("simulate_null.json"), ov).provenance["seed"].get<int>(), 5);
  ov.seed = 9;
  EXPECT_EQ(harness::run("simulate", config_text("simulate_null.json"), ov).provenance["seed"].get<int>(), 9);
  ::unsetenv("SVI_SEED");
}

TEST(Harness, ConfigErrorsExitTwo) {
  const fs::path dir = scratch("bad");
  auto o = harness::run("simulate", R"({"numerics": {"dt": -0.1}})", into(dir));
  EXPECT_EQ(o.exit_code, harness::config_error);
  ASSERT_FALSE(o.errors.empty());
  EXPECT_NE(o.errors[0].find("numerics.dt"), std::string::npos);
  EXPECT_FALSE(fs::exists(dir / "provenance.json"));
  EXPECT_EQ(harness::run("picard", R"({"command": "simulate"})", into(dir)).exit_code, harness::config_error);
  EXPECT_EQ(harness::run("simulate", "{oops", into(dir)).exit_code, harness::config_error);
  // Schema-valid but the initial value leaves the domain.
  o = harness::run("simulate",
                   R"({"problem": {"x0": [-1], "potential": {"kind": "indicator", "set": {"shape": "halfline"}}}})",
                   into(dir));
  EXPECT_EQ(o.exit_code, harness::config_error);
}

TEST(Harness, BlowUpIsRuntimeErrorWithPartialPath) {
  const fs::path dir = scratch("blowup");
  const auto o = harness::run("simulate", R"({
    "problem": {"x0": [1.0], "operator": {"kind": "diagonal", "values": [1e4]}},
    "numerics": {"T": 20.0, "dt": 0.1}})", into(dir));
  EXPECT_EQ(o.exit_code, harness::runtime_error);
  EXPECT_TRUE(o.provenance["partial"].get<bool>());
  EXPECT_TRUE(fs::exists(dir / "partial_trajectory.csv"));
}

TEST(Harness, VerdictFailureExitsOne) {
  const fs::path dir = scratch("verdict");
  Json cfg = Json::parse(config_text("converge_dt.json"));
  cfg["mc"]["paths"] = 20;
  cfg["numerics"]["slope_min"] = 5.0;
  cfg["numerics"]["slope_max"] = 6.0;
  const auto o = harness::run("converge-dt", cfg.dump(), into(dir));
  EXPECT_EQ(o.exit_code, harness::verdict_fail);
  EXPECT_TRUE(fs::exists(dir / "converge_dt.csv"));
}

TEST(Harness, CliExitCodes) {
  const std::string cli = SVI_CLI_PATH;
  const fs::path dir = scratch("cli");
  const std::string cfg = (fs::path(SVI_SOURCE_DIR) / "configs" / "simulate_null.json").string();
  EXPECT_EQ(shell(cli + " simulate --config " + cfg + " --out " + dir.string() + " > /dev/null"), 0);
  EXPECT_TRUE(fs::exists(dir / "trajectory.csv"));
  EXPECT_EQ(shell(cli + " simulat --config " + cfg + " 2> /dev/null"), 2);
  EXPECT_EQ(shell(cli + " simulate --config /nonexistent.json 2> /dev/null"), 2);
  EXPECT_EQ(shell(cli + " simulate 2> /dev/null"), 2);
  EXPECT_EQ(shell(cli + " --help > /dev/null"), 0);
}
