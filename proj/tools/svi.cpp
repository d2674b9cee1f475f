#include "svi/svi.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"Stochastic variational inequality experiments"};
  app.set_version_flag("--version", std::string(svi::kVersion));
  std::string command, config_path;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> workers;
  std::optional<std::string> out;
  app.add_option("command", command, "study to run")->required()->check(CLI::IsMember(svi::config::commands()));
  app.add_option("--config", config_path, "JSON config file")->required();
  app.add_option("--seed", seed, "master seed (overrides SVI_SEED and the config)");
  app.add_option("--workers", workers, "worker threads, 0 = hardware concurrency");
  app.add_option("--out", out, "output directory");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : svi::harness::config_error;
  }

  std::string text;
  try {
    text = svi::read_text(config_path);
  } catch (const std::exception& e) {
    std::cerr << "svi: " << e.what() << "\n";
    return svi::harness::config_error;
  }
  svi::harness::Overrides ov;
  ov.seed = seed;
  ov.workers = workers;
  ov.out_dir = out;
  const auto outcome = svi::harness::run(command, text, ov);
  for (const auto& e : outcome.errors) std::cerr << "svi: " << e << "\n";
  if (outcome.provenance.is_object()) {
    for (const auto& v : outcome.provenance["verdicts"])
      std::cout << (v["passed"].get<bool>() ? "PASS " : "FAIL ") << v["criterion"].get<std::string>()
                << (v["detail"].get<std::string>().empty() ? "" : "  [" + v["detail"].get<std::string>() + "]") << "\n";
    std::cout << "artifacts in " << outcome.provenance["config"]["output"]["dir"].get<std::string>() << "\n";
  }
  return outcome.exit_code;
}
