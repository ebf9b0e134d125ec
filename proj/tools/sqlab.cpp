#include "sqlab/errors.hpp"
#include "sqlab/scenarios.hpp"

#include "CLI11.hpp"

#include <chrono>
#include <iostream>

namespace {

enum Status { Ok = 0, CheckFailed = 1, BadConfig = 2, Diverged = 3 };

int run(const std::string& config_path, const std::string& output_dir, std::optional<std::uint64_t> seed,
        bool quiet) {
  sqlab::ScenarioResult result;
  const auto start = std::chrono::steady_clock::now();
  try {
    sqlab::ScenarioConfig config = sqlab::load_config(config_path);
    if (seed) config.seed = seed;
    result = sqlab::run_scenario(config);
  } catch (const sqlab::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return BadConfig;
  } catch (const sqlab::DivergenceError& e) {
    std::cerr << "FAIL divergence: " << e.what() << '\n';
    return Diverged;
  } catch (const std::exception& e) {
    std::cerr << "FAIL " << e.what() << '\n';
    return CheckFailed;
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  try {
    const auto files = sqlab::write_outputs(result, output_dir, seconds);
    if (!quiet) std::cout << "wrote " << files.json.string() << '\n';
  } catch (const std::exception& e) {
    std::cerr << "output error: " << e.what() << '\n';
    return BadConfig;
  }
  for (const auto& c : result.checks) {
    if (quiet && c.passed) continue;
    (c.passed ? std::cout : std::cerr) << (c.passed ? "PASS " : "FAIL ") << result.scenario << '/' << c.name
                                       << ": " << c.detail << '\n';
  }
  return result.passed() ? Ok : CheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Finite-volume stochastic quantization and OU counterexample scenarios"};
  app.require_subcommand(1);

  std::string config_path, output_dir = ".";
  std::optional<std::uint64_t> seed;
  bool quiet = false;
  auto* run_cmd = app.add_subcommand("run", "run the scenario described by a config file");
  run_cmd->add_option("config", config_path, "scenario config (INI)")->required();
  run_cmd->add_option("--output-dir", output_dir, "directory for JSON/CSV outputs");
  run_cmd->add_option("--seed", seed, "override the config seed");
  run_cmd->add_flag("--quiet", quiet, "print failures only");

  auto* list_cmd = app.add_subcommand("list-scenarios", "list scenario names");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? Ok : BadConfig;
  }

  if (list_cmd->parsed()) {
    for (const auto& s : sqlab::scenario_catalog()) std::cout << s.name << "  " << s.summary << '\n';
    return Ok;
  }
  return run(config_path, output_dir, seed, quiet);
}
