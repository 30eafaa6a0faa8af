// Batch experiment runner: parses an experiment config, dispatches to the module
// harnesses, manages seeds and regression baselines, writes CSV/JSON reports.

#include <chrono>
#include <ctime>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "brlab/harness.hpp"

namespace {

std::string now_string() {
  std::time_t t = std::time(nullptr);
  char buf[64];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"brlab: exact finite-model laboratory for martingale and stochastic-integral norms"};
  app.require_subcommand(1);

  CLI::App* run_cmd = app.add_subcommand("run", "run the experiments in a config file");
  std::string config_path;
  brlab::RunOptions opts;
  std::uint64_t seed = 0;
  bool have_seed = false;
  run_cmd->add_option("config", config_path, "experiment config (JSON)")->required();
  run_cmd->add_option("--out", opts.out_dir, "output directory for CSV/JSON reports");
  run_cmd->add_option("--seed", seed, "override every experiment seed")
      ->each([&](const std::string&) { have_seed = true; });
  run_cmd->add_option("--baseline", opts.baseline_path, "regression baseline store (JSON)");
  run_cmd->add_flag("--update-baseline", opts.update_baseline, "record/widen baseline bands");
  run_cmd->add_flag("--force", opts.force, "accept config-hash changes and large widenings");

  CLI11_PARSE(app, argc, argv);

  try {
    std::ifstream in(config_path);
    if (!in.good()) {
      std::cerr << "cannot open config: " << config_path << "\n";
      return brlab::exit_config_invalid();
    }
    brlab::json config;
    in >> config;
    if (have_seed) opts.seed_override = seed;
    opts.timestamp = "generated " + now_string();
    std::filesystem::create_directories(opts.out_dir);
    return brlab::run(config, opts, std::cerr);
  } catch (const brlab::error& e) {
    std::cerr << "error: " << e.what() << "\n";
    if (e.code() == brlab::errc::config_invalid) return brlab::exit_config_invalid();
    return brlab::exit_assert_failed();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return brlab::exit_config_invalid();
  }
}
