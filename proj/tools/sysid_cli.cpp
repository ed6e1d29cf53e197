// Command-line front end for the experiment harness.
#include <algorithm>
#include <cstdint>
#include <exception>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "sysid/format.hpp"
#include "sysid/harness.hpp"

namespace h = sysid::harness;

int main(int argc, char** argv) {
  CLI::App app{"Seeded Monte Carlo sweeps for local linear model identification"};
  app.require_subcommand(1);

  std::string run_config;
  std::string out_dir;
  unsigned threads = 1;
  std::uint64_t seed = 0;
  auto* run_cmd = app.add_subcommand("run", "Run an experiment sweep and write its CSV");
  run_cmd->add_option("config", run_config, "JSON config file")->required()->check(CLI::ExistingFile);
  auto* out_opt = run_cmd->add_option("--out", out_dir, "Directory for the output CSV");
  run_cmd->add_option("--threads", threads, "Worker threads")->check(CLI::Range(1u, 1024u));
  auto* seed_opt = run_cmd->add_option("--seed", seed, "Override the master seed");

  std::string validate_config;
  auto* validate_cmd =
      app.add_subcommand("validate", "Check a config and report which sweep points get bounds");
  validate_cmd->add_option("config", validate_config, "JSON config file")
      ->required()
      ->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) {
      h::RunOptions opts;
      opts.threads = threads;
      if (*out_opt) opts.out_dir = out_dir;
      if (*seed_opt) opts.seed = seed;
      const auto summary = h::run(h::load_config(run_config), opts);
      std::cout << "wrote " << summary.rows_written << " rows to " << summary.output.string()
                << " in " << sysid::format_double(summary.wall_seconds) << " s";
      if (summary.failed_cells > 0) std::cout << " (" << summary.failed_cells << " failed cells)";
      std::cout << '\n';
      return static_cast<int>(std::min<std::size_t>(summary.failed_cells, 254));
    }
    const auto diag = h::validate(std::filesystem::path(validate_config));
    for (const auto& line : diag.lines) std::cout << line << '\n';
    std::cout << diag.points_with_bounds << " points with bounds, " << diag.points_without_bounds
              << " simulation-only\n";
    return 0;
  } catch (const h::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 255;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 255;
  }
}
