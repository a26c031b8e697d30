// SPDX-License-Identifier: Apache-2.0
//
// isac_cli run      --config <file> [--out <dir>] [--trials N] [--seed S] [--noiseless]
// isac_cli check    --config <file>
// isac_cli plotdata --csv <file> [--out <dir>]

#include "isac/harness.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"Tensor receivers for bistatic sensing and communication: Monte Carlo driver"};
  app.require_subcommand(1);

  std::string config_path, out_dir, csv_path;
  int trials = 0;
  std::uint64_t seed = 0;
  bool noiseless = false;
  unsigned threads = 0;

  auto* run = app.add_subcommand("run", "run the configured sweep and write trials.csv / summary.csv");
  run->add_option("--config", config_path, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out_dir, "output directory (overrides config 'outputs')");
  auto* trials_opt = run->add_option("--trials", trials, "trials per sweep point")->check(CLI::PositiveNumber);
  auto* seed_opt = run->add_option("--seed", seed, "base seed");
  run->add_flag("--noiseless", noiseless, "disable additive noise");
  run->add_option("--threads", threads, "worker threads (0 = all cores)");

  auto* check = app.add_subcommand("check", "validate a config (identifiability gate)");
  check->add_option("--config", config_path, "experiment config (JSON)")->required()->check(CLI::ExistingFile);

  auto* plot = app.add_subcommand("plotdata", "write per-metric two-column aggregate files from a trials CSV");
  plot->add_option("--csv", csv_path, "trials.csv written by 'run'")->required()->check(CLI::ExistingFile);
  plot->add_option("--out", out_dir, "output directory (default: next to the CSV)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*check) {
      const auto cfg = isac::load_config(config_path);
      std::cout << "ok: " << cfg.grid().size() << " sweep point(s) over " << isac::to_string(cfg.sweep_var)
                << ", " << cfg.trials << " trial(s) each\n";
      return 0;
    }
    if (*run) {
      auto cfg = isac::load_config(config_path);
      if (*trials_opt) cfg.trials = trials;
      if (*seed_opt) cfg.base_seed = seed;
      if (noiseless) cfg.noiseless = true;
      const std::filesystem::path dir = out_dir.empty() ? cfg.outputs : out_dir;
      const auto t0 = std::chrono::steady_clock::now();
      const auto result = isac::run_sweep(cfg, threads);
      const auto csv = isac::write_sweep(result, dir);
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      std::cout << "wrote " << csv.string() << " (" << result.records.size() << " trials, "
                << secs << " s)\n";
      if (result.hard_errors > 0) {
        std::cerr << result.hard_errors << " trial(s) failed with hard errors\n";
        return 2;
      }
      return 0;
    }
    if (*plot) {
      const std::filesystem::path csv(csv_path);
      const std::filesystem::path dir = out_dir.empty() ? csv.parent_path() / "plotdata" : std::filesystem::path(out_dir);
      const auto files = isac::emit_plot_data(csv, dir);
      std::cout << "wrote " << files.size() << " files to " << dir.string() << "\n";
      return 0;
    }
  } catch (const isac::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
