#include <chrono>
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "urbantrack/harness.hpp"

namespace ut = urbantrack;

int main(int argc, char** argv) {
  CLI::App app{"Closed-loop multistatic radar tracking simulator"};
  app.require_subcommand(1);

  std::string config;
  std::string mode = "closed";
  int runs = 100;
  int scans = 140;
  std::uint64_t seed = 1;
  std::string out;
  bool signal_level = false;
  bool history = false;
  int threads = 1;
  bool tentative = false;

  auto* sim = app.add_subcommand("simulate", "Run a Monte Carlo experiment");
  sim->add_option("--config", config, "Scenario JSON file")->required()->check(CLI::ExistingFile);
  sim->add_option("--mode", mode, "closed, open or both")
      ->check(CLI::IsMember({"closed", "open", "both"}));
  sim->add_option("--runs", runs, "Monte Carlo runs")->check(CLI::PositiveNumber);
  sim->add_option("--scans", scans, "Scans per run")->check(CLI::PositiveNumber);
  sim->add_option("--seed", seed, "Base random seed");
  sim->add_option("--out", out, "Output directory")->required();
  sim->add_flag("--signal-level", signal_level, "Synthesize signals and run the matched filter");
  sim->add_flag("--history", history, "Write runs.jsonl and scans.jsonl");
  sim->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
  sim->add_flag("--schedule-tentative", tentative, "Include tentative tracks in the scheduler cost");

  std::string dir_a;
  std::string dir_b;
  auto* cmp = app.add_subcommand("compare", "Compare two output directories");
  cmp->add_option("--a", dir_a, "Candidate output directory")->required()->check(CLI::ExistingDirectory);
  cmp->add_option("--b", dir_b, "Baseline output directory")->required()->check(CLI::ExistingDirectory);

  std::vector<std::string> inputs;
  std::string plot_out;
  auto* plot = app.add_subcommand("plotdata", "Export per-figure CSV files from metrics.csv");
  plot->add_option("--in", inputs, "Output directories to merge")->required()->check(CLI::ExistingDirectory);
  plot->add_option("--out", plot_out, "Destination directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sim) {
      ut::ExperimentConfig cfg;
      cfg.scenario = ut::load_scenario(config);
      cfg.runs = runs;
      cfg.scans = scans;
      cfg.seed = seed;
      cfg.signal_level = signal_level;
      cfg.threads = threads;
      cfg.keep_history = history;
      cfg.scheduler.include_tentative = tentative;
      cfg.scheduler.snr_per_sample = cfg.scenario.snr;

      std::vector<ut::LoopMode> modes;
      if (mode == "both") {
        modes = {ut::LoopMode::kClosed, ut::LoopMode::kOpen};
      } else {
        modes = {ut::loop_mode_from_string(mode)};
      }
      std::vector<ut::ExperimentResult> results;
      for (auto m : modes) {
        cfg.mode = m;
        const auto t0 = std::chrono::steady_clock::now();
        results.push_back(ut::run_experiment(cfg));
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const auto& r = results.back();
        std::fprintf(stderr, "%s: %d runs x %d scans in %.1f s, mean confirmed %.3f, rmse %.3f m\n",
                     ut::to_string(m).c_str(), r.runs, r.scans, secs, r.mean_confirmed, r.rmse);
      }
      ut::emit_outputs(results, cfg, out);
      if (history) ut::emit_history(results, out);
    } else if (*cmp) {
      std::cout << ut::compare_directories(dir_a, dir_b) << '\n';
    } else if (*plot) {
      ut::export_plot_data(inputs, plot_out);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
