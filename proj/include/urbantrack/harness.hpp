#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "urbantrack/scenario.hpp"
#include "urbantrack/scheduler.hpp"
#include "urbantrack/tracker.hpp"

namespace urbantrack {

struct ExperimentConfig {
  Scenario scenario;
  LoopMode mode = LoopMode::kClosed;
  int runs = 100;
  int scans = 140;
  std::uint64_t seed = 1;
  bool signal_level = false;
  double assignment_gate = 20.0;  // m
  int threads = 1;
  SchedulerConfig scheduler;
  /// Also keep per-scan track snapshots and scans for JSON-lines output.
  bool keep_history = false;

  void validate() const;
};

struct Assignment {
  int truth = 0;
  int track = 0;
  double distance = 0.0;
};

/// Greedy nearest-neighbour pairing of truth positions and track positions
/// within `gate`; each side is used at most once.
std::vector<Assignment> assign_tracks_to_truth(const std::vector<Point2>& tracks,
                                               const std::vector<Point2>& truth, double gate);

struct ScanMetrics {
  int confirmed = 0;
  int targets = 0;
  int assigned = 0;
  double squared_error = 0.0;  // summed over assigned targets
  /// Model probabilities (NCV, NCA, CT-left, CT-right) of the track assigned
  /// to the first target; absent when that target has no confirmed track.
  std::optional<std::array<double, kNumModels>> model_prob;
  /// Target 0 is in its turn segment.
  bool turning = false;
};

struct RunMetrics {
  int run = 0;
  std::vector<ScanMetrics> scans;
  std::vector<SchedulerDecision> decisions;
  std::vector<std::string> history;  // JSON lines, when requested
  std::vector<std::string> scan_log;
  bool finite = true;
  int divergences = 0;
};

struct AggregateScan {
  int scan = 0;
  double mean_confirmed = 0.0;
  /// sqrt of the mean squared error over all assigned (run, target) pairs;
  /// NaN when nothing was assigned.
  double rmse = 0.0;
  double coverage = 0.0;
  int samples = 0;
  std::array<double, kNumModels> model_prob{};
  int model_samples = 0;
};

struct ExperimentResult {
  LoopMode mode = LoopMode::kClosed;
  int runs = 0;
  int scans = 0;
  std::uint64_t seed = 0;
  std::vector<AggregateScan> per_scan;
  std::vector<RunMetrics> run_metrics;
  std::vector<int> excluded_runs;
  double mean_confirmed = 0.0;
  double rmse = 0.0;
  double coverage = 0.0;
  /// Mean over runs of the fraction of turn-phase scans in which CT-left
  /// has the largest model probability.
  double ct_left_dominance = 0.0;
  int ct_left_runs = 0;
};

RunMetrics run_single(const ExperimentConfig& cfg, int run);
ExperimentResult run_experiment(const ExperimentConfig& cfg);

/// Per-scan means and overall statistics from run metrics in run order.
ExperimentResult aggregate(const ExperimentConfig& cfg, std::vector<RunMetrics> runs);

struct Comparison {
  double rmse_reduction_pct = 0.0;
  double confirmed_increase_pct = 0.0;
};

Comparison compare_results(double closed_rmse, double open_rmse, double closed_confirmed,
                           double open_confirmed);

/// Writes metrics.csv, decisions.csv and summary.json into `dir`; the
/// comparison keys are null unless both modes are present.
void emit_outputs(const std::vector<ExperimentResult>& results, const ExperimentConfig& cfg,
                  const std::string& dir);
/// runs.jsonl (track snapshots) and scans.jsonl when history was kept.
void emit_history(const std::vector<ExperimentResult>& results, const std::string& dir);

std::string metrics_csv(const std::vector<ExperimentResult>& results);

/// Reads summary.json files of two output directories and returns the
/// comparison of `a` (candidate) against `b` (baseline) as JSON text.
std::string compare_directories(const std::string& a, const std::string& b);

/// Splits metrics.csv rows of the given directories into
/// confirmed_tracks.csv, rmse.csv and model_probabilities.csv under `out`.
void export_plot_data(const std::vector<std::string>& dirs, const std::string& out);

}  // namespace urbantrack
