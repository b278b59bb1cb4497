#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "urbantrack/motion.hpp"
#include "urbantrack/sensing.hpp"
#include "urbantrack/tracker.hpp"
#include "urbantrack/waveform.hpp"

namespace urbantrack {

/// Targets share one trajectory, each delayed by its own start offset.
struct TruthConfig {
  StateVector start = make_state(1950.0, 10.0, 1500.0, 0.0);
  std::vector<TrajectorySegment> segments;
  std::vector<double> offsets{0.0, 10.0};  // s
};

struct TruthTarget {
  int id = 0;
  StateVector state = StateVector::Zero();
  /// Trajectory segment index active for this target.
  int segment = -1;
};

struct Scenario {
  std::string name = "scenario";
  ScenarioMap map;
  WaveformLibrary library;
  double scan_period = 0.25;
  double snr = 0.2;
  TruthConfig truth;
  TrackerConfig tracker;
  FastScanConfig fast;
  SignalConfig signal;
  int background_images = 20;

  /// Noise-free trajectory shared by all targets, one state per scan.
  std::vector<StateVector> trajectory() const;
  /// Targets present at scan k (time k * scan_period).
  std::vector<TruthTarget> truth_at(int scan) const;
  std::vector<TruthTarget> truth_at(int scan, const std::vector<StateVector>& trajectory) const;
};

/// Segments that end the shipped trajectory at (2069.3, 1669.3).
std::vector<TrajectorySegment> default_segments();

Scenario parse_scenario(const nlohmann::json& doc);
Scenario load_scenario(const std::string& path);

}  // namespace urbantrack
