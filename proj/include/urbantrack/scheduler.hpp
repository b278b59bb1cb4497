#pragma once

#include <vector>

#include "urbantrack/association.hpp"
#include "urbantrack/waveform.hpp"

namespace urbantrack {

enum class ScheduleMode { kLookahead, kRoundRobin };

std::string to_string(ScheduleMode m);

struct SchedulerDecision {
  int scan = 0;
  int waveform = 0;
  /// Mean predicted posterior trace per library entry (empty for round robin).
  std::vector<double> costs;
  ScheduleMode mode = ScheduleMode::kRoundRobin;
  /// Lookahead was requested but no track qualified.
  bool fallback = false;
};

struct SchedulerConfig {
  bool include_tentative = false;
  double snr_per_sample = 0.2;
  double min_eta = 1.0;
  UnscentedConfig ukf;
};

SchedulerDecision round_robin(const WaveformLibrary& library, int scan);

/// One-step prediction of a track under its current model mixture.
GaussianState predict_track(const Track& track, const ModelBank& bank, const UnscentedConfig& ukf);

/// Trace of the covariance after the expected sequential update from every
/// (receiver, transmitter) pair, with R taken at the pair's direct-path SNR.
double lookahead_cost(const GaussianState& predicted, const ChirpWaveform& w,
                      const ScenarioMap& map, const SchedulerConfig& cfg);

/// Waveform for scan `scan` minimising the mean lookahead cost over tracks;
/// ties go to the earlier library entry.
SchedulerDecision select_waveform(const std::vector<Track>& tracks, const WaveformLibrary& library,
                                  const ScenarioMap& map, const ModelBank& bank,
                                  const SchedulerConfig& cfg, int scan);

}  // namespace urbantrack
