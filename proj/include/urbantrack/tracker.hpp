#pragma once

#include <vector>

#include "urbantrack/association.hpp"

namespace urbantrack {

enum class LoopMode { kClosed, kOpen };

std::string to_string(LoopMode m);
LoopMode loop_mode_from_string(const std::string& s);

struct TrackerConfig {
  LoopMode mode = LoopMode::kClosed;
  double p_detect = 0.9;
  double p_gate = 0.99;
  double clutter_density = 2.5e-4;
  ExistenceModel existence;
  InitiationConfig initiation;
  ModelBank bank;
  Eigen::Matrix4d transition = default_transition_matrix();
  ModelSetPolicy policy;
  UnscentedConfig ukf;
};

/// VS-IMM (closed loop) or single-NCV (open loop) LMIPDA tracker. Receiver
/// scans of one epoch are applied as sequential updates after one prediction.
class Tracker {
 public:
  Tracker(const ScenarioMap& map, TrackerConfig cfg);

  /// One scan epoch: predict, update with each receiver's scan, initiate
  /// from leftover measurements, then confirm/terminate.
  void process(int scan, const std::vector<Scan>& scans);

  /// All tracks ever created, terminated ones included.
  const std::vector<Track>& tracks() const { return tracks_; }
  std::vector<const Track*> confirmed() const;
  int confirmed_count() const;
  int active_count() const;

  /// Models active for a track at this position and scan.
  std::vector<ModelId> model_set(const Point2& position, int scan) const;

  int clamped_priors() const { return clamped_; }
  int mixing_fallbacks() const { return mix_fallbacks_; }
  int divergences() const { return divergences_; }
  const TrackerConfig& config() const { return cfg_; }

 private:
  void predict(int scan);
  void update(const std::vector<Measurement>& measurements, int receiver, int transmitter,
              std::vector<char>& used);

  const ScenarioMap& map_;
  TrackerConfig cfg_;
  double gate_sq_;
  std::vector<Track> tracks_;
  std::vector<PositionFix> previous_fixes_;
  int next_id_ = 1;
  int clamped_ = 0;
  int mix_fallbacks_ = 0;
  int divergences_ = 0;
};

}  // namespace urbantrack
