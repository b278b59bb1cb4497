#include "urbantrack/scheduler.hpp"

#include <limits>
#include <stdexcept>

namespace urbantrack {

std::string to_string(ScheduleMode m) {
  return m == ScheduleMode::kLookahead ? "lookahead" : "round_robin";
}

SchedulerDecision round_robin(const WaveformLibrary& library, int scan) {
  if (library.size() == 0) throw std::invalid_argument("waveform library is empty");
  if (scan < 0) throw std::invalid_argument("scan index must be non-negative");
  SchedulerDecision d;
  d.scan = scan;
  d.waveform = scan % static_cast<int>(library.size());
  d.mode = ScheduleMode::kRoundRobin;
  return d;
}

GaussianState predict_track(const Track& track, const ModelBank& bank, const UnscentedConfig& ukf) {
  std::vector<ModelFilterState> predicted;
  for (const auto& m : track.models) {
    const GaussianState g = ukf_predict({m.mean, m.P}, bank.model(m.model), ukf);
    predicted.push_back({m.model, g.mean, g.P, m.mu});
  }
  return combine_output(predicted);
}

double lookahead_cost(const GaussianState& predicted, const ChirpWaveform& w,
                      const ScenarioMap& map, const SchedulerConfig& cfg) {
  GaussianState g = predicted;
  const Point2 pos = position_of(g.mean);
  for (std::size_t r = 0; r < map.sensors.receivers.size(); ++r) {
    const Point2& rx = map.sensors.receivers[r].position;
    for (const auto& tx : map.sensors.transmitters) {
      const double eta = std::max(
          cfg.min_eta, path_snr(w, map, static_cast<int>(r), cfg.snr_per_sample,
                                direct_attenuation(tx, pos, rx)));
      const Mat2 R = train_measurement_covariance(w, eta);
      const MeasurementPrediction mp = predict_measurement(g, tx, rx, cfg.ukf);
      const Mat2 S = mp.innovation_covariance(R);
      const Mat62 K = mp.cross * S.inverse();
      g.P -= K * S * K.transpose();
      g.P = 0.5 * (g.P + g.P.transpose());
    }
  }
  return g.P.trace();
}

SchedulerDecision select_waveform(const std::vector<Track>& tracks, const WaveformLibrary& library,
                                  const ScenarioMap& map, const ModelBank& bank,
                                  const SchedulerConfig& cfg, int scan) {
  std::vector<GaussianState> predicted;
  for (const auto& t : tracks) {
    const bool eligible = t.status == TrackStatus::kConfirmed ||
                          (cfg.include_tentative && t.status == TrackStatus::kTentative);
    if (eligible) predicted.push_back(predict_track(t, bank, cfg.ukf));
  }
  if (predicted.empty()) {
    SchedulerDecision d = round_robin(library, scan);
    d.fallback = true;
    return d;
  }

  SchedulerDecision d;
  d.scan = scan;
  d.mode = ScheduleMode::kLookahead;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < library.size(); ++i) {
    double sum = 0.0;
    for (const auto& g : predicted) sum += lookahead_cost(g, library[i], map, cfg);
    const double cost = sum / static_cast<double>(predicted.size());
    d.costs.push_back(cost);
    if (cost < best) {
      best = cost;
      d.waveform = static_cast<int>(i);
    }
  }
  return d;
}

}  // namespace urbantrack
