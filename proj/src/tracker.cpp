#include "urbantrack/tracker.hpp"

#include <algorithm>
#include <stdexcept>

namespace urbantrack {

std::string to_string(LoopMode m) { return m == LoopMode::kClosed ? "closed" : "open"; }

LoopMode loop_mode_from_string(const std::string& s) {
  if (s == "closed") return LoopMode::kClosed;
  if (s == "open") return LoopMode::kOpen;
  throw std::invalid_argument("mode must be 'closed' or 'open', got '" + s + "'");
}

Tracker::Tracker(const ScenarioMap& map, TrackerConfig cfg)
    : map_(map), cfg_(std::move(cfg)), gate_sq_(gate_threshold(cfg_.p_gate)) {
  cfg_.existence.validate();
  if (!(cfg_.clutter_density > 0.0)) throw std::invalid_argument("clutter density must be positive");
  cfg_.initiation.period = cfg_.bank.period;
}

std::vector<ModelId> Tracker::model_set(const Point2& position, int scan) const {
  if (cfg_.mode == LoopMode::kOpen) return {ModelId::kNCV};
  return adapt_model_set(position, map_.intersection_zones, scan, cfg_.policy);
}

std::vector<const Track*> Tracker::confirmed() const {
  std::vector<const Track*> out;
  for (const auto& t : tracks_) {
    if (t.status == TrackStatus::kConfirmed) out.push_back(&t);
  }
  return out;
}

int Tracker::confirmed_count() const {
  return static_cast<int>(std::count_if(tracks_.begin(), tracks_.end(), [](const Track& t) {
    return t.status == TrackStatus::kConfirmed;
  }));
}

int Tracker::active_count() const {
  return static_cast<int>(
      std::count_if(tracks_.begin(), tracks_.end(), [](const Track& t) { return t.active(); }));
}

void Tracker::predict(int scan) {
  for (auto& t : tracks_) {
    if (!t.active()) continue;
    try {
      const auto ids = model_set(position_of(t.combined.mean), scan);
      const auto states = apply_model_set(t.models, ids, t.combined);
      const MixResult mix = imm_mix(states, ModelSet{ids, cfg_.transition});
      if (mix.uniform_fallback) ++mix_fallbacks_;
      std::vector<ModelFilterState> predicted;
      for (const auto& s : mix.mixed) {
        const GaussianState g = ukf_predict({s.mean, s.P}, cfg_.bank.model(s.model), cfg_.ukf);
        predicted.push_back({s.model, g.mean, g.P, s.mu});
      }
      t.models = std::move(predicted);
      t.combined = combine_output(t.models);
      t.existence = cfg_.existence.predict(t.existence);
    } catch (const FilterDivergence&) {
      ++divergences_;
      t.status = TrackStatus::kTerminated;
      t.terminated_scan = scan;
    }
  }
}

void Tracker::update(const std::vector<Measurement>& measurements, int receiver, int transmitter,
                     std::vector<char>& used) {
  std::vector<int> index;  // subset -> receiver scan index
  std::vector<Measurement> subset;
  for (std::size_t i = 0; i < measurements.size(); ++i) {
    if (measurements[i].transmitter == transmitter) {
      index.push_back(static_cast<int>(i));
      subset.push_back(measurements[i]);
    }
  }
  const Point2& tx = map_.sensors.transmitters.at(static_cast<std::size_t>(transmitter));
  const Point2& rx = map_.sensors.receivers.at(static_cast<std::size_t>(receiver)).position;

  std::vector<Track*> live;
  std::vector<TrackHypothesis> hyps;
  std::vector<std::vector<MeasurementPrediction>> preds;
  for (auto& t : tracks_) {
    if (!t.active()) continue;
    try {
      const MeasurementPrediction combined = predict_measurement(t.combined, tx, rx, cfg_.ukf);
      TrackHypothesis h;
      h.existence = t.existence;
      h.validated = validate(combined.z, combined.S0, subset, gate_sq_);
      std::vector<MeasurementPrediction> per_model;
      for (const auto& m : t.models) {
        per_model.push_back(predict_measurement({m.mean, m.P}, tx, rx, cfg_.ukf));
        h.mu.push_back(m.mu);
        std::vector<double> lik;
        for (int k : h.validated) {
          const auto& z = subset[static_cast<std::size_t>(k)];
          const Mat2 S = per_model.back().innovation_covariance(z.R);
          lik.push_back(gaussian_density(z.z, per_model.back().z, S) / cfg_.p_gate);
        }
        h.likelihood.push_back(std::move(lik));
      }
      live.push_back(&t);
      hyps.push_back(std::move(h));
      preds.push_back(std::move(per_model));
    } catch (const std::exception&) {
      ++divergences_;
      t.status = TrackStatus::kTerminated;
    }
  }
  if (live.empty()) return;

  const std::vector<double> rho(subset.size(), cfg_.clutter_density);
  const AssociationResult res = lmipda_associate(hyps, rho, cfg_.p_detect, cfg_.p_gate);
  clamped_ += res.clamped;

  for (std::size_t n = 0; n < live.size(); ++n) {
    Track& t = *live[n];
    const TrackAssociation& a = res.tracks[n];
    std::vector<MeasVector> zs;
    std::vector<Mat2> Rs;
    for (int k : a.validated) {
      zs.push_back(subset[static_cast<std::size_t>(k)].z);
      Rs.push_back(subset[static_cast<std::size_t>(k)].R);
      used[static_cast<std::size_t>(index[static_cast<std::size_t>(k)])] = 1;
    }
    try {
      for (std::size_t r = 0; r < t.models.size(); ++r) {
        auto& m = t.models[r];
        const GaussianState g = ukf_update({m.mean, m.P}, preds[n][r], zs, Rs, a.beta0[r], a.beta[r]);
        m.mean = g.mean;
        m.P = g.P;
        m.mu = a.mu[r];
      }
      t.existence = std::clamp(a.existence, 0.0, 1.0);
      t.combined = combine_output(t.models);
    } catch (const std::exception&) {
      ++divergences_;
      t.status = TrackStatus::kTerminated;
    }
  }
}

void Tracker::process(int scan, const std::vector<Scan>& scans) {
  predict(scan);

  const std::size_t nrx = map_.sensors.receivers.size();
  std::vector<std::vector<Measurement>> per_receiver(nrx);
  for (const auto& s : scans) {
    if (s.receiver < 0 || static_cast<std::size_t>(s.receiver) >= nrx) {
      throw std::invalid_argument("scan refers to an unknown receiver");
    }
    auto& dst = per_receiver[static_cast<std::size_t>(s.receiver)];
    dst.insert(dst.end(), s.measurements.begin(), s.measurements.end());
  }

  std::vector<std::vector<int>> unused(nrx);
  for (std::size_t r = 0; r < nrx; ++r) {
    std::vector<char> used(per_receiver[r].size(), 0);
    for (std::size_t tx = 0; tx < map_.sensors.transmitters.size(); ++tx) {
      update(per_receiver[r], static_cast<int>(r), static_cast<int>(tx), used);
    }
    for (std::size_t i = 0; i < used.size(); ++i) {
      if (!used[i]) unused[r].push_back(static_cast<int>(i));
    }
  }

  auto fixes = position_fixes(map_, per_receiver, unused, cfg_.initiation);
  const auto fallback_models = model_set(position_of(StateVector::Zero()), scan);
  auto born = initiate_tracks(map_, previous_fixes_, fixes, per_receiver, cfg_.initiation,
                              cfg_.existence, fallback_models, scan, next_id_);
  for (auto& t : born) {
    t.models = apply_model_set({}, model_set(position_of(t.combined.mean), scan), t.combined);
    tracks_.push_back(std::move(t));
  }
  previous_fixes_ = std::move(fixes);

  update_lifecycle(tracks_, cfg_.existence, scan);
}

}  // namespace urbantrack
