#include "urbantrack/scenario.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace urbantrack {

using nlohmann::json;

namespace {

Point2 point(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 2) {
    throw std::invalid_argument(std::string(what) + ": expected [x, y]");
  }
  return {j[0].get<double>(), j[1].get<double>()};
}

Rect rect(const json& j, const char* what) {
  Rect r{point(j.at("min"), what), point(j.at("max"), what)};
  if (r.min_corner.x() > r.max_corner.x() || r.min_corner.y() > r.max_corner.y()) {
    throw std::invalid_argument(std::string(what) + ": min corner exceeds max corner");
  }
  return r;
}

TrajectorySegment segment(const json& j) {
  TrajectorySegment s;
  s.duration = j.at("duration").get<double>();
  const std::string mode = j.at("mode").get<std::string>();
  if (mode == "cv") {
    s.mode = TrajectorySegment::Mode::kConstantVelocity;
  } else if (mode == "accel") {
    s.mode = TrajectorySegment::Mode::kConstantAcceleration;
    s.value = j.at("acceleration").get<double>();
  } else if (mode == "turn") {
    s.mode = TrajectorySegment::Mode::kTurn;
    s.value = j.at("turn_rate").get<double>();
  } else {
    throw std::invalid_argument("unknown segment mode '" + mode + "'");
  }
  return s;
}

}  // namespace

std::vector<TrajectorySegment> default_segments() {
  using M = TrajectorySegment::Mode;
  return {{5.0, M::kConstantVelocity, 0.0},
          {5.0, M::kConstantAcceleration, -1.0},
          {10.0, M::kTurn, kPi / 20.0},
          {5.0, M::kConstantAcceleration, 1.0},
          {10.0, M::kConstantVelocity, 0.0}};
}

std::vector<StateVector> Scenario::trajectory() const {
  return generate_trajectory(truth.start, truth.segments, scan_period);
}

std::vector<TruthTarget> Scenario::truth_at(int scan) const { return truth_at(scan, trajectory()); }

std::vector<TruthTarget> Scenario::truth_at(int scan, const std::vector<StateVector>& traj) const {
  std::vector<TruthTarget> out;
  for (std::size_t i = 0; i < truth.offsets.size(); ++i) {
    const long step = scan - std::lround(truth.offsets[i] / scan_period);
    if (step < 0 || step >= static_cast<long>(traj.size())) continue;
    TruthTarget t;
    t.id = static_cast<int>(i);
    t.state = traj[static_cast<std::size_t>(step)];
    t.segment = segment_at(truth.segments, static_cast<double>(step) * scan_period);
    out.push_back(t);
  }
  return out;
}

Scenario parse_scenario(const json& doc) {
  Scenario sc;
  sc.name = doc.value("name", std::string("scenario"));

  const json& c = doc.at("constants");
  const double carrier = c.value("carrier_frequency", 4.0e9);
  if (!(carrier > 0.0)) throw std::invalid_argument("carrier_frequency must be positive");
  sc.map.sensors.carrier_wavelength = kSpeedOfLight / carrier;
  sc.map.sensors.max_range = c.value("max_range", 300.0);
  sc.map.sensors.sample_period = c.value("sample_period", 12.5e-9);
  sc.map.clutter_density = c.value("clutter_density", 2.5e-4);
  sc.scan_period = c.value("scan_period", 0.25);
  sc.snr = c.value("snr", 0.2);
  if (!(sc.scan_period > 0.0)) throw std::invalid_argument("scan_period must be positive");
  if (!(sc.snr > 0.0)) throw std::invalid_argument("snr must be positive");

  sc.map.bounds = rect(doc.at("bounds"), "bounds");
  for (const auto& z : doc.value("intersection_zones", json::array())) {
    sc.map.intersection_zones.push_back(rect(z, "intersection_zones"));
  }
  for (const auto& b : doc.value("buildings", json::array())) {
    const Rect r = rect(b, "buildings");
    sc.map.buildings.emplace_back(r.min_corner, r.max_corner);
  }
  for (const auto& s : doc.value("scatterers", json::array())) {
    const double refl = s.at("reflectivity").get<double>();
    if (s.contains("point")) {
      sc.map.scatterers.push_back(ClutterScatterer::point(point(s["point"], "scatterers"), refl));
    } else {
      sc.map.scatterers.emplace_back(point(s.at("a"), "scatterers"), point(s.at("b"), "scatterers"),
                                     refl);
    }
  }

  const json& sensors = doc.at("sensors");
  for (const auto& t : sensors.at("transmitters")) {
    sc.map.sensors.transmitters.push_back(point(t, "transmitters"));
  }
  const double lambda = sc.map.sensors.carrier_wavelength;
  for (const auto& r : sensors.at("receivers")) {
    Receiver rx;
    rx.position = point(r.at("position"), "receivers");
    rx.num_elements = r.value("elements", 1);
    rx.element_spacing = r.value("spacing_wavelengths", 0.5) * lambda;
    rx.boresight = r.value("boresight", 0.0);
    sc.map.sensors.receivers.push_back(rx);
  }
  if (sc.map.sensors.transmitters.empty() || sc.map.sensors.receivers.empty()) {
    throw std::invalid_argument("scenario needs at least one transmitter and one receiver");
  }
  sc.map.sensors.validate();

  const json& w = doc.at("waveforms");
  sc.library = make_library(w.at("kappas").get<std::vector<double>>(), w.value("pulses", 11),
                            w.value("pri", 1e-3), lambda, w.value("bandwidth", 40e6));

  const json truth = doc.value("truth", json::object());
  if (truth.contains("start")) {
    const Point2 p = point(truth["start"], "truth.start");
    const Point2 v = point(truth.value("velocity", json::array({10.0, 0.0})), "truth.velocity");
    sc.truth.start = make_state(p.x(), v.x(), p.y(), v.y());
  }
  if (truth.contains("segments")) {
    for (const auto& s : truth["segments"]) sc.truth.segments.push_back(segment(s));
  } else {
    sc.truth.segments = default_segments();
  }
  if (truth.contains("offsets")) sc.truth.offsets = truth["offsets"].get<std::vector<double>>();

  TrackerConfig& tc = sc.tracker;
  const json t = doc.value("tracker", json::object());
  tc.p_detect = t.value("p_detect", 0.9);
  tc.p_gate = t.value("p_gate", 0.99);
  tc.clutter_density = sc.map.clutter_density;
  tc.bank.period = sc.scan_period;
  tc.bank.sigma_cv = t.value("sigma_cv", 0.5);
  tc.bank.sigma_ca = t.value("sigma_ca", 1.0);
  tc.bank.turn_rate = t.value("turn_rate", kPi / 20.0);
  if (t.contains("transition")) {
    const auto rows = t["transition"].get<std::vector<std::vector<double>>>();
    if (rows.size() != 4) throw std::invalid_argument("transition matrix must be 4x4");
    for (int i = 0; i < 4; ++i) {
      if (rows[static_cast<std::size_t>(i)].size() != 4) throw std::invalid_argument("transition matrix must be 4x4");
      double sum = 0.0;
      for (int j = 0; j < 4; ++j) {
        const double v = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        if (v < 0.0) throw std::invalid_argument("transition probabilities must be non-negative");
        tc.transition(i, j) = v;
        sum += v;
      }
      if (!(sum > 0.0)) throw std::invalid_argument("transition row sums to zero");
      tc.transition.row(i) /= sum;
    }
  }
  const json e = t.value("existence", json::object());
  tc.existence.p11 = e.value("p11", 0.98);
  tc.existence.p21 = e.value("p21", 0.0);
  tc.existence.initial = e.value("initial", 0.5);
  tc.existence.confirm = e.value("confirm", 0.9);
  tc.existence.terminate = e.value("terminate", 0.05);
  tc.existence.validate();
  const json in = t.value("initiation", json::object());
  tc.initiation.max_speed = in.value("max_speed", 15.0);
  tc.initiation.speed_sigma = in.value("speed_sigma", 1.0);
  tc.initiation.accel_variance = in.value("accel_variance", 1.0);
  tc.initiation.rdot_gate_sq = in.value("rdot_gate_sq", 16.0);
  tc.initiation.period = sc.scan_period;
  const json ms = t.value("model_set", json::object());
  const std::string mode = ms.value("mode", std::string("zones"));
  if (mode == "zones") {
    tc.policy.mode = ModelSetPolicy::Mode::kZones;
  } else if (mode == "scans") {
    tc.policy.mode = ModelSetPolicy::Mode::kScanWindow;
  } else {
    throw std::invalid_argument("model_set.mode must be 'zones' or 'scans'");
  }
  tc.policy.window_begin = ms.value("begin", 20);
  tc.policy.window_end = ms.value("end", 100);

  const json s = doc.value("sensing", json::object());
  sc.fast.detection_probability = tc.p_detect;
  sc.fast.clutter_density = sc.map.clutter_density;
  sc.fast.snr_per_sample = sc.snr;
  sc.fast.min_relative_power = s.value("min_relative_power", 0.1);
  sc.fast.rdot_max = s.value("rdot_max", 37.5);
  sc.fast.range_min = 0.0;
  sc.fast.range_max = 2.0 * sc.map.sensors.max_range;
  sc.signal.grid = make_grid(sc.map.sensors.max_range, sc.fast.rdot_max, lambda,
                             s.value("delay_bins", 256), s.value("doppler_bins", 64));
  sc.signal.window.delay_half = s.value("excision_delay", 3);
  sc.signal.window.doppler_half = s.value("excision_doppler", 16);
  sc.signal.fit_half_window = s.value("fit_half_window", 2);
  sc.signal.p_false_alarm = s.value("p_false_alarm", 0.01);
  sc.background_images = s.value("background_images", 20);
  return sc;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scenario file " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw std::runtime_error("invalid JSON in " + path + ": " + e.what());
  }
  try {
    return parse_scenario(doc);
  } catch (const json::exception& e) {
    throw std::runtime_error("invalid scenario " + path + ": " + e.what());
  }
}

}  // namespace urbantrack
