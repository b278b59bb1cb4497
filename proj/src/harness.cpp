#include "urbantrack/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "json.hpp"

namespace urbantrack {

using nlohmann::json;

namespace {

constexpr std::uint64_t kBackgroundStream = 0xB6B6B6B6ULL;

struct RunContext {
  const ExperimentConfig& cfg;
  std::vector<StateVector> trajectory;
  /// backgrounds[receiver][waveform], signal level only.
  std::vector<std::vector<DelayDopplerImage>> backgrounds;
};

std::string fmt(double v) {
  if (!std::isfinite(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

SynthesisOptions signal_noise(const Scenario& sc, const ChirpWaveform& w) {
  SynthesisOptions o;
  const double peak = w.peak_amplitude();
  o.noise_power = peak * peak / sc.snr;
  o.random_phase = true;
  return o;
}

std::vector<std::vector<DelayDopplerImage>> build_backgrounds(const ExperimentConfig& cfg) {
  const Scenario& sc = cfg.scenario;
  std::vector<std::vector<DelayDopplerImage>> out(sc.map.sensors.receivers.size());
  for (std::size_t r = 0; r < out.size(); ++r) {
    for (std::size_t wi = 0; wi < sc.library.size(); ++wi) {
      const ChirpWaveform& w = sc.library[wi];
      std::vector<DelayDopplerImage> images;
      for (int j = 0; j < sc.background_images; ++j) {
        std::mt19937_64 rng(stream_seed(cfg.seed ^ kBackgroundStream, static_cast<std::uint64_t>(j),
                                        wi, r));
        const auto streams = synthesize_received(sc.map, {}, w, static_cast<int>(r), sc.signal.grid,
                                                 signal_noise(sc, w), rng);
        images.push_back(matched_filter(streams, w, sc.signal.grid));
      }
      out[r].push_back(background_average(images));
    }
  }
  return out;
}

std::string track_json_line(const Track& t, int run, LoopMode mode, int scan) {
  json j;
  j["run"] = run;
  j["mode"] = to_string(mode);
  j["scan"] = scan;
  j["id"] = t.id;
  j["status"] = to_string(t.status);
  j["existence"] = t.existence;
  j["mean"] = std::vector<double>(t.combined.mean.data(), t.combined.mean.data() + 6);
  std::vector<double> diag(6);
  for (int i = 0; i < 6; ++i) diag[static_cast<std::size_t>(i)] = t.combined.P(i, i);
  j["P_diag"] = diag;
  json mu = json::object();
  for (const auto& m : t.models) mu[to_string(m.model)] = m.mu;
  j["mu"] = mu;
  return j.dump();
}

RunMetrics run_with(const RunContext& ctx, int run) {
  const ExperimentConfig& cfg = ctx.cfg;
  const Scenario& sc = cfg.scenario;
  TrackerConfig tc = sc.tracker;
  tc.mode = cfg.mode;
  Tracker tracker(sc.map, tc);

  RunMetrics rm;
  rm.run = run;
  const auto nrx = static_cast<int>(sc.map.sensors.receivers.size());

  for (int k = 0; k < cfg.scans; ++k) {
    const auto truth = sc.truth_at(k, ctx.trajectory);
    std::vector<StateVector> states;
    for (const auto& t : truth) states.push_back(t.state);

    SchedulerDecision decision =
        cfg.mode == LoopMode::kClosed
            ? select_waveform(tracker.tracks(), sc.library, sc.map, tc.bank, cfg.scheduler, k)
            : round_robin(sc.library, k);
    const ChirpWaveform& w = sc.library[static_cast<std::size_t>(decision.waveform)];

    std::vector<Scan> scans;
    for (int r = 0; r < nrx; ++r) {
      std::mt19937_64 rng(stream_seed(cfg.seed, static_cast<std::uint64_t>(run),
                                      static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(r)));
      if (cfg.signal_level) {
        SignalConfig scfg = sc.signal;
        scfg.synthesis = signal_noise(sc, w);
        const auto& bg = ctx.backgrounds[static_cast<std::size_t>(r)][static_cast<std::size_t>(decision.waveform)];
        scans.push_back(signal_scan(sc.map, states, w, r, k, scfg, bg, rng));
      } else {
        scans.push_back(fast_scan(sc.map, states, w, r, k, sc.fast, rng));
      }
      if (cfg.keep_history) {
        json j = json::parse(scan_to_json_line(scans.back()));
        j["run"] = run;
        j["mode"] = to_string(cfg.mode);
        j["waveform"] = w.name;
        rm.scan_log.push_back(j.dump());
      }
    }
    tracker.process(k, scans);
    rm.decisions.push_back(decision);

    ScanMetrics m;
    const auto confirmed = tracker.confirmed();
    m.confirmed = static_cast<int>(confirmed.size());
    m.targets = static_cast<int>(truth.size());
    std::vector<Point2> track_pos;
    for (const Track* t : confirmed) track_pos.push_back(position_of(t->combined.mean));
    std::vector<Point2> truth_pos;
    for (const auto& t : truth) truth_pos.push_back(position_of(t.state));
    for (const auto& a : assign_tracks_to_truth(track_pos, truth_pos, cfg.assignment_gate)) {
      ++m.assigned;
      m.squared_error += a.distance * a.distance;
      if (truth[static_cast<std::size_t>(a.truth)].id == 0) {
        std::array<double, kNumModels> p{};
        for (const auto& s : confirmed[static_cast<std::size_t>(a.track)]->models) {
          p[static_cast<std::size_t>(s.model)] = s.mu;
        }
        m.model_prob = p;
      }
    }
    for (const auto& t : truth) {
      if (t.id == 0) m.turning = t.segment >= 0 &&
                                 sc.truth.segments[static_cast<std::size_t>(t.segment)].mode ==
                                     TrajectorySegment::Mode::kTurn;
    }
    if (!std::isfinite(m.squared_error)) rm.finite = false;
    rm.scans.push_back(m);

    if (cfg.keep_history) {
      for (const auto& t : tracker.tracks()) {
        if (t.active()) rm.history.push_back(track_json_line(t, run, cfg.mode, k));
      }
    }
  }
  rm.divergences = tracker.divergences();
  return rm;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (runs < 1) throw std::invalid_argument("runs must be >= 1");
  if (scans < 1) throw std::invalid_argument("scans must be >= 1");
  if (!(scenario.scan_period > 0.0)) throw std::invalid_argument("scan period must be positive");
  if (threads < 1) throw std::invalid_argument("threads must be >= 1");
  if (!(assignment_gate > 0.0)) throw std::invalid_argument("assignment gate must be positive");
}

std::vector<Assignment> assign_tracks_to_truth(const std::vector<Point2>& tracks,
                                               const std::vector<Point2>& truth, double gate) {
  std::vector<Assignment> pairs;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    for (std::size_t j = 0; j < tracks.size(); ++j) {
      const double d = (truth[i] - tracks[j]).norm();
      if (d <= gate) pairs.push_back({static_cast<int>(i), static_cast<int>(j), d});
    }
  }
  std::stable_sort(pairs.begin(), pairs.end(),
                   [](const Assignment& a, const Assignment& b) { return a.distance < b.distance; });
  std::vector<char> truth_used(truth.size(), 0);
  std::vector<char> track_used(tracks.size(), 0);
  std::vector<Assignment> out;
  for (const auto& p : pairs) {
    if (truth_used[static_cast<std::size_t>(p.truth)] || track_used[static_cast<std::size_t>(p.track)]) continue;
    truth_used[static_cast<std::size_t>(p.truth)] = 1;
    track_used[static_cast<std::size_t>(p.track)] = 1;
    out.push_back(p);
  }
  std::sort(out.begin(), out.end(), [](const Assignment& a, const Assignment& b) { return a.truth < b.truth; });
  return out;
}

RunMetrics run_single(const ExperimentConfig& cfg, int run) {
  cfg.validate();
  RunContext ctx{cfg, cfg.scenario.trajectory(), {}};
  if (cfg.signal_level) ctx.backgrounds = build_backgrounds(cfg);
  return run_with(ctx, run);
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  RunContext ctx{cfg, cfg.scenario.trajectory(), {}};
  if (cfg.signal_level) ctx.backgrounds = build_backgrounds(cfg);

  std::vector<RunMetrics> runs(static_cast<std::size_t>(cfg.runs));
  const int workers = std::min(cfg.threads, cfg.runs);
  if (workers <= 1) {
    for (int r = 0; r < cfg.runs; ++r) runs[static_cast<std::size_t>(r)] = run_with(ctx, r);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (int r = w; r < cfg.runs; r += workers) runs[static_cast<std::size_t>(r)] = run_with(ctx, r);
        } catch (...) {
          errors[static_cast<std::size_t>(w)] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  return aggregate(cfg, std::move(runs));
}

ExperimentResult aggregate(const ExperimentConfig& cfg, std::vector<RunMetrics> runs) {
  ExperimentResult res;
  res.mode = cfg.mode;
  res.runs = cfg.runs;
  res.scans = cfg.scans;
  res.seed = cfg.seed;
  res.per_scan.resize(static_cast<std::size_t>(cfg.scans));

  std::vector<double> sq(static_cast<std::size_t>(cfg.scans), 0.0);
  std::vector<int> targets(static_cast<std::size_t>(cfg.scans), 0);
  int included = 0;
  double dominance_sum = 0.0;
  for (const auto& rm : runs) {
    if (!rm.finite) {
      res.excluded_runs.push_back(rm.run);
      continue;
    }
    ++included;
    int turn_scans = 0;
    int dominant = 0;
    for (std::size_t k = 0; k < rm.scans.size() && k < res.per_scan.size(); ++k) {
      const ScanMetrics& m = rm.scans[k];
      auto& a = res.per_scan[k];
      a.mean_confirmed += m.confirmed;
      a.samples += m.assigned;
      sq[k] += m.squared_error;
      targets[k] += m.targets;
      if (m.model_prob) {
        for (int i = 0; i < kNumModels; ++i) a.model_prob[static_cast<std::size_t>(i)] += (*m.model_prob)[static_cast<std::size_t>(i)];
        ++a.model_samples;
        if (m.turning) {
          ++turn_scans;
          const auto& p = *m.model_prob;
          const double ct = p[static_cast<std::size_t>(ModelId::kCTLeft)];
          bool best = true;
          for (int i = 0; i < kNumModels; ++i) {
            if (i != static_cast<int>(ModelId::kCTLeft) && p[static_cast<std::size_t>(i)] >= ct) best = false;
          }
          if (best) ++dominant;
        }
      }
    }
    if (turn_scans > 0) {
      dominance_sum += static_cast<double>(dominant) / turn_scans;
      ++res.ct_left_runs;
    }
  }

  double total_sq = 0.0;
  int total_samples = 0;
  int total_targets = 0;
  double confirmed_sum = 0.0;
  for (std::size_t k = 0; k < res.per_scan.size(); ++k) {
    auto& a = res.per_scan[k];
    a.scan = static_cast<int>(k);
    confirmed_sum += a.mean_confirmed;
    a.mean_confirmed = included > 0 ? a.mean_confirmed / included : 0.0;
    a.rmse = a.samples > 0 ? std::sqrt(sq[k] / a.samples) : std::numeric_limits<double>::quiet_NaN();
    a.coverage = targets[k] > 0 ? static_cast<double>(a.samples) / targets[k] : 0.0;
    for (auto& p : a.model_prob) {
      p = a.model_samples > 0 ? p / a.model_samples : std::numeric_limits<double>::quiet_NaN();
    }
    total_sq += sq[k];
    total_samples += a.samples;
    total_targets += targets[k];
  }
  const double denom = static_cast<double>(std::max(included, 1)) * static_cast<double>(res.per_scan.size());
  res.mean_confirmed = confirmed_sum / denom;
  res.rmse = total_samples > 0 ? std::sqrt(total_sq / total_samples) : std::numeric_limits<double>::quiet_NaN();
  res.coverage = total_targets > 0 ? static_cast<double>(total_samples) / total_targets : 0.0;
  res.ct_left_dominance = res.ct_left_runs > 0 ? dominance_sum / res.ct_left_runs : 0.0;
  res.run_metrics = std::move(runs);
  return res;
}

Comparison compare_results(double closed_rmse, double open_rmse, double closed_confirmed,
                           double open_confirmed) {
  Comparison c;
  c.rmse_reduction_pct = open_rmse > 0.0 ? 100.0 * (open_rmse - closed_rmse) / open_rmse
                                         : std::numeric_limits<double>::quiet_NaN();
  c.confirmed_increase_pct = open_confirmed > 0.0
                                 ? 100.0 * (closed_confirmed - open_confirmed) / open_confirmed
                                 : std::numeric_limits<double>::quiet_NaN();
  return c;
}

std::string metrics_csv(const std::vector<ExperimentResult>& results) {
  std::ostringstream out;
  out << "scan,mode,mean_confirmed,mean_rmse,model_prob_1,model_prob_2,model_prob_3,model_prob_4\n";
  for (const auto& r : results) {
    for (const auto& a : r.per_scan) {
      out << a.scan << ',' << to_string(r.mode) << ',' << fmt(a.mean_confirmed) << ',' << fmt(a.rmse);
      for (double p : a.model_prob) out << ',' << fmt(p);
      out << '\n';
    }
  }
  return out.str();
}

namespace {

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

json mode_summary(const ExperimentResult& r) {
  json j;
  j["runs"] = r.runs;
  j["scans"] = r.scans;
  j["mean_confirmed"] = r.mean_confirmed;
  j["rmse"] = number_or_null(r.rmse);
  j["coverage"] = r.coverage;
  j["ct_left_dominance"] = r.ct_left_dominance;
  j["ct_left_runs"] = r.ct_left_runs;
  j["excluded_runs"] = r.excluded_runs;
  int div = 0;
  for (const auto& rm : r.run_metrics) div += rm.divergences;
  j["filter_divergences"] = div;
  return j;
}

json read_json(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error("cannot open " + p.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw std::runtime_error("invalid JSON in " + p.string() + ": " + e.what());
  }
}

}  // namespace

void emit_outputs(const std::vector<ExperimentResult>& results, const ExperimentConfig& cfg,
                  const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + dir + ": " + ec.message());
  const fs::path root(dir);

  write_file(root / "metrics.csv", metrics_csv(results));

  std::ostringstream dec;
  dec << "run,scan,mode,schedule,waveform,waveform_name,fallback";
  for (std::size_t i = 0; i < cfg.scenario.library.size(); ++i) dec << ",cost_" << i;
  dec << '\n';
  for (const auto& r : results) {
    for (const auto& rm : r.run_metrics) {
      for (const auto& d : rm.decisions) {
        dec << rm.run << ',' << d.scan << ',' << to_string(r.mode) << ',' << to_string(d.mode) << ','
            << d.waveform << ',' << cfg.scenario.library[static_cast<std::size_t>(d.waveform)].name << ','
            << (d.fallback ? 1 : 0);
        for (std::size_t i = 0; i < cfg.scenario.library.size(); ++i) {
          dec << ',' << (i < d.costs.size() ? fmt(d.costs[i]) : std::string());
        }
        dec << '\n';
      }
    }
  }
  write_file(root / "decisions.csv", dec.str());

  json s;
  s["scenario"] = cfg.scenario.name;
  s["seed"] = cfg.seed;
  s["signal_level"] = cfg.signal_level;
  s["confirmed_definition"] = "existence probability >= " + fmt(cfg.scenario.tracker.existence.confirm);
  s["modes"] = json::object();
  const ExperimentResult* closed = nullptr;
  const ExperimentResult* open = nullptr;
  for (const auto& r : results) {
    s["modes"][to_string(r.mode)] = mode_summary(r);
    (r.mode == LoopMode::kClosed ? closed : open) = &r;
  }
  if (closed && open) {
    const Comparison c = compare_results(closed->rmse, open->rmse, closed->mean_confirmed, open->mean_confirmed);
    s["rmse_reduction_pct"] = number_or_null(c.rmse_reduction_pct);
    s["confirmed_increase_pct"] = number_or_null(c.confirmed_increase_pct);
  } else {
    s["rmse_reduction_pct"] = nullptr;
    s["confirmed_increase_pct"] = nullptr;
  }
  write_file(root / "summary.json", s.dump(2) + "\n");
}

void emit_history(const std::vector<ExperimentResult>& results, const std::string& dir) {
  namespace fs = std::filesystem;
  std::ostringstream runs;
  std::ostringstream scans;
  for (const auto& r : results) {
    for (const auto& rm : r.run_metrics) {
      for (const auto& l : rm.history) runs << l << '\n';
      for (const auto& l : rm.scan_log) scans << l << '\n';
    }
  }
  write_file(fs::path(dir) / "runs.jsonl", runs.str());
  write_file(fs::path(dir) / "scans.jsonl", scans.str());
}

std::string compare_directories(const std::string& a, const std::string& b) {
  namespace fs = std::filesystem;
  const json sa = read_json(fs::path(a) / "summary.json");
  const json sb = read_json(fs::path(b) / "summary.json");
  auto pick = [](const json& s, const char* preferred, const std::string& dir) {
    const json& modes = s.at("modes");
    if (modes.contains(preferred)) return std::make_pair(std::string(preferred), modes.at(preferred));
    if (modes.empty()) throw std::runtime_error("no modes recorded in " + dir);
    return std::make_pair(modes.begin().key(), modes.begin().value());
  };
  const auto [mode_a, ma] = pick(sa, "closed", a);
  const auto [mode_b, mb] = pick(sb, "open", b);
  auto num = [](const json& j, const char* k) {
    return j.at(k).is_null() ? std::numeric_limits<double>::quiet_NaN() : j.at(k).get<double>();
  };
  const Comparison c = compare_results(num(ma, "rmse"), num(mb, "rmse"), num(ma, "mean_confirmed"),
                                       num(mb, "mean_confirmed"));
  json out;
  out["a"] = {{"dir", a}, {"mode", mode_a}, {"rmse", ma.at("rmse")}, {"mean_confirmed", ma.at("mean_confirmed")}};
  out["b"] = {{"dir", b}, {"mode", mode_b}, {"rmse", mb.at("rmse")}, {"mean_confirmed", mb.at("mean_confirmed")}};
  out["rmse_reduction_pct"] = number_or_null(c.rmse_reduction_pct);
  out["confirmed_increase_pct"] = number_or_null(c.confirmed_increase_pct);
  return out.dump(2);
}

void export_plot_data(const std::vector<std::string>& dirs, const std::string& out) {
  namespace fs = std::filesystem;
  // mode -> scan -> columns
  std::map<std::string, std::map<int, std::vector<std::string>>> table;
  for (const auto& d : dirs) {
    std::ifstream in(fs::path(d) / "metrics.csv");
    if (!in) throw std::runtime_error("cannot open " + (fs::path(d) / "metrics.csv").string());
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::vector<std::string> cols;
      std::stringstream ss(line);
      std::string c;
      while (std::getline(ss, c, ',')) cols.push_back(c);
      if (cols.size() != 8) throw std::runtime_error("malformed metrics row in " + d + ": " + line);
      table[cols[1]][std::stoi(cols[0])] = cols;
    }
  }
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw std::runtime_error("cannot create " + out + ": " + ec.message());

  std::vector<std::string> modes;
  for (const auto& [m, rows] : table) modes.push_back(m);
  std::map<int, bool> scans;
  for (const auto& [m, rows] : table) {
    for (const auto& [k, cols] : rows) scans[k] = true;
  }
  auto column_file = [&](const std::string& name, std::size_t col) {
    std::ostringstream o;
    o << "scan";
    for (const auto& m : modes) o << ',' << m;
    o << '\n';
    for (const auto& [k, unused] : scans) {
      o << k;
      for (const auto& m : modes) {
        auto it = table[m].find(k);
        o << ',' << (it == table[m].end() ? std::string() : it->second[col]);
      }
      o << '\n';
    }
    write_file(fs::path(out) / name, o.str());
  };
  column_file("confirmed_tracks.csv", 2);
  column_file("rmse.csv", 3);

  std::ostringstream mp;
  mp << "scan,mode,NCV,NCA,CT_left,CT_right\n";
  for (const auto& m : modes) {
    for (const auto& [k, cols] : table[m]) {
      mp << k << ',' << m << ',' << cols[4] << ',' << cols[5] << ',' << cols[6] << ',' << cols[7] << '\n';
    }
  }
  write_file(fs::path(out) / "model_probabilities.csv", mp.str());
}

}  // namespace urbantrack
