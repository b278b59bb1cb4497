#include "urbantrack/sensing.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "json.hpp"

namespace urbantrack {

namespace {

constexpr double kTemplateSupport = 8.0;  // in units of kappa

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Uniform phase in (-pi, pi] fixed by the path's hops, so a static scene
// returns the same phase on every scan.
double static_phase(const PropagationPath& p) {
  std::uint64_t h = splitmix64(static_cast<std::uint64_t>(p.path_class) + 0x51a7ULL);
  for (int idx : p.scatterers) h = splitmix64(h ^ static_cast<std::uint64_t>(idx));
  for (const Point2& q : p.hops) {
    h = splitmix64(h ^ std::bit_cast<std::uint64_t>(q.x()));
    h = splitmix64(h ^ std::bit_cast<std::uint64_t>(q.y()));
  }
  return kPi - 2.0 * kPi * static_cast<double>(h >> 11) * 0x1.0p-53;
}

Complex pulse_value(const ChirpWaveform& w, double dt) {
  const Complex a(-1.0 / (2.0 * w.kappa * w.kappa), w.sweep_sign() * w.gamma);
  return w.peak_amplitude() * std::exp(a * (dt * dt));
}

}  // namespace

std::uint64_t stream_seed(std::uint64_t base, std::uint64_t run, std::uint64_t scan,
                          std::uint64_t receiver) {
  std::uint64_t h = splitmix64(base);
  h = splitmix64(h ^ run);
  h = splitmix64(h ^ (scan + 0x1000003ULL));
  h = splitmix64(h ^ (receiver + 0x7f4a7c15ULL));
  return h;
}

DelayDopplerGrid make_grid(double max_range, double rdot_max, double wavelength,
                           int delay_bins, int doppler_bins) {
  if (delay_bins < 1 || doppler_bins < 1) throw std::invalid_argument("grid needs cells");
  DelayDopplerGrid g;
  g.delay_bins = delay_bins;
  g.delay_min = 0.0;
  g.delay_step = 2.0 * max_range / kSpeedOfLight / delay_bins;
  g.doppler_bins = doppler_bins;
  const double nu_max = rdot_max / wavelength;
  g.doppler_step = 2.0 * nu_max / doppler_bins;
  g.doppler_min = -nu_max;
  return g;
}

double DelayDopplerImage::max() const {
  double m = 0.0;
  for (double v : magnitude) m = std::max(m, v);
  return m;
}

void DelayDopplerImage::write_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "delay_s,doppler_hz,magnitude\n";
  out.precision(12);
  for (int i = 0; i < grid.delay_bins; ++i) {
    for (int j = 0; j < grid.doppler_bins; ++j) {
      out << grid.delay(i) << ',' << grid.doppler(j) << ',' << at(i, j) << '\n';
    }
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::string scan_to_json_line(const Scan& s) {
  nlohmann::json j;
  j["scan"] = s.scan;
  j["receiver"] = s.receiver;
  auto& arr = j["measurements"] = nlohmann::json::array();
  for (const auto& m : s.measurements) {
    arr.push_back({{"r", m.z(0)},
                   {"rdot", m.z(1)},
                   {"R", {m.R(0, 0), m.R(0, 1), m.R(1, 1)}}});
  }
  return j.dump();
}

ReceivedStreams make_streams(const ChirpWaveform& w, const Receiver& rx,
                             const DelayDopplerGrid& grid, double sample_period) {
  if (!(sample_period <= 1.0 / (2.0 * w.bandwidth) * (1.0 + 1e-12))) {
    throw std::invalid_argument("receiver sampling period does not resolve the chirp bandwidth");
  }
  ReceivedStreams s;
  s.elements = rx.num_elements;
  s.pulses = w.pulses;
  s.sample_period = sample_period;
  s.pri = w.pri;
  const double support = kTemplateSupport * w.kappa;
  s.window_start = grid.delay(0) - support;
  const double window_end = grid.delay(grid.delay_bins - 1) + support;
  s.samples = static_cast<int>(std::ceil((window_end - s.window_start) / sample_period)) + 1;
  s.data.assign(static_cast<std::size_t>(s.elements) * s.pulses * s.samples, Complex(0.0, 0.0));
  return s;
}

void synthesize_paths(ReceivedStreams& streams, const std::vector<PropagationPath>& paths,
                      const ChirpWaveform& w, const Receiver& rx, double wavelength,
                      const SynthesisOptions& opts, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> phase_dist(-kPi, kPi);
  const double dbar = rx.element_spacing / wavelength;
  const double support = kTemplateSupport * w.kappa;
  const double T2 = streams.sample_period;

  for (const auto& p : paths) {
    double phi = 0.0;
    if (opts.random_phase) phi = (opts.static_clutter_phase && !p.involves_target) ? static_phase(p) : phase_dist(rng);
    const Complex amp = p.attenuation * std::polar(1.0, phi);
    const double cos_theta = std::cos(p.azimuth);
    const int u_lo = std::max(0, static_cast<int>(std::floor((p.delay - support - streams.window_start) / T2)));
    const int u_hi = std::min(streams.samples - 1,
                              static_cast<int>(std::ceil((p.delay + support - streams.window_start) / T2)));
    if (u_lo > u_hi) continue;
    for (int b = 0; b < streams.pulses; ++b) {
      for (int u = u_lo; u <= u_hi; ++u) {
        const double t = streams.sample_time(b, u);
        const double offset = streams.window_start + u * T2;
        const Complex base = amp * pulse_value(w, offset - p.delay) *
                             std::polar(1.0, -2.0 * kPi * p.doppler * t);
        for (int l = 0; l < streams.elements; ++l) {
          streams.at(l, b, u) += base * std::polar(1.0, -static_cast<double>(l) * dbar * cos_theta);
        }
      }
    }
  }

  if (opts.noise_power > 0.0) {
    std::normal_distribution<double> n(0.0, std::sqrt(opts.noise_power / 2.0));
    for (auto& v : streams.data) v += Complex(n(rng), n(rng));
  }
}

ReceivedStreams synthesize_received(const ScenarioMap& map, const std::vector<StateVector>& targets,
                                    const ChirpWaveform& w, int receiver,
                                    const DelayDopplerGrid& grid, const SynthesisOptions& opts,
                                    std::mt19937_64& rng) {
  const auto& rx = map.sensors.receivers.at(static_cast<std::size_t>(receiver));
  ReceivedStreams streams = make_streams(w, rx, grid, map.sensors.sample_period);
  std::vector<PropagationPath> paths;
  for (const auto& tx : map.sensors.transmitters) {
    auto clutter = enumerate_clutter_paths(map, tx, rx);
    paths.insert(paths.end(), clutter.begin(), clutter.end());
    for (const auto& tgt : targets) {
      for (auto& p : enumerate_paths(map, tx, tgt, rx)) {
        if (p.involves_target) paths.push_back(std::move(p));
      }
    }
  }
  synthesize_paths(streams, paths, w, rx, map.sensors.carrier_wavelength, opts, rng);
  return streams;
}

DelayDopplerImage matched_filter(const ReceivedStreams& streams, const ChirpWaveform& w,
                                 const DelayDopplerGrid& grid) {
  DelayDopplerImage img(grid);
  const double T2 = streams.sample_period;
  const double support = kTemplateSupport * w.kappa;

  // Sum over array elements first; the template is common to all of them.
  std::vector<Complex> z(static_cast<std::size_t>(streams.pulses) * streams.samples);
  for (int b = 0; b < streams.pulses; ++b) {
    for (int u = 0; u < streams.samples; ++u) {
      Complex acc(0.0, 0.0);
      for (int l = 0; l < streams.elements; ++l) acc += streams.at(l, b, u);
      z[static_cast<std::size_t>(b) * streams.samples + u] = acc;
    }
  }

  std::vector<Complex> tmpl;
  std::vector<Complex> q(static_cast<std::size_t>(streams.pulses));
  const int half = (streams.pulses - 1) / 2;
  for (int i = 0; i < grid.delay_bins; ++i) {
    const double tau = grid.delay(i);
    const int u_lo = std::max(0, static_cast<int>(std::floor((tau - support - streams.window_start) / T2)));
    const int u_hi = std::min(streams.samples - 1,
                              static_cast<int>(std::ceil((tau + support - streams.window_start) / T2)));
    tmpl.clear();
    for (int u = u_lo; u <= u_hi; ++u) {
      tmpl.push_back(std::conj(pulse_value(w, streams.window_start + u * T2 - tau)));
    }
    for (int b = 0; b < streams.pulses; ++b) {
      Complex acc(0.0, 0.0);
      const Complex* row = &z[static_cast<std::size_t>(b) * streams.samples];
      for (int u = u_lo; u <= u_hi; ++u) acc += row[u] * tmpl[static_cast<std::size_t>(u - u_lo)];
      q[static_cast<std::size_t>(b)] = acc;
    }
    // Slow-time Doppler processing; the phase within one pulse is evaluated
    // at the hypothesised delay.
    for (int j = 0; j < grid.doppler_bins; ++j) {
      const double nu = grid.doppler(j);
      Complex acc(0.0, 0.0);
      for (int b = 0; b < streams.pulses; ++b) {
        const double t = (b - half) * streams.pri + tau;
        acc += q[static_cast<std::size_t>(b)] * std::polar(1.0, 2.0 * kPi * nu * t);
      }
      img.at(i, j) = std::abs(acc);
    }
  }
  return img;
}

double matched_filter_noise_power(const ChirpWaveform& w, int elements, double noise_power,
                                  double sample_period) {
  (void)w;  // unit-energy train: sum |s(u T2)|^2 = 1 / T2
  return noise_power * static_cast<double>(elements) / sample_period;
}

double detection_threshold(double output_noise_power, std::size_t cells, double p_false_alarm) {
  if (!(p_false_alarm > 0.0 && p_false_alarm < 1.0)) {
    throw std::invalid_argument("false alarm probability must lie in (0, 1)");
  }
  // |noise| is Rayleigh: P(|n| > k sigma) = exp(-k^2); union bound over cells.
  const double k2 = std::log(static_cast<double>(cells) / p_false_alarm);
  return std::sqrt(std::max(k2, 1.0) * output_noise_power);
}

DelayDopplerImage background_average(const std::vector<DelayDopplerImage>& images) {
  if (images.empty()) throw std::invalid_argument("background needs at least one image");
  DelayDopplerImage avg(images.front().grid);
  for (const auto& im : images) {
    if (!(im.grid == avg.grid)) throw std::invalid_argument("background images differ in grid");
    for (std::size_t c = 0; c < avg.magnitude.size(); ++c) avg.magnitude[c] += im.magnitude[c];
  }
  const double inv = 1.0 / static_cast<double>(images.size());
  for (double& v : avg.magnitude) v *= inv;
  return avg;
}

DelayDopplerImage subtract_background(const DelayDopplerImage& image,
                                      const DelayDopplerImage& background) {
  if (!(image.grid == background.grid)) throw std::invalid_argument("grid mismatch");
  DelayDopplerImage out(image.grid);
  for (std::size_t c = 0; c < out.magnitude.size(); ++c) {
    out.magnitude[c] = std::max(0.0, image.magnitude[c] - background.magnitude[c]);
  }
  return out;
}

std::vector<Peak> detect_peaks(const DelayDopplerImage& image, double threshold,
                               const PeakWindow& window) {
  if (!(threshold > 0.0)) throw std::invalid_argument("detection threshold must be positive");
  const auto& g = image.grid;
  std::vector<double> work = image.magnitude;
  std::vector<Peak> peaks;
  while (true) {
    const auto it = std::max_element(work.begin(), work.end());
    if (it == work.end() || *it < threshold) break;
    const auto idx = static_cast<int>(it - work.begin());
    Peak p;
    p.delay_index = idx / g.doppler_bins;
    p.doppler_index = idx % g.doppler_bins;
    p.delay = g.delay(p.delay_index);
    p.doppler = g.doppler(p.doppler_index);
    p.magnitude = *it;
    peaks.push_back(p);
    for (int i = std::max(0, p.delay_index - window.delay_half);
         i <= std::min(g.delay_bins - 1, p.delay_index + window.delay_half); ++i) {
      for (int j = std::max(0, p.doppler_index - window.doppler_half);
           j <= std::min(g.doppler_bins - 1, p.doppler_index + window.doppler_half); ++j) {
        work[static_cast<std::size_t>(i) * g.doppler_bins + j] =
            -std::numeric_limits<double>::infinity();
      }
    }
  }
  return peaks;
}

PeakFit fit_peak(const DelayDopplerImage& image, const Peak& peak, double output_noise_power,
                 const ChirpWaveform& w, int half_window) {
  const auto& g = image.grid;
  PeakFit fit;
  fit.delay = peak.delay;
  fit.doppler = peak.doppler;
  fit.amplitude = peak.magnitude;

  auto fallback = [&]() {
    fit.fallback = true;
    fit.delay = peak.delay;
    fit.doppler = peak.doppler;
    fit.amplitude = peak.magnitude;
    const double eta = output_noise_power > 0.0
                           ? std::max(peak.magnitude * peak.magnitude / (2.0 * output_noise_power), 1e-6)
                           : 1e6;
    const Mat2 r = train_measurement_covariance(w, eta);
    const Eigen::Vector2d s(1.0 / kSpeedOfLight, 1.0 / w.wavelength);
    fit.covariance = s.asDiagonal() * r * s.asDiagonal();
    return fit;
  };

  std::vector<Eigen::Matrix<double, 6, 1>> rows;
  std::vector<double> values;
  for (int di = -half_window; di <= half_window; ++di) {
    for (int dj = -half_window; dj <= half_window; ++dj) {
      const int i = peak.delay_index + di;
      const int j = peak.doppler_index + dj;
      if (i < 0 || j < 0 || i >= g.delay_bins || j >= g.doppler_bins) continue;
      Eigen::Matrix<double, 6, 1> r;
      const double x = di;
      const double y = dj;
      r << 1.0, x, y, x * x, x * y, y * y;
      rows.push_back(r);
      values.push_back(image.at(i, j));
    }
  }
  if (rows.size() < 9) return fallback();

  Eigen::MatrixXd A(static_cast<Eigen::Index>(rows.size()), 6);
  Eigen::VectorXd b(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    A.row(static_cast<Eigen::Index>(k)) = rows[k].transpose();
    b(static_cast<Eigen::Index>(k)) = values[k];
  }
  const Eigen::VectorXd c = A.colPivHouseholderQr().solve(b);

  Mat2 H;
  H << 2.0 * c(3), c(4), c(4), 2.0 * c(5);
  const Eigen::Vector2d grad(c(1), c(2));
  // Concave only if -H is positive definite.
  if (!(H(0, 0) < 0.0 && H.determinant() > 0.0)) return fallback();
  const Eigen::Vector2d d = -H.ldlt().solve(grad);
  if (std::abs(d(0)) > half_window || std::abs(d(1)) > half_window) return fallback();
  const double a0 = c(0) + grad.dot(d) + 0.5 * d.dot(H * d);
  if (!(a0 > 0.0)) return fallback();

  const Eigen::Vector2d step(g.delay_step, g.doppler_step);
  fit.delay = peak.delay + d(0) * step(0);
  fit.doppler = peak.doppler + d(1) * step(1);
  fit.amplitude = a0;
  const Eigen::Vector2d inv_step = step.cwiseInverse();
  fit.curvature = inv_step.asDiagonal() * (-H / a0) * inv_step.asDiagonal();
  fit.fallback = false;

  if (output_noise_power > 0.0) {
    // Fisher information 2 * SNR * Q with SNR = A0^2 / output noise power.
    const double snr = a0 * a0 / output_noise_power;
    fit.covariance = (2.0 * snr * fit.curvature).inverse();
  } else {
    fit.covariance = Mat2::Zero();
  }
  return fit;
}

Measurement to_measurement(const PeakFit& fit, double wavelength, int receiver, int scan) {
  Measurement m;
  m.z << kSpeedOfLight * fit.delay, wavelength * fit.doppler;
  const Eigen::Vector2d u(kSpeedOfLight, wavelength);
  m.R = u.asDiagonal() * fit.covariance * u.asDiagonal();
  m.R(1, 0) = m.R(0, 1);
  m.receiver = receiver;
  m.scan = scan;
  return m;
}

Scan to_measurements(const std::vector<PeakFit>& fits, double wavelength, int receiver,
                     int scan) {
  Scan s;
  s.scan = scan;
  s.receiver = receiver;
  for (const auto& f : fits) s.measurements.push_back(to_measurement(f, wavelength, receiver, scan));
  return s;
}

Scan signal_scan(const ScenarioMap& map, const std::vector<StateVector>& targets,
                 const ChirpWaveform& w, int receiver, int scan, const SignalConfig& cfg,
                 const std::optional<DelayDopplerImage>& background, std::mt19937_64& rng) {
  const auto& rx = map.sensors.receivers.at(static_cast<std::size_t>(receiver));
  const auto streams = synthesize_received(map, targets, w, receiver, cfg.grid, cfg.synthesis, rng);
  DelayDopplerImage image = matched_filter(streams, w, cfg.grid);
  if (background) image = subtract_background(image, *background);

  const double noise_out = matched_filter_noise_power(w, rx.num_elements, cfg.synthesis.noise_power,
                                                      map.sensors.sample_period);
  double threshold = noise_out > 0.0
                         ? detection_threshold(noise_out, cfg.grid.cells(), cfg.p_false_alarm)
                         : 1e-3 * image.max();
  if (!(threshold > 0.0)) threshold = std::numeric_limits<double>::min();

  std::vector<PeakFit> fits;
  for (const auto& p : detect_peaks(image, threshold, cfg.window)) {
    fits.push_back(fit_peak(image, p, noise_out, w, cfg.fit_half_window));
  }
  Scan s = to_measurements(fits, map.sensors.carrier_wavelength, receiver, scan);
  if (noise_out <= 0.0) {
    // Noise-free synthesis carries no SNR; attach the nominal waveform covariance.
    for (auto& m : s.measurements) m.R = train_measurement_covariance(w, 1e6);
  }
  return s;
}

double path_snr(const ChirpWaveform& w, const ScenarioMap& map, int receiver,
                double snr_per_sample, double attenuation) {
  const auto& rx = map.sensors.receivers.at(static_cast<std::size_t>(receiver));
  return effective_snr(w, snr_per_sample, rx.num_elements, map.sensors.sample_period) *
         attenuation * attenuation;
}

Scan fast_scan(const ScenarioMap& map, const std::vector<StateVector>& targets,
               const ChirpWaveform& w, int receiver, int scan, const FastScanConfig& cfg,
               std::mt19937_64& rng) {
  if (!(cfg.detection_probability >= 0.0 && cfg.detection_probability <= 1.0)) {
    throw std::invalid_argument("detection probability must lie in [0, 1]");
  }
  if (cfg.clutter_density < 0.0) throw std::invalid_argument("clutter density must be >= 0");

  const auto& rx = map.sensors.receivers.at(static_cast<std::size_t>(receiver));
  const double lambda = map.sensors.carrier_wavelength;

  Scan s;
  s.scan = scan;
  s.receiver = receiver;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  for (std::size_t ti = 0; ti < map.sensors.transmitters.size(); ++ti) {
    const auto& tx = map.sensors.transmitters[ti];
    for (const auto& tgt : targets) {
      const double direct = direct_attenuation(tx, position_of(tgt), rx.position);
      for (const auto& p : enumerate_paths(map, tx, tgt, rx)) {
        if (!p.involves_target) continue;
        if (cfg.direct_only && p.path_class != PathClass::kDirect) continue;
        const double ratio = p.attenuation / direct;
        if (p.path_class != PathClass::kDirect && ratio * ratio < cfg.min_relative_power) continue;
        if (unit(rng) >= cfg.detection_probability) continue;
        const double eta = std::max(cfg.min_eta, path_snr(w, map, receiver, cfg.snr_per_sample,
                                                          p.attenuation));
        Measurement m;
        m.R = train_measurement_covariance(w, eta);
        m.z << p.length, lambda * p.doppler;
        if (cfg.noise_scale > 0.0) {
          const Mat2 l = m.R.llt().matrixL();
          const Eigen::Vector2d n(gauss(rng), gauss(rng));
          m.z += cfg.noise_scale * (l * n);
        }
        m.receiver = receiver;
        m.transmitter = static_cast<int>(ti);
        m.scan = scan;
        s.measurements.push_back(m);
      }
    }
  }

  if (cfg.clutter_density > 0.0 && !map.sensors.transmitters.empty()) {
    std::poisson_distribution<int> count(cfg.clutter_density * cfg.region_area());
    const int n = count(rng);
    const auto nt = static_cast<int>(map.sensors.transmitters.size());
    for (int i = 0; i < n; ++i) {
      Measurement m;
      m.z << cfg.range_min + unit(rng) * (cfg.range_max - cfg.range_min),
          -cfg.rdot_max + unit(rng) * 2.0 * cfg.rdot_max;
      const double r = std::max(m.z(0), 1.0);
      const double alpha = (kAttenuationReferenceLength / r) * (kAttenuationReferenceLength / r);
      m.R = train_measurement_covariance(
          w, std::max(cfg.min_eta, path_snr(w, map, receiver, cfg.snr_per_sample, alpha)));
      m.receiver = receiver;
      m.transmitter = nt > 1 ? static_cast<int>(unit(rng) * nt) % nt : 0;
      m.scan = scan;
      s.measurements.push_back(m);
    }
  }
  return s;
}

}  // namespace urbantrack
