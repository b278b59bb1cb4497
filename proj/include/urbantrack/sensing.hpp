#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "urbantrack/geometry.hpp"
#include "urbantrack/waveform.hpp"

namespace urbantrack {

/// Rectangular delay (s) x Doppler (Hz) grid. Cell (i, j) is centred at
/// (delay_min + i * delay_step, doppler_min + j * doppler_step).
struct DelayDopplerGrid {
  double delay_min = 0.0;
  double delay_step = 600.0 / kSpeedOfLight / 256.0;
  int delay_bins = 256;
  double doppler_min = -500.0;
  double doppler_step = 1000.0 / 64.0;
  int doppler_bins = 64;

  double delay(int i) const { return delay_min + i * delay_step; }
  double doppler(int j) const { return doppler_min + j * doppler_step; }
  std::size_t cells() const {
    return static_cast<std::size_t>(delay_bins) * static_cast<std::size_t>(doppler_bins);
  }
  bool operator==(const DelayDopplerGrid& o) const = default;
};

/// Grid covering bistatic range [0, 2 max_range] and range-rate +/- rdot_max.
DelayDopplerGrid make_grid(double max_range, double rdot_max, double wavelength,
                           int delay_bins = 256, int doppler_bins = 64);

struct DelayDopplerImage {
  DelayDopplerGrid grid;
  std::vector<double> magnitude;  // delay-major

  DelayDopplerImage() = default;
  explicit DelayDopplerImage(DelayDopplerGrid g)
      : grid(g), magnitude(g.cells(), 0.0) {}

  double& at(int i, int j) {
    return magnitude[static_cast<std::size_t>(i) * grid.doppler_bins + j];
  }
  double at(int i, int j) const {
    return magnitude[static_cast<std::size_t>(i) * grid.doppler_bins + j];
  }
  double max() const;
  /// Writes "delay_s,doppler_hz,magnitude" rows.
  void write_csv(const std::string& path) const;
};

struct Measurement {
  MeasVector z = MeasVector::Zero();  // bistatic range (m), range-rate (m/s)
  Mat2 R = Mat2::Identity();
  int receiver = 0;
  int transmitter = 0;
  int scan = 0;
};

struct Scan {
  int scan = 0;
  int receiver = 0;
  std::vector<Measurement> measurements;
};

std::string scan_to_json_line(const Scan& s);

// ---------------------------------------------------------------------------
// Signal-level pipeline

/// Per-element, per-pulse complex sample windows. Sample u of pulse b is taken
/// at time b * T1 + window_start + u * T2, b = -(B-1)/2 .. (B-1)/2.
struct ReceivedStreams {
  int elements = 1;
  int pulses = 1;
  int samples = 0;
  double window_start = 0.0;
  double sample_period = 12.5e-9;
  double pri = 1e-3;
  std::vector<Complex> data;

  Complex& at(int l, int b, int u) {
    return data[(static_cast<std::size_t>(l) * pulses + b) * samples + u];
  }
  Complex at(int l, int b, int u) const {
    return data[(static_cast<std::size_t>(l) * pulses + b) * samples + u];
  }
  double sample_time(int b, int u) const {
    return (b - (pulses - 1) / 2) * pri + window_start + u * sample_period;
  }
};

struct SynthesisOptions {
  /// Complex noise variance per sample, E|e|^2.
  double noise_power = 0.0;
  bool random_phase = true;
  /// Clutter-only paths keep one phase per path across scans.
  bool static_clutter_phase = true;
};

/// Sample window that covers every delay on the grid for waveform w.
ReceivedStreams make_streams(const ChirpWaveform& w, const Receiver& rx,
                             const DelayDopplerGrid& grid, double sample_period);

/// Adds the given paths (delayed, Doppler-shifted, array-steered replicas with
/// optional uniform random phase) and white complex Gaussian noise.
void synthesize_paths(ReceivedStreams& streams, const std::vector<PropagationPath>& paths,
                      const ChirpWaveform& w, const Receiver& rx, double wavelength,
                      const SynthesisOptions& opts, std::mt19937_64& rng);

/// Received streams at one receiver: all transmitters, target paths for every
/// target plus static clutter paths.
ReceivedStreams synthesize_received(const ScenarioMap& map, const std::vector<StateVector>& targets,
                                    const ChirpWaveform& w, int receiver,
                                    const DelayDopplerGrid& grid, const SynthesisOptions& opts,
                                    std::mt19937_64& rng);

/// |sum_u sum_b sum_l y_l(t) s*(t - tau) exp(+j 2 pi nu t)| on the grid.
DelayDopplerImage matched_filter(const ReceivedStreams& streams, const ChirpWaveform& w,
                                 const DelayDopplerGrid& grid);

/// Output noise power of the matched filter for per-sample noise power
/// `noise_power` (template energy sum |s(u T2)|^2 times elements).
double matched_filter_noise_power(const ChirpWaveform& w, int elements, double noise_power,
                                  double sample_period);

/// Threshold k * sigma_out with k chosen so that pure noise exceeds it
/// anywhere in the image with probability at most p_false_alarm.
double detection_threshold(double output_noise_power, std::size_t cells,
                           double p_false_alarm = 0.01);

DelayDopplerImage background_average(const std::vector<DelayDopplerImage>& images);
/// max(image - background, 0) cellwise.
DelayDopplerImage subtract_background(const DelayDopplerImage& image,
                                      const DelayDopplerImage& background);

struct Peak {
  int delay_index = 0;
  int doppler_index = 0;
  double delay = 0.0;
  double doppler = 0.0;
  double magnitude = 0.0;
};

struct PeakWindow {
  int delay_half = 3;
  int doppler_half = 16;
};

/// Greedy extraction: take the global maximum above threshold, excise its
/// window, repeat.
std::vector<Peak> detect_peaks(const DelayDopplerImage& image, double threshold,
                               const PeakWindow& window);

struct PeakFit {
  double delay = 0.0;
  double doppler = 0.0;
  double amplitude = 0.0;
  /// Curvature matrix Q of A ~ A0 (1 - 0.5 d^T Q d), d = (tau, nu) offsets.
  Mat2 curvature = Mat2::Zero();
  /// Delay/Doppler error covariance (s^2, Hz^2).
  Mat2 covariance = Mat2::Zero();
  bool fallback = false;
};

/// Least-squares quadratic fit over a (2h+1)^2 window around the peak.
/// `output_noise_power` scales the covariance by the fitted peak SNR. A saddle
/// or convex fit falls back to the grid cell with the waveform covariance.
PeakFit fit_peak(const DelayDopplerImage& image, const Peak& peak, double output_noise_power,
                 const ChirpWaveform& w, int half_window = 2);

/// (tau, nu) -> (r = c tau, rdot = lambda nu); covariance through diag(c, lambda).
Measurement to_measurement(const PeakFit& fit, double wavelength, int receiver, int scan);
Scan to_measurements(const std::vector<PeakFit>& fits, double wavelength, int receiver,
                     int scan);

struct SignalConfig {
  DelayDopplerGrid grid;
  PeakWindow window;
  int fit_half_window = 2;
  double p_false_alarm = 0.01;
  SynthesisOptions synthesis;
};

/// Full pipeline for one receiver and one scan; the background image may be
/// empty (no subtraction).
Scan signal_scan(const ScenarioMap& map, const std::vector<StateVector>& targets,
                 const ChirpWaveform& w, int receiver, int scan, const SignalConfig& cfg,
                 const std::optional<DelayDopplerImage>& background, std::mt19937_64& rng);

// ---------------------------------------------------------------------------
// Measurement-level simulation

struct FastScanConfig {
  double detection_probability = 0.9;
  double clutter_density = 2.5e-4;
  /// Per-sample input SNR of a unit-attenuation return.
  double snr_per_sample = 0.2;
  /// Floor on the SNR parameter of any emitted measurement.
  double min_eta = 1.0;
  /// Multipath returns weaker than this power ratio to the direct path are not detected.
  double min_relative_power = 0.1;
  double range_min = 0.0;
  double range_max = 600.0;
  double rdot_max = 37.5;
  /// Multiplies the measurement noise standard deviation (0 = exact truth).
  double noise_scale = 1.0;
  /// Restrict to the direct path only.
  bool direct_only = false;

  double region_area() const { return (range_max - range_min) * 2.0 * rdot_max; }
};

/// SNR parameter eta of a return with attenuation alpha at `receiver`.
double path_snr(const ChirpWaveform& w, const ScenarioMap& map, int receiver,
                double snr_per_sample, double attenuation);

/// Each detectable target path yields its true (r, rdot) plus noise drawn
/// from, and labelled with, the waveform covariance at that path's SNR.
/// False alarms carry the covariance of a direct return at their range.
Scan fast_scan(const ScenarioMap& map, const std::vector<StateVector>& targets,
               const ChirpWaveform& w, int receiver, int scan, const FastScanConfig& cfg,
               std::mt19937_64& rng);

/// Counter-based seed for (run, scan, receiver) streams.
std::uint64_t stream_seed(std::uint64_t base, std::uint64_t run, std::uint64_t scan,
                          std::uint64_t receiver);

}  // namespace urbantrack
