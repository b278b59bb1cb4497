#pragma once

#include <complex>
#include <span>
#include <string>
#include <vector>

#include "urbantrack/types.hpp"

namespace urbantrack {

using Complex = std::complex<double>;

enum class Sweep { kUp, kDown };

std::string to_string(Sweep s);

/// Gaussian-windowed LFM pulse train, characterised by pulse duration kappa
/// and chirp rate gamma.
struct ChirpWaveform {
  std::string name;
  double kappa = 0.5e-6;      // s
  double gamma = 0.0;         // rad/s^2
  Sweep sweep = Sweep::kUp;
  int pulses = 5;             // B, odd
  double pri = 10e-3;         // T1, s
  double wavelength = kSpeedOfLight / 4.0e9;
  double bandwidth = 40e6;    // Hz

  /// +1 for an up-sweep, -1 for a down-sweep.
  double sweep_sign() const { return sweep == Sweep::kUp ? 1.0 : -1.0; }
  /// Peak magnitude of a single pulse, (pi kappa^2 B^2)^(-1/4).
  double peak_amplitude() const;
  void validate() const;
};

class WaveformLibrary {
 public:
  WaveformLibrary() = default;
  explicit WaveformLibrary(std::vector<ChirpWaveform> waveforms);

  std::size_t size() const { return waveforms_.size(); }
  const ChirpWaveform& operator[](std::size_t i) const { return waveforms_.at(i); }
  const std::vector<ChirpWaveform>& waveforms() const { return waveforms_; }

 private:
  std::vector<ChirpWaveform> waveforms_;
};

/// gamma such that the chirp sweeps `bandwidth` across an effective pulse
/// width of 3 kappa.
double chirp_rate_for_bandwidth(double kappa, double bandwidth);

/// Library of {kappas} x {up, down}, in that order.
WaveformLibrary make_library(const std::vector<double>& kappas, int pulses, double pri,
                             double wavelength, double bandwidth);

/// Complex baseband samples of the transmitted pulse train at the given times.
std::vector<Complex> sample_pulse_train(const ChirpWaveform& w, std::span<const double> t);
Complex pulse_train_value(const ChirpWaveform& w, double t);

/// Single-pulse delay/angular-Doppler second-moment matrix
/// [[omega_rms^2, x], [x, t_rms^2]] with x = +/- gamma kappa^2.
Mat2 pulse_moment_matrix(const ChirpWaveform& w);
/// Same for the coherent B-pulse train (time spread includes the pulse positions).
Mat2 train_moment_matrix(const ChirpWaveform& w);

/// Range / range-rate error covariance from the single-pulse Fisher
/// information at SNR eta:
///   (1/eta) [[c^2 k^2/2, -/+ 2 pi c^2 g k^2/lambda],
///            [-/+ 2 pi c^2 g k^2/lambda, (2 pi c/lambda)^2 (1/(2k^2) + 2 g^2 k^2)]]
/// Negative off-diagonal for an up-sweep.
Mat2 measurement_covariance(const ChirpWaveform& w, double eta);

/// Cramer-Rao covariance of (bistatic range, range-rate) for the coherent
/// pulse train, R = U (4 eta M_train)^-1 U^T with U = diag(c, lambda / 2 pi).
/// This is the covariance the tracker and the fast simulator use.
Mat2 train_measurement_covariance(const ChirpWaveform& w, double eta);

/// Matched-filter SNR parameter eta for a per-sample input SNR (at the pulse
/// peak) on an L-element array sampled every `sample_period` seconds.
double effective_snr(const ChirpWaveform& w, double snr_per_sample, int num_elements,
                     double sample_period);

/// Correlation coefficient of a 2x2 covariance.
inline double correlation(const Mat2& r) { return r(0, 1) / std::sqrt(r(0, 0) * r(1, 1)); }

}  // namespace urbantrack
