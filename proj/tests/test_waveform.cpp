#include <cmath>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "urbantrack/waveform.hpp"

using namespace urbantrack;

namespace {

ChirpWaveform chirp(double kappa, Sweep sweep, int pulses = 11) {
  ChirpWaveform w;
  w.kappa = kappa;
  w.gamma = chirp_rate_for_bandwidth(kappa, 40e6);
  w.sweep = sweep;
  w.pulses = pulses;
  w.pri = 1e-3;
  return w;
}

}  // namespace

TEST_CASE("pulse train amplitude and energy") {
  const ChirpWaveform w = chirp(0.5e-6, Sweep::kUp);
  for (int b = -5; b <= 5; ++b) {
    CHECK(std::abs(pulse_train_value(w, b * w.pri)) == doctest::Approx(w.peak_amplitude()).epsilon(1e-12));
  }
  CHECK(std::abs(pulse_train_value(w, 6 * w.pri)) == 0.0);

  ChirpWaveform single = chirp(0.5e-6, Sweep::kUp, 1);
  const int n = 20000;
  const double half = 6.0 * single.kappa;
  std::vector<double> t(n + 1);
  for (int i = 0; i <= n; ++i) t[i] = -half + 2.0 * half * i / n;
  const auto s = sample_pulse_train(single, t);
  double energy = 0.0;
  for (int i = 0; i < n; ++i) energy += 0.5 * (std::norm(s[i]) + std::norm(s[i + 1])) * (t[i + 1] - t[i]);
  CHECK(energy == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("up and down sweeps are conjugate mirrors") {
  const ChirpWaveform up = chirp(1.375e-6, Sweep::kUp);
  const ChirpWaveform down = chirp(1.375e-6, Sweep::kDown);
  for (double t : {-2e-6, -0.3e-6, 0.0, 0.7e-6, 1e-3 + 1.1e-6}) {
    const Complex a = pulse_train_value(up, t);
    const Complex b = pulse_train_value(down, t);
    CHECK(std::abs(a) == doctest::Approx(std::abs(b)).epsilon(1e-12));
    CHECK(std::abs(a - std::conj(b)) < 1e-9 * std::abs(a) + 1e-300);
  }
}

TEST_CASE("chirp rate from bandwidth") {
  CHECK(chirp_rate_for_bandwidth(0.5e-6, 40e6) == doctest::Approx(8.378e13).epsilon(1e-4));
  CHECK(chirp_rate_for_bandwidth(0.5e-6, 0.0) == 0.0);
  CHECK(chirp_rate_for_bandwidth(1e-6, 40e6) == doctest::Approx(0.5 * chirp_rate_for_bandwidth(0.5e-6, 40e6)));

  // Instantaneous frequency span over the 3-kappa support equals the bandwidth.
  const ChirpWaveform w = chirp(0.5e-6, Sweep::kUp, 1);
  auto inst_freq = [&](double t) {
    const double h = 1e-12;
    const double dphi = std::arg(pulse_train_value(w, t + h) / pulse_train_value(w, t - h));
    return dphi / (2.0 * h) / (2.0 * kPi);
  };
  CHECK(inst_freq(1.5 * w.kappa) - inst_freq(-1.5 * w.kappa) == doctest::Approx(40e6).epsilon(1e-4));
}

TEST_CASE("measurement covariance structure") {
  ChirpWaveform flat = chirp(0.5e-6, Sweep::kUp);
  flat.gamma = 0.0;
  const Mat2 r0 = measurement_covariance(flat, 10.0);
  CHECK(r0(0, 1) == 0.0);
  CHECK(r0(0, 0) == doctest::Approx(kSpeedOfLight * kSpeedOfLight * 0.25e-12 / 20.0));

  for (double kappa : {0.5e-6, 1.375e-6}) {
    const Mat2 up = measurement_covariance(chirp(kappa, Sweep::kUp), 50.0);
    const Mat2 down = measurement_covariance(chirp(kappa, Sweep::kDown), 50.0);
    CHECK(correlation(up) < -0.5);
    CHECK(correlation(down) > 0.5);
    CHECK((up - up.transpose()).norm() == 0.0);
    CHECK(up.determinant() > 0.0);
    const double lam = flat.wavelength;
    const double k = 2.0 * kPi * kSpeedOfLight * kSpeedOfLight / lam;
    CHECK(up.determinant() == doctest::Approx(k * k / (4.0 * 2500.0)).epsilon(1e-6));
  }
  CHECK_THROWS_AS(measurement_covariance(flat, 0.0), std::invalid_argument);
}

TEST_CASE("measurement covariance matches the ambiguity-function curvature") {
  const auto lib = make_library({0.5e-6, 1.375e-6}, 11, 1e-3, kSpeedOfLight / 4e9, 40e6);
  for (const auto& w : lib.waveforms()) {
    const Mat2 got = measurement_covariance(w, 30.0);
    const Mat2 ref = oracle::ambiguity_covariance(w, 30.0);
    for (int i = 0; i < 2; ++i) {
      for (int j = 0; j < 2; ++j) CHECK(got(i, j) == doctest::Approx(ref(i, j)).epsilon(0.05));
    }
  }
}

TEST_CASE("train covariance tightens range-rate with more pulses") {
  const Mat2 few = train_measurement_covariance(chirp(0.5e-6, Sweep::kUp, 3), 100.0);
  const Mat2 many = train_measurement_covariance(chirp(0.5e-6, Sweep::kUp, 11), 100.0);
  CHECK(many(1, 1) < few(1, 1));
  CHECK(correlation(train_measurement_covariance(chirp(0.5e-6, Sweep::kUp), 100.0)) < 0.0);
  CHECK(correlation(train_measurement_covariance(chirp(0.5e-6, Sweep::kDown), 100.0)) > 0.0);
}

TEST_CASE("library order and validation") {
  const auto lib = make_library({0.5e-6, 1.375e-6}, 11, 1e-3, 0.075, 40e6);
  REQUIRE(lib.size() == 4);
  CHECK(lib[0].sweep == Sweep::kUp);
  CHECK(lib[1].sweep == Sweep::kDown);
  CHECK(lib[2].kappa == 1.375e-6);
  CHECK_THROWS(make_library({0.5e-6, 0.5e-6}, 11, 1e-3, 0.075, 40e6));
  CHECK_THROWS(make_library({0.5e-6}, 4, 1e-3, 0.075, 40e6));
}
