#include <array>
#include <cmath>

#include "doctest.h"
#include "urbantrack/scenario.hpp"
#include "urbantrack/scheduler.hpp"

using namespace urbantrack;

namespace {

WaveformLibrary two_waveforms() { return make_library({0.5e-6}, 11, 1e-3, kSpeedOfLight / 4e9, 40e6); }

ScenarioMap small_map() {
  ScenarioMap map;
  map.sensors.transmitters = {{0.0, 0.0}};
  map.sensors.receivers = {Receiver{{40.0, 0.0}, 3, 0.0375, 0.0}, Receiver{{0.0, 30.0}, 3, 0.0375, 0.0}};
  map.bounds = Rect{{-300.0, -300.0}, {300.0, 300.0}};
  return map;
}

Track confirmed_track(const StateVector& mean, const Mat6& P) {
  Track t;
  t.status = TrackStatus::kConfirmed;
  t.models = {{ModelId::kNCV, mean, P, 1.0}};
  t.combined = {mean, P};
  return t;
}

// Sequential unscented updates written out with plain Cholesky sigma points.
double oracle_cost(const StateVector& mean0, const Mat6& P0, const ChirpWaveform& w,
                   const ScenarioMap& map, const SchedulerConfig& cfg) {
  const int n = 6;
  const double a2 = cfg.ukf.alpha * cfg.ukf.alpha;
  const double lam = a2 * (n + cfg.ukf.kappa) - n;
  const double wm0 = lam / (n + lam);
  const double wc0 = wm0 + 1.0 - a2 + cfg.ukf.beta;
  const double wi = 0.5 / (n + lam);

  StateVector m = mean0;
  Mat6 P = P0;
  const Point2 pos = position_of(m);
  for (std::size_t r = 0; r < map.sensors.receivers.size(); ++r) {
    const Point2 rx = map.sensors.receivers[r].position;
    const Point2 tx = map.sensors.transmitters[0];
    const double eta = std::max(cfg.min_eta, path_snr(w, map, static_cast<int>(r), cfg.snr_per_sample,
                                                      direct_attenuation(tx, pos, rx)));
    const Mat2 R = train_measurement_covariance(w, eta);

    const Mat6 L = Eigen::LLT<Mat6>(P).matrixL();
    std::array<StateVector, 13> X;
    std::array<MeasVector, 13> Z;
    X[0] = m;
    for (int i = 0; i < n; ++i) {
      X[1 + i] = m + std::sqrt(n + lam) * L.col(i);
      X[1 + n + i] = m - std::sqrt(n + lam) * L.col(i);
    }
    MeasVector zbar = MeasVector::Zero();
    StateVector xbar = StateVector::Zero();
    for (int i = 0; i < 13; ++i) {
      const StateVector& d = X[i];
      const Point2 p(d(0), d(2));
      const Vec2 v(d(1), d(3));
      const Vec2 ua = (p - tx).normalized();
      const Vec2 ub = (p - rx).normalized();
      Z[i] = MeasVector((p - tx).norm() + (p - rx).norm(), v.dot(ua + ub));
      const double wt = i == 0 ? wm0 : wi;
      zbar += wt * Z[i];
      xbar += wt * X[i];
    }
    Mat2 S = R;
    Mat62 C = Mat62::Zero();
    for (int i = 0; i < 13; ++i) {
      const double wt = i == 0 ? wc0 : wi;
      S += wt * (Z[i] - zbar) * (Z[i] - zbar).transpose();
      C += wt * (X[i] - xbar) * (Z[i] - zbar).transpose();
    }
    const Mat62 K = C * S.inverse();
    P -= K * S * K.transpose();
    P = 0.5 * (P + P.transpose());
  }
  return P.trace();
}

}  // namespace

TEST_CASE("round robin") {
  const auto lib = make_library({0.5e-6, 1.375e-6}, 11, 1e-3, 0.075, 40e6);
  CHECK(round_robin(lib, 0).waveform == 0);
  CHECK(round_robin(lib, 5).waveform == 1);
  CHECK(round_robin(lib, 5).mode == ScheduleMode::kRoundRobin);
  std::array<int, 4> count{};
  for (int k = 0; k < 140; ++k) ++count[static_cast<std::size_t>(round_robin(lib, k).waveform)];
  for (int c : count) CHECK(c == 35);
  CHECK_THROWS(round_robin(lib, -1));
}

TEST_CASE("lookahead without eligible tracks falls back to round robin") {
  const auto lib = two_waveforms();
  Track tentative = confirmed_track(make_state(20.0, 1.0, 20.0, 0.0), Mat6::Identity());
  tentative.status = TrackStatus::kTentative;
  const auto d = select_waveform({tentative}, lib, small_map(), ModelBank{}, SchedulerConfig{}, 3);
  CHECK(d.fallback);
  CHECK(d.waveform == 1);
  CHECK(d.costs.empty());

  SchedulerConfig with_tentative;
  with_tentative.include_tentative = true;
  const auto e = select_waveform({tentative}, lib, small_map(), ModelBank{}, with_tentative, 3);
  CHECK(!e.fallback);
  CHECK(e.costs.size() == 2);
}

TEST_CASE("lookahead cost matches an independent sequential update") {
  const ScenarioMap map = small_map();
  const auto lib = two_waveforms();
  const SchedulerConfig cfg;
  const ModelBank bank;

  Mat6 P = Mat6::Identity() * 4.0;
  P(1, 1) = P(3, 3) = 1.0;
  P(0, 1) = P(1, 0) = 0.5;
  P(4, 4) = P(5, 5) = 0.5;
  const StateVector mean = make_state(25.0, 3.0, 35.0, -2.0);
  const Track track = confirmed_track(mean, P);

  const MotionModel ncv = bank.model(ModelId::kNCV);
  const StateVector pm = ncv.F * mean;
  const Mat6 pP = ncv.F * P * ncv.F.transpose() + ncv.Q;
  const GaussianState predicted = predict_track(track, bank, cfg.ukf);
  CHECK((predicted.mean - pm).norm() < 1e-9);
  CHECK((predicted.P - pP).norm() < 1e-9 * pP.norm());

  const auto d = select_waveform({track}, lib, map, bank, cfg, 0);
  REQUIRE(d.costs.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    const double want = oracle_cost(pm, pP, lib[i], map, cfg);
    CHECK(std::abs(d.costs[i] - want) <= 1e-9 * want);
  }
  CHECK(d.waveform == (d.costs[1] < d.costs[0] ? 1 : 0));
  CHECK(d.mode == ScheduleMode::kLookahead);
}

TEST_CASE("lookahead cost shrinks the prior trace") {
  const ScenarioMap map = small_map();
  const auto lib = two_waveforms();
  const SchedulerConfig cfg;
  const StateVector mean = make_state(25.0, 3.0, 35.0, -2.0);
  Mat6 P = Mat6::Identity();
  P(4, 4) = P(5, 5) = 0.5;
  for (const auto& w : lib.waveforms()) {
    const double c = lookahead_cost({mean, P}, w, map, cfg);
    CHECK(c < P.trace());
    CHECK(c > 0.0);
  }
}
