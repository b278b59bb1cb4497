#include <cmath>
#include <random>

#include "doctest.h"
#include "urbantrack/filtering.hpp"

using namespace urbantrack;

namespace {

Mat6 random_spd(std::mt19937_64& rng, double floor = 0.1) {
  std::normal_distribution<double> n(0.0, 1.0);
  Mat6 a;
  for (int i = 0; i < 6; ++i) {
    for (int j = 0; j < 6; ++j) a(i, j) = n(rng);
  }
  return a * a.transpose() + floor * Mat6::Identity();
}

StateVector random_state(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 5.0);
  return make_state(40.0 + n(rng), n(rng), 70.0 + n(rng), n(rng), 0.1 * n(rng), 0.1 * n(rng));
}

double rel_err(const Mat6& a, const Mat6& b) { return (a - b).norm() / b.norm(); }

// Linear observation of position and velocity along x, expressed as an
// unscented-prediction triple that is exact for a linear model.
MeasurementPrediction linear_prediction(const GaussianState& g, const Mat26& H) {
  MeasurementPrediction mp;
  mp.z = H * g.mean;
  mp.S0 = H * g.P * H.transpose();
  mp.cross = g.P * H.transpose();
  return mp;
}

}  // namespace

TEST_CASE("sigma weights") {
  const SigmaWeights w = sigma_weights(UnscentedConfig{}, 6);
  REQUIRE(w.mean.size() == 13);
  double sm = 0.0;
  double sc = 0.0;
  for (std::size_t i = 0; i < 13; ++i) {
    sm += w.mean[i];
    sc += w.cov[i];
  }
  CHECK(sm == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(w.mean[0] == doctest::Approx(-99.0));
  CHECK(w.cov[0] == doctest::Approx(-96.01));
  CHECK(sc == doctest::Approx(4.0 - 0.01));
}

TEST_CASE("UKF prediction equals the Kalman prediction for linear models") {
  std::mt19937_64 rng(4);
  const ModelBank bank;
  for (ModelId id : {ModelId::kNCV, ModelId::kNCA, ModelId::kCTLeft, ModelId::kCTRight}) {
    const MotionModel m = bank.model(id);
    for (int trial = 0; trial < 5; ++trial) {
      const GaussianState g{random_state(rng), random_spd(rng)};
      const GaussianState out = ukf_predict(g, m);
      const StateVector mean = m.F * g.mean;
      const Mat6 P = m.F * g.P * m.F.transpose() + m.Q;
      CHECK((out.mean - mean).norm() / mean.norm() < 1e-9);
      CHECK(rel_err(out.P, P) < 1e-9);
    }
  }

  const MotionModel still = build_model(MotionKind::kNCV, 0.25, 0.0, 0.0);
  const StateVector x = make_state(3.0, 0.0, -4.0, 0.0);
  CHECK((ukf_predict({x, Mat6::Identity()}, still).mean - x).norm() < 1e-12);

  const MotionModel unit = build_model(MotionKind::kNCV, 1.0, 0.25, 0.25);
  CHECK(ukf_predict({x, Mat6::Identity()}, unit).P(0, 0) == doctest::Approx(2.0 + unit.Q(0, 0)).epsilon(1e-12));
}

TEST_CASE("bistatic measurement function") {
  const Point2 tx(0.0, 0.0);
  const Point2 rx(100.0, 0.0);
  CHECK(measurement_function(make_state(50.0, 0.0, 0.0, 3.0), tx, rx)(0) == doctest::Approx(100.0));
  CHECK(std::abs(measurement_function(make_state(50.0, 0.0, 0.0, 3.0), tx, rx)(1)) < 1e-15);

  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-200.0, 200.0);
  std::uniform_real_distribution<double> v(-15.0, 15.0);
  for (int trial = 0; trial < 50; ++trial) {
    const Point2 t(u(rng), u(rng));
    const Point2 r(u(rng), u(rng));
    const StateVector s = make_state(u(rng), v(rng), u(rng), v(rng));
    const double delta = 1e-6;
    StateVector moved = s;
    moved(0) += s(1) * delta;
    moved(2) += s(3) * delta;
    const double fd = (measurement_function(moved, t, r)(0) - measurement_function(s, t, r)(0)) / delta;
    const double rdot = measurement_function(s, t, r)(1);
    CHECK(std::abs(fd - rdot) <= 1e-4 * std::max(std::abs(rdot), 1.0));

    const Mat26 H = measurement_jacobian(s, t, r);
    for (int k = 0; k < 6; ++k) {
      const double h = 1e-6;
      StateVector a = s;
      StateVector b = s;
      a(k) += h;
      b(k) -= h;
      const MeasVector col = (measurement_function(a, t, r) - measurement_function(b, t, r)) / (2.0 * h);
      CHECK((col - H.col(k)).norm() < 1e-6 * (1.0 + col.norm()));
    }
  }
}

TEST_CASE("PDA update") {
  std::mt19937_64 rng(12);
  Mat26 H = Mat26::Zero();
  H(0, 0) = 1.0;
  H(1, 1) = 1.0;
  const GaussianState g{random_state(rng), random_spd(rng)};
  const MeasurementPrediction mp = linear_prediction(g, H);
  Mat2 R;
  R << 0.3, 0.05, 0.05, 0.2;
  const MeasVector z = mp.z + MeasVector(0.7, -0.4);

  SUBCASE("single certain measurement is the Kalman update") {
    const GaussianState out = ukf_update(g, mp, {z}, {R}, 0.0, {1.0});
    const Mat2 S = H * g.P * H.transpose() + R;
    const Mat62 K = g.P * H.transpose() * S.inverse();
    CHECK((out.mean - (g.mean + K * (z - H * g.mean))).norm() < 1e-9);
    CHECK(rel_err(out.P, (Mat6::Identity() - K * H) * g.P) < 1e-9);
  }
  SUBCASE("no association leaves the prediction") {
    const GaussianState out = ukf_update(g, mp, {z}, {R}, 1.0, {0.0});
    CHECK((out.mean - g.mean).norm() == 0.0);
    CHECK(rel_err(out.P, g.P) < 1e-15);
  }
  SUBCASE("symmetric pair keeps the mean and adds spread") {
    const MeasVector d(0.5, 0.25);
    const GaussianState out = ukf_update(g, mp, {mp.z + d, mp.z - d}, {R, R}, 0.2, {0.4, 0.4});
    CHECK((out.mean - g.mean).norm() < 1e-9);
    const Mat2 S = H * g.P * H.transpose() + R;
    const Mat62 K = g.P * H.transpose() * S.inverse();
    const Mat6 expected = 0.2 * g.P + 0.8 * (g.P - K * S * K.transpose()) +
                          0.8 * (K * d) * (K * d).transpose();
    CHECK(rel_err(out.P, expected) < 1e-9);
  }
  CHECK_THROWS(ukf_update(g, mp, {z}, {R}, 0.5, {0.4}));
}

TEST_CASE("IMM mixing") {
  std::mt19937_64 rng(6);
  const std::vector<ModelId> ids{ModelId::kNCA, ModelId::kCTLeft};
  std::vector<ModelFilterState> states{{ids[0], random_state(rng), random_spd(rng), 0.3},
                                       {ids[1], random_state(rng), random_spd(rng), 0.7}};

  const MixResult identity = imm_mix(states, ModelSet{ids, Eigen::Matrix4d::Identity()});
  for (std::size_t j = 0; j < 2; ++j) {
    CHECK((identity.mixed[j].mean - states[j].mean).norm() < 1e-12);
    CHECK(rel_err(identity.mixed[j].P, states[j].P) < 1e-12);
    CHECK(identity.mixed[j].mu == doctest::Approx(states[j].mu));
  }

  std::vector<ModelFilterState> same = states;
  same[1].mean = same[0].mean;
  same[1].P = same[0].P;
  const MixResult m_same = imm_mix(same, ModelSet{ids, default_transition_matrix()});
  for (const auto& s : m_same.mixed) {
    CHECK((s.mean - same[0].mean).norm() < 1e-12);
    CHECK(rel_err(s.P, same[0].P) < 1e-12);
  }

  // Hand-computed two-component moment match.
  Eigen::Matrix4d pi = Eigen::Matrix4d::Zero();
  pi(1, 1) = 0.8;
  pi(1, 2) = 0.2;
  pi(2, 1) = 0.1;
  pi(2, 2) = 0.9;
  const MixResult mix = imm_mix(states, ModelSet{ids, pi});
  const double c1 = 0.8 * 0.3 + 0.1 * 0.7;
  const double c2 = 0.2 * 0.3 + 0.9 * 0.7;
  CHECK(mix.mixed[0].mu == doctest::Approx(c1));
  CHECK(mix.mixed[1].mu == doctest::Approx(c2));
  const double w11 = 0.8 * 0.3 / c1;
  const double w21 = 0.1 * 0.7 / c1;
  const StateVector m1 = w11 * states[0].mean + w21 * states[1].mean;
  const StateVector d1 = states[0].mean - m1;
  const StateVector d2 = states[1].mean - m1;
  const Mat6 P1 = w11 * (states[0].P + d1 * d1.transpose()) + w21 * (states[1].P + d2 * d2.transpose());
  CHECK((mix.mixed[0].mean - m1).norm() < 1e-9 * m1.norm());
  CHECK(rel_err(mix.mixed[0].P, P1) < 1e-9);
}

TEST_CASE("transition restricted to the active set") {
  const ModelSet set{{ModelId::kNCV, ModelId::kNCA}, default_transition_matrix()};
  CHECK(set.transition(ModelId::kNCA, ModelId::kNCV) + set.transition(ModelId::kNCA, ModelId::kNCA) ==
        doctest::Approx(1.0));
  CHECK(set.transition(ModelId::kNCA, ModelId::kNCV) == doctest::Approx(0.1 / 0.8));
  const Eigen::Matrix4d pi = default_transition_matrix();
  for (int i = 0; i < 4; ++i) CHECK(pi.row(i).sum() == doctest::Approx(1.0));
}

TEST_CASE("model-set adaptation") {
  ModelSetPolicy window;
  window.mode = ModelSetPolicy::Mode::kScanWindow;
  CHECK(adapt_model_set({0.0, 0.0}, {}, 10, window) == road_models());
  CHECK(adapt_model_set({0.0, 0.0}, {}, 50, window) == turn_models());
  CHECK(turn_models() == std::vector<ModelId>{ModelId::kNCA, ModelId::kCTLeft, ModelId::kCTRight});

  const std::vector<Rect> zones{{{0.0, 0.0}, {10.0, 10.0}}};
  CHECK(adapt_model_set({5.0, 5.0}, zones, 0, ModelSetPolicy{}) == turn_models());
  CHECK(adapt_model_set({15.0, 5.0}, zones, 50, ModelSetPolicy{}) == road_models());

  std::mt19937_64 rng(1);
  const GaussianState combined{random_state(rng), random_spd(rng)};
  std::vector<ModelFilterState> road{{ModelId::kNCV, random_state(rng), random_spd(rng), 0.6},
                                     {ModelId::kNCA, random_state(rng), random_spd(rng), 0.4}};
  const auto turned = apply_model_set(road, turn_models(), combined);
  REQUIRE(turned.size() == 3);
  double total = 0.0;
  for (const auto& s : turned) total += s.mu;
  CHECK(total == doctest::Approx(1.0));
  CHECK(turned[0].mu == doctest::Approx(0.4));
  CHECK(turned[1].mu == doctest::Approx(0.3));
  CHECK((turned[0].mean - road[1].mean).norm() == 0.0);
  CHECK((turned[2].mean - combined.mean).norm() == 0.0);
}

TEST_CASE("combined output") {
  std::mt19937_64 rng(3);
  const ModelFilterState a{ModelId::kNCV, random_state(rng), random_spd(rng), 1.0};
  const GaussianState single = combine_output({a});
  CHECK((single.mean - a.mean).norm() == 0.0);
  CHECK(rel_err(single.P, a.P) < 1e-15);

  StateVector d = StateVector::Zero();
  d(0) = 2.0;
  d(3) = -1.0;
  const ModelFilterState p{ModelId::kNCV, a.mean + d, a.P, 0.5};
  const ModelFilterState q{ModelId::kNCA, a.mean - d, a.P, 0.5};
  const GaussianState mid = combine_output({p, q});
  CHECK((mid.mean - a.mean).norm() < 1e-12);
  CHECK(rel_err(mid.P, a.P + d * d.transpose()) < 1e-12);

  // Three components against sampled mixture moments would be noisy; use the
  // law of total covariance written element by element.
  std::vector<ModelFilterState> three{{ModelId::kNCA, random_state(rng), random_spd(rng), 0.2},
                                      {ModelId::kCTLeft, random_state(rng), random_spd(rng), 0.5},
                                      {ModelId::kCTRight, random_state(rng), random_spd(rng), 0.3}};
  const GaussianState g = combine_output(three);
  for (int r = 0; r < 6; ++r) {
    double m = 0.0;
    for (const auto& s : three) m += s.mu * s.mean(r);
    CHECK(g.mean(r) == doctest::Approx(m).epsilon(1e-12));
    for (int c = 0; c < 6; ++c) {
      double second = 0.0;
      double mc = 0.0;
      for (const auto& s : three) {
        second += s.mu * (s.P(r, c) + s.mean(r) * s.mean(c));
        mc += s.mu * s.mean(c);
      }
      CHECK(g.P(r, c) == doctest::Approx(second - m * mc).epsilon(1e-9).scale(1.0));
    }
  }
}

TEST_CASE("regularisation and NEES") {
  Mat6 P = Mat6::Identity();
  P(4, 4) = 0.0;
  P(5, 5) = 0.0;
  const Mat6 r = regularize(P);
  CHECK(r(4, 4) == doctest::Approx(1e-6));
  const GaussianState g{StateVector::Zero(), Mat6::Identity() * 4.0};
  StateVector x = StateVector::Zero();
  x(0) = 2.0;
  CHECK(nees(x, g) == doctest::Approx(1.0));
  Mat2 S = Mat2::Zero();
  CHECK(regularize_innovation(S + Mat2::Identity() * 1e-30).llt().info() == Eigen::Success);
}
