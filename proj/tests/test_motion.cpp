#include <cmath>

#include "doctest.h"
#include "urbantrack/motion.hpp"
#include "urbantrack/scenario.hpp"

using namespace urbantrack;

TEST_CASE("transition matrices") {
  const auto ncv = build_model(MotionKind::kNCV, 0.25, 0.25, 0.25);
  CHECK(ncv.F(0, 1) == 0.25);
  CHECK(ncv.F(4, 4) == 0.0);

  const double w = 0.5;
  const auto ct = build_model(MotionKind::kCT, kPi / (2.0 * w), 0.25, 0.25, w);
  CHECK(ct.F(0, 1) == doctest::Approx(1.0 / w));
  CHECK(std::abs(ct.F(1, 1)) < 1e-15);
  CHECK(ct.F(1, 3) == doctest::Approx(-1.0));

  const auto nca = build_model(MotionKind::kNCA, 2.0, 1.0, 1.0);
  CHECK(nca.F(0, 4) == 2.0);
  CHECK(nca.G(0, 0) == 2.0);

  CHECK_THROWS_AS(build_model(MotionKind::kCT, 0.25, 0.25, 0.25, 0.0), std::invalid_argument);
}

TEST_CASE("process noise scaling and symmetry") {
  const auto a = build_model(MotionKind::kNCA, 0.25, 1.0, 1.0);
  const auto b = build_model(MotionKind::kNCA, 0.25, 2.0, 1.0);
  for (int i : {0, 1, 4}) {
    for (int j : {0, 1, 4}) CHECK(b.Q(i, j) == doctest::Approx(2.0 * a.Q(i, j)));
  }
  for (int i : {2, 3, 5}) {
    for (int j : {2, 3, 5}) CHECK(b.Q(i, j) == a.Q(i, j));
  }
  CHECK((a.Q - a.Q.transpose()).norm() == 0.0);
  Eigen::SelfAdjointEigenSolver<Mat6> es(a.Q);
  CHECK(es.eigenvalues().minCoeff() > -1e-12);
}

TEST_CASE("CT tends to NCV for small turn rates") {
  const auto ct = build_model(MotionKind::kCT, 0.25, 0.25, 0.25, 1e-6);
  const auto ncv = build_model(MotionKind::kNCV, 0.25, 0.25, 0.25);
  CHECK((ct.F - ncv.F).cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("noise-free propagation") {
  const auto ncv = build_model(MotionKind::kNCV, 1.0, 0.0, 0.0);
  const StateVector x = propagate(make_state(0.0, 10.0, 0.0, 0.0), ncv);
  CHECK((x - make_state(10.0, 10.0, 0.0, 0.0)).norm() < 1e-12);

  const auto nca = build_model(MotionKind::kNCA, 1.0, 0.0, 0.0);
  const StateVector y = propagate(make_state(0.0, 0.0, 0.0, 0.0, 1.0, 0.0), nca);
  CHECK((y - make_state(0.5, 1.0, 0.0, 0.0, 1.0, 0.0)).norm() < 1e-12);
  CHECK(propagate(y, nca)(4) == 1.0);

  const auto g = propagate(make_state(0.0, 0.0, 0.0, 0.0), ncv, Eigen::Vector2d(2.0, -2.0));
  CHECK(g(0) == doctest::Approx(1.0));
  CHECK(g(3) == doctest::Approx(-2.0));
}

TEST_CASE("CT rotates the heading by a quarter turn in 10 s") {
  const double w = kPi / 20.0;
  const auto ct = build_model(MotionKind::kCT, 0.25, 0.0, 0.0, w);
  const double heading0 = 0.3;
  StateVector x = make_state(5.0, 10.0 * std::cos(heading0), -2.0, 10.0 * std::sin(heading0));
  for (int k = 0; k < 40; ++k) {
    x = propagate(x, ct);
    CHECK(velocity_of(x).norm() == doctest::Approx(10.0).epsilon(1e-12));
  }
  // Closed form: velocity rotated by w t, position on the circle of radius v/w.
  const double h1 = heading0 + kPi / 2.0;
  CHECK(x(1) == doctest::Approx(10.0 * std::cos(h1)).epsilon(1e-9));
  CHECK(x(3) == doctest::Approx(10.0 * std::sin(h1)).epsilon(1e-9));
  const double r = 10.0 / w;
  CHECK(x(0) == doctest::Approx(5.0 + r * (std::sin(h1) - std::sin(heading0))).epsilon(1e-9));
  CHECK(x(2) == doctest::Approx(-2.0 - r * (std::cos(h1) - std::cos(heading0))).epsilon(1e-9));
}

TEST_CASE("trajectory segments") {
  using M = TrajectorySegment::Mode;
  const auto still = generate_trajectory(make_state(3.0, 0.0, 4.0, 0.0), {{2.0, M::kConstantVelocity, 0.0}}, 0.25);
  CHECK(still.size() == 9);
  for (const auto& s : still) CHECK((s - still.front()).norm() == 0.0);

  const auto decel = generate_trajectory(make_state(0.0, 10.0, 0.0, 0.0),
                                         {{5.0, M::kConstantAcceleration, -1.0}}, 0.25);
  CHECK(velocity_of(decel.back()).norm() == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(decel.back()(0) == doctest::Approx(10.0 * 5.0 - 0.5 * 25.0).epsilon(1e-12));

  CHECK(segment_at(default_segments(), 0.0) == 0);
  CHECK(segment_at(default_segments(), 12.0) == 2);
  CHECK(segment_at(default_segments(), 40.0) == -1);
}

TEST_CASE("shipped trajectory endpoint") {
  const auto traj = generate_trajectory(make_state(1950.0, 10.0, 1500.0, 0.0), default_segments(), 0.25);
  CHECK(traj.size() == 141);
  CHECK((position_of(traj.back()) - Point2(2068.8, 1667.8)).norm() < 2.0);
  CHECK(velocity_of(traj.back()).norm() == doctest::Approx(10.0).epsilon(1e-9));
}
