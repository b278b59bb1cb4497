#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <numbers>

namespace urbantrack {

using Vec2 = Eigen::Vector2d;
using Point2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

/// Target state in the order [x, vx, y, vy, ax, ay].
using StateVector = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Mat62 = Eigen::Matrix<double, 6, 2>;
using Mat26 = Eigen::Matrix<double, 2, 6>;

/// Range / range-rate measurement vector.
using MeasVector = Eigen::Vector2d;

inline constexpr double kSpeedOfLight = 299792458.0;
inline constexpr double kPi = std::numbers::pi;

namespace state_index {
inline constexpr int kX = 0;
inline constexpr int kVx = 1;
inline constexpr int kY = 2;
inline constexpr int kVy = 3;
inline constexpr int kAx = 4;
inline constexpr int kAy = 5;
}  // namespace state_index

inline Point2 position_of(const StateVector& s) { return {s(0), s(2)}; }
inline Vec2 velocity_of(const StateVector& s) { return {s(1), s(3)}; }
inline Vec2 acceleration_of(const StateVector& s) { return {s(4), s(5)}; }

inline StateVector make_state(double x, double vx, double y, double vy,
                              double ax = 0.0, double ay = 0.0) {
  StateVector s;
  s << x, vx, y, vy, ax, ay;
  return s;
}

}  // namespace urbantrack
