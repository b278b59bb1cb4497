#pragma once

#include <optional>
#include <string>
#include <vector>

#include "urbantrack/types.hpp"

namespace urbantrack {

enum class MotionKind { kNCV, kCT, kNCA };

std::string to_string(MotionKind k);

/// Discrete-time linear-Gaussian motion model x' = F x + G w over the
/// six-dimensional state.
struct MotionModel {
  MotionKind kind = MotionKind::kNCV;
  double turn_rate = 0.0;  // rad/s, CT only
  double period = 0.25;
  double noise_var_x = 0.25;
  double noise_var_y = 0.25;
  Mat6 F = Mat6::Identity();
  Mat62 G = Mat62::Zero();
  Mat6 Q = Mat6::Zero();
};

/// Builds F, G and Q = diag(sx^2 Q', sy^2 Q') with Q' = G G^T. For CT the x
/// and y variances are expected to be equal (single sigma_w).
MotionModel build_model(MotionKind kind, double period, double noise_var_x, double noise_var_y,
                        double turn_rate = 0.0);

StateVector propagate(const StateVector& state, const MotionModel& model,
                      const std::optional<Eigen::Vector2d>& noise = std::nullopt);

struct TrajectorySegment {
  enum class Mode { kConstantVelocity, kConstantAcceleration, kTurn };
  double duration = 0.0;
  Mode mode = Mode::kConstantVelocity;
  /// Tangential acceleration (m/s^2) or turn rate (rad/s), per mode.
  double value = 0.0;
};

/// Noise-free piecewise trajectory sampled every `period` seconds, starting
/// with the initial state. Acceleration is applied along the current heading.
std::vector<StateVector> generate_trajectory(const StateVector& start,
                                             const std::vector<TrajectorySegment>& segments,
                                             double period);

/// Index of the segment active at time t (seconds from start), or -1 past the end.
int segment_at(const std::vector<TrajectorySegment>& segments, double t);

}  // namespace urbantrack
