#include "urbantrack/motion.hpp"

#include <cmath>
#include <stdexcept>

namespace urbantrack {

std::string to_string(MotionKind k) {
  switch (k) {
    case MotionKind::kNCV: return "NCV";
    case MotionKind::kCT: return "CT";
    case MotionKind::kNCA: return "NCA";
  }
  return "unknown";
}

MotionModel build_model(MotionKind kind, double period, double noise_var_x, double noise_var_y,
                        double turn_rate) {
  if (!(period > 0.0)) throw std::invalid_argument("sampling period must be positive");
  if (noise_var_x < 0.0 || noise_var_y < 0.0) {
    throw std::invalid_argument("process noise variances must be non-negative");
  }
  if (kind == MotionKind::kCT && turn_rate == 0.0) {
    throw std::invalid_argument("CT model needs a non-zero turn rate; use NCV");
  }

  const double T = period;
  MotionModel m;
  m.kind = kind;
  m.turn_rate = kind == MotionKind::kCT ? turn_rate : 0.0;
  m.period = T;
  m.noise_var_x = noise_var_x;
  m.noise_var_y = noise_var_y;
  m.F.setZero();
  m.G.setZero();

  m.G(0, 0) = 0.5 * T * T;
  m.G(1, 0) = T;
  m.G(2, 1) = 0.5 * T * T;
  m.G(3, 1) = T;

  switch (kind) {
    case MotionKind::kNCV:
      m.F(0, 0) = 1.0;
      m.F(0, 1) = T;
      m.F(1, 1) = 1.0;
      m.F(2, 2) = 1.0;
      m.F(2, 3) = T;
      m.F(3, 3) = 1.0;
      break;
    case MotionKind::kCT: {
      const double w = turn_rate;
      const double s = std::sin(w * T);
      const double c = std::cos(w * T);
      m.F(0, 0) = 1.0;
      m.F(0, 1) = s / w;
      m.F(0, 3) = -(1.0 - c) / w;
      m.F(1, 1) = c;
      m.F(1, 3) = -s;
      m.F(2, 1) = (1.0 - c) / w;
      m.F(2, 2) = 1.0;
      m.F(2, 3) = s / w;
      m.F(3, 1) = s;
      m.F(3, 3) = c;
      break;
    }
    case MotionKind::kNCA:
      m.F.setIdentity();
      m.F(0, 1) = T;
      m.F(0, 4) = 0.5 * T * T;
      m.F(1, 4) = T;
      m.F(2, 3) = T;
      m.F(2, 5) = 0.5 * T * T;
      m.F(3, 5) = T;
      m.G(4, 0) = 1.0;
      m.G(5, 1) = 1.0;
      break;
  }

  // Q' = G G^T is block-diagonal between the x-channel (x, vx, ax) and the
  // y-channel (y, vy, ay); each block is scaled by its own variance.
  const Mat6 gg = m.G * m.G.transpose();
  const int xs[3] = {0, 1, 4};
  const int ys[3] = {2, 3, 5};
  m.Q.setZero();
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b) {
      m.Q(xs[a], xs[b]) = noise_var_x * gg(xs[a], xs[b]);
      m.Q(ys[a], ys[b]) = noise_var_y * gg(ys[a], ys[b]);
    }
  }
  return m;
}

StateVector propagate(const StateVector& state, const MotionModel& model,
                      const std::optional<Eigen::Vector2d>& noise) {
  StateVector next = model.F * state;
  if (noise) next += model.G * (*noise);
  return next;
}

std::vector<StateVector> generate_trajectory(const StateVector& start,
                                             const std::vector<TrajectorySegment>& segments,
                                             double period) {
  if (segments.empty()) throw std::invalid_argument("trajectory needs at least one segment");
  if (!(period > 0.0)) throw std::invalid_argument("sampling period must be positive");
  for (const auto& s : segments) {
    if (!(s.duration > 0.0)) throw std::invalid_argument("segment duration must be positive");
  }

  std::vector<StateVector> out;
  StateVector x = start;
  x(4) = 0.0;
  x(5) = 0.0;
  out.push_back(x);

  for (const auto& seg : segments) {
    const long steps = std::lround(seg.duration / period);
    MotionModel model;
    switch (seg.mode) {
      case TrajectorySegment::Mode::kConstantVelocity:
        model = build_model(MotionKind::kNCV, period, 0.0, 0.0);
        break;
      case TrajectorySegment::Mode::kTurn:
        model = build_model(MotionKind::kCT, period, 0.0, 0.0, seg.value);
        break;
      case TrajectorySegment::Mode::kConstantAcceleration:
        model = build_model(MotionKind::kNCA, period, 0.0, 0.0);
        break;
    }
    for (long i = 0; i < steps; ++i) {
      if (seg.mode == TrajectorySegment::Mode::kConstantAcceleration) {
        const Vec2 v = velocity_of(x);
        const double speed = v.norm();
        const Vec2 heading = speed > 0.0 ? Vec2(v / speed) : Vec2::UnitX();
        x(4) = seg.value * heading.x();
        x(5) = seg.value * heading.y();
      }
      x = propagate(x, model);
      if (seg.mode != TrajectorySegment::Mode::kConstantAcceleration) {
        x(4) = 0.0;
        x(5) = 0.0;
      }
      out.push_back(x);
    }
    x(4) = 0.0;
    x(5) = 0.0;
    out.back() = x;
  }
  return out;
}

int segment_at(const std::vector<TrajectorySegment>& segments, double t) {
  double start = 0.0;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const double end = start + segments[i].duration;
    if (t >= start - 1e-9 && t < end - 1e-9) return static_cast<int>(i);
    start = end;
  }
  return -1;
}

}  // namespace urbantrack
