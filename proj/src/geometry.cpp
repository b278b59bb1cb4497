#include "urbantrack/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace urbantrack {

namespace {

constexpr double kOnLineTolerance = 1e-9;
constexpr double kSegmentTolerance = 1e-9;

double wrap_angle(double a) {
  a = std::remainder(a, 2.0 * kPi);
  if (a <= -kPi) a += 2.0 * kPi;
  return a;
}

bool finite(const Point2& p) { return std::isfinite(p.x()) && std::isfinite(p.y()); }

}  // namespace

ClutterScatterer::ClutterScatterer(Point2 a, Point2 b, double reflectivity)
    : a_(std::move(a)), b_(std::move(b)), reflectivity_(reflectivity) {
  if (!finite(a_) || !finite(b_)) {
    throw std::invalid_argument("scatterer endpoints must be finite");
  }
  if (!(reflectivity_ > 0.0 && reflectivity_ <= 1.0)) {
    throw std::invalid_argument("scatterer reflectivity must lie in (0, 1]");
  }
  const Vec2 d = b_ - a_;
  is_point_ = d.norm() == 0.0;
  if (!is_point_) {
    vertical_ = std::abs(d.x()) < 1e-12 * d.norm();
    if (!vertical_) {
      slope_ = d.y() / d.x();
      intercept_ = a_.y() - slope_ * a_.x();
    }
  }
}

ClutterScatterer ClutterScatterer::point(Point2 p, double reflectivity) {
  return ClutterScatterer(p, p, reflectivity);
}

Vec2 ClutterScatterer::direction() const {
  if (is_point_) return Vec2::UnitX();
  return (b_ - a_).normalized();
}

Vec2 ClutterScatterer::normal() const {
  const Vec2 d = direction();
  return {-d.y(), d.x()};
}

double ClutterScatterer::signed_distance(const Point2& p) const {
  return normal().dot(p - a_);
}

Point2 ClutterScatterer::mirror(const Point2& p) const {
  if (is_point_) return p;
  return p - 2.0 * signed_distance(p) * normal();
}

Building::Building(Point2 lo, Point2 hi) : min_corner(std::move(lo)), max_corner(std::move(hi)) {
  if (!(max_corner.x() > min_corner.x() && max_corner.y() > min_corner.y())) {
    throw std::invalid_argument("building footprint must have positive width and height");
  }
}

bool Building::contains_interior(const Point2& p) const {
  return p.x() > min_corner.x() && p.x() < max_corner.x() && p.y() > min_corner.y() &&
         p.y() < max_corner.y();
}

void SensorGeometry::validate() const {
  if (!(max_range > 0.0)) throw std::invalid_argument("max_range must be positive");
  if (!(carrier_wavelength > 0.0)) throw std::invalid_argument("wavelength must be positive");
  if (!(sample_period > 0.0)) throw std::invalid_argument("sample period must be positive");
  for (const auto& r : receivers) {
    if (r.num_elements < 1) throw std::invalid_argument("receiver needs at least one element");
    if (!(r.element_spacing > 0.0)) {
      throw std::invalid_argument("receiver element spacing must be positive");
    }
  }
}

std::string to_string(PathClass c) {
  switch (c) {
    case PathClass::kDirect: return "tx-target-rx";
    case PathClass::kClutter: return "tx-clutter-rx";
    case PathClass::kTargetClutter: return "tx-target-clutter-rx";
    case PathClass::kClutterTarget: return "tx-clutter-target-rx";
    case PathClass::kClutterClutter: return "tx-clutter-clutter-rx";
    case PathClass::kClutterTargetClutter: return "tx-clutter-target-clutter-rx";
    case PathClass::kTargetClutterClutter: return "tx-target-clutter-clutter-rx";
    case PathClass::kClutterClutterTarget: return "tx-clutter-clutter-target-rx";
  }
  return "unknown";
}

bool involves_target(PathClass c) {
  return c != PathClass::kClutter && c != PathClass::kClutterClutter;
}

std::optional<Point2> reflection_point(const ClutterScatterer& s, const Point2& src,
                                       const Point2& dst) {
  if (s.is_point()) return s.endpoint_a();

  const double ds = s.signed_distance(src);
  const double dd = s.signed_distance(dst);
  if (std::abs(ds) < kOnLineTolerance || std::abs(dd) < kOnLineTolerance) return std::nullopt;
  if ((ds > 0.0) != (dd > 0.0)) return std::nullopt;

  // Image method: the ray src -> mirror(dst) crosses the line at the specular point.
  const double t = ds / (ds + dd);
  const Point2 image = s.mirror(dst);
  const Point2 p = src + t * (image - src);

  const double len = (s.endpoint_b() - s.endpoint_a()).norm();
  const double along = s.direction().dot(p - s.endpoint_a());
  if (along < -kSegmentTolerance * std::max(1.0, len) ||
      along > len + kSegmentTolerance * std::max(1.0, len)) {
    return std::nullopt;
  }
  return p;
}

bool line_of_sight(const ScenarioMap& map, const Point2& a, const Point2& b) {
  const Vec2 d = b - a;
  for (const auto& bld : map.buildings) {
    // Liang-Barsky clip of the segment against the footprint.
    double t0 = 0.0;
    double t1 = 1.0;
    bool outside = false;
    const double p[4] = {-d.x(), d.x(), -d.y(), d.y()};
    const double q[4] = {a.x() - bld.min_corner.x(), bld.max_corner.x() - a.x(),
                         a.y() - bld.min_corner.y(), bld.max_corner.y() - a.y()};
    for (int i = 0; i < 4 && !outside; ++i) {
      if (p[i] == 0.0) {
        if (q[i] < 0.0) outside = true;
      } else {
        const double r = q[i] / p[i];
        if (p[i] < 0.0) {
          t0 = std::max(t0, r);
        } else {
          t1 = std::min(t1, r);
        }
        if (t0 > t1) outside = true;
      }
    }
    if (outside) continue;
    // Touching an edge or a corner is not an obstruction: require that the
    // clipped piece has its midpoint strictly inside.
    if (t1 - t0 <= 1e-12) continue;
    const Point2 mid = a + 0.5 * (t0 + t1) * d;
    const double eps = 1e-7;
    if (mid.x() > bld.min_corner.x() + eps && mid.x() < bld.max_corner.x() - eps &&
        mid.y() > bld.min_corner.y() + eps && mid.y() < bld.max_corner.y() - eps) {
      return false;
    }
  }
  return true;
}

double direct_attenuation(const Point2& tx, const Point2& target, const Point2& rx) {
  const double len = (target - tx).norm() + (rx - target).norm();
  const double ratio = kAttenuationReferenceLength / len;
  return ratio * ratio;
}

namespace {

// Two consecutive reflections between fixed endpoints a and b.
std::optional<std::pair<Point2, Point2>> double_bounce(const ClutterScatterer& s1,
                                                       const ClutterScatterer& s2,
                                                       const Point2& a, const Point2& b) {
  if (s1.is_point() && s2.is_point()) {
    return std::make_pair(s1.endpoint_a(), s2.endpoint_a());
  }
  if (s1.is_point()) {
    const auto c2 = reflection_point(s2, s1.endpoint_a(), b);
    if (!c2) return std::nullopt;
    return std::make_pair(s1.endpoint_a(), *c2);
  }
  if (s2.is_point()) {
    const auto c1 = reflection_point(s1, a, s2.endpoint_a());
    if (!c1) return std::nullopt;
    return std::make_pair(*c1, s2.endpoint_a());
  }
  const Point2 b1 = s2.mirror(b);
  const auto c1 = reflection_point(s1, a, b1);
  if (!c1) return std::nullopt;
  const auto c2 = reflection_point(s2, *c1, b);
  if (!c2) return std::nullopt;
  // The second bounce must also be consistent with the first.
  const auto c1_check = reflection_point(s1, a, *c2);
  if (!c1_check || (*c1_check - *c1).norm() > 1e-6 * std::max(1.0, (a - b).norm())) {
    return std::nullopt;
  }
  return std::make_pair(*c1, *c2);
}

struct HopLayout {
  std::vector<Point2> hops;
  int target_hop = -1;
};

std::optional<HopLayout> layout_path(const ScenarioMap& map, PathClass cls, int i, int j,
                                     const Point2& tx, const Point2& tgt, const Point2& rx) {
  const auto& sc = map.scatterers;
  HopLayout out;
  switch (cls) {
    case PathClass::kDirect:
      out.hops = {tx, tgt, rx};
      out.target_hop = 1;
      break;
    case PathClass::kClutter: {
      const auto c = reflection_point(sc[i], tx, rx);
      if (!c) return std::nullopt;
      out.hops = {tx, *c, rx};
      break;
    }
    case PathClass::kTargetClutter: {
      const auto c = reflection_point(sc[i], tgt, rx);
      if (!c) return std::nullopt;
      out.hops = {tx, tgt, *c, rx};
      out.target_hop = 1;
      break;
    }
    case PathClass::kClutterTarget: {
      const auto c = reflection_point(sc[i], tx, tgt);
      if (!c) return std::nullopt;
      out.hops = {tx, *c, tgt, rx};
      out.target_hop = 2;
      break;
    }
    case PathClass::kClutterClutter: {
      const auto cc = double_bounce(sc[i], sc[j], tx, rx);
      if (!cc) return std::nullopt;
      out.hops = {tx, cc->first, cc->second, rx};
      break;
    }
    case PathClass::kClutterTargetClutter: {
      const auto c1 = reflection_point(sc[i], tx, tgt);
      const auto c2 = reflection_point(sc[j], tgt, rx);
      if (!c1 || !c2) return std::nullopt;
      out.hops = {tx, *c1, tgt, *c2, rx};
      out.target_hop = 2;
      break;
    }
    case PathClass::kTargetClutterClutter: {
      const auto cc = double_bounce(sc[i], sc[j], tgt, rx);
      if (!cc) return std::nullopt;
      out.hops = {tx, tgt, cc->first, cc->second, rx};
      out.target_hop = 1;
      break;
    }
    case PathClass::kClutterClutterTarget: {
      const auto cc = double_bounce(sc[i], sc[j], tx, tgt);
      if (!cc) return std::nullopt;
      out.hops = {tx, cc->first, cc->second, tgt, rx};
      out.target_hop = 3;
      break;
    }
  }
  for (std::size_t h = 0; h + 1 < out.hops.size(); ++h) {
    if ((out.hops[h + 1] - out.hops[h]).norm() < 1e-9) return std::nullopt;
    if (!line_of_sight(map, out.hops[h], out.hops[h + 1])) return std::nullopt;
  }
  return out;
}

double arrival_azimuth(const std::vector<Point2>& hops, const Receiver& rx) {
  const Vec2 d = hops[hops.size() - 2] - rx.position;
  return wrap_angle(std::atan2(d.y(), d.x()) - rx.boresight);
}

std::optional<PropagationPath> build_path(const ScenarioMap& map, PathClass cls, int i, int j,
                                          const Point2& tx, const StateVector& target,
                                          const Receiver& rx) {
  const Point2 tgt = position_of(target);
  const auto layout = layout_path(map, cls, i, j, tx, tgt, rx.position);
  if (!layout) return std::nullopt;

  PropagationPath p;
  p.path_class = cls;
  p.hops = layout->hops;
  p.involves_target = layout->target_hop >= 0;
  if (i >= 0) p.scatterers.push_back(i);
  if (j >= 0) p.scatterers.push_back(j);

  double refl = 1.0;
  for (int s : p.scatterers) refl *= map.scatterers[static_cast<std::size_t>(s)].reflectivity();
  double len = 0.0;
  for (std::size_t h = 0; h + 1 < p.hops.size(); ++h) len += (p.hops[h + 1] - p.hops[h]).norm();
  p.length = len;
  p.delay = len / kSpeedOfLight;
  const double ratio = kAttenuationReferenceLength / len;
  p.attenuation = refl * ratio * ratio;

  const double lambda = map.sensors.carrier_wavelength;
  if (p.involves_target) {
    // Rate of change of the total path length: projections of the target
    // velocity on the unit vectors pointing from its neighbours to it.
    const auto th = static_cast<std::size_t>(layout->target_hop);
    const Vec2 v = velocity_of(target);
    const Vec2 u_in = (p.hops[th] - p.hops[th - 1]).normalized();
    const Vec2 u_out = (p.hops[th] - p.hops[th + 1]).normalized();
    p.doppler = v.dot(u_in + u_out) / lambda;
  }

  p.azimuth = arrival_azimuth(p.hops, rx);
  if (p.involves_target) {
    const double dt = map.sensors.sample_period;
    StateVector moved = target;
    moved(0) += target(1) * dt;
    moved(2) += target(3) * dt;
    const auto later = layout_path(map, cls, i, j, tx, position_of(moved), rx.position);
    if (later) {
      p.azimuth_rate = wrap_angle(arrival_azimuth(later->hops, rx) - p.azimuth) / dt;
    }
  }
  return p;
}

void collect(const ScenarioMap& map, const Point2& tx, const StateVector& target,
             const Receiver& rx, bool with_target, bool with_clutter,
             std::vector<PropagationPath>& out) {
  const int n = static_cast<int>(map.scatterers.size());
  auto add = [&](PathClass c, int i, int j) {
    if (auto p = build_path(map, c, i, j, tx, target, rx)) out.push_back(std::move(*p));
  };
  if (with_target) add(PathClass::kDirect, -1, -1);
  for (int i = 0; i < n; ++i) {
    if (with_clutter) add(PathClass::kClutter, i, -1);
    if (with_target) {
      add(PathClass::kTargetClutter, i, -1);
      add(PathClass::kClutterTarget, i, -1);
    }
  }
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (with_target) add(PathClass::kClutterTargetClutter, i, j);
      if (i == j) continue;
      if (with_clutter) add(PathClass::kClutterClutter, i, j);
      if (with_target) {
        add(PathClass::kTargetClutterClutter, i, j);
        add(PathClass::kClutterClutterTarget, i, j);
      }
    }
  }
}

}  // namespace

std::vector<PropagationPath> enumerate_paths(const ScenarioMap& map, const Point2& tx,
                                             const StateVector& target, const Receiver& rx) {
  std::vector<PropagationPath> out;
  const Point2 pos = position_of(target);
  const double max_range = map.sensors.max_range;
  if ((pos - tx).norm() > max_range || (pos - rx.position).norm() > max_range) return out;
  collect(map, tx, target, rx, true, true, out);
  return out;
}

std::vector<PropagationPath> enumerate_clutter_paths(const ScenarioMap& map, const Point2& tx,
                                                     const Receiver& rx) {
  std::vector<PropagationPath> out;
  collect(map, tx, StateVector::Zero(), rx, false, true, out);
  return out;
}

}  // namespace urbantrack
