#pragma once

#include <optional>
#include <string>
#include <vector>

#include "urbantrack/types.hpp"

namespace urbantrack {

/// A reflective surface modelled as a straight segment. A zero-length segment
/// is a point scatterer (vegetation) that reflects isotropically.
class ClutterScatterer {
 public:
  ClutterScatterer(Point2 a, Point2 b, double reflectivity);
  static ClutterScatterer point(Point2 p, double reflectivity);

  const Point2& endpoint_a() const { return a_; }
  const Point2& endpoint_b() const { return b_; }
  double reflectivity() const { return reflectivity_; }
  bool is_point() const { return is_point_; }
  bool is_vertical() const { return vertical_; }
  /// Slope and intercept of the supporting line y = m x + c (undefined for
  /// vertical segments).
  double slope() const { return slope_; }
  double intercept() const { return intercept_; }

  /// Unit direction along the segment and the unit normal (left of a->b).
  Vec2 direction() const;
  Vec2 normal() const;
  /// Signed distance of p from the supporting line.
  double signed_distance(const Point2& p) const;
  /// Mirror image of p across the supporting line.
  Point2 mirror(const Point2& p) const;

 private:
  Point2 a_;
  Point2 b_;
  double reflectivity_;
  bool is_point_ = false;
  bool vertical_ = false;
  double slope_ = 0.0;
  double intercept_ = 0.0;
};

/// Axis-aligned building footprint.
struct Building {
  Point2 min_corner;
  Point2 max_corner;

  Building(Point2 lo, Point2 hi);
  bool contains_interior(const Point2& p) const;
};

struct Rect {
  Point2 min_corner{0.0, 0.0};
  Point2 max_corner{0.0, 0.0};
  bool contains(const Point2& p) const {
    return p.x() >= min_corner.x() && p.x() <= max_corner.x() &&
           p.y() >= min_corner.y() && p.y() <= max_corner.y();
  }
};

struct Receiver {
  Point2 position{0.0, 0.0};
  int num_elements = 1;
  double element_spacing = 0.0375;
  /// Orientation of the array axis (radians from +x).
  double boresight = 0.0;
};

struct SensorGeometry {
  std::vector<Point2> transmitters;
  std::vector<Receiver> receivers;
  double max_range = 300.0;
  double carrier_wavelength = kSpeedOfLight / 4.0e9;
  /// Receiver sampling period T2.
  double sample_period = 12.5e-9;

  void validate() const;
};

enum class PathClass {
  kDirect,                     // tx-target-rx
  kClutter,                    // tx-clutter-rx
  kTargetClutter,              // tx-target-clutter-rx
  kClutterTarget,              // tx-clutter-target-rx
  kClutterClutter,             // tx-clutter-clutter-rx
  kClutterTargetClutter,       // tx-clutter-target-clutter-rx
  kTargetClutterClutter,       // tx-target-clutter-clutter-rx
  kClutterClutterTarget,       // tx-clutter-clutter-target-rx
};

std::string to_string(PathClass c);
bool involves_target(PathClass c);

struct PropagationPath {
  PathClass path_class = PathClass::kDirect;
  /// tx, intermediate reflection points, rx.
  std::vector<Point2> hops;
  /// Scatterer indices used, in hop order.
  std::vector<int> scatterers;
  double length = 0.0;
  double delay = 0.0;
  double doppler = 0.0;
  double azimuth = 0.0;
  double azimuth_rate = 0.0;
  double attenuation = 0.0;
  bool involves_target = false;
};

/// Planar urban scene: occluders, reflectors and the sensor layout.
struct ScenarioMap {
  std::vector<Building> buildings;
  std::vector<ClutterScatterer> scatterers;
  SensorGeometry sensors;
  /// False-alarm density in measurement space, per m * (m/s).
  double clutter_density = 2.5e-4;
  /// Surveillance region used to reject initiation ambiguities.
  Rect bounds;
  std::vector<Rect> intersection_zones;
};

/// Path length at which a direct path has unit attenuation.
inline constexpr double kAttenuationReferenceLength = 100.0;

/// Specular reflection point on the scatterer for a ray src -> surface -> dst.
/// Point scatterers return their own position.
std::optional<Point2> reflection_point(const ClutterScatterer& scatterer,
                                       const Point2& src, const Point2& dst);

bool line_of_sight(const ScenarioMap& map, const Point2& a, const Point2& b);

/// All propagation paths with at most three reflections between transmitter
/// and receiver for one target.
std::vector<PropagationPath> enumerate_paths(const ScenarioMap& map,
                                             const Point2& tx,
                                             const StateVector& target,
                                             const Receiver& rx);

/// Paths that do not involve any target (static background returns).
std::vector<PropagationPath> enumerate_clutter_paths(const ScenarioMap& map,
                                                     const Point2& tx,
                                                     const Receiver& rx);

/// Attenuation of an unobstructed direct path for the given target position.
double direct_attenuation(const Point2& tx, const Point2& target,
                          const Point2& rx);

}  // namespace urbantrack
