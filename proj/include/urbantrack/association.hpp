#pragma once

#include <optional>
#include <string>
#include <vector>

#include "urbantrack/filtering.hpp"
#include "urbantrack/sensing.hpp"

namespace urbantrack {

enum class TrackStatus { kTentative, kConfirmed, kTerminated };

std::string to_string(TrackStatus s);

/// Two-state Markov chain for target existence.
struct ExistenceModel {
  double p11 = 0.98;  // exists -> exists
  double p21 = 0.0;   // absent -> exists
  double initial = 0.5;
  double confirm = 0.9;
  double terminate = 0.05;

  double p12() const { return 1.0 - p11; }
  double p22() const { return 1.0 - p21; }
  double predict(double psi) const { return p11 * psi + p21 * (1.0 - psi); }
  void validate() const;
};

struct Track {
  int id = 0;
  TrackStatus status = TrackStatus::kTentative;
  double existence = 0.5;
  std::vector<ModelFilterState> models;
  GaussianState combined;
  int created_scan = 0;
  int confirmed_scan = -1;
  int terminated_scan = -1;
  /// Initiated from a single receiver's range only.
  bool low_confidence = false;

  bool active() const { return status != TrackStatus::kTerminated; }
};

/// Gate size g^2 such that a 2-d Gaussian innovation falls inside with
/// probability p_gate.
double gate_threshold(double p_gate);
/// Area g^2 pi sqrt(det S) of the validation ellipse.
double gate_area(const Mat2& S, double gate_sq);

/// Indices of measurements with (z - z_hat)^T (S0 + R)^-1 (z - z_hat) < gate_sq.
std::vector<int> validate(const MeasVector& z_hat, const Mat2& S0,
                          const std::vector<Measurement>& measurements, double gate_sq);

/// Gaussian density of z under N(z_hat, S).
double gaussian_density(const MeasVector& z, const MeasVector& z_hat, const Mat2& S);

/// Per-track input to the association step.
struct TrackHypothesis {
  /// Predicted model probabilities mu_{k|k-1}.
  std::vector<double> mu;
  /// Predicted existence psi_{k|k-1}.
  double existence = 0.5;
  /// Validated measurement indices into the scan.
  std::vector<int> validated;
  /// likelihood[r][k]: density of measurement validated[k] under model r,
  /// already divided by the gate probability.
  std::vector<std::vector<double>> likelihood;
};

struct TrackAssociation {
  std::vector<int> validated;
  std::vector<double> likelihood;      // p_i, mixed over models
  std::vector<double> prior;           // P_i
  std::vector<double> omega;           // modified clutter density
  std::vector<double> beta0;           // per model
  std::vector<std::vector<double>> beta;  // [model][k]
  std::vector<double> model_delta;     // per model
  double delta = 0.0;
  double existence = 0.0;              // psi_{k|k}
  std::vector<double> mu;              // mu_{k|k}
};

struct AssociationResult {
  std::vector<TrackAssociation> tracks;
  /// Number of a-priori probabilities clamped below one.
  int clamped = 0;
};

/// Linear multi-target IPDA: other tracks' predicted measurement densities
/// are added to the clutter density of each track. `rho` holds the clutter
/// density of every measurement in the scan.
AssociationResult lmipda_associate(const std::vector<TrackHypothesis>& tracks,
                                   const std::vector<double>& rho, double p_detect,
                                   double p_gate);

struct InitiationConfig {
  double max_speed = 15.0;        // per axis, m/s
  double speed_sigma = 1.0;       // m/s
  double accel_variance = 1.0;    // initial (m/s^2)^2
  double rdot_gate_sq = 16.0;     // chi-square test of measured range-rates
  double max_condition = 1e3;     // reject near-tangent ellipse intersections
  double period = 0.25;
};

/// Position estimate from one bistatic range per receiver.
struct PositionFix {
  Point2 position;
  Mat2 covariance = Mat2::Identity();
  /// Measurements used (receiver, index) and their range-rates.
  std::vector<std::pair<int, int>> sources;
  bool low_confidence = false;
};

/// Points where both bistatic ellipses (common transmitter) intersect.
std::vector<Point2> ellipse_intersections(const Point2& tx, const Point2& rx1, double r1,
                                          const Point2& rx2, double r2);

/// Fixes from every cross-receiver pair of unused measurements that share a
/// transmitter; solutions outside `bounds` or inside a building are dropped.
/// With a single receiver, a range-only fallback puts the fix on the ellipse
/// point nearest the closest intersection zone.
std::vector<PositionFix> position_fixes(const ScenarioMap& map,
                                        const std::vector<std::vector<Measurement>>& per_receiver,
                                        const std::vector<std::vector<int>>& unused,
                                        const InitiationConfig& cfg);

/// Two-point differencing: each (previous, current) fix pair inside the
/// displacement window whose velocity explains the measured range-rates
/// becomes a tentative track.
std::vector<Track> initiate_tracks(const ScenarioMap& map, const std::vector<PositionFix>& previous,
                                   const std::vector<PositionFix>& current,
                                   const std::vector<std::vector<Measurement>>& per_receiver,
                                   const InitiationConfig& cfg, const ExistenceModel& existence,
                                   const std::vector<ModelId>& models, int scan, int& next_id);

struct StatusChange {
  int track_id = 0;
  TrackStatus from = TrackStatus::kTentative;
  TrackStatus to = TrackStatus::kTentative;
};

std::vector<StatusChange> update_lifecycle(std::vector<Track>& tracks, const ExistenceModel& model,
                                           int scan);

}  // namespace urbantrack
