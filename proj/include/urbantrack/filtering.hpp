#pragma once

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "urbantrack/geometry.hpp"
#include "urbantrack/motion.hpp"

namespace urbantrack {

/// Motion models known to the estimator, in transition-matrix order.
enum class ModelId { kNCV = 0, kNCA = 1, kCTLeft = 2, kCTRight = 3 };
inline constexpr int kNumModels = 4;

std::string to_string(ModelId id);

struct UnscentedConfig {
  double alpha = 0.1;  // spread
  double beta = 2.0;   // prior knowledge
  double kappa = 0.0;  // secondary scaling

  int points(int n) const { return 2 * n + 1; }
  double lambda(int n) const { return alpha * alpha * (n + kappa) - n; }
};

struct SigmaWeights {
  std::vector<double> mean;
  std::vector<double> cov;
  double scale = 0.0;  // sqrt(n + lambda)
};

SigmaWeights sigma_weights(const UnscentedConfig& cfg, int n);

struct ModelFilterState {
  ModelId model = ModelId::kNCV;
  StateVector mean = StateVector::Zero();
  Mat6 P = Mat6::Identity();
  double mu = 1.0;
};

/// Builds the motion model for an id. NCV and CT share sigma_w; NCA uses
/// its own (jerk-level) sigma.
struct ModelBank {
  double period = 0.25;
  double sigma_cv = 0.5;
  double sigma_ca = 1.0;
  double turn_rate = kPi / 20.0;

  MotionModel model(ModelId id) const;
};

/// Active models M_k plus the full transition matrix; pi(i, j) is the
/// probability of switching from model i to model j.
struct ModelSet {
  std::vector<ModelId> active;
  Eigen::Matrix4d pi = Eigen::Matrix4d::Identity();

  /// Transition probability restricted to the active set (rows renormalised).
  double transition(ModelId from, ModelId to) const;
  bool contains(ModelId id) const;
};

Eigen::Matrix4d default_transition_matrix();

/// Symmetrises P and makes it numerically SPD; acceleration diagonals below
/// 1e-6 receive a 1e-6 jitter.
Mat6 regularize(const Mat6& P);

/// Throws FilterDivergence on non-finite input.
struct FilterDivergence : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct GaussianState {
  StateVector mean = StateVector::Zero();
  Mat6 P = Mat6::Identity();
};

GaussianState ukf_predict(const GaussianState& state, const MotionModel& model,
                          const UnscentedConfig& cfg = {});

/// Bistatic range and its rate d r / dt for transmitter tx and receiver rx.
MeasVector measurement_function(const StateVector& state, const Point2& tx, const Point2& rx);
/// Analytic Jacobian of measurement_function.
Mat26 measurement_jacobian(const StateVector& state, const Point2& tx, const Point2& rx);

/// Unscented prediction of the measurement: z_hat, the spread S0 (without R)
/// and the state/measurement cross-covariance.
struct MeasurementPrediction {
  MeasVector z = MeasVector::Zero();
  Mat2 S0 = Mat2::Zero();
  Mat62 cross = Mat62::Zero();

  Mat2 innovation_covariance(const Mat2& R) const;
};

MeasurementPrediction predict_measurement(const GaussianState& pred, const Point2& tx,
                                          const Point2& rx, const UnscentedConfig& cfg = {});

/// Makes S invertible: adds 1e-9 trace(S)/2 I until a Cholesky factor exists.
Mat2 regularize_innovation(const Mat2& S);

/// PDA-weighted update; beta0 + sum(betas) must be 1. Each measurement has
/// its own R, so the result is the exact moment match of the beta mixture.
GaussianState ukf_update(const GaussianState& pred, const MeasurementPrediction& mp,
                         const std::vector<MeasVector>& z, const std::vector<Mat2>& R,
                         double beta0, const std::vector<double>& betas);

/// Mixed initial conditions and predicted model probabilities.
struct MixResult {
  std::vector<ModelFilterState> mixed;  // mu holds mu_{k|k-1}
  bool uniform_fallback = false;
};

MixResult imm_mix(const std::vector<ModelFilterState>& states, const ModelSet& set);

/// Gaussian-mixture moment match over the given states weighted by mu.
GaussianState combine_output(const std::vector<ModelFilterState>& states);

struct ModelSetPolicy {
  enum class Mode { kZones, kScanWindow };
  Mode mode = Mode::kZones;
  int window_begin = 20;
  int window_end = 100;
};

std::vector<ModelId> turn_models();
std::vector<ModelId> road_models();

/// Active model ids for a track at `position` during `scan`.
std::vector<ModelId> adapt_model_set(const Point2& position, const std::vector<Rect>& zones,
                                     int scan, const ModelSetPolicy& policy);

/// Replaces the active set: surviving models keep their probability, new
/// models split the vacated mass uniformly and start from `combined`.
std::vector<ModelFilterState> apply_model_set(const std::vector<ModelFilterState>& states,
                                              const std::vector<ModelId>& active,
                                              const GaussianState& combined);

/// (x - m)^T P^-1 (x - m).
double nees(const StateVector& truth, const GaussianState& est);

}  // namespace urbantrack
