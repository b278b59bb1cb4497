#include "urbantrack/filtering.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace urbantrack {

namespace {

constexpr double kAccelJitter = 1e-6;

bool finite(const Mat6& m) { return m.allFinite(); }

Mat6 symmetrize(const Mat6& P) { return 0.5 * (P + P.transpose()); }

Mat6 sqrt_factor(const Mat6& P) {
  Mat6 A = regularize(P);
  Eigen::LLT<Mat6> llt(A);
  double jitter = 1e-12 * std::max(1.0, A.diagonal().maxCoeff());
  while (llt.info() != Eigen::Success) {
    A.diagonal().array() += jitter;
    jitter *= 10.0;
    llt.compute(A);
    if (!std::isfinite(jitter)) throw FilterDivergence("covariance cannot be factorised");
  }
  return llt.matrixL();
}

}  // namespace

std::string to_string(ModelId id) {
  switch (id) {
    case ModelId::kNCV: return "NCV";
    case ModelId::kNCA: return "NCA";
    case ModelId::kCTLeft: return "CT-left";
    case ModelId::kCTRight: return "CT-right";
  }
  return "unknown";
}

SigmaWeights sigma_weights(const UnscentedConfig& cfg, int n) {
  const double lam = cfg.lambda(n);
  if (!(n + lam > 0.0)) throw std::invalid_argument("unscented spread leaves n + lambda <= 0");
  SigmaWeights w;
  const int count = cfg.points(n);
  w.mean.assign(static_cast<std::size_t>(count), 1.0 / (2.0 * (n + lam)));
  w.cov = w.mean;
  w.mean[0] = lam / (n + lam);
  w.cov[0] = w.mean[0] + (1.0 - cfg.alpha * cfg.alpha + cfg.beta);
  w.scale = std::sqrt(n + lam);
  return w;
}

MotionModel ModelBank::model(ModelId id) const {
  const double v_cv = sigma_cv * sigma_cv;
  const double v_ca = sigma_ca * sigma_ca;
  switch (id) {
    case ModelId::kNCV: return build_model(MotionKind::kNCV, period, v_cv, v_cv);
    case ModelId::kNCA: return build_model(MotionKind::kNCA, period, v_ca, v_ca);
    case ModelId::kCTLeft: return build_model(MotionKind::kCT, period, v_cv, v_cv, turn_rate);
    case ModelId::kCTRight: return build_model(MotionKind::kCT, period, v_cv, v_cv, -turn_rate);
  }
  throw std::invalid_argument("unknown model id");
}

bool ModelSet::contains(ModelId id) const {
  return std::find(active.begin(), active.end(), id) != active.end();
}

double ModelSet::transition(ModelId from, ModelId to) const {
  const int i = static_cast<int>(from);
  double row = 0.0;
  for (ModelId a : active) row += pi(i, static_cast<int>(a));
  if (!(row > 0.0)) return from == to ? 1.0 : 0.0;
  return pi(i, static_cast<int>(to)) / row;
}

Eigen::Matrix4d default_transition_matrix() {
  Eigen::Matrix4d pi;
  pi << 0.99, 0.01, 0.0, 0.0,
        0.1, 0.7, 0.1, 0.1,
        0.0, 0.1, 0.99, 0.0,
        0.0, 0.1, 0.0, 0.99;
  for (int i = 0; i < 4; ++i) pi.row(i) /= pi.row(i).sum();
  return pi;
}

Mat6 regularize(const Mat6& P) {
  Mat6 out = symmetrize(P);
  for (int i : {state_index::kAx, state_index::kAy}) {
    if (out(i, i) < kAccelJitter) out(i, i) += kAccelJitter;
  }
  return out;
}

GaussianState ukf_predict(const GaussianState& state, const MotionModel& model,
                          const UnscentedConfig& cfg) {
  if (!state.mean.allFinite() || !finite(state.P)) throw FilterDivergence("non-finite state");
  constexpr int n = 6;
  const SigmaWeights w = sigma_weights(cfg, n);
  const Mat6 L = sqrt_factor(state.P);

  std::array<StateVector, 2 * n + 1> Y;
  Y[0] = model.F * state.mean;
  for (int i = 0; i < n; ++i) {
    const StateVector d = w.scale * L.col(i);
    Y[1 + i] = model.F * (state.mean + d);
    Y[1 + n + i] = model.F * (state.mean - d);
  }
  // Weighted mean as deviations from the central point limits cancellation
  // with the large negative central weight.
  StateVector mean = Y[0];
  for (int i = 1; i < 2 * n + 1; ++i) mean += w.mean[static_cast<std::size_t>(i)] * (Y[i] - Y[0]);

  Mat6 P = Mat6::Zero();
  for (int i = 0; i < 2 * n + 1; ++i) {
    const StateVector d = Y[i] - mean;
    P += w.cov[static_cast<std::size_t>(i)] * d * d.transpose();
  }
  P += model.Q;
  GaussianState out{mean, symmetrize(P)};
  if (!out.mean.allFinite() || !finite(out.P)) throw FilterDivergence("prediction diverged");
  return out;
}

MeasVector measurement_function(const StateVector& state, const Point2& tx, const Point2& rx) {
  const Point2 p = position_of(state);
  const Vec2 v = velocity_of(state);
  const Vec2 a = p - tx;
  const Vec2 b = p - rx;
  const double na = a.norm();
  const double nb = b.norm();
  if (na <= 0.0 || nb <= 0.0) throw std::invalid_argument("target coincides with a sensor");
  MeasVector z;
  z << na + nb, v.dot(a / na + b / nb);
  return z;
}

Mat26 measurement_jacobian(const StateVector& state, const Point2& tx, const Point2& rx) {
  const Point2 p = position_of(state);
  const Vec2 v = velocity_of(state);
  const Vec2 a = p - tx;
  const Vec2 b = p - rx;
  const double na = a.norm();
  const double nb = b.norm();
  if (na <= 0.0 || nb <= 0.0) throw std::invalid_argument("target coincides with a sensor");
  const Vec2 ua = a / na;
  const Vec2 ub = b / nb;
  // d(u)/dp = (I - u u^T) / |.|
  const Mat2 Ja = (Mat2::Identity() - ua * ua.transpose()) / na;
  const Mat2 Jb = (Mat2::Identity() - ub * ub.transpose()) / nb;
  const Vec2 drdot_dp = (Ja + Jb).transpose() * v;
  const Vec2 u = ua + ub;
  Mat26 H = Mat26::Zero();
  H(0, 0) = u.x();
  H(0, 2) = u.y();
  H(1, 0) = drdot_dp.x();
  H(1, 2) = drdot_dp.y();
  H(1, 1) = u.x();
  H(1, 3) = u.y();
  return H;
}

Mat2 MeasurementPrediction::innovation_covariance(const Mat2& R) const {
  return regularize_innovation(S0 + R);
}

MeasurementPrediction predict_measurement(const GaussianState& pred, const Point2& tx,
                                          const Point2& rx, const UnscentedConfig& cfg) {
  constexpr int n = 6;
  const SigmaWeights w = sigma_weights(cfg, n);
  const Mat6 L = sqrt_factor(pred.P);

  std::array<StateVector, 2 * n + 1> X;
  std::array<MeasVector, 2 * n + 1> Z;
  X[0] = pred.mean;
  for (int i = 0; i < n; ++i) {
    const StateVector d = w.scale * L.col(i);
    X[1 + i] = pred.mean + d;
    X[1 + n + i] = pred.mean - d;
  }
  for (int i = 0; i < 2 * n + 1; ++i) Z[i] = measurement_function(X[i], tx, rx);

  MeasurementPrediction mp;
  mp.z = Z[0];
  for (int i = 1; i < 2 * n + 1; ++i) mp.z += w.mean[static_cast<std::size_t>(i)] * (Z[i] - Z[0]);
  StateVector xm = X[0];
  for (int i = 1; i < 2 * n + 1; ++i) xm += w.mean[static_cast<std::size_t>(i)] * (X[i] - X[0]);
  for (int i = 0; i < 2 * n + 1; ++i) {
    const MeasVector dz = Z[i] - mp.z;
    const StateVector dx = X[i] - xm;
    mp.S0 += w.cov[static_cast<std::size_t>(i)] * dz * dz.transpose();
    mp.cross += w.cov[static_cast<std::size_t>(i)] * dx * dz.transpose();
  }
  mp.S0 = 0.5 * (mp.S0 + mp.S0.transpose());
  return mp;
}

Mat2 regularize_innovation(const Mat2& S) {
  Mat2 out = 0.5 * (S + S.transpose());
  Eigen::LLT<Mat2> llt(out);
  const double step = std::max(1e-9 * out.trace() / 2.0, 1e-300);
  double jitter = step;
  while (llt.info() != Eigen::Success) {
    out.diagonal().array() += jitter;
    jitter *= 10.0;
    llt.compute(out);
    if (!std::isfinite(jitter)) throw FilterDivergence("innovation covariance cannot be regularised");
  }
  return out;
}

GaussianState ukf_update(const GaussianState& pred, const MeasurementPrediction& mp,
                         const std::vector<MeasVector>& z, const std::vector<Mat2>& R,
                         double beta0, const std::vector<double>& betas) {
  if (z.size() != R.size() || z.size() != betas.size()) {
    throw std::invalid_argument("measurement, covariance and weight counts differ");
  }
  double total = beta0;
  for (double b : betas) total += b;
  if (std::abs(total - 1.0) > 1e-6) throw std::invalid_argument("association weights must sum to 1");

  StateVector shift = StateVector::Zero();
  Mat6 P = beta0 * pred.P;
  Mat6 spread = Mat6::Zero();
  for (std::size_t i = 0; i < z.size(); ++i) {
    const Mat2 S = mp.innovation_covariance(R[i]);
    const Mat62 K = mp.cross * S.inverse();
    const StateVector dx = K * (z[i] - mp.z);
    shift += betas[i] * dx;
    P += betas[i] * (pred.P - K * S * K.transpose());
    spread += betas[i] * dx * dx.transpose();
  }
  P += spread - shift * shift.transpose();
  GaussianState out{pred.mean + shift, symmetrize(P)};
  if (!out.mean.allFinite() || !finite(out.P)) throw FilterDivergence("update diverged");
  return out;
}

MixResult imm_mix(const std::vector<ModelFilterState>& states, const ModelSet& set) {
  MixResult res;
  const std::size_t m = states.size();
  std::vector<double> c(m, 0.0);
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t i = 0; i < m; ++i) {
      c[j] += set.transition(states[i].model, states[j].model) * states[i].mu;
    }
  }
  double total = 0.0;
  for (double v : c) total += v;
  if (!(total > 0.0)) {
    res.uniform_fallback = true;
    res.mixed = states;
    for (auto& s : res.mixed) s.mu = 1.0 / static_cast<double>(m);
    return res;
  }

  res.mixed.resize(m);
  for (std::size_t j = 0; j < m; ++j) {
    ModelFilterState& out = res.mixed[j];
    out.model = states[j].model;
    out.mu = c[j] / total;
    if (!(c[j] > 0.0)) {
      out.mean = states[j].mean;
      out.P = states[j].P;
      continue;
    }
    std::vector<ModelFilterState> comps = states;
    for (std::size_t i = 0; i < m; ++i) {
      comps[i].mu = set.transition(states[i].model, states[j].model) * states[i].mu / c[j];
    }
    const GaussianState g = combine_output(comps);
    out.mean = g.mean;
    out.P = g.P;
  }
  return res;
}

GaussianState combine_output(const std::vector<ModelFilterState>& states) {
  if (states.empty()) throw std::invalid_argument("no model states to combine");
  GaussianState g;
  g.mean.setZero();
  double total = 0.0;
  for (const auto& s : states) total += s.mu;
  if (!(total > 0.0)) throw std::invalid_argument("model probabilities sum to zero");
  for (const auto& s : states) g.mean += (s.mu / total) * s.mean;
  g.P.setZero();
  for (const auto& s : states) {
    const StateVector d = s.mean - g.mean;
    g.P += (s.mu / total) * (s.P + d * d.transpose());
  }
  g.P = symmetrize(g.P);
  return g;
}

std::vector<ModelId> turn_models() { return {ModelId::kNCA, ModelId::kCTLeft, ModelId::kCTRight}; }
std::vector<ModelId> road_models() { return {ModelId::kNCV, ModelId::kNCA}; }

std::vector<ModelId> adapt_model_set(const Point2& position, const std::vector<Rect>& zones,
                                     int scan, const ModelSetPolicy& policy) {
  bool turn = false;
  if (policy.mode == ModelSetPolicy::Mode::kScanWindow) {
    turn = scan >= policy.window_begin && scan <= policy.window_end;
  } else {
    turn = std::any_of(zones.begin(), zones.end(), [&](const Rect& r) { return r.contains(position); });
  }
  return turn ? turn_models() : road_models();
}

std::vector<ModelFilterState> apply_model_set(const std::vector<ModelFilterState>& states,
                                              const std::vector<ModelId>& active,
                                              const GaussianState& combined) {
  if (active.empty()) throw std::invalid_argument("active model set is empty");
  std::vector<ModelFilterState> out;
  double kept = 0.0;
  int entering = 0;
  for (ModelId id : active) {
    auto it = std::find_if(states.begin(), states.end(),
                           [&](const ModelFilterState& s) { return s.model == id; });
    if (it != states.end()) {
      out.push_back(*it);
      kept += it->mu;
    } else {
      ModelFilterState s;
      s.model = id;
      s.mean = combined.mean;
      s.P = combined.P;
      s.mu = -1.0;  // placeholder
      out.push_back(s);
      ++entering;
    }
  }
  const double vacated = std::max(0.0, 1.0 - kept);
  for (auto& s : out) {
    if (s.mu < 0.0) s.mu = vacated / entering;
  }
  double total = 0.0;
  for (const auto& s : out) total += s.mu;
  if (!(total > 0.0)) {
    for (auto& s : out) s.mu = 1.0 / static_cast<double>(out.size());
  } else {
    for (auto& s : out) s.mu /= total;
  }
  return out;
}

double nees(const StateVector& truth, const GaussianState& est) {
  const StateVector d = truth - est.mean;
  return d.dot(est.P.ldlt().solve(d));
}

}  // namespace urbantrack
