#include "urbantrack/association.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace urbantrack {

namespace {

constexpr double kPriorCeiling = 1.0 - 1e-9;
constexpr int kEllipseSamples = 720;

struct EllipseFromFocus {
  Point2 focus;
  double d;
  double phi;
  double r;
  bool valid;

  EllipseFromFocus(const Point2& tx, const Point2& rx, double range) : focus(tx), r(range) {
    const Vec2 b = rx - tx;
    d = b.norm();
    phi = std::atan2(b.y(), b.x());
    valid = r > d;
  }

  Point2 at(double theta) const {
    const double s = (r * r - d * d) / (2.0 * (r - d * std::cos(theta - phi)));
    return focus + s * Vec2(std::cos(theta), std::sin(theta));
  }
};

bool inside_any_building(const ScenarioMap& map, const Point2& p) {
  return std::any_of(map.buildings.begin(), map.buildings.end(),
                     [&](const Building& b) { return b.contains_interior(p); });
}

const Point2& transmitter_of(const ScenarioMap& map, const Measurement& m) {
  return map.sensors.transmitters.at(static_cast<std::size_t>(m.transmitter));
}

}  // namespace

std::string to_string(TrackStatus s) {
  switch (s) {
    case TrackStatus::kTentative: return "tentative";
    case TrackStatus::kConfirmed: return "confirmed";
    case TrackStatus::kTerminated: return "terminated";
  }
  return "unknown";
}

void ExistenceModel::validate() const {
  auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!prob(p11) || !prob(p21) || !prob(initial)) {
    throw std::invalid_argument("existence probabilities must lie in [0, 1]");
  }
  if (!(terminate < confirm)) {
    throw std::invalid_argument("termination threshold must be below confirmation threshold");
  }
}

double gate_threshold(double p_gate) {
  if (!(p_gate > 0.0 && p_gate < 1.0)) throw std::invalid_argument("gate probability must lie in (0, 1)");
  return -2.0 * std::log(1.0 - p_gate);
}

double gate_area(const Mat2& S, double gate_sq) {
  return gate_sq * kPi * std::sqrt(std::max(S.determinant(), 0.0));
}

std::vector<int> validate(const MeasVector& z_hat, const Mat2& S0,
                          const std::vector<Measurement>& measurements, double gate_sq) {
  std::vector<int> out;
  for (std::size_t i = 0; i < measurements.size(); ++i) {
    const Mat2 S = regularize_innovation(S0 + measurements[i].R);
    const MeasVector nu = measurements[i].z - z_hat;
    if (nu.dot(S.ldlt().solve(nu)) < gate_sq) out.push_back(static_cast<int>(i));
  }
  return out;
}

double gaussian_density(const MeasVector& z, const MeasVector& z_hat, const Mat2& S) {
  const MeasVector nu = z - z_hat;
  const double d2 = nu.dot(S.ldlt().solve(nu));
  return std::exp(-0.5 * d2) / (2.0 * kPi * std::sqrt(S.determinant()));
}

AssociationResult lmipda_associate(const std::vector<TrackHypothesis>& tracks,
                                   const std::vector<double>& rho, double p_detect,
                                   double p_gate) {
  if (!(p_detect > 0.0 && p_detect <= 1.0)) throw std::invalid_argument("P_D must lie in (0, 1]");
  if (!(p_gate > 0.0 && p_gate <= 1.0)) throw std::invalid_argument("P_G must lie in (0, 1]");
  const double pdpg = p_detect * p_gate;

  AssociationResult res;
  res.tracks.resize(tracks.size());

  // Mixed likelihoods and a-priori association probabilities.
  for (std::size_t t = 0; t < tracks.size(); ++t) {
    const auto& h = tracks[t];
    auto& a = res.tracks[t];
    if (h.likelihood.size() != h.mu.size()) throw std::invalid_argument("likelihood/model count mismatch");
    a.validated = h.validated;
    const std::size_t n = h.validated.size();
    a.likelihood.assign(n, 0.0);
    for (std::size_t r = 0; r < h.mu.size(); ++r) {
      if (h.likelihood[r].size() != n) throw std::invalid_argument("likelihood/measurement count mismatch");
      for (std::size_t k = 0; k < n; ++k) a.likelihood[k] += h.mu[r] * h.likelihood[r][k];
    }
    double norm = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double rho_i = rho.at(static_cast<std::size_t>(h.validated[k]));
      if (!(rho_i > 0.0)) throw std::invalid_argument("clutter density must be positive");
      norm += a.likelihood[k] / rho_i;
    }
    a.prior.assign(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
      if (!(norm > 0.0)) break;
      const double rho_i = rho[static_cast<std::size_t>(h.validated[k])];
      double p = pdpg * h.existence * (a.likelihood[k] / rho_i) / norm;
      if (p > kPriorCeiling) {
        p = kPriorCeiling;
        ++res.clamped;
      }
      a.prior[k] = p;
    }
  }

  // Density contributed to each measurement by every track.
  std::vector<double> contribution(rho.size(), 0.0);
  for (const auto& a : res.tracks) {
    for (std::size_t k = 0; k < a.validated.size(); ++k) {
      contribution[static_cast<std::size_t>(a.validated[k])] +=
          a.likelihood[k] * a.prior[k] / (1.0 - a.prior[k]);
    }
  }

  for (std::size_t t = 0; t < tracks.size(); ++t) {
    const auto& h = tracks[t];
    auto& a = res.tracks[t];
    const std::size_t n = a.validated.size();
    a.omega.assign(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
      const auto i = static_cast<std::size_t>(a.validated[k]);
      const double own = a.likelihood[k] * a.prior[k] / (1.0 - a.prior[k]);
      a.omega[k] = rho[i] + std::max(0.0, contribution[i] - own);
    }

    const std::size_t models = h.mu.size();
    a.model_delta.assign(models, 0.0);
    a.beta0.assign(models, 0.0);
    a.beta.assign(models, std::vector<double>(n, 0.0));
    a.delta = 0.0;
    for (std::size_t r = 0; r < models; ++r) {
      double s = 0.0;
      for (std::size_t k = 0; k < n; ++k) s += h.likelihood[r][k] / a.omega[k];
      a.model_delta[r] = pdpg * (1.0 - s);
      a.delta += h.mu[r] * a.model_delta[r];
      const double denom = 1.0 - a.model_delta[r];
      a.beta0[r] = (1.0 - pdpg) / denom;
      for (std::size_t k = 0; k < n; ++k) a.beta[r][k] = pdpg * h.likelihood[r][k] / (denom * a.omega[k]);
    }
    a.existence = (1.0 - a.delta) * h.existence / (1.0 - a.delta * h.existence);
    a.mu.assign(models, 0.0);
    for (std::size_t r = 0; r < models; ++r) {
      a.mu[r] = h.mu[r] * (1.0 - a.model_delta[r]) / (1.0 - a.delta);
    }
  }
  return res;
}

std::vector<Point2> ellipse_intersections(const Point2& tx, const Point2& rx1, double r1,
                                          const Point2& rx2, double r2) {
  std::vector<Point2> out;
  const EllipseFromFocus e(tx, rx1, r1);
  if (!e.valid || r2 <= (rx2 - tx).norm()) return out;
  auto f = [&](double theta) {
    const Point2 p = e.at(theta);
    return (p - tx).norm() + (p - rx2).norm() - r2;
  };
  const double step = 2.0 * kPi / kEllipseSamples;
  double a = -kPi;
  double fa = f(a);
  for (int i = 1; i <= kEllipseSamples; ++i) {
    double b = -kPi + i * step;
    double fb = f(b);
    if (fa == 0.0) {
      out.push_back(e.at(a));
    } else if (fa * fb < 0.0) {
      double lo = a;
      double hi = b;
      double flo = fa;
      for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = f(mid);
        if ((fm < 0.0) == (flo < 0.0)) {
          lo = mid;
          flo = fm;
        } else {
          hi = mid;
        }
      }
      out.push_back(e.at(0.5 * (lo + hi)));
    }
    a = b;
    fa = fb;
  }
  return out;
}

std::vector<PositionFix> position_fixes(const ScenarioMap& map,
                                        const std::vector<std::vector<Measurement>>& per_receiver,
                                        const std::vector<std::vector<int>>& unused,
                                        const InitiationConfig& cfg) {
  std::vector<PositionFix> fixes;
  const auto& rxs = map.sensors.receivers;
  const std::size_t nrx = std::min(rxs.size(), per_receiver.size());

  if (nrx == 1) {
    // Range-only fallback.
    Point2 anchor = 0.5 * (map.bounds.min_corner + map.bounds.max_corner);
    for (int idx : unused[0]) {
      const auto& m = per_receiver[0][static_cast<std::size_t>(idx)];
      const Point2& tx = transmitter_of(map, m);
      const EllipseFromFocus e(tx, rxs[0].position, m.z(0));
      if (!e.valid) continue;
      Point2 target_anchor = anchor;
      double best_zone = std::numeric_limits<double>::infinity();
      for (const auto& z : map.intersection_zones) {
        const Point2 c = 0.5 * (z.min_corner + z.max_corner);
        const double d = (c - tx).norm();
        if (d < best_zone) {
          best_zone = d;
          target_anchor = c;
        }
      }
      Point2 best = e.at(0.0);
      double best_d = std::numeric_limits<double>::infinity();
      for (int i = 0; i < kEllipseSamples; ++i) {
        const Point2 p = e.at(-kPi + 2.0 * kPi * i / kEllipseSamples);
        const double d = (p - target_anchor).norm();
        if (d < best_d) {
          best_d = d;
          best = p;
        }
      }
      PositionFix f;
      f.position = best;
      f.covariance = Mat2::Identity() * 100.0;
      f.sources = {{0, idx}};
      f.low_confidence = true;
      fixes.push_back(f);
    }
    return fixes;
  }

  for (std::size_t a = 0; a < nrx; ++a) {
    for (std::size_t b = a + 1; b < nrx; ++b) {
      const double baseline = (rxs[a].position - rxs[b].position).norm();
      for (int ia : unused[a]) {
        const auto& ma = per_receiver[a][static_cast<std::size_t>(ia)];
        for (int ib : unused[b]) {
          const auto& mb = per_receiver[b][static_cast<std::size_t>(ib)];
          if (ma.transmitter != mb.transmitter) continue;
          const double slack = 3.0 * (std::sqrt(ma.R(0, 0)) + std::sqrt(mb.R(0, 0)));
          if (std::abs(ma.z(0) - mb.z(0)) > baseline + slack) continue;
          const Point2& tx = transmitter_of(map, ma);
          for (const Point2& p : ellipse_intersections(tx, rxs[a].position, ma.z(0),
                                                       rxs[b].position, mb.z(0))) {
            if (!map.bounds.contains(p) || inside_any_building(map, p)) continue;
            const Vec2 ut = (p - tx).normalized();
            Mat2 J;
            J.row(0) = (ut + (p - rxs[a].position).normalized()).transpose();
            J.row(1) = (ut + (p - rxs[b].position).normalized()).transpose();
            Eigen::JacobiSVD<Mat2> svd(J);
            const double smin = svd.singularValues()(1);
            if (!(smin > 0.0) || svd.singularValues()(0) / smin > cfg.max_condition) continue;
            const Mat2 Ji = J.inverse();
            Mat2 Rr = Mat2::Zero();
            Rr(0, 0) = ma.R(0, 0);
            Rr(1, 1) = mb.R(0, 0);
            PositionFix f;
            f.position = p;
            f.covariance = Ji * Rr * Ji.transpose();
            f.sources = {{static_cast<int>(a), ia}, {static_cast<int>(b), ib}};
            fixes.push_back(f);
          }
        }
      }
    }
  }
  return fixes;
}

std::vector<Track> initiate_tracks(const ScenarioMap& map, const std::vector<PositionFix>& previous,
                                   const std::vector<PositionFix>& current,
                                   const std::vector<std::vector<Measurement>>& per_receiver,
                                   const InitiationConfig& cfg, const ExistenceModel& existence,
                                   const std::vector<ModelId>& models, int scan, int& next_id) {
  if (models.empty()) throw std::invalid_argument("initiation needs a model set");
  const double T = cfg.period;
  std::vector<Track> out;
  for (const auto& c : current) {
    double best_score = std::numeric_limits<double>::infinity();
    GaussianState best;
    for (const auto& p : previous) {
      const Vec2 d = c.position - p.position;
      const Mat2 Pd = p.covariance + c.covariance;
      bool inside = true;
      for (int ax = 0; ax < 2; ++ax) {
        const double sigma = std::sqrt(cfg.speed_sigma * cfg.speed_sigma + Pd(ax, ax) / (T * T));
        if (std::abs(d(ax)) > (cfg.max_speed + 2.0 * sigma) * T) inside = false;
      }
      if (!inside) continue;

      GaussianState g;
      const Vec2 v = d / T;
      g.mean = make_state(c.position.x(), v.x(), c.position.y(), v.y());
      g.P.setZero();
      const int pos[2] = {state_index::kX, state_index::kY};
      const int vel[2] = {state_index::kVx, state_index::kVy};
      for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
          g.P(pos[i], pos[j]) = c.covariance(i, j);
          g.P(vel[i], vel[j]) = Pd(i, j) / (T * T);
          g.P(pos[i], vel[j]) = c.covariance(i, j) / T;
          g.P(vel[j], pos[i]) = c.covariance(i, j) / T;
        }
      }
      g.P(state_index::kAx, state_index::kAx) = cfg.accel_variance;
      g.P(state_index::kAy, state_index::kAy) = cfg.accel_variance;

      // Range-rate consistency against the measurements behind the current fix.
      double chi2 = 0.0;
      for (const auto& [rx, idx] : c.sources) {
        const auto& m = per_receiver[static_cast<std::size_t>(rx)][static_cast<std::size_t>(idx)];
        const Point2& tx = transmitter_of(map, m);
        const Point2& rxp = map.sensors.receivers[static_cast<std::size_t>(rx)].position;
        const MeasVector zp = measurement_function(g.mean, tx, rxp);
        const Mat26 H = measurement_jacobian(g.mean, tx, rxp);
        const double var = (H * g.P * H.transpose())(1, 1) + m.R(1, 1);
        const double e = m.z(1) - zp(1);
        chi2 += e * e / var;
      }
      if (chi2 >= cfg.rdot_gate_sq || chi2 >= best_score) continue;
      best_score = chi2;
      best = g;
    }
    if (!std::isfinite(best_score)) continue;

    Track t;
    t.id = next_id++;
    t.status = TrackStatus::kTentative;
    t.existence = existence.initial;
    t.combined = best;
    t.created_scan = scan;
    t.low_confidence = c.low_confidence;
    for (ModelId id : models) {
      ModelFilterState s;
      s.model = id;
      s.mean = best.mean;
      s.P = best.P;
      s.mu = 1.0 / static_cast<double>(models.size());
      t.models.push_back(s);
    }
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<StatusChange> update_lifecycle(std::vector<Track>& tracks, const ExistenceModel& model,
                                           int scan) {
  std::vector<StatusChange> changes;
  for (auto& t : tracks) {
    if (!t.active()) continue;
    const TrackStatus before = t.status;
    if (t.existence < model.terminate) {
      t.status = TrackStatus::kTerminated;
      t.terminated_scan = scan;
    } else if (t.status == TrackStatus::kTentative && t.existence >= model.confirm) {
      t.status = TrackStatus::kConfirmed;
      t.confirmed_scan = scan;
    }
    if (t.status != before) changes.push_back({t.id, before, t.status});
  }
  return changes;
}

}  // namespace urbantrack
