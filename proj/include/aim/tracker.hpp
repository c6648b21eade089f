// Position-only Kalman filter driven by the dynamics displacement, with DoA fixes as
// measurements, NLoS dead reckoning and a two-way heading hypothesis set.
#pragma once

#include "aim/config.hpp"
#include "aim/dynamics.hpp"

#include <Eigen/Eigenvalues>

#include <limits>
#include <optional>
#include <vector>

namespace aim {

struct HeadingHypothesis {
  double yaw = 0.0;     // rad, direction of forward travel
  double weight = 1.0;
  Vec3 position = Vec3::Zero();
};

struct TrackState {
  Vec3 position = Vec3::Zero();  // hypothesis 0
  Mat3 P = Mat3::Zero();
  std::vector<HeadingHypothesis> hypotheses;
  bool los = true;
  bool initialized = false;
  double t = 0.0;
};

struct Measurement {
  Vec3 z = Vec3::Zero();
  Mat3 R = Mat3::Identity();
};

inline void check_invariants(const TrackState& s) {
  require(s.hypotheses.size() == 1 || s.hypotheses.size() == 2, "track must hold one or two hypotheses");
  double w = 0.0;
  for (const auto& h : s.hypotheses) w += h.weight;
  require(std::abs(w - 1.0) < 1e-9, "hypothesis weights must sum to 1");
  require((s.P - s.P.transpose()).cwiseAbs().maxCoeff() < 1e-9, "covariance must be symmetric");
  Eigen::SelfAdjointEigenSolver<Mat3> eig(s.P, Eigen::EigenvaluesOnly);
  require(eig.eigenvalues().minCoeff() >= -1e-9, "covariance must be positive semi-definite");
}

inline TrackState init_track(const std::vector<Vec3>& fixes, double heading = 0.0, double floor = 0.05) {
  if (fixes.size() < 3) fail(ErrorCode::NotReady, "need at least 3 fixes to start a track");
  Vec3 mean = Vec3::Zero();
  for (const auto& f : fixes) mean += f;
  mean /= static_cast<double>(fixes.size());
  Mat3 cov = Mat3::Zero();
  for (const auto& f : fixes) cov += (f - mean) * (f - mean).transpose();
  cov /= static_cast<double>(fixes.size() - 1);
  TrackState s;
  s.position = mean;
  s.P = cov + floor * floor * Mat3::Identity();
  s.hypotheses = {{heading, 1.0, mean}};
  s.initialized = true;
  return s;
}

/// Body-frame step from the dynamics module: metres forward along the heading and up, plus a
/// committed yaw magnitude.
struct Displacement {
  double forward = 0.0;
  double up = 0.0;
  double yaw = 0.0;
};

inline Displacement displacement_of(const MotionStep& m) { return {m.forward, m.up, m.yaw_delta}; }

/// A-priori state. A yaw splits the set into +yaw / -yaw branches (at most two are kept).
inline TrackState predict(const TrackState& s, const Displacement& d, const PipelineConfig& cfg) {
  require(s.initialized, "predict needs an initialized track");
  TrackState out = s;
  if (d.yaw > 0.0) {
    const auto& h0 = s.hypotheses.front();
    const auto& h1 = s.hypotheses.back();
    // Each branch keeps its own lineage; a second branch starts from hypothesis 0 when none exists.
    HeadingHypothesis plus = h0, minus = s.hypotheses.size() == 2 ? h1 : h0;
    plus.yaw = wrap_angle(h0.yaw + d.yaw);
    minus.yaw = wrap_angle(minus.yaw - d.yaw);
    plus.weight = minus.weight = 0.5;
    out.hypotheses = {plus, minus};
  }
  for (auto& h : out.hypotheses)
    h.position += Vec3(d.forward * std::cos(h.yaw), d.forward * std::sin(h.yaw), d.up);
  out.position = out.hypotheses.front().position;
  double mag = std::hypot(d.forward, d.up);
  double q = cfg.process_floor * cfg.process_floor + std::pow(cfg.q_scale * mag, 2);
  out.P = s.P + q * Mat3::Identity();
  return out;
}

/// Position fix from a DoA at a given height above the array, with its covariance projected
/// from the angular error. Returns nothing when the elevation is below the horizon guard.
inline std::optional<Measurement> doa_measurement(const DoAEstimate& doa, const Vec3& array_origin, double height,
                                                  const PipelineConfig& cfg) {
  if (!std::isfinite(doa.azimuth) || !std::isfinite(doa.elevation) || !std::isfinite(height)) return std::nullopt;
  if (doa.elevation < deg2rad(cfg.horizon_guard) || height <= 0.0) return std::nullopt;
  double r = horizontal_range(height, doa.elevation);
  double ca = std::cos(doa.azimuth), sa = std::sin(doa.azimuth);
  double se = std::sin(doa.elevation);
  Vec3 j_az(-r * sa, r * ca, 0.0);
  Vec3 j_el(-height / (se * se) * ca, -height / (se * se) * sa, 0.0);
  Measurement m;
  m.z = array_origin + Vec3(r * ca, r * sa, height);
  double s2 = cfg.doa_sigma * cfg.doa_sigma;
  m.R = cfg.r_scale * s2 * (j_az * j_az.transpose() + j_el * j_el.transpose());
  m.R(2, 2) += cfg.height_sigma * cfg.height_sigma;
  m.R += 1e-4 * Mat3::Identity();
  return m;
}

/// A-posteriori state. NLoS (or a missing/non-finite fix) keeps the prior. Two hypotheses
/// collapse onto the one nearer the fix once their predictions are resolvably apart.
inline TrackState update(const TrackState& prior, const std::optional<Measurement>& m, bool nlos) {
  TrackState s = prior;
  s.los = !nlos;
  if (nlos || !m || !m->z.allFinite() || !m->R.allFinite()) return s;
  if (s.hypotheses.size() == 2) {
    const auto& a = s.hypotheses[0];
    const auto& b = s.hypotheses[1];
    double sep = (a.position - b.position).head<2>().norm();
    double noise = std::sqrt(m->R.topLeftCorner<2, 2>().trace());
    if (sep > 2.0 * noise) {
      bool keep_a = (a.position - m->z).head<2>().norm() <= (b.position - m->z).head<2>().norm();
      HeadingHypothesis kept = keep_a ? a : b;
      kept.weight = 1.0;
      s.hypotheses = {kept};
    }
  }
  Mat3 S = s.P + m->R;
  Mat3 K = s.P * S.inverse();
  Mat3 IK = Mat3::Identity() - K;
  for (auto& h : s.hypotheses) h.position += K * (m->z - h.position);
  // Joseph form keeps P symmetric PSD under round-off.
  s.P = IK * s.P * IK.transpose() + K * m->R * K.transpose();
  s.P = 0.5 * (s.P + s.P.transpose());
  s.position = s.hypotheses.front().position;
  return s;
}

// ---------------------------------------------------------------------------------------------
// Streaming tracker

struct TrackRow {
  double t = 0.0;
  Vec3 position = Vec3::Zero();
  bool los = true;
  int n_hypotheses = 1;
};

/// One drone, one array: owns the track, collects fixes until it can start and re-anchors the
/// heading from consecutive fixes while flying forward in line of sight.
class Tracker {
 public:
  Tracker(PipelineConfig cfg, Vec3 array_origin, double initial_height, double initial_heading)
      : cfg_(std::move(cfg)), origin_(std::move(array_origin)), height_(initial_height), heading_(initial_heading) {}

  TrackRow step(double t, const MotionStep& motion, const std::optional<DoAEstimate>& doa, bool nlos) {
    std::optional<Measurement> m;
    if (!state_.initialized) {
      height_ += motion.up;
      if (doa) m = doa_measurement(*doa, origin_, height_ - origin_.z(), cfg_);
      if (m && !nlos) fixes_.push_back(m->z);
      if (m && !nlos) last_fix_ = m->z;
      if (fixes_.size() >= 3) {
        state_ = init_track(fixes_, heading_, cfg_.process_floor);
        state_.t = t;
      }
      TrackRow row{t, last_fix_.value_or(origin_ + Vec3(0, 0, height_ - origin_.z())), !nlos, 1};
      if (state_.initialized) row.position = state_.position;
      return row;
    }
    state_ = predict(state_, displacement_of(motion), cfg_);
    if (doa && !nlos) m = doa_measurement(*doa, origin_, state_.position.z() - origin_.z(), cfg_);
    if (m && !gate(*m)) m = reacquire(motion, *m);
    else rejected_.clear();
    state_ = update(state_, m, nlos);
    state_.t = t;
    reanchor(motion, m, nlos);
    check_invariants(state_);
    return {t, state_.position, state_.los, static_cast<int>(state_.hypotheses.size())};
  }

  const TrackState& state() const { return state_; }

 private:
  /// Squared Mahalanobis distance of the fix from the nearest hypothesis.
  double innovation(const Measurement& m) const {
    Mat3 S_inv = (state_.P + m.R).inverse();
    double best = std::numeric_limits<double>::infinity();
    for (const auto& h : state_.hypotheses) {
      Vec3 nu = m.z - h.position;
      best = std::min(best, nu.dot(S_inv * nu));
    }
    return best;
  }

  bool gate(const Measurement& m) const { return innovation(m) <= cfg_.gate_chi2; }

  // A reflection that holds still looks like a valid fix, so gated fixes only restart the track
  // when they persist through forward flight (where reflections jitter and trip the NLoS test).
  // The speed check matters while braking: the label is still horizontal but the image is still.
  std::optional<Measurement> reacquire(const MotionStep& motion, const Measurement& m) {
    if (motion.kind != MotionKind::Horizontal || motion.speed < kReacquireSpeed) {
      rejected_.clear();
      return std::nullopt;
    }
    rejected_.push_back(m.z);
    if (static_cast<int>(rejected_.size()) < cfg_.reacquire_hops) return std::nullopt;
    // The rejected fixes also say which way the drone is going.
    double yaw = state_.hypotheses.front().yaw;
    Vec3 head = (rejected_[0] + rejected_[1] + rejected_[2]) / 3.0;
    Vec3 tail = (rejected_.end()[-1] + rejected_.end()[-2] + rejected_.end()[-3]) / 3.0;
    if ((tail - head).head<2>().norm() > 0.5) yaw = std::atan2(tail.y() - head.y(), tail.x() - head.x());
    auto restarted = init_track({rejected_.end() - 3, rejected_.end()}, yaw, cfg_.process_floor);
    restarted.P += m.R;
    state_ = restarted;
    rejected_.clear();
    anchor_.reset();
    return std::nullopt;
  }

  // While moving forward in LoS, the direction between fixes a metre or more apart replaces the
  // heading and settles any open yaw ambiguity.
  void reanchor(const MotionStep& motion, const std::optional<Measurement>& m, bool nlos) {
    if (motion.kind != MotionKind::Horizontal || nlos || !m) {
      if (motion.kind != MotionKind::Horizontal) anchor_.reset();
      if (nlos) anchor_.reset();
      return;
    }
    travelled_ += motion.forward;
    if (!anchor_) {
      anchor_ = m->z;
      travelled_ = 0.0;
      return;
    }
    Vec3 moved = m->z - *anchor_;
    if (travelled_ < 1.0 || moved.head<2>().norm() < 0.5 * travelled_) return;
    double yaw = std::atan2(moved.y(), moved.x());
    auto& hyps = state_.hypotheses;
    std::size_t best = 0;
    for (std::size_t i = 1; i < hyps.size(); ++i)
      if (std::abs(wrap_angle(hyps[i].yaw - yaw)) < std::abs(wrap_angle(hyps[best].yaw - yaw))) best = i;
    HeadingHypothesis kept = hyps[best];
    kept.yaw = yaw;
    kept.weight = 1.0;
    hyps = {kept};
    state_.position = kept.position;
  }

  static constexpr double kReacquireSpeed = 0.5;  // m/s

  PipelineConfig cfg_;
  Vec3 origin_;
  double height_;
  double heading_;
  TrackState state_;
  std::vector<Vec3> fixes_;
  std::vector<Vec3> rejected_;
  std::optional<Vec3> last_fix_;
  std::optional<Vec3> anchor_;
  double travelled_ = 0.0;
};

}  // namespace aim
