// Motion classification and dynamics inversion: spectral frequency families to yaw
// acceleration, horizontal and vertical kinematics, plus the per-track motion accumulator.
#pragma once

#include "aim/doa.hpp"
#include "aim/profile.hpp"
#include "aim/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <optional>
#include <vector>

namespace aim {

/// (peak groups, DoA stability) to motion.
inline MotionKind classify_motion(int group_count, Stability stability) {
  require(group_count == 1 || group_count == 2, "group count must be 1 or 2");
  if (group_count == 1) return stability == Stability::Stable ? MotionKind::Hover : MotionKind::Vertical;
  return stability == Stability::Stable ? MotionKind::Yaw : MotionKind::Horizontal;
}

struct KinematicEstimate {
  double t = 0.0;
  MotionKind kind = MotionKind::Hover;
  std::optional<double> beta;  // rad/s^2, magnitude (sign is ambiguous)
  std::optional<double> v_h, a_h, tilt;
  std::optional<double> v_v, a_v;
  double dpsi = 0.0;  // rad, rotation of the current yaw segment so far (magnitude)
};

/// Sum of squared blade passing frequencies per rotor group. With two families the stronger
/// one is assigned to the larger group; equal groups take them in detection order.
struct GroupPowers {
  double first = 0.0;   // sum over group 1 of BPF^2
  double second = 0.0;  // sum over group 2 of BPF^2
  double total() const { return first + second; }
};

inline GroupPowers group_powers(const SpectralPeaks& peaks, const DroneProfile& p, MotionKind kind) {
  GroupPowers g;
  if (peaks.groups.size() < 2 || kind == MotionKind::Hover || kind == MotionKind::Vertical) {
    double f = combined_bpf(peaks);
    g.first = p.rotor_count * f * f;
    return g;
  }
  const auto& part = p.groups(kind);
  auto big = static_cast<double>(std::max(part.first.size(), part.second.size()));
  auto small = static_cast<double>(std::min(part.first.size(), part.second.size()));
  // groups[0] is the strongest family.
  double f_strong = peaks.groups[0].bpf, f_weak = peaks.groups[1].bpf;
  g.first = big * f_strong * f_strong;
  g.second = small * f_weak * f_weak;
  if (part.first.size() == part.second.size()) {
    // Report the higher-frequency family first so the nominal yaw sign is positive.
    double hi = std::max(f_strong, f_weak), lo = std::min(f_strong, f_weak);
    g.first = big * hi * hi;
    g.second = small * lo * lo;
  }
  return g;
}

/// beta = (k_h / n^2) * (sum_1 BPF^2 - sum_2 BPF^2) / I. The sign is nominal only.
inline double yaw_acceleration(const GroupPowers& g, const DroneProfile& p) {
  double n2 = static_cast<double>(p.blade_count * p.blade_count);
  return p.drag_coeff / n2 * (g.first - g.second) / p.inertia;
}

/// Collective thrust (k_v / n^2) * sum BPF^2.
inline double collective_thrust(const GroupPowers& g, const DroneProfile& p) {
  return p.lift_coeff / static_cast<double>(p.blade_count * p.blade_count) * g.total();
}

inline KinematicEstimate invert_yaw(const SpectralPeaks& peaks, const DroneProfile& p, double tau,
                                    double elapsed = 0.0) {
  require(peaks.groups.size() == 2, "yaw inversion needs exactly two frequency groups");
  KinematicEstimate k;
  k.kind = MotionKind::Yaw;
  k.beta = std::abs(yaw_acceleration(group_powers(peaks, p, MotionKind::Yaw), p));
  double d = elapsed + tau;
  // Rest-to-rest yaw: accelerate for half the segment, decelerate for the other half.
  k.dpsi = 0.25 * *k.beta * d * d;
  return k;
}

/// Horizontal step. sin(gamma) balances gravity; the remaining thrust drives the along-track
/// acceleration. `a_prev` picks the tilt sign (forward or braking) by continuity.
inline KinematicEstimate invert_horizontal(const SpectralPeaks& peaks, const DroneProfile& p, double v_prev,
                                           double tau, double a_prev = 0.0) {
  require(peaks.groups.size() == 2, "horizontal inversion needs exactly two frequency groups");
  double thrust = collective_thrust(group_powers(peaks, p, MotionKind::Horizontal), p);
  double s = p.weight() / thrust;
  if (s > 1.0) fail(ErrorCode::InfeasibleTilt, "thrust below weight");
  double gamma = std::asin(s);
  double th = thrust * std::cos(gamma);
  double drag = p.drag_h * v_prev * v_prev;
  double forward = (th - drag) / p.mass;
  double braking = (-th - drag) / p.mass;
  double a = forward;
  if (v_prev > 0.05 && std::abs(braking - a_prev) < std::abs(forward - a_prev)) a = braking;
  KinematicEstimate k;
  k.kind = MotionKind::Horizontal;
  k.tilt = gamma;
  k.a_h = a;
  k.v_h = std::max(0.0, v_prev + a * tau);
  return k;
}

inline KinematicEstimate invert_vertical(const SpectralPeaks& peaks, const DroneProfile& p, double v_prev,
                                         double tau) {
  require(!peaks.groups.empty(), "vertical inversion needs a frequency group");
  double thrust = collective_thrust(group_powers(peaks, p, MotionKind::Vertical), p);
  double drag = (v_prev > 0 ? 1.0 : v_prev < 0 ? -1.0 : 0.0) * p.drag_v * v_prev * v_prev;
  double a = (thrust - p.weight() - drag) / p.mass;
  KinematicEstimate k;
  k.kind = MotionKind::Vertical;
  k.a_v = a;
  k.v_v = v_prev + a * tau;
  return k;
}

// ---------------------------------------------------------------------------------------------
// Coordinate update

struct CoordinateUpdate {
  Vec3 position = Vec3::Zero();  // relative to the array origin
  double height = 0.0;           // h_{t+1}
  double residual = 0.0;         // horizontal: | |range change| - dynamics displacement |
  bool clamped = false;          // elevation too close to the horizon for a range fix
};

/// Horizontal range for a DoA at height h: h * cot(elevation).
inline double horizontal_range(double h, double elevation) { return h / std::tan(elevation); }

inline Vec3 doa_position(double h, const DoAEstimate& d) {
  double r = horizontal_range(h, d.elevation);
  return {r * std::cos(d.azimuth), r * std::sin(d.azimuth), h};
}

/// Position update from consecutive DoAs and the dynamics estimate over one interval tau.
inline CoordinateUpdate update_coordinates(const KinematicEstimate& kin, const DoAEstimate& doa_t,
                                           const DoAEstimate& doa_t1, double h_t, double tau,
                                           double horizon_guard_deg = 3.0) {
  CoordinateUpdate u;
  u.height = h_t;
  if (kin.kind == MotionKind::Vertical) {
    double dz = kin.v_v.value_or(0.0) * tau + 0.5 * kin.a_v.value_or(0.0) * tau * tau;
    u.height = h_t + dz;
  }
  u.clamped = doa_t1.elevation < deg2rad(horizon_guard_deg);
  if (kin.kind == MotionKind::Vertical || kin.kind == MotionKind::Hover || kin.kind == MotionKind::Yaw) {
    // Horizontal coordinates held: project the earlier direction at the new height.
    u.position = u.clamped ? Vec3(0, 0, u.height) : doa_position(h_t, doa_t1);
    u.position.z() = u.height;
    return u;
  }
  if (!u.clamped) {
    u.position = doa_position(h_t, doa_t1);
    Vec3 before = doa_position(h_t, doa_t);
    double moved = (u.position - before).head<2>().norm();
    double d = kin.v_h.value_or(0.0) * tau + 0.5 * kin.a_h.value_or(0.0) * tau * tau;
    u.residual = std::abs(moved - std::abs(d));
  }
  return u;
}

// ---------------------------------------------------------------------------------------------
// Motion accumulator

/// Displacement emitted for one hop, in the body frame of the active heading.
struct MotionStep {
  double t = 0.0;
  MotionKind kind = MotionKind::Hover;
  int group_count = 1;
  bool signal = true;         // false when the spectrum held no drone
  double forward = 0.0;       // m along the heading (includes catch-up after a relabel)
  double up = 0.0;            // m along +z
  double yaw_delta = 0.0;     // rad, magnitude committed at the end of a yaw segment
  double speed = 0.0;         // m/s, current horizontal or vertical speed estimate
  KinematicEstimate kin;
};

/// Integrates every inversion in the background over a segment of constant peak-group count
/// and commits displacement according to the current motion label.
class MotionAccumulator {
 public:
  MotionAccumulator(DroneProfile profile, double tau, double merge_hz = 4.0, int confirm = 2, int latch = 3,
                    int settle = 10)
      : p_(std::move(profile)), tau_(tau), merge_hz_(merge_hz), confirm_(confirm), latch_(latch), settle_(settle) {}

  /// One hop. `peaks` is empty when no drone was detected in this window.
  MotionStep step(double t, const std::optional<SpectralPeaks>& peaks, Stability stability) {
    MotionStep out;
    out.t = t;
    if (!peaks) {
      out.signal = false;
      out.kind = label_;
      return out;
    }
    int seen = peak_group_count(*peaks, merge_hz_);
    // A new group count has to persist for `confirm_` hops; single-frame blips at frequency
    // ramps would otherwise reset the segment.
    pending_ = seen == count_ ? 0 : pending_ + 1;
    if (!started_) {
      count_ = seen;
      pending_ = 0;
      started_ = true;
    } else if (pending_ >= confirm_) {
      // The unconfirmed hops already belong to the new segment.
      out.yaw_delta = close_segment(confirm_ - 1);
      count_ = seen;
      pending_ = 0;
    }
    int count = count_;
    out.group_count = count;
    // Translation sustained for `latch_` hops holds its label to the segment end: the DoA settles
    // while the drone brakes, and relabelling then would retract the whole leg.
    unstable_run_ = stability == Stability::Unstable ? unstable_run_ + 1 : 0;
    if (settling_ > 0) {
      // The DoA window still holds bearings from the previous leg.
      --settling_;
      unstable_run_ = 0;
    }
    if (unstable_run_ >= latch_ && !latched_ && count == 2 && yawing(latch_ - 1)) {
      // A yaw running straight into a leg: the hops that already show forward thrust belong to
      // the leg. Commit the turn without them, then replay them as the start of the leg.
      int lead = latch_ - 1;
      const auto n = std::ssize(recent_);
      while (lead < n && lead < hops_ && leg_start(recent_[static_cast<std::size_t>(n - 1 - lead)])) ++lead;
      lead = static_cast<int>(std::min<std::ptrdiff_t>(lead, n));
      const int run = unstable_run_;
      const double emitted = committed_forward_;  // unlatched horizontal hops already went out
      out.yaw_delta += close_segment(lead);
      unstable_run_ = run;
      committed_forward_ = emitted;
      for (auto it = recent_.end() - lead; it != recent_.end(); ++it) {
        advance_horizontal(*it);
        betas_.push_back(kNotLevel);
        labels_.push_back(MotionKind::Horizontal);
        elapsed_ += tau_;
        ++hops_;
      }
    }
    if (unstable_run_ >= latch_) latched_ = true;
    label_ = classify_motion(count, latched_ ? Stability::Unstable : stability);
    out.kind = label_;
    labels_.push_back(label_);

    if (count == 2 && peaks->groups.size() < 2) {
      // Families merged for a hop inside a two-group segment: keep coasting.
      out.kin.kind = label_;
      out.speed = v_h_;
      dist_h_ += v_h_ * tau_;
      betas_.push_back(mean_beta());
    } else if (count == 2) {
      out.kin = invert_yaw(*peaks, p_, tau_, elapsed_);
      // Braking or accelerating hops in a yaw segment are not part of the turn.
      betas_.push_back(leg_start(*peaks) ? kNotLevel : *out.kin.beta);
      if (auto h = advance_horizontal(*peaks)) {
        out.kin.v_h = h->v_h;
        out.kin.a_h = h->a_h;
        out.kin.tilt = h->tilt;
      }
      out.kin.kind = label_;
      out.speed = v_h_;
    } else {
      auto v = invert_vertical(*peaks, p_, v_v_, tau_);
      dist_v_ += v_v_ * tau_ + 0.5 * *v.a_v * tau_ * tau_;
      v_v_ = *v.v_v;
      out.kin = v;
      out.kin.kind = label_;
      out.speed = v_v_;
    }
    recent_.push_back(*peaks);
    if (std::ssize(recent_) > kRecentHops) recent_.pop_front();
    elapsed_ += tau_;
    ++hops_;

    double want_forward = label_ == MotionKind::Horizontal ? dist_h_ : 0.0;
    // Inside a turn an unlatched horizontal label may be a blip; hold the distance until the
    // latch decides, so it is not emitted along the pre-turn heading.
    if (label_ == MotionKind::Horizontal && !latched_ && count == 2 && yawing(0)) want_forward = committed_forward_;
    double want_up = label_ == MotionKind::Vertical ? dist_v_ : 0.0;
    out.forward = want_forward - committed_forward_;
    out.up = want_up - committed_up_;
    committed_forward_ = want_forward;
    committed_up_ = want_up;
    peak_v_ = std::max(peak_v_, v_h_);
    // A latched leg that has braked back to rest is over even if the group count carries on into
    // a yaw (both split the rotors into two families).
    if (latched_ && peak_v_ > kLegSpeed && (v_h_ < kRestSpeed || level_run_ >= confirm_)) {
      close_segment();
      settling_ = settle_;
    }
    return out;
  }

  /// Flushes the open segment (end of stream); returns a pending yaw rotation.
  double finish() { return close_segment(); }

  int group_count() const { return count_; }
  MotionKind label() const { return label_; }

 private:
  /// Mostly labelled yaw (ignoring the last `drop` hops) and never latched into translation.
  bool yawing(int drop) const {
    auto n = std::ssize(labels_) - drop;
    if (latched_ || n <= 0) return false;
    auto yaw = std::count(labels_.begin(), labels_.begin() + n, MotionKind::Yaw);
    return 2 * yaw > n;
  }

  /// Forward acceleration from rest well above what a level yaw spectrum produces.
  bool leg_start(const SpectralPeaks& peaks) const {
    if (peaks.groups.size() < 2) return false;
    try {
      return *invert_horizontal(peaks, p_, 0.0, tau_).a_h >= kLegAccel;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::InfeasibleTilt) throw;
      return false;
    }
  }

  /// Mean |beta| and count over the level hops, ignoring the last `drop`.
  std::pair<double, int> level_beta(int drop = 0) const {
    auto n = std::ssize(betas_) - drop;
    double sum = 0.0;
    int count = 0;
    for (std::ptrdiff_t i = 0; i < n; ++i)
      if (auto b = betas_[static_cast<std::size_t>(i)]; !std::isnan(b)) {
        sum += b;
        ++count;
      }
    return {count > 0 ? sum / count : 0.0, count};
  }

  double mean_beta() const { return level_beta().first; }

  std::optional<KinematicEstimate> advance_horizontal(const SpectralPeaks& peaks) {
    try {
      auto h = invert_horizontal(peaks, p_, v_h_, tau_, a_h_);
      dist_h_ += v_h_ * tau_ + 0.5 * *h.a_h * tau_ * tau_;
      v_h_ = *h.v_h;
      a_h_ = *h.a_h;
      level_run_ = 0;
      return h;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::InfeasibleTilt) throw;
      // Thrust at or below weight: level attitude, only drag acts.
      a_h_ = -p_.drag_h * v_h_ * v_h_ / p_.mass;
      dist_h_ += v_h_ * tau_ + 0.5 * a_h_ * tau_ * tau_;
      v_h_ = std::max(0.0, v_h_ + a_h_ * tau_);
      ++level_run_;
      return std::nullopt;
    }
  }

  /// Ends the segment; the last `drop` hops already belong to the next one.
  double close_segment(int drop = 0) {
    double yaw = 0.0;
    if (count_ == 2 && yawing(drop)) {
      // Rest-to-rest turn over the level hops only.
      auto [beta, level] = level_beta(drop);
      double d = static_cast<double>(level) * tau_;
      yaw = 0.25 * beta * d * d;
    }
    v_h_ = a_h_ = v_v_ = 0.0;
    dist_h_ = dist_v_ = 0.0;
    committed_forward_ = committed_up_ = 0.0;
    betas_.clear();
    elapsed_ = 0.0;
    hops_ = 0;
    labels_.clear();
    unstable_run_ = 0;
    latched_ = false;
    peak_v_ = 0.0;
    level_run_ = 0;
    return yaw;
  }

  DroneProfile p_;
  double tau_;
  double merge_hz_;
  int confirm_;
  int latch_;
  int settle_;
  static constexpr double kLegSpeed = 0.3;   // m/s
  static constexpr double kRestSpeed = 0.05;  // m/s
  static constexpr double kLegAccel = 1.0;    // m/s^2
  static constexpr int kRecentHops = 20;
  static constexpr double kNotLevel = std::numeric_limits<double>::quiet_NaN();
  int settling_ = 0;
  double peak_v_ = 0.0;
  int level_run_ = 0;
  int pending_ = 0;
  int unstable_run_ = 0;
  bool latched_ = false;
  bool started_ = false;
  int count_ = 1;
  MotionKind label_ = MotionKind::Hover;
  double v_h_ = 0.0, a_h_ = 0.0, v_v_ = 0.0;
  double dist_h_ = 0.0, dist_v_ = 0.0;
  double committed_forward_ = 0.0, committed_up_ = 0.0;
  std::vector<double> betas_;
  std::deque<SpectralPeaks> recent_;
  double elapsed_ = 0.0;
  int hops_ = 0;
  std::vector<MotionKind> labels_;
};

}  // namespace aim
