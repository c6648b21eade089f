// Forward flight model: runs the per-motion force balance forward to get rotor frequencies,
// kinematics and line-of-sight flags on a fixed simulation step.
#pragma once

#include "aim/scenario.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace aim {

struct TruthStep {
  double t = 0.0;
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  double yaw = 0.0;
  double yaw_rate = 0.0;
  std::vector<double> rotor_freqs;  // Hz, rotation frequency per rotor
  MotionKind kind = MotionKind::Hover;
  int segment = 0;
  bool in_ramp = false;    // inside the rotor-frequency join ramp of a segment
  std::vector<char> los;   // per array, 1 = line of sight to the array origin
};

struct GroundTruth {
  double step = 1e-3;
  std::vector<TruthStep> steps;

  double duration() const { return steps.empty() ? 0.0 : steps.back().t; }

  /// Nearest simulation step to time t (clamped).
  const TruthStep& at(double t) const {
    long k = std::lround(t / step);
    k = std::clamp<long>(k, 0, static_cast<long>(steps.size()) - 1);
    return steps[static_cast<std::size_t>(k)];
  }

  /// Linearly interpolated position at time t.
  Vec3 position(double t) const {
    double x = std::clamp(t / step, 0.0, static_cast<double>(steps.size() - 1));
    auto k = static_cast<std::size_t>(std::floor(x));
    if (k + 1 >= steps.size()) return steps.back().position;
    double w = x - static_cast<double>(k);
    return (1.0 - w) * steps[k].position + w * steps[k + 1].position;
  }
};

namespace detail {

/// Rest-to-rest speed profile reaching `target` with acceleration `accel` inside `duration`.
struct SpeedProfile {
  double target, accel, duration, peak, t_up;

  SpeedProfile(double v, double a, double d) : target(std::abs(v)), accel(a), duration(d) {
    t_up = std::min(target / accel, 0.5 * d);
    peak = accel * t_up;
  }

  double speed(double t) const {
    if (t < t_up) return accel * t;
    if (t > duration - t_up) return std::max(0.0, accel * (duration - t));
    return peak;
  }

  double accel_at(double t) const {
    if (t < t_up) return accel;
    if (t > duration - t_up) return -accel;
    return 0.0;
  }

  double distance(double t) const {
    t = std::clamp(t, 0.0, duration);
    double d = 0.0;
    double a_end = std::min(t, t_up);
    d += 0.5 * accel * a_end * a_end;
    double cruise_end = std::min(t, duration - t_up);
    if (cruise_end > t_up) d += peak * (cruise_end - t_up);
    if (t > duration - t_up) {
      double s = t - (duration - t_up);
      d += peak * s - 0.5 * accel * s * s;
    }
    return d;
  }
};

}  // namespace detail

/// Closed-form rotor frequency for a vertical state (speed v signed, acceleration a).
inline double vertical_rotor_freq(const DroneProfile& p, double v, double a) {
  double thrust = p.mass * (a + kGravity) + p.drag_v * v * std::abs(v);
  if (thrust <= 0.0) return -1.0;
  return std::sqrt(thrust / (p.rotor_count * p.lift_coeff));
}

/// Per-group frequencies (first, second) for horizontal flight with along-track acceleration a at speed v.
inline std::pair<double, double> horizontal_group_freqs(const DroneProfile& p, double v, double a) {
  double th = p.mass * a + p.drag_h * v * v;
  double thrust = std::hypot(th, p.weight());
  const auto& g = p.pitch_groups;
  double hi = 1.0 + p.pitch_split, lo = 1.0 - p.pitch_split;
  if (th < 0) std::swap(hi, lo);
  double denom = g.first.size() * hi * hi + g.second.size() * lo * lo;
  double mean = std::sqrt(thrust / (p.lift_coeff * denom));
  return {mean * hi, mean * lo};
}

/// Per-group frequencies (first, second) for a yaw angular acceleration beta at vertical balance.
inline std::pair<double, double> yaw_group_freqs(const DroneProfile& p, double beta) {
  double total = p.weight() / p.lift_coeff;
  double diff = p.inertia * beta / p.drag_coeff;
  double f1 = (total + diff) / (2.0 * static_cast<double>(p.yaw_groups.first.size()));
  double f2 = (total - diff) / (2.0 * static_cast<double>(p.yaw_groups.second.size()));
  if (f1 <= 0 || f2 <= 0) return {-1.0, -1.0};
  return {std::sqrt(f1), std::sqrt(f2)};
}

inline GroundTruth plan_flight(const Scenario& sc) {
  validate(sc);
  const DroneProfile& p = sc.profile;
  const double dt = sc.sim_step;
  const double f_max = p.hover_freq * p.max_freq_ratio;
  GroundTruth truth;
  truth.step = dt;

  const double total = sc.duration();
  const long n_steps = std::lround(total / dt);
  truth.steps.reserve(static_cast<std::size_t>(n_steps) + 1);

  std::vector<double> seg_start(sc.segments.size());
  std::vector<Vec3> seg_pos(sc.segments.size());
  std::vector<double> seg_yaw(sc.segments.size());
  {
    double t = 0.0;
    Vec3 pos = sc.start_position;
    double yaw = sc.start_yaw;
    for (std::size_t i = 0; i < sc.segments.size(); ++i) {
      const Segment& s = sc.segments[i];
      seg_start[i] = t;
      seg_pos[i] = pos;
      seg_yaw[i] = yaw;
      detail::SpeedProfile prof(s.magnitude, sc.ramp_accel, s.duration);
      if (s.kind == MotionKind::Horizontal)
        pos += prof.distance(s.duration) * Vec3(std::cos(yaw + s.direction), std::sin(yaw + s.direction), 0.0);
      else if (s.kind == MotionKind::Vertical)
        pos.z() += (s.magnitude >= 0 ? 1.0 : -1.0) * prof.distance(s.duration);
      else if (s.kind == MotionKind::Yaw)
        yaw = wrap_angle(yaw + s.magnitude * s.duration * s.duration / 4.0);
      if (pos.z() < 0.0)
        fail(ErrorCode::InvalidInput, "segments[" + std::to_string(i) + "] descends below the floor");
      t += s.duration;
    }
  }

  std::vector<double> prev_end(static_cast<std::size_t>(p.rotor_count), p.hover_freq);
  std::size_t seg = 0;
  for (long k = 0; k <= n_steps; ++k) {
    double t = static_cast<double>(k) * dt;
    while (seg + 1 < sc.segments.size() && t >= seg_start[seg + 1] - 1e-12) {
      // Remember the frequencies at the very end of the finished segment for the join ramp.
      if (!truth.steps.empty()) prev_end = truth.steps.back().rotor_freqs;
      ++seg;
    }
    const Segment& s = sc.segments[seg];
    double tl = std::min(t - seg_start[seg], s.duration);
    TruthStep st;
    st.t = t;
    st.kind = s.kind;
    st.segment = static_cast<int>(seg);
    st.position = seg_pos[seg];
    st.yaw = seg_yaw[seg];
    st.rotor_freqs.assign(static_cast<std::size_t>(p.rotor_count), p.hover_freq);
    detail::SpeedProfile prof(s.magnitude, sc.ramp_accel, s.duration);
    auto reject = [&](const std::string& why) {
      fail(ErrorCode::InvalidInput, "segments[" + std::to_string(seg) + "]: commanded motion unreachable (" + why + ")");
    };

    switch (s.kind) {
      case MotionKind::Hover: break;
      case MotionKind::Vertical: {
        double sign = s.magnitude >= 0 ? 1.0 : -1.0;
        double v = sign * prof.speed(tl), a = sign * prof.accel_at(tl);
        st.position.z() += sign * prof.distance(tl);
        st.velocity.z() = v;
        double f = vertical_rotor_freq(p, v, a);
        if (f <= 0.0 || f > f_max) reject("thrust outside motor range");
        std::fill(st.rotor_freqs.begin(), st.rotor_freqs.end(), f);
        break;
      }
      case MotionKind::Horizontal: {
        double heading = seg_yaw[seg] + s.direction;
        Vec3 dir(std::cos(heading), std::sin(heading), 0.0);
        double v = prof.speed(tl), a = prof.accel_at(tl);
        st.position += prof.distance(tl) * dir;
        st.velocity = v * dir;
        auto [f1, f2] = horizontal_group_freqs(p, v, a);
        if (std::max(f1, f2) > f_max) reject("tilt thrust outside motor range");
        for (int i : p.pitch_groups.first) st.rotor_freqs[static_cast<std::size_t>(i)] = f1;
        for (int i : p.pitch_groups.second) st.rotor_freqs[static_cast<std::size_t>(i)] = f2;
        break;
      }
      case MotionKind::Yaw: {
        double half = 0.5 * s.duration;
        double beta = tl < half ? s.magnitude : -s.magnitude;
        if (tl < half) {
          st.yaw_rate = s.magnitude * tl;
          st.yaw = seg_yaw[seg] + 0.5 * s.magnitude * tl * tl;
        } else {
          double u = tl - half;
          st.yaw_rate = s.magnitude * (half - u);
          st.yaw = seg_yaw[seg] + 0.5 * s.magnitude * half * half + s.magnitude * half * u - 0.5 * s.magnitude * u * u;
        }
        st.yaw = wrap_angle(st.yaw);
        auto [f1, f2] = yaw_group_freqs(p, beta);
        if (f1 <= 0.0 || std::max(f1, f2) > f_max) reject("yaw torque outside motor range");
        for (int i : p.yaw_groups.first) st.rotor_freqs[static_cast<std::size_t>(i)] = f1;
        for (int i : p.yaw_groups.second) st.rotor_freqs[static_cast<std::size_t>(i)] = f2;
        break;
      }
    }

    if (seg > 0 && tl < sc.ramp_time) {
      double w = tl / sc.ramp_time;
      for (std::size_t i = 0; i < st.rotor_freqs.size(); ++i)
        st.rotor_freqs[i] = (1.0 - w) * prev_end[i] + w * st.rotor_freqs[i];
      st.in_ramp = true;
    }

    st.los.resize(sc.arrays.size());
    for (std::size_t a = 0; a < sc.arrays.size(); ++a)
      st.los[a] = blocking_obstacle(st.position, sc.arrays[a].origin, sc.obstacles) < 0 ? 1 : 0;
    truth.steps.push_back(std::move(st));
  }
  return truth;
}

}  // namespace aim
