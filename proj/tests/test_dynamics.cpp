#include "aim/dynamics.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

using namespace aimtest;

namespace {

// Peaks carrying the given per-rotor frequencies as BPF families, strongest first.
SpectralPeaks families(const DroneProfile& p, double f_strong, double f_weak = -1.0) {
  SpectralPeaks s;
  s.groups.push_back({f_strong * p.blade_count, 1.0});
  if (f_weak > 0) s.groups.push_back({f_weak * p.blade_count, 0.5});
  return s;
}

DoAEstimate doa_toward(const Vec3& v) {
  DoAEstimate d;
  d.azimuth = std::atan2(v.y(), v.x());
  d.elevation = std::atan2(v.z(), v.head<2>().norm());
  return d;
}

SpectralPeaks analyse(const Recording& rec, const DroneProfile& p, double t) {
  return estimate_bpf_groups(stft_magnitude(frame_at(rec, t)), p);
}

}  // namespace

TEST(Classify, AllFourCombinations) {
  EXPECT_EQ(classify_motion(1, Stability::Stable), MotionKind::Hover);
  EXPECT_EQ(classify_motion(1, Stability::Unstable), MotionKind::Vertical);
  EXPECT_EQ(classify_motion(2, Stability::Stable), MotionKind::Yaw);
  EXPECT_EQ(classify_motion(2, Stability::Unstable), MotionKind::Horizontal);
  EXPECT_THROW(classify_motion(3, Stability::Stable), Error);
}

TEST(Invert, YawMatchesForwardModel) {
  auto p = mini2_profile();
  for (double beta : {0.2, 0.8, 1.5}) {
    auto [f1, f2] = yaw_group_freqs(p, beta);
    auto k = invert_yaw(families(p, f1, f2), p, 0.1);
    EXPECT_NEAR(*k.beta, beta, 1e-9 * beta);
  }
}

TEST(Invert, YawScalesWithConstants) {
  auto p = mini2_profile();
  auto peaks = families(p, 168.0, 160.0);
  double base = *invert_yaw(peaks, p, 0.1).beta;
  auto q = p;
  q.drag_coeff *= 3.0;
  EXPECT_NEAR(*invert_yaw(peaks, q, 0.1).beta, 3.0 * base, 1e-9 * base);
  q = p;
  q.inertia *= 2.0;
  EXPECT_NEAR(*invert_yaw(peaks, q, 0.1).beta, 0.5 * base, 1e-9 * base);
  // Doubling every BPF quadruples the squared difference.
  EXPECT_NEAR(*invert_yaw(families(p, 336.0, 320.0), p, 0.1).beta, 4.0 * base, 1e-9 * base);
}

TEST(Invert, YawAngleIsRestToRest) {
  auto p = mini2_profile();
  auto [f1, f2] = yaw_group_freqs(p, 0.8);
  auto k = invert_yaw(families(p, f1, f2), p, 0.1, 1.9);
  EXPECT_NEAR(k.dpsi, 0.25 * 0.8 * 4.0, 1e-9);
}

TEST(Invert, HorizontalMatchesForwardModel) {
  auto p = mini2_profile();
  for (auto [v, a] : {std::pair{0.0, 2.0}, {1.0, 0.5}, {1.5, 0.0}}) {
    auto [f1, f2] = horizontal_group_freqs(p, v, a);
    auto k = invert_horizontal(families(p, f1, f2), p, v, 0.1, a);
    EXPECT_NEAR(*k.a_h, a, 1e-9) << v << " " << a;
    EXPECT_NEAR(*k.v_h, v + a * 0.1, 1e-9);
    EXPECT_GT(*k.tilt, 0.0);
  }
}

TEST(Invert, HorizontalBrakingFollowsContinuity) {
  auto p = mini2_profile();
  auto [f1, f2] = horizontal_group_freqs(p, 1.5, -2.0);
  auto k = invert_horizontal(families(p, f1, f2), p, 1.5, 0.1, -1.9);
  EXPECT_NEAR(*k.a_h, -2.0, 1e-9);
  // From rest the forward solution is the only physical one.
  auto s = invert_horizontal(families(p, f1, f2), p, 0.0, 0.1, -1.9);
  EXPECT_GT(*s.a_h, 0.0);
}

TEST(Invert, HorizontalBelowWeightIsInfeasible) {
  auto p = mini2_profile();
  try {
    invert_horizontal(families(p, 0.9 * p.hover_freq, 0.85 * p.hover_freq), p, 0.0, 0.1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InfeasibleTilt);
  }
}

TEST(Invert, VerticalMatchesForwardModel) {
  auto p = mini2_profile();
  for (auto [v, a] : {std::pair{0.0, 1.0}, {0.8, 0.0}, {-0.5, 0.3}, {0.5, -1.0}}) {
    double f = vertical_rotor_freq(p, v, a);
    auto k = invert_vertical(families(p, f), p, v, 0.1);
    EXPECT_NEAR(*k.a_v, a, 1e-9) << v << " " << a;
  }
  auto hover = invert_vertical(families(p, p.hover_freq), p, 0.0, 0.1);
  EXPECT_NEAR(*hover.a_v, 0.0, 1e-9);
}

TEST(Invert, YawFromSynthesizedClip) {
  auto sc = single_motion(MotionKind::Yaw, 4.0, 0.8);
  auto rec = render(sc);
  auto peaks = analyse(rec, sc.profile, 1.0);
  ASSERT_EQ(peak_group_count(peaks), 2);
  EXPECT_NEAR(*invert_yaw(peaks, sc.profile, 0.1).beta, 0.8, 0.15 * 0.8);
}

TEST(Invert, HorizontalDistanceFromSynthesizedClip) {
  auto sc = single_motion(MotionKind::Horizontal, 4.0, 1.5, Vec3(-2, 2, 2));
  auto truth = plan_flight(sc);
  auto rec = render(sc);
  MotionAccumulator acc(sc.profile, 0.1);
  double forward = 0.0;
  for (double t = 0.1; t <= 4.0 + 1e-9; t += 0.1) forward += acc.step(t, analyse(rec, sc.profile, t), Stability::Unstable).forward;
  double moved = (truth.position(4.0) - truth.position(0.0)).norm();
  EXPECT_NEAR(forward, moved, 0.15 * moved);
}

TEST(Invert, ClimbFromSynthesizedClip) {
  auto sc = single_motion(MotionKind::Vertical, 3.0, 1.0, Vec3(2, 1, 1));
  auto truth = plan_flight(sc);
  auto rec = render(sc);
  MotionAccumulator acc(sc.profile, 0.1);
  double up = 0.0;
  for (double t = 0.1; t <= 3.0 + 1e-9; t += 0.1) up += acc.step(t, analyse(rec, sc.profile, t), Stability::Unstable).up;
  double climbed = truth.position(3.0).z() - truth.position(0.0).z();
  EXPECT_NEAR(up, climbed, 0.15 * climbed);
}

TEST(Coordinates, HorizontalUsesHeightAndElevation) {
  KinematicEstimate k;
  k.kind = MotionKind::Horizontal;
  k.v_h = 1.0;
  k.a_h = 0.0;
  Vec3 a(3, 0, 2), b(3, 0.1, 2);
  auto u = update_coordinates(k, doa_toward(a), doa_toward(b), 2.0, 0.1);
  EXPECT_LT((u.position - b).norm(), 1e-9);
  EXPECT_NEAR(u.residual, 0.0, 1e-9);
  EXPECT_FALSE(u.clamped);
}

TEST(Coordinates, VerticalMovesHeight) {
  KinematicEstimate k;
  k.kind = MotionKind::Vertical;
  k.v_v = 1.0;
  k.a_v = 2.0;
  Vec3 a(3, 1, 2);
  auto u = update_coordinates(k, doa_toward(a), doa_toward(a), 2.0, 0.1);
  EXPECT_NEAR(u.height, 2.0 + 0.1 + 0.01, 1e-12);
  EXPECT_NEAR(u.position.head<2>().norm(), a.head<2>().norm(), 1e-9);
}

TEST(Coordinates, HorizonGuard) {
  KinematicEstimate k;
  k.kind = MotionKind::Horizontal;
  Vec3 far(60, 0, 2);
  auto u = update_coordinates(k, doa_toward(far), doa_toward(far), 2.0, 0.1);
  EXPECT_TRUE(u.clamped);
}

TEST(Accumulator, RelabelCatchesUp) {
  auto p = mini2_profile();
  MotionAccumulator acc(p, 0.1);
  double forward = 0.0;
  // Accelerate at 1 m/s^2 for a second; the first half looks stable (labelled yaw).
  double v = 0.0;
  for (int i = 0; i < 10; ++i) {
    auto [f1, f2] = horizontal_group_freqs(p, v, 1.0);
    auto s = acc.step(0.1 * (i + 1), families(p, f1, f2), i < 5 ? Stability::Stable : Stability::Unstable);
    EXPECT_EQ(s.kind, i < 5 ? MotionKind::Yaw : MotionKind::Horizontal);
    if (i < 5) {
      EXPECT_EQ(s.forward, 0.0);
    }
    forward += s.forward;
    v += 0.1;
  }
  EXPECT_NEAR(forward, 0.5, 1e-6);
}

TEST(Accumulator, SustainedTranslationKeepsItsLabelWhileBraking) {
  auto p = mini2_profile();
  MotionAccumulator acc(p, 0.1);
  double forward = 0.0;
  // Cruise at 1 m/s with an unstable DoA, then the DoA settles for the last hops.
  for (int i = 0; i < 12; ++i) {
    auto [f1, f2] = horizontal_group_freqs(p, 1.0, 0.0);
    auto s = acc.step(0.1 * (i + 1), families(p, f1, f2), i < 8 ? Stability::Unstable : Stability::Stable);
    EXPECT_EQ(s.kind, MotionKind::Horizontal) << i;
    forward += s.forward;
  }
  EXPECT_GT(forward, 0.0);
  EXPECT_EQ(acc.finish(), 0.0);
}

TEST(Accumulator, BriefInstabilityDoesNotLatch) {
  auto p = mini2_profile();
  MotionAccumulator acc(p, 0.1);
  auto [f1, f2] = yaw_group_freqs(p, 0.8);
  double forward = 0.0;
  for (int i = 0; i < 10; ++i)
    forward += acc.step(0.1 * (i + 1), families(p, f1, f2), i == 3 || i == 4 ? Stability::Unstable : Stability::Stable).forward;
  EXPECT_NEAR(forward, 0.0, 1e-12);
}

TEST(Accumulator, YawCommittedAtSegmentEnd) {
  auto p = mini2_profile();
  MotionAccumulator acc(p, 0.1);
  auto [f1, f2] = yaw_group_freqs(p, 0.8);
  for (int i = 0; i < 20; ++i) EXPECT_EQ(acc.step(0.1 * (i + 1), families(p, f1, f2), Stability::Stable).yaw_delta, 0.0);
  // The new group count is confirmed on its second hop.
  EXPECT_EQ(acc.step(2.1, families(p, p.hover_freq), Stability::Stable).yaw_delta, 0.0);
  auto end = acc.step(2.2, families(p, p.hover_freq), Stability::Stable);
  EXPECT_NEAR(end.yaw_delta, 0.25 * 0.8 * 4.0, 1e-9);
  EXPECT_EQ(end.kind, MotionKind::Hover);
  EXPECT_EQ(acc.finish(), 0.0);
}

TEST(Accumulator, NoSignalHoldsState) {
  MotionAccumulator acc(mini2_profile(), 0.1);
  auto s = acc.step(0.1, std::nullopt, Stability::Unstable);
  EXPECT_FALSE(s.signal);
  EXPECT_EQ(s.forward, 0.0);
  EXPECT_EQ(s.up, 0.0);
}
