// Scene builders shared by the test binaries.
#pragma once

#include "aim/spectral.hpp"

#include <vector>

namespace aimtest {

using namespace aim;

inline Scenario single_motion(MotionKind kind, double duration, double magnitude, Vec3 drone = Vec3(2, 1, 2),
                              std::uint64_t seed = 1) {
  Scenario s;
  s.seed = seed;
  s.segments = {{kind, duration, magnitude, 0.0}};
  s.start_position = drone;
  s.arrays = {six_mic_array("A", Vec3::Zero())};
  return s;
}

inline Recording render(const Scenario& s) { return synthesize(plan_flight(s), s).front(); }

/// Frame of `length` samples centred on time t.
inline MultiChannelFrame frame_at(const Recording& rec, double t, std::size_t length = 8192) {
  return extract_frame(rec, t - 0.5 * static_cast<double>(length) / rec.sample_rate, length);
}

/// Mean blade passing frequency of a rotor group over the frame centred at t.
inline double truth_bpf(const GroundTruth& truth, const std::vector<int>& group, int blades, double t,
                        double span = 8192.0 / 48000.0) {
  double sum = 0.0;
  int n = 0;
  for (double u = t - 0.5 * span; u <= t + 0.5 * span; u += truth.step, ++n)
    for (int i : group) sum += blades * truth.at(u).rotor_freqs[static_cast<std::size_t>(i)] / static_cast<double>(group.size());
  return sum / n;
}

inline std::vector<double> mono(const MultiChannelFrame& f) {
  Eigen::VectorXd avg = f.channels.colwise().mean();
  return {avg.data(), avg.data() + avg.size()};
}

}  // namespace aimtest
