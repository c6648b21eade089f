#include "aim/synth.hpp"

#include <gtest/gtest.h>

#include <numeric>

using namespace aim;

namespace {

Scenario hover_scene(Vec3 drone, double duration = 0.5) {
  Scenario s;
  s.segments = {{MotionKind::Hover, duration, 0.0, 0.0}};
  s.start_position = drone;
  s.arrays = {six_mic_array("A", Vec3::Zero())};
  s.noise_floor_db = -40.0;
  return s;
}

std::vector<double> as_double(const std::vector<float>& x) { return {x.begin(), x.end()}; }

// Brute-force cross-correlation lag (in samples) of b relative to a, refined by a parabola.
double xcorr_lag(const std::vector<double>& a, const std::vector<double>& b, int max_lag) {
  std::vector<double> r(2 * max_lag + 1);
  for (int l = -max_lag; l <= max_lag; ++l) {
    double s = 0.0;
    for (std::size_t n = 1000; n + 1000 < a.size(); ++n) s += a[n] * b[n + l];
    r[l + max_lag] = s;
  }
  auto k = std::max_element(r.begin(), r.end()) - r.begin();
  double y0 = r[k - 1], y1 = r[k], y2 = r[k + 1];
  return static_cast<double>(k - max_lag) + 0.5 * (y0 - y2) / (y0 - 2 * y1 + y2);
}

double rms(const std::vector<float>& x) {
  double s = 0.0;
  for (float v : x) s += static_cast<double>(v) * v;
  return std::sqrt(s / static_cast<double>(x.size()));
}

// Energy of x inside [lo, hi] Hz relative to the total, with a same-length transform.
double band_energy_ratio(const std::vector<double>& x, double fs, double lo, double hi) {
  auto spec = fft::rfft(x, x.size());
  double in = 0.0, all = 0.0;
  for (std::size_t k = 0; k < spec.size(); ++k) {
    double f = static_cast<double>(k) * fs / static_cast<double>(x.size());
    double e = std::norm(spec[k]);
    all += e;
    if (f >= lo && f <= hi) in += e;
  }
  return in / all;
}

}  // namespace

TEST(Synthesize, OverheadSourceHasEqualDelays) {
  auto sc = hover_scene({0, 0, 2});
  auto rec = synthesize(plan_flight(sc), sc).front();
  auto ref = as_double(rec.channels[0]);
  for (std::size_t c = 1; c < rec.channels.size(); ++c)
    EXPECT_NEAR(xcorr_lag(ref, as_double(rec.channels[c]), 8), 0.0, 0.05);
}

TEST(Synthesize, PairDelayMatchesGeometry) {
  Vec3 drone(1.0, 0.0, 0.3);
  auto sc = hover_scene(drone);
  auto rec = synthesize(plan_flight(sc), sc).front();
  const auto& g = rec.geometry;
  auto ref = as_double(rec.channels[0]);
  for (std::size_t c = 1; c < g.size(); ++c) {
    double expected = ((drone - g.element_position(c)).norm() - (drone - g.element_position(0)).norm()) /
                      kSpeedOfSound * sc.sample_rate;
    EXPECT_NEAR(xcorr_lag(ref, as_double(rec.channels[c]), 24), expected, 0.25) << "element " << c;
  }
}

TEST(Synthesize, HoverSpectrumHasHarmonicPeaks) {
  auto sc = hover_scene({1, 0, 2}, 1.0);
  auto rec = synthesize(plan_flight(sc), sc).front();
  auto x = as_double(rec.channels[0]);
  std::size_t n = 32768;
  x.resize(n);
  auto w = fft::hann(n);
  for (std::size_t i = 0; i < n; ++i) x[i] *= w[i];
  auto spec = fft::rfft(x, n);
  double bin = sc.sample_rate / static_cast<double>(n);
  auto mag_at = [&](double f) {
    double best = 0.0;
    for (auto k = static_cast<std::size_t>((f - 3) / bin); k <= static_cast<std::size_t>((f + 3) / bin); ++k)
      best = std::max(best, std::abs(spec[k]));
    return best;
  };
  double floor_level = mag_at(500.0);
  for (double f : {328.0, 656.0, 984.0}) EXPECT_GT(mag_at(f), 100.0 * floor_level) << f;
}

TEST(Synthesize, InverseDistanceLaw) {
  auto near_sc = hover_scene({2, 0, 0.0});
  auto far_sc = hover_scene({4, 0, 0.0});
  double a = rms(synthesize(plan_flight(near_sc), near_sc).front().channels[0]);
  double b = rms(synthesize(plan_flight(far_sc), far_sc).front().channels[0]);
  Vec3 mic = near_sc.arrays[0].element_position(0);
  double expected = (Vec3(4, 0, 0) - mic).norm() / (Vec3(2, 0, 0) - mic).norm();
  EXPECT_NEAR(a / b, expected, 1e-3);
}

TEST(Synthesize, HoverLevelCalibratedAtOneMetre) {
  auto sc = hover_scene({0, 0, 1});
  auto ch = synthesize(plan_flight(sc), sc).front().channels[0];
  double r = (Vec3(0, 0, 1) - sc.arrays[0].element_position(0)).norm();
  EXPECT_NEAR(pa_to_spl(rms(ch) * r), sc.profile.spl_1m, 1.5);
}

TEST(Synthesize, DeterministicForSeed) {
  auto sc = hover_scene({1, 1, 2});
  sc.noise_floor_db = 40;
  sc.noise_sources = {{{3, 0, 0}, 300, 100, 50}};
  auto a = synthesize(plan_flight(sc), sc);
  auto b = synthesize(plan_flight(sc), sc);
  EXPECT_EQ(a[0].channels, b[0].channels);
  sc.seed = 2;
  EXPECT_NE(synthesize(plan_flight(sc), sc)[0].channels, a[0].channels);
}

TEST(Synthesize, ClockOffsetShiftsLocalTime) {
  auto sc = hover_scene({1, 0, 1});
  auto base = synthesize(plan_flight(sc), sc).front();
  sc.arrays[0].clock_offset = 10.0 / sc.sample_rate;
  auto skew = synthesize(plan_flight(sc), sc).front();
  EXPECT_NEAR(xcorr_lag(as_double(base.channels[0]), as_double(skew.channels[0]), 16), 10.0, 0.1);
}

TEST(Beacon, BandLimited) {
  auto sc = hover_scene({0, 0, 1});
  sc.beacon.enabled = true;
  auto b = emit_beacon(sc);
  EXPECT_EQ(b.size(), 4800u);
  EXPECT_GE(band_energy_ratio(b, sc.sample_rate, 16000, 20000), 0.99);
  EXPECT_LE(band_energy_ratio(b, sc.sample_rate, 0, 1000), 0.01);
  EXPECT_EQ(b, emit_beacon(sc));
}

TEST(Beacon, SharpAutocorrelation) {
  auto sc = hover_scene({0, 0, 1});
  sc.beacon.enabled = true;
  auto b = emit_beacon(sc);
  const int n = static_cast<int>(b.size());
  // Mainlobe half-width of a 4 kHz-wide band is fs / bandwidth samples.
  const int mainlobe = static_cast<int>(std::ceil(sc.sample_rate / (sc.beacon.high - sc.beacon.low)));
  double peak = 0.0, side = 0.0;
  for (int l = -n + 1; l < n; ++l) {
    double s = 0.0;
    for (int i = std::max(0, -l); i < std::min(n, n - l); ++i) s += b[i] * b[i + l];
    if (l == 0) peak = s;
    else if (std::abs(l) >= mainlobe) side = std::max(side, std::abs(s));
  }
  EXPECT_LE(side / peak, 0.3);
}

TEST(Beacon, LowSampleRateRejected) {
  auto sc = hover_scene({0, 0, 1});
  sc.beacon.enabled = true;
  sc.sample_rate = 32000;
  EXPECT_THROW(emit_beacon(sc), Error);
}

TEST(Synthesize, ObstacleReplacesDirectPath) {
  auto sc = hover_scene({3, 0, 1});
  auto open = synthesize(plan_flight(sc), sc).front();
  sc.obstacles = {{{1, -1, 0}, {1.2, 1, 3}}};
  auto blocked = synthesize(plan_flight(sc), sc).front();
  double ratio = rms(blocked.channels[0]) / rms(open.channels[0]);
  // Image point at x = -0.6: path about 1.17 m versus 3.16 m direct, times the reflection loss.
  EXPECT_GT(ratio, 0.5);
  EXPECT_LT(ratio, 2.0);
  // The apparent source moves behind the array: delays flip sign along x.
  auto ref = as_double(blocked.channels[0]);
  EXPECT_LT(xcorr_lag(ref, as_double(blocked.channels[3]), 12), 0.0);
}
