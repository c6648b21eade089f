#include "aim/scenario.hpp"

#include <gtest/gtest.h>

using namespace aim;

TEST(Profile, DefaultsSatisfyHoverBalance) {
  for (const auto& p : default_profiles()) {
    EXPECT_NO_THROW(validate(p)) << p.name;
    double thrust = p.rotor_count * p.lift_coeff * p.hover_freq * p.hover_freq;
    EXPECT_NEAR(thrust, p.mass * 9.81, 1e-9) << p.name;
  }
}

TEST(Profile, Mini2HoverBpf) { EXPECT_DOUBLE_EQ(mini2_profile().hover_bpf(), 328.0); }

TEST(Profile, RotorCountMustMatchStructure) {
  auto p = mini2_profile();
  p.rotor_count = 6;
  EXPECT_THROW(validate(p), Error);
}

TEST(Profile, UnbalancedHoverRejected) {
  auto p = mini2_profile();
  p.lift_coeff *= 1.02;
  EXPECT_THROW(validate(p), Error);
}

TEST(Profile, GroupsMustPartitionRotors) {
  auto p = mini2_profile();
  p.yaw_groups.second = {1};
  EXPECT_THROW(validate(p), Error);
}

TEST(Profile, Y6PitchGroupSizes) {
  auto [yaw, pitch] = default_groups(Structure::Y6);
  EXPECT_EQ(pitch.first.size(), 4u);
  EXPECT_EQ(pitch.second.size(), 2u);
  EXPECT_EQ(yaw.first.size() + yaw.second.size(), 6u);
}

TEST(Profile, JsonRoundTrip) {
  for (const auto& p : default_profiles()) {
    nlohmann::json j = p;
    auto q = j.get<DroneProfile>();
    EXPECT_EQ(q.name, p.name);
    EXPECT_EQ(q.structure, p.structure);
    EXPECT_DOUBLE_EQ(q.lift_coeff, p.lift_coeff);
    EXPECT_EQ(q.pitch_groups.first, p.pitch_groups.first);
  }
}

TEST(Geometry, ArrayLayouts) {
  auto six = six_mic_array("a", Vec3::Zero());
  EXPECT_EQ(six.size(), 6u);
  EXPECT_NEAR((six.element_offsets[0] - six.element_offsets[1]).norm(), 0.05, 1e-12);
  auto four = four_mic_array("b", Vec3::Zero());
  EXPECT_NEAR((four.element_position(0) - four.element_position(1)).norm(), 0.065, 1e-12);
  ArrayGeometry bad = six;
  bad.element_offsets.pop_back();
  EXPECT_THROW(validate(bad), Error);
}

TEST(Geometry, SegmentBoxIntersection) {
  Box wall{{1, -1, 0}, {1.2, 1, 3}};
  EXPECT_TRUE(segment_hits_box({0, 0, 1}, {2, 0, 1}, wall));
  EXPECT_FALSE(segment_hits_box({0, 2, 1}, {2, 2, 1}, wall));
  EXPECT_FALSE(segment_hits_box({0, 0, 1}, {0.9, 0, 1}, wall));
  EXPECT_EQ(blocking_obstacle({0, 0, 1}, {2, 0, 1}, {wall}), 0);
}

TEST(Geometry, MirrorAcrossNearestFace) {
  Box wall{{1, -1, 0}, {1.2, 1, 3}};
  Vec3 m = mirror_across_nearest_face({2, 0, 1}, wall);
  EXPECT_NEAR(m.x(), 0.4, 1e-12);
  EXPECT_NEAR(m.y(), 0.0, 1e-12);
}

namespace {
const char* kMinimal = R"({
  "name": "t",
  "profile": "mini2",
  "segments": [ {"kind": "hover", "duration": 1.0} ],
  "arrays": [ {"id": "A", "origin": [0, 0, 0]} ]
})";
}

TEST(Scenario, ParsesMinimalDocument) {
  Scenario s = parse_scenario(kMinimal);
  EXPECT_EQ(s.segments.size(), 1u);
  EXPECT_EQ(s.arrays.front().size(), 6u);
  EXPECT_EQ(s.profile.name, "mini2");
}

TEST(Scenario, RoundTripThroughJson) {
  Scenario s = parse_scenario(kMinimal);
  s.noise_sources.push_back({{1, 2, 0}, 300, 100, 55});
  s.obstacles.push_back({{1, 1, 0}, {2, 2, 2}});
  Scenario t = parse_scenario(scenario_to_json(s).dump(2));
  EXPECT_EQ(t.noise_sources.size(), 1u);
  EXPECT_EQ(t.obstacles.size(), 1u);
  EXPECT_DOUBLE_EQ(t.noise_sources[0].spl, 55);
}

TEST(Scenario, ErrorsCarryLineAnchor) {
  std::string bad = R"({
  "profile": "mini2",
  "segments": [
    {"kind": "hover", "duration": 0.0}
  ],
  "arrays": [ {"id": "A", "origin": [0, 0, 0]} ]
})";
  try {
    parse_scenario(bad, "bad.json");
    FAIL() << "expected rejection";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidInput);
    EXPECT_NE(std::string(e.what()).find("bad.json:3:"), std::string::npos) << e.what();
  }
}

TEST(Scenario, EmptySegmentsRejected) {
  std::string bad = R"({"segments": [], "arrays": [ {"id": "A", "origin": [0, 0, 0]} ]})";
  EXPECT_THROW(parse_scenario(bad), Error);
}

TEST(Scenario, LowSampleRateRejected) {
  Scenario s = parse_scenario(kMinimal);
  s.sample_rate = 3000;
  EXPECT_THROW(validate(s), Error);
}
