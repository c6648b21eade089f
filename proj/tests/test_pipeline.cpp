#include "aim/eval.hpp"
#include "aim/pipeline.hpp"
#include "aim/scenario.hpp"

#include <gtest/gtest.h>

using namespace aim;

namespace {

const ProfileDatabase& db() {
  static const ProfileDatabase d = load_database(std::string(AIM_SOURCE_DIR) + "/data/profiles.json");
  return d;
}

Scenario hover() { return load_scenario(std::string(AIM_SOURCE_DIR) + "/scenarios/hover_5s.json"); }

std::vector<PositionSample> samples(const std::vector<TrackRow>& rows) {
  std::vector<PositionSample> out;
  for (const auto& r : rows) out.push_back({r.t, r.position, {}});
  return out;
}

std::vector<PositionSample> truth_samples(const GroundTruth& truth, double duration, double hop) {
  std::vector<PositionSample> out;
  for (int k = 1; k * hop <= duration + 1e-9; ++k) out.push_back({k * hop, truth.position(k * hop), {}});
  return out;
}

}  // namespace

TEST(Pipeline, HoverTracksEveryHop) {
  auto sc = hover();
  auto truth = plan_flight(sc);
  auto recs = synthesize(truth, sc);
  auto res = run_pipeline(recs, db(), PipelineConfig{}, setup_from(sc));
  EXPECT_EQ(res.profile, "mini2");
  EXPECT_FALSE(res.multi);
  EXPECT_TRUE(res.fused.empty());
  ASSERT_EQ(res.track.size(), 50u);
  EXPECT_NEAR(res.track.front().t, 0.1, 1e-9);
  EXPECT_NEAR(res.track.back().t, 5.0, 1e-9);
  EXPECT_EQ(res.trace.size(), res.track.size());
  auto rep = evaluate(samples(res.track), truth_samples(truth, 5.0, 0.1), 0.05);
  EXPECT_LT(rep.mean, 0.1);
}

TEST(Pipeline, MultiArrayWithoutBeaconFallsBack) {
  auto sc = hover();
  sc.segments = {{MotionKind::Hover, 2.0, 0.0, 0.0}};
  sc.arrays.push_back(six_mic_array("B", Vec3(4, 0, 0)));
  auto recs = synthesize(plan_flight(sc), sc);
  auto res = run_pipeline(recs, db(), PipelineConfig{}, setup_from(sc));
  EXPECT_FALSE(res.multi);
  ASSERT_FALSE(res.warnings.empty());
  EXPECT_NE(res.warnings.front().find("beacon"), std::string::npos);
  EXPECT_EQ(res.track.size(), 20u);
}

TEST(Pipeline, SilenceIsUnknown) {
  Recording rec{six_mic_array("A", Vec3::Zero()), 48000.0, std::vector<std::vector<float>>(6, std::vector<float>(96000))};
  TrackSetup setup;
  try {
    run_pipeline({rec}, db(), PipelineConfig{}, setup);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Unknown);
  }
}

TEST(Pipeline, DurationIsShortestRecording) {
  auto sc = hover();
  sc.segments = {{MotionKind::Hover, 3.0, 0.0, 0.0}};
  sc.arrays.push_back(six_mic_array("B", Vec3(4, 0, 0)));
  auto recs = synthesize(plan_flight(sc), sc);
  for (auto& c : recs[1].channels) c.resize(static_cast<std::size_t>(2.05 * 48000));
  auto res = run_pipeline(recs, db(), PipelineConfig{}, setup_from(sc));
  EXPECT_EQ(res.track.size(), 20u);
}

TEST(Pipeline, SingleArrayFlagIgnoresOtherArrays) {
  auto sc = hover();
  sc.segments = {{MotionKind::Hover, 2.0, 0.0, 0.0}};
  sc.arrays.push_back(six_mic_array("B", Vec3(4, 0, 0)));
  auto recs = synthesize(plan_flight(sc), sc);
  auto setup = setup_from(sc);
  setup.single_array = true;
  auto res = run_pipeline(recs, db(), PipelineConfig{}, setup);
  EXPECT_FALSE(res.multi);
  EXPECT_TRUE(res.warnings.empty());
}
