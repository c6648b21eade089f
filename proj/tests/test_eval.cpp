#include "aim/eval.hpp"

#include <gtest/gtest.h>

using namespace aim;

namespace {

std::vector<PositionSample> line(int n, const Vec3& offset = Vec3::Zero(), double t0 = 0.1) {
  std::vector<PositionSample> out;
  for (int k = 0; k < n; ++k) out.push_back({t0 + 0.1 * k, Vec3(0.5 * k, 0, 2) + offset, {1}});
  return out;
}

}  // namespace

TEST(Evaluate, IdenticalTrackScoresZero) {
  auto r = evaluate(line(20), line(20), 0.05);
  EXPECT_EQ(r.steps.size(), 20u);
  EXPECT_EQ(r.mean, 0.0);
  EXPECT_EQ(r.median, 0.0);
}

TEST(Evaluate, ConstantOffset) {
  auto r = evaluate(line(20, Vec3(1, 0, 0)), line(20), 0.05);
  EXPECT_NEAR(r.mean, 1.0, 1e-12);
  EXPECT_NEAR(r.p90, 1.0, 1e-12);
}

TEST(Evaluate, MeanAndMedian) {
  auto truth = line(3);
  auto track = truth;
  for (int k = 0; k < 3; ++k) track[k].position.z() += k + 1;
  auto r = evaluate(track, truth, 0.05);
  EXPECT_NEAR(r.mean, 2.0, 1e-12);
  EXPECT_NEAR(r.median, 2.0, 1e-12);
}

TEST(Evaluate, NoOverlapIsInvalidInput) {
  try {
    evaluate(line(5, Vec3::Zero(), 100.0), line(5), 0.05);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidInput);
  }
}

TEST(Evaluate, MaxGapDropsDistantRows) {
  auto truth = line(5);
  auto track = line(5);
  track.push_back({0.9, Vec3::Zero(), {}});  // nearest truth is 0.4 s away
  track.push_back({0.52, Vec3::Zero(), {}});
  auto r = evaluate(track, truth, 0.05);
  EXPECT_EQ(r.steps.size(), 6u);
}

TEST(Evaluate, NearestTruthRowIsUsed) {
  std::vector<PositionSample> truth{{0.1, Vec3(0, 0, 0), {}}, {0.2, Vec3(10, 0, 0), {}}};
  std::vector<PositionSample> track{{0.16, Vec3(10, 0, 0), {}}};
  EXPECT_EQ(evaluate(track, truth, 0.05).mean, 0.0);
}

TEST(Regime, FromLosFlags) {
  EXPECT_EQ(regime_of({}), Regime::LoS);
  EXPECT_EQ(regime_of({1, 1}), Regime::LoS);
  EXPECT_EQ(regime_of({1, 0}), Regime::PLoS);
  EXPECT_EQ(regime_of({0, 0}), Regime::NLoS);
}

TEST(Regime, MeansSplitByTruthFlags) {
  auto truth = line(4);
  truth[2].los = {0};
  truth[3].los = {0};
  auto track = truth;
  track[2].position.x() += 3.0;
  track[3].position.x() += 1.0;
  auto r = evaluate(track, truth, 0.05);
  ASSERT_EQ(r.regimes.size(), 2u);
  EXPECT_EQ(r.regimes["LoS"].steps, 2u);
  EXPECT_EQ(r.regimes["LoS"].mean, 0.0);
  EXPECT_NEAR(r.regimes["NLoS"].mean, 2.0, 1e-12);
}

TEST(Cdf, MonotoneAndEndsAtOne) {
  auto truth = line(30);
  auto track = truth;
  for (int k = 0; k < 30; ++k) track[k].position.y() += 0.1 * ((k * 7) % 11);
  auto r = evaluate(track, truth, 0.05);
  ASSERT_EQ(r.cdf.size(), 30u);
  for (std::size_t i = 1; i < r.cdf.size(); ++i) {
    EXPECT_LE(r.cdf[i - 1].first, r.cdf[i].first);
    EXPECT_LT(r.cdf[i - 1].second, r.cdf[i].second);
  }
  EXPECT_DOUBLE_EQ(r.cdf.back().second, 1.0);
  auto csv = parse_csv(cdf_csv(r), "cdf");
  EXPECT_EQ(csv.header, (std::vector<std::string>{"error_m", "cdf"}));
  EXPECT_EQ(csv.rows.size(), 30u);
}

TEST(Report, JsonCarriesSummaryAndSteps) {
  auto r = evaluate(line(10, Vec3(0, 0.5, 0)), line(10), 0.05);
  r.runtime = 1.25;
  auto j = report_to_json(r);
  EXPECT_NEAR(j["mean_error_m"].get<double>(), 0.5, 1e-12);
  EXPECT_NEAR(j["median_error_m"].get<double>(), 0.5, 1e-12);
  EXPECT_EQ(j["steps"].get<std::size_t>(), 10u);
  EXPECT_EQ(j["runtime_s"].get<double>(), 1.25);
  EXPECT_EQ(j["regimes"]["LoS"]["steps"].get<std::size_t>(), 10u);
  ASSERT_EQ(j["per_step"].size(), 10u);
  EXPECT_EQ(j["per_step"][0]["regime"], "LoS");
}
