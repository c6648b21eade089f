#include "aim/tracker.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace aim;

namespace {

Measurement exact(const Vec3& z, double sigma) {
  Measurement m;
  m.z = z;
  m.R = sigma * sigma * Mat3::Identity();
  return m;
}

double min_eigen(const Mat3& P) { return Eigen::SelfAdjointEigenSolver<Mat3>(P).eigenvalues().minCoeff(); }

}  // namespace

TEST(InitTrack, IdenticalFixes) {
  auto s = init_track({{1, 2, 0.5}, {1, 2, 0.5}, {1, 2, 0.5}}, 0.0, 0.05);
  EXPECT_LT((s.position - Vec3(1, 2, 0.5)).norm(), 1e-12);
  EXPECT_LT((s.P - 0.0025 * Mat3::Identity()).norm(), 1e-12);
  EXPECT_EQ(s.hypotheses.size(), 1u);
  check_invariants(s);
}

TEST(InitTrack, MeanOfFixes) {
  auto s = init_track({{0, 0, 1}, {0.2, 0, 1}, {0.4, 0, 1}});
  EXPECT_LT((s.position - Vec3(0.2, 0, 1)).norm(), 1e-12);
}

TEST(InitTrack, TooFewFixes) {
  try {
    init_track({{0, 0, 1}, {0, 0, 1}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotReady);
  }
}

TEST(Predict, HoverAddsProcessNoiseOnly) {
  PipelineConfig cfg;
  auto s = init_track({{1, 1, 1}, {1, 1, 1}, {1, 1, 1}});
  auto p = predict(s, {}, cfg);
  EXPECT_EQ(p.position, s.position);
  EXPECT_LT((p.P - s.P - cfg.process_floor * cfg.process_floor * Mat3::Identity()).norm(), 1e-15);
}

TEST(Predict, ClimbMovesZ) {
  PipelineConfig cfg;
  auto s = init_track({{1, 1, 1}, {1, 1, 1}, {1, 1, 1}});
  auto p = predict(s, {0.0, 0.15, 0.0}, cfg);
  EXPECT_NEAR(p.position.z(), 1.15, 1e-12);
  EXPECT_NEAR(p.position.x(), 1.0, 1e-12);
}

TEST(Predict, AmbiguousYawMirrorsAboutPriorHeading) {
  PipelineConfig cfg;
  auto s = init_track({{0, 0, 1}, {0, 0, 1}, {0, 0, 1}}, 0.3);
  auto p = predict(predict(s, {0, 0, kPi / 4}, cfg), {2.0, 0, 0}, cfg);
  ASSERT_EQ(p.hypotheses.size(), 2u);
  Vec3 a = p.hypotheses[0].position, b = p.hypotheses[1].position;
  // Reflecting b across the prior heading line gives a.
  Eigen::Vector2d axis(std::cos(0.3), std::sin(0.3));
  Eigen::Vector2d bv = b.head<2>();
  Eigen::Vector2d mirrored = 2.0 * axis.dot(bv) * axis - bv;
  EXPECT_LT((mirrored - a.head<2>()).norm(), 1e-12);
  EXPECT_GT((a - b).norm(), 1.0);
  check_invariants(p);
}

TEST(Update, NlosKeepsPrior) {
  PipelineConfig cfg;
  auto prior = predict(init_track({{1, 2, 1}, {1.1, 2, 1}, {0.9, 2, 1}}), {0.5, 0, 0}, cfg);
  auto post = update(prior, exact({5, 5, 5}, 0.1), true);
  EXPECT_EQ(post.position, prior.position);
  EXPECT_EQ(post.P, prior.P);
  EXPECT_FALSE(post.los);
}

TEST(Update, NonFiniteIsSkipped) {
  auto prior = init_track({{1, 2, 1}, {1, 2, 1}, {1, 2, 1}});
  auto post = update(prior, exact({std::nan(""), 0, 0}, 0.1), false);
  EXPECT_EQ(post.position, prior.position);
  EXPECT_EQ(post.P, prior.P);
}

TEST(Update, ConsistentMeasurementShrinksCovariance) {
  auto prior = init_track({{1, 2, 1}, {1.2, 2, 1}, {0.8, 2.1, 1}});
  auto post = update(prior, exact(prior.position, 1e-6), false);
  EXPECT_LT((post.position - prior.position).norm(), 1e-12);
  EXPECT_LT(post.P.trace(), prior.P.trace());
  EXPECT_LT(post.P.trace(), 1e-9);
}

TEST(Filter, CovarianceStaysPsdOverManySteps) {
  PipelineConfig cfg;
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto s = init_track({{0, 0, 2}, {0.1, 0, 2}, {0, 0.1, 2}});
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    s = predict(s, {0.2 * g(rng), 0.05 * g(rng), u(rng) < 0.02 ? u(rng) : 0.0}, cfg);
    Measurement m;
    m.z = s.position + Vec3(g(rng), g(rng), g(rng));
    Eigen::Matrix3d A = Eigen::Matrix3d::Random();
    m.R = A * A.transpose() * std::pow(10.0, 4.0 * u(rng) - 3.0);
    s = update(s, m, u(rng) < 0.3);
    worst = std::min(worst, min_eigen(s.P));
    ASSERT_NO_THROW(check_invariants(s)) << i;
  }
  EXPECT_GE(worst, -1e-9);
}

TEST(Filter, MonteCarloGainSanity) {
  // 1-D track along x: dead reckoning with 15% step noise, fixes with 0.3 m noise.
  PipelineConfig cfg;
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  const double sigma_m = 0.3;
  auto s = init_track({{0, 0, 1}, {0, 0, 1}, {0, 0, 1}});
  double truth = 0.0;
  double se_prior = 0.0, se_post = 0.0, se_meas = 0.0;
  for (int i = 0; i < 1000; ++i) {
    double step = 0.15 * (1.0 + std::sin(0.05 * i));
    truth += step;
    double reported = step * (1.0 + 0.15 * g(rng)) + cfg.process_floor * g(rng);
    s = predict(s, {reported, 0, 0}, cfg);
    double z = truth + sigma_m * g(rng);
    se_prior += std::pow(s.position.x() - truth, 2);
    se_meas += std::pow(z - truth, 2);
    Measurement m;
    m.z = Vec3(z, s.position.y(), s.position.z());
    m.R = sigma_m * sigma_m * Mat3::Identity();
    s = update(s, m, false);
    se_post += std::pow(s.position.x() - truth, 2);
  }
  EXPECT_LE(se_post, std::max(se_prior, se_meas));
  EXPECT_LT(se_post, se_meas);
}

TEST(Filter, HypothesisCollapsePicksTruth) {
  PipelineConfig cfg;
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int trials = 0;
  for (int i = 0; i < 200; ++i) {
    double heading = -kPi + 2 * kPi * u(rng), yaw = 0.3 + 1.2 * u(rng);
    bool positive = u(rng) < 0.5;
    double dist = 1.0 + 2.0 * u(rng);
    auto s = init_track({{0, 0, 2}, {0, 0, 2}, {0, 0, 2}}, heading);
    s = predict(predict(s, {0, 0, yaw}, cfg), {dist, 0, 0}, cfg);
    double true_yaw = heading + (positive ? yaw : -yaw);
    Vec3 truth(dist * std::cos(true_yaw), dist * std::sin(true_yaw), 2.0);
    double sep = (s.hypotheses[0].position - s.hypotheses[1].position).norm();
    double noise = 0.2 * sep;  // under half the separation
    Measurement m;
    m.z = truth + Vec3(noise * g(rng) / std::sqrt(2.0), noise * g(rng) / std::sqrt(2.0), 0);
    m.R = std::pow(noise / 4.0, 2) * Mat3::Identity();
    auto post = update(s, m, false);
    if (post.hypotheses.size() != 1) continue;
    ++trials;
    EXPECT_NEAR(wrap_angle(post.hypotheses[0].yaw - true_yaw), 0.0, 1e-9) << i;
  }
  EXPECT_GT(trials, 150);
}

TEST(Tracker, OutputEveryStepUnderTotalNlos) {
  PipelineConfig cfg;
  Tracker tr(cfg, Vec3::Zero(), 2.0, 0.0);
  int rows = 0;
  for (int i = 0; i < 100; ++i) {
    MotionStep m;
    m.forward = 0.1;
    m.kind = MotionKind::Horizontal;
    auto row = tr.step(0.1 * i, m, std::nullopt, true);
    EXPECT_TRUE(row.position.allFinite());
    EXPECT_FALSE(row.los);
    ++rows;
  }
  EXPECT_EQ(rows, 100);
}

TEST(Tracker, HeadingFromFixes) {
  PipelineConfig cfg;
  Tracker tr(cfg, Vec3::Zero(), 2.0, 0.0);
  // Drone flies along +y from (3, -2, 2) at 1 m/s while the tracker believes heading 0.
  auto doa_at = [](const Vec3& p) {
    DoAEstimate d;
    d.azimuth = std::atan2(p.y(), p.x());
    d.elevation = std::atan2(p.z(), p.head<2>().norm());
    return d;
  };
  Vec3 p(3, -2, 2);
  for (int i = 0; i < 3; ++i) tr.step(0.1 * i, {}, doa_at(p), false);
  ASSERT_TRUE(tr.state().initialized);
  for (int i = 0; i < 30; ++i) {
    p.y() += 0.1;
    MotionStep m;
    m.kind = MotionKind::Horizontal;
    m.forward = 0.1;
    tr.step(0.3 + 0.1 * i, m, doa_at(p), false);
  }
  EXPECT_NEAR(wrap_angle(tr.state().hypotheses[0].yaw - kPi / 2), 0.0, deg2rad(5));
  EXPECT_LT((tr.state().position - p).norm(), 0.3);
}
