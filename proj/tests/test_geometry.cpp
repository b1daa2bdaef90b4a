#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "bistatic/geometry.hpp"

using namespace bistatic;

namespace {

constexpr double kPi = std::numbers::pi;

ScenarioConfig scenario() {
  ScenarioConfig cfg;
  cfg.c = 5.0;
  cfg.d_over_lambda = 0.5;
  return cfg;
}

}  // namespace

TEST(BistaticRange, KnownPoints) {
  const auto cfg = scenario();
  EXPECT_DOUBLE_EQ(bistatic_range({0, 0}, cfg), 10.0);
  EXPECT_NEAR(bistatic_range({3, 4}, cfg), std::sqrt(80.0) + std::sqrt(20.0), 1e-12);
  EXPECT_NEAR(bistatic_range({3, 4}, cfg), 13.4164, 1e-4);
  EXPECT_NEAR(bistatic_range({0, 5}, cfg), 2.0 * std::sqrt(50.0), 1e-12);
}

TEST(BistaticRange, TriangleProperty) {
  const auto cfg = scenario();
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> coord(-40.0, 40.0);
  for (int i = 0; i < 10000; ++i) {
    const Position p{coord(rng), coord(rng)};
    EXPECT_GE(bistatic_range(p, cfg), 2.0 * cfg.c - 1e-12);
  }
  for (double x : {-5.0, -2.5, 0.0, 4.9, 5.0}) EXPECT_NEAR(bistatic_range({x, 0.0}, cfg), 10.0, 1e-12);
  EXPECT_GT(bistatic_range({5.1, 0.0}, cfg), 10.0);
  EXPECT_GT(bistatic_range({0.0, 1e-3}, cfg), 10.0);
}

TEST(Angles, AodExamples) {
  const auto cfg = scenario();
  EXPECT_NEAR(aod({-5, 7}, cfg), 0.0, 1e-15);
  EXPECT_NEAR(aod({0, 5}, cfg), -kPi / 4, 1e-15);
  EXPECT_NEAR(aod({3, 4}, cfg), -std::atan(2.0), 1e-15);
  EXPECT_NEAR(aod({3, 4}, cfg), -1.1071, 1e-4);
}

TEST(Angles, AoaExamples) {
  const auto cfg = scenario();
  EXPECT_NEAR(aoa({5, 7}, cfg), 0.0, 1e-15);
  EXPECT_NEAR(aoa({0, 5}, cfg), kPi / 4, 1e-15);
  EXPECT_NEAR(aoa({3, 4}, cfg), 0.4636, 1e-4);
}

TEST(Angles, RejectPointsOnArrayAxis) {
  const auto cfg = scenario();
  EXPECT_THROW(aod({1.0, 0.0}, cfg), Error);
  EXPECT_THROW(aoa({1.0, 0.0}, cfg), Error);
  try {
    aod({1.0, 0.0}, cfg);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateAngle);
  }
}

TEST(Angles, MirrorSymmetry) {
  const auto cfg = scenario();
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> xs(-30.0, 30.0), ys(0.01, 40.0);
  for (int i = 0; i < 1000; ++i) {
    const double x = xs(rng), y = ys(rng);
    EXPECT_NEAR(aod({x, y}, cfg), -aoa({-x, y}, cfg), 1e-14);
  }
}

TEST(Naf, Examples) {
  const auto cfg = scenario();
  EXPECT_EQ(naf(0.0, cfg), 0.0);
  EXPECT_DOUBLE_EQ(naf(kPi / 2, cfg), 0.5);
  EXPECT_NEAR(naf(kPi / 4, cfg), 0.5 * std::sqrt(2.0) / 2.0, 1e-15);
  EXPECT_NEAR(naf(kPi / 4, cfg), 0.35355, 1e-5);
}

TEST(Naf, InverseExamplesAndClamping) {
  const auto cfg = scenario();
  EXPECT_EQ(inverse_naf(0.0, cfg), 0.0);
  EXPECT_DOUBLE_EQ(inverse_naf(0.5, cfg), kPi / 2);
  EXPECT_DOUBLE_EQ(inverse_naf(0.6, cfg), kPi / 2);
  EXPECT_DOUBLE_EQ(inverse_naf(-0.6, cfg), -kPi / 2);
}

TEST(Naf, RoundTrip) {
  for (double k : {0.315, 0.5, 1.0}) {
    ScenarioConfig cfg = scenario();
    cfg.d_over_lambda = k;
    for (int i = 0; i <= 2000; ++i) {
      const double phi = -kPi / 2 + kPi * i / 2000.0;
      // asin loses precision next to +-pi/2 where its derivative diverges.
      const double tol = std::abs(std::cos(phi)) > 1e-3 ? 1e-12 : 1e-7;
      EXPECT_NEAR(inverse_naf(naf(phi, cfg), cfg), phi, tol) << "phi=" << phi << " k=" << k;
    }
  }
}

TEST(ForwardModel, Examples) {
  const auto cfg = scenario();
  const auto all = forward_model({0, 5}, KindSet::all(), cfg);
  ASSERT_EQ(all.size(), 3);
  EXPECT_NEAR(all[0], 14.1421, 1e-4);
  EXPECT_NEAR(all[1], -0.35355, 1e-5);
  EXPECT_NEAR(all[2], 0.35355, 1e-5);

  const auto tx = forward_model({-5, 7}, {MeasurementKind::NafTx}, cfg);
  ASSERT_EQ(tx.size(), 1);
  EXPECT_NEAR(tx[0], 0.0, 1e-15);

  const auto rb = forward_model({3, 4}, {MeasurementKind::BistaticRange}, cfg);
  EXPECT_NEAR(rb[0], std::sqrt(80.0) + std::sqrt(20.0), 1e-12);
}

TEST(ForwardModel, RejectsLowerHalfPlane) {
  const auto cfg = scenario();
  EXPECT_THROW(forward_model({0, 0}, KindSet::all(), cfg), Error);
  EXPECT_THROW(forward_model({0, -1}, KindSet::all(), cfg), Error);
}

TEST(MeasurementSet, CanonicalOrderAndUniqueness) {
  MeasurementSet set{{MeasurementKind::NafRx, 0.1, 1.0},
                     {MeasurementKind::BistaticRange, 12.0, 2.0},
                     {MeasurementKind::NafTx, -0.2, 3.0}};
  ASSERT_EQ(set.size(), 3u);
  EXPECT_EQ(set[0].kind, MeasurementKind::BistaticRange);
  EXPECT_EQ(set[1].kind, MeasurementKind::NafTx);
  EXPECT_EQ(set[2].kind, MeasurementKind::NafRx);
  EXPECT_EQ(set.kinds(), KindSet::all());

  MeasurementSet dup{{MeasurementKind::NafTx, 0.0, 1.0}};
  EXPECT_THROW(dup.add({MeasurementKind::NafTx, 0.1, 1.0}), Error);
  EXPECT_THROW(dup.add({MeasurementKind::NafRx, 0.1, -1.0}), Error);
}

TEST(KindSet, ParseAndLabel) {
  EXPECT_EQ(KindSet::parse("aoa+aod"), (KindSet{MeasurementKind::NafTx, MeasurementKind::NafRx}));
  EXPECT_EQ(KindSet::parse("all"), KindSet::all());
  EXPECT_EQ(KindSet::parse("aoa,range").label(), "range+aoa");
  EXPECT_THROW(KindSet::parse("doppler"), Error);
  EXPECT_THROW(KindSet::parse(""), Error);
}

TEST(SampleNoisy, ZeroNoiseEqualsForwardModel) {
  auto cfg = scenario();
  cfg.sigma_r = 0.0;
  cfg.sigma_eta = 0.0;
  std::mt19937_64 rng(3);
  const Position p{3.0, 10.0};
  const auto set = sample_noisy(p, KindSet::all(), cfg, rng);
  const auto f = forward_model(p, KindSet::all(), cfg);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(set[i].value, f[static_cast<Eigen::Index>(i)]);
}

TEST(SampleNoisy, ReproducibleUnderSeed) {
  const auto cfg = scenario();
  std::mt19937_64 a(42), b(42);
  for (int i = 0; i < 100; ++i)
    EXPECT_EQ(sample_noisy({1.0, 12.0}, KindSet::all(), cfg, a), sample_noisy({1.0, 12.0}, KindSet::all(), cfg, b));
}

TEST(SampleNoisy, FirstTwoMoments) {
  const auto cfg = scenario();
  const Position p{-4.0, 9.0};
  const auto truth = forward_model(p, KindSet::all(), cfg);
  std::mt19937_64 rng(2024);
  constexpr int n = 100000;
  Eigen::Vector3d sum = Eigen::Vector3d::Zero(), sum2 = Eigen::Vector3d::Zero();
  for (int i = 0; i < n; ++i) {
    const auto set = sample_noisy(p, KindSet::all(), cfg, rng);
    for (int j = 0; j < 3; ++j) {
      const double e = set[static_cast<std::size_t>(j)].value - truth[j];
      sum[j] += e;
      sum2[j] += e * e;
    }
  }
  const Eigen::Vector3d sigma{cfg.sigma_r, cfg.sigma_eta, cfg.sigma_eta};
  for (int j = 0; j < 3; ++j) {
    const double mean = sum[j] / n;
    const double var = sum2[j] / n - mean * mean;
    EXPECT_LT(std::abs(mean), 4.0 * sigma[j] / std::sqrt(double(n)));
    EXPECT_NEAR(var, sigma[j] * sigma[j], 0.1 * sigma[j] * sigma[j]);
  }
  const auto set = sample_noisy(p, KindSet::all(), cfg, rng);
  EXPECT_DOUBLE_EQ(set[0].variance, cfg.sigma_r * cfg.sigma_r);
  EXPECT_DOUBLE_EQ(set[1].variance, cfg.sigma_eta * cfg.sigma_eta);
}

TEST(ScenarioConfig, BoresightEquivalentSpacing) {
  const ScenarioConfig s = ScenarioConfig::paper();
  EXPECT_NEAR(s.d_over_lambda, 0.022 / (4.0 * std::numbers::pi / 180.0), 1e-15);
  // Small-angle check: sigma_eta maps back to 4 degrees at boresight.
  const double dphi = inverse_naf(s.sigma_eta * 1e-3, s) / 1e-3;
  EXPECT_NEAR(dphi * 180.0 / std::numbers::pi, 4.0, 1e-6);
  EXPECT_EQ(s.sigma_r, 0.15);
  EXPECT_EQ(ScenarioConfig{}.d_over_lambda, 0.5);
}
