#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "bistatic/geo_positioning.hpp"

using namespace bistatic;
using K = MeasurementKind;

namespace {

constexpr double kPi = std::numbers::pi;

MeasurementSet noiseless(const Position& p, KindSet kinds, const ScenarioConfig& cfg, double sigma_r,
                         double sigma_eta) {
  MeasurementSet set;
  const auto f = forward_model(p, kinds, cfg);
  Eigen::Index i = 0;
  kinds.for_each([&](K k) {
    const double s = k == K::BistaticRange ? sigma_r : sigma_eta;
    set.add({k, f[i++], s * s});
  });
  return set;
}

Eigen::Vector2d measured(const Position& p, Conversion conv, const ScenarioConfig& cfg) {
  switch (conv) {
    case Conversion::Angles: return {naf(aod(p, cfg), cfg), naf(aoa(p, cfg), cfg)};
    case Conversion::TxAngleRange: return {bistatic_range(p, cfg), naf(aod(p, cfg), cfg)};
    case Conversion::RxAngleRange: return {bistatic_range(p, cfg), naf(aoa(p, cfg), cfg)};
  }
  return {};
}

}  // namespace

TEST(LocateFromAngles, SymmetricTarget) {
  const ScenarioConfig cfg;
  const Position p = locate_from_angles(naf(-kPi / 4, cfg), naf(kPi / 4, cfg), cfg);
  EXPECT_NEAR(p.x, 0.0, 1e-12);
  EXPECT_NEAR(p.y, 5.0, 1e-12);
}

TEST(LocateFromAngles, ParallelRaysAreUnresolvable) {
  const ScenarioConfig cfg;
  try {
    locate_from_angles(0.1, 0.1, cfg);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnresolvableGeometry);
  }
  EXPECT_THROW(locate_from_angles(0.1, 0.1, cfg, {.raw = true}), Error);
}

TEST(LocateFromAngles, BehindBaselineRejectedUnlessRaw) {
  const ScenarioConfig cfg;
  // Rays diverge in the upper half-plane and meet behind the baseline.
  try {
    locate_from_angles(0.2, -0.2, cfg);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BehindBaseline);
  }
  const Position raw = locate_from_angles(0.2, -0.2, cfg, {.raw = true});
  EXPECT_LT(raw.y, 0.0);
}

TEST(LocateFromAngles, NoiselessRoundTrip) {
  const ScenarioConfig cfg;
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> xs(-30.0, 30.0), ys(1.0, 35.0);
  for (int i = 0; i < 1000; ++i) {
    const Position p{xs(rng), ys(rng)};
    const Position q = locate_from_angles(naf(aod(p, cfg), cfg), naf(aoa(p, cfg), cfg), cfg);
    EXPECT_NEAR(q.x, p.x, 1e-9);
    EXPECT_NEAR(q.y, p.y, 1e-9);
  }
}

TEST(MonostaticRange, Examples) {
  const ScenarioConfig cfg;
  EXPECT_NEAR(bistatic_to_monostatic_range(kPi / 4, 2.0 * std::sqrt(50.0), cfg), std::sqrt(50.0), 1e-12);
  const Position p{3, 4};
  const double rb = bistatic_range(p, cfg);
  EXPECT_NEAR(bistatic_to_monostatic_range(aoa(p, cfg), rb, cfg), std::sqrt(20.0), 1e-12);
  EXPECT_NEAR(bistatic_to_monostatic_range(kPi + aod(p, cfg), rb, cfg), std::sqrt(80.0), 1e-12);
  EXPECT_NEAR(bistatic_to_monostatic_range(0.4636, 13.4164, cfg), 4.4721, 1e-3);
}

TEST(MonostaticRange, DegenerateDenominator) {
  const ScenarioConfig cfg;
  try {
    bistatic_to_monostatic_range(kPi / 2, 10.0, cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateEllipse);
  }
}

TEST(LocateFromAngleRange, Examples) {
  const ScenarioConfig cfg;
  const Position p{3, 4};
  const double rb = bistatic_range(p, cfg);
  const Position rx = locate_from_angle_range(naf(aoa(p, cfg), cfg), rb, ArraySide::Rx, cfg);
  EXPECT_NEAR(rx.x, 3.0, 1e-12);
  EXPECT_NEAR(rx.y, 4.0, 1e-12);
  const Position tx = locate_from_angle_range(naf(aod(p, cfg), cfg), rb, ArraySide::Tx, cfg);
  EXPECT_NEAR(tx.x, 3.0, 1e-12);
  EXPECT_NEAR(tx.y, 4.0, 1e-12);

  const Position boresight{-5, 7};
  const Position b = locate_from_angle_range(0.0, bistatic_range(boresight, cfg), ArraySide::Tx, cfg);
  EXPECT_NEAR(b.x, -5.0, 1e-12);
  EXPECT_NEAR(b.y, 7.0, 1e-12);
}

TEST(LocateFromAngleRange, ExactInversionAndSideSymmetry) {
  const ScenarioConfig cfg;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> xs(-30.0, 30.0), ys(1e-3, 50.0);
  for (int i = 0; i < 2000; ++i) {
    const Position p{xs(rng), ys(rng)};
    const double rb = bistatic_range(p, cfg);
    for (auto side : {ArraySide::Tx, ArraySide::Rx}) {
      const double eta = naf(side == ArraySide::Tx ? aod(p, cfg) : aoa(p, cfg), cfg);
      const Position q = locate_from_angle_range(eta, rb, side, cfg);
      EXPECT_NEAR(q.x, p.x, 1e-9 * std::max(1.0, rb));
      EXPECT_NEAR(q.y, p.y, 1e-9 * std::max(1.0, rb));
    }
    const Position mirrored{-p.x, p.y};
    const Position tx = locate_from_angle_range(naf(aod(p, cfg), cfg), rb, ArraySide::Tx, cfg);
    const Position rx = locate_from_angle_range(naf(aoa(mirrored, cfg), cfg), rb, ArraySide::Rx, cfg);
    EXPECT_NEAR(tx.x, -rx.x, 1e-9);
    EXPECT_NEAR(tx.y, rx.y, 1e-9);
  }
}

TEST(ConversionFor, MapsKindPairs) {
  EXPECT_EQ(conversion_for({K::NafTx, K::NafRx}), Conversion::Angles);
  EXPECT_EQ(conversion_for({K::BistaticRange, K::NafTx}), Conversion::TxAngleRange);
  EXPECT_EQ(conversion_for({K::BistaticRange, K::NafRx}), Conversion::RxAngleRange);
  EXPECT_THROW(conversion_for(KindSet::all()), Error);
  EXPECT_THROW(conversion_for({K::NafTx}), Error);
}

TEST(ConversionJacobian, ClosedFormAtSymmetricPoint) {
  // x = -c (tr + tt) / (tr - tt), y = 2c / (tr - tt), t = tan(asin(eta / k)),
  // dt/deta = 1 / (k cos^3 phi). At (0, 5): tt = -1, tr = 1, cos phi = sqrt(2)/2.
  const ScenarioConfig cfg;
  const double dt_deta = 1.0 / (cfg.d_over_lambda * std::pow(std::sqrt(2.0) / 2.0, 3));
  Eigen::Matrix2d expected;
  expected << -2.5 * dt_deta, -2.5 * dt_deta, 2.5 * dt_deta, -2.5 * dt_deta;
  const Eigen::Matrix2d jac = conversion_jacobian(Conversion::Angles, measured({0, 5}, Conversion::Angles, cfg), cfg);
  EXPECT_LT((jac - expected).norm() / expected.norm(), 1e-6);
}

TEST(TaylorCovariance, ZeroVarianceGivesZeroMatrix) {
  const ScenarioConfig cfg;
  const auto set = noiseless({2, 9}, {K::NafTx, K::NafRx}, cfg, 0.0, 0.0);
  EXPECT_EQ(taylor_covariance(set, Conversion::Angles, cfg), Eigen::Matrix2d::Zero());
}

TEST(TaylorCovariance, MirrorSymmetry) {
  const ScenarioConfig cfg;
  const auto sym = taylor_covariance(noiseless({0, 5}, {K::NafTx, K::NafRx}, cfg, 0.15, 0.022), Conversion::Angles, cfg);
  EXPECT_NEAR(sym(0, 1), 0.0, 1e-9 * sym.norm());

  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> xs(-15.0, 15.0), ys(5.0, 35.0);
  const Eigen::Matrix2d flip = Eigen::Vector2d(-1.0, 1.0).asDiagonal();
  for (int i = 0; i < 200; ++i) {
    const Position p{xs(rng), ys(rng)};
    const Position m{-p.x, p.y};
    const auto a = taylor_covariance(noiseless(p, {K::NafTx, K::NafRx}, cfg, 0.15, 0.022), Conversion::Angles, cfg);
    const auto b = taylor_covariance(noiseless(m, {K::NafTx, K::NafRx}, cfg, 0.15, 0.022), Conversion::Angles, cfg);
    EXPECT_LT((a - flip * b * flip).norm(), 1e-5 * a.norm());
    const auto tx = taylor_covariance(noiseless(p, {K::BistaticRange, K::NafTx}, cfg, 0.15, 0.022),
                                      Conversion::TxAngleRange, cfg);
    const auto rx = taylor_covariance(noiseless(m, {K::BistaticRange, K::NafRx}, cfg, 0.15, 0.022),
                                      Conversion::RxAngleRange, cfg);
    EXPECT_LT((tx - flip * rx * flip).norm(), 1e-5 * tx.norm());
  }
}

TEST(TaylorCovariance, QuadraticScalingSymmetricPsd) {
  const ScenarioConfig cfg;
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> xs(-15.0, 15.0), ys(5.0, 35.0);
  for (auto kinds : {KindSet{K::NafTx, K::NafRx}, KindSet{K::BistaticRange, K::NafTx}, KindSet{K::BistaticRange, K::NafRx}}) {
    for (int i = 0; i < 100; ++i) {
      const Position p{xs(rng), ys(rng)};
      const auto conv = conversion_for(kinds);
      const auto base = taylor_covariance(noiseless(p, kinds, cfg, 0.15, 0.022), conv, cfg);
      const auto scaled = taylor_covariance(noiseless(p, kinds, cfg, 3 * 0.15, 3 * 0.022), conv, cfg);
      EXPECT_LT((scaled - 9.0 * base).norm(), 1e-12 * scaled.norm());
      EXPECT_LE(std::abs(base(0, 1) - base(1, 0)), 1e-12 * base.norm());
      Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(base);
      EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-9 * eig.eigenvalues().maxCoeff());
    }
  }
}

TEST(TaylorCovariance, MatchesSmallNoiseSampleCovariance) {
  const ScenarioConfig cfg;
  const double sr = 0.01 * cfg.sigma_r, se = 0.01 * cfg.sigma_eta;
  const Position p{3, 10};
  for (auto kinds : {KindSet{K::NafTx, K::NafRx}, KindSet{K::BistaticRange, K::NafTx}, KindSet{K::BistaticRange, K::NafRx}}) {
    const auto conv = conversion_for(kinds);
    const Eigen::Vector2d m = measured(p, conv, cfg);
    const Eigen::Vector2d s = conv == Conversion::Angles ? Eigen::Vector2d(se, se) : Eigen::Vector2d(sr, se);
    std::mt19937_64 rng(77);
    std::normal_distribution<double> unit(0.0, 1.0);
    constexpr int n = 100000;
    Eigen::Vector2d mean = Eigen::Vector2d::Zero();
    Eigen::Matrix2d second = Eigen::Matrix2d::Zero();
    for (int i = 0; i < n; ++i) {
      const Eigen::Vector2d noisy{m[0] + s[0] * unit(rng), m[1] + s[1] * unit(rng)};
      const Eigen::Vector2d q = convert(conv, noisy, cfg).vec();
      mean += q;
      second += q * q.transpose();
    }
    mean /= n;
    const Eigen::Matrix2d sample = second / n - mean * mean.transpose();
    const auto cov = taylor_covariance(noiseless(p, kinds, cfg, sr, se), conv, cfg);
    EXPECT_LT((cov - sample).norm() / sample.norm(), 0.15) << kinds.label();
  }
}

TEST(GeoEstimate, CarriesProvenance) {
  const ScenarioConfig cfg;
  const auto est = geo_estimate(noiseless({1, 8}, {K::BistaticRange, K::NafRx}, cfg, 0.15, 0.022), cfg);
  EXPECT_EQ(est.method, EstimateMethod::GeoAngleRange);
  EXPECT_EQ(est.used_kinds, (KindSet{K::BistaticRange, K::NafRx}));
  EXPECT_NEAR(est.p_hat.x, 1.0, 1e-9);
  EXPECT_NEAR(est.p_hat.y, 8.0, 1e-9);
  EXPECT_GT(est.cov.trace(), 0.0);
}
