#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "bistatic/evaluation.hpp"

using namespace bistatic;

namespace {

constexpr KindSet kAngles{MeasurementKind::NafTx, MeasurementKind::NafRx};
constexpr KindSet kAodRange{MeasurementKind::BistaticRange, MeasurementKind::NafTx};

FusionSpec ml_spec(KindSet kinds) {
  FusionSpec s;
  s.estimator = Estimator::Ml;
  s.kinds = kinds;
  s.covariance = CovarianceMode::None;
  return s;
}

FusionSpec geo_spec(KindSet kinds) {
  FusionSpec s = ml_spec(kinds);
  s.estimator = Estimator::Geo;
  return s;
}

ScenarioConfig noiseless() {
  ScenarioConfig c;
  c.sigma_r = 0.0;
  c.sigma_eta = 0.0;
  return c;
}

void expect_same(const EvalReport& a, const EvalReport& b) {
  ASSERT_EQ(a.points.size(), b.points.size());
  for (std::size_t i = 0; i < a.points.size(); ++i) {
    EXPECT_EQ(a.points[i].rmse, b.points[i].rmse);
    EXPECT_EQ(a.points[i].estimates, b.points[i].estimates);
  }
  EXPECT_EQ(a.area_stats.rmse, b.area_stats.rmse);
  EXPECT_EQ(a.area_stats.cdf.values(), b.area_stats.cdf.values());
  EXPECT_EQ(a.discards, b.discards);
}

}  // namespace

TEST(Rmse, ClosedForms) {
  const std::vector<Eigen::Vector2d> same(7, Eigen::Vector2d(0.3, 0.4));
  EXPECT_NEAR(rmse(same), 0.5, 1e-15);
  EXPECT_EQ(rmse(std::vector<Eigen::Vector2d>{Eigen::Vector2d::Zero()}), 0.0);
  EXPECT_NEAR(rmse(std::vector<Eigen::Vector2d>{{1, 0}, {0, 1}}), 1.0, 1e-15);
  EXPECT_THROW(rmse(std::vector<Eigen::Vector2d>{}), Error);
}

TEST(Cdf, ConstantIsStep) {
  const auto c = cdf(std::vector<double>(10, 2.5));
  EXPECT_EQ(c.fraction_at(2.4999), 0.0);
  EXPECT_EQ(c.fraction_at(2.5), 1.0);
  EXPECT_EQ(c.percentile(1), 2.5);
  EXPECT_EQ(c.percentile(100), 2.5);
}

TEST(Cdf, NearestRankPercentile) {
  std::vector<double> v(100);
  std::iota(v.begin(), v.end(), 1.0);
  std::reverse(v.begin(), v.end());
  const auto c = cdf(v);
  EXPECT_EQ(c.percentile(95), 95.0);
  EXPECT_EQ(c.percentile(50), 50.0);
  EXPECT_EQ(c.percentile(0), 1.0);
  EXPECT_THROW(c.percentile(101), Error);
  EXPECT_THROW(cdf({}), Error);
}

TEST(Cdf, MonotoneWithinUnitRange) {
  std::mt19937_64 rng(3);
  std::exponential_distribution<double> ex(0.7);
  std::vector<double> v(5000);
  for (auto& x : v) x = ex(rng);
  const auto c = cdf(v);
  for (std::size_t max_points : {std::size_t{0}, std::size_t{37}}) {
    const auto pts = c.points(max_points);
    ASSERT_FALSE(pts.empty());
    EXPECT_EQ(pts.back().second, 1.0);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      EXPECT_GT(pts[i].second, 0.0);
      EXPECT_LE(pts[i].second, 1.0);
      if (i > 0) {
        EXPECT_GE(pts[i].first, pts[i - 1].first);
        EXPECT_GT(pts[i].second, pts[i - 1].second);
      }
    }
  }
}

TEST(GridSpec, PointsAndArea) {
  const GridSpec g = GridSpec::paper();
  EXPECT_EQ(g.size(), 100u);
  EXPECT_EQ(g.point(0), (Position{-15, 5}));
  EXPECT_EQ(g.point(99), (Position{15, 35}));
  std::size_t in_area = 0;
  for (std::size_t i = 0; i < g.size(); ++i) in_area += grid_point_in_area(default_evaluation_area(), g.point(i));
  EXPECT_EQ(in_area, 70u);  // rows y = 5 .. 25
  GridSpec bad = g;
  bad.samples_per_point = 0;
  EXPECT_THROW(bad.validate(), Error);
  bad = g;
  bad.nx = 0;
  EXPECT_THROW(bad.validate(), Error);
}

TEST(EvaluatePositioning, NoiselessIsExact) {
  GridSpec g = GridSpec::desk();
  g.samples_per_point = 4;
  for (const FusionSpec& spec : {ml_spec(KindSet::all()), ml_spec(kAngles), geo_spec(kAodRange), geo_spec(kAngles)}) {
    const EvalReport r = evaluate_positioning(g, spec, noiseless(), 1);
    EXPECT_EQ(r.estimates, r.draws) << spec.label();
    EXPECT_LT(r.area_stats.rmse, 1e-6) << spec.label();
    for (const auto& p : r.points) EXPECT_LT(p.rmse, 1e-6);
  }
}

TEST(EvaluatePositioning, RejectsPointsNearBaseline) {
  GridSpec g = GridSpec::desk();
  g.bounds.y_min = 4.0;
  EXPECT_THROW(evaluate_positioning(g, ml_spec(KindSet::all()), {}, 1), Error);
}

TEST(EvaluatePositioning, DiscardAccountingAndJensen) {
  GridSpec g = GridSpec::desk();
  g.samples_per_point = 200;
  const EvalReport r = evaluate_positioning(g, geo_spec(kAngles), {}, 11);
  std::size_t discards = 0;
  for (const auto& p : r.points) {
    EXPECT_EQ(p.estimates + total(p.discards), p.draws);
    EXPECT_GE(p.rmse * p.rmse, p.mean_abs * p.mean_abs * (1 - 1e-12));
    discards += total(p.discards);
  }
  EXPECT_EQ(discards, total(r.discards));
  EXPECT_GT(r.discards.count(ErrorCode::BehindBaseline), 0u);
  EXPECT_GE(r.area_stats.rmse * r.area_stats.rmse, r.area_stats.mean_abs * r.area_stats.mean_abs);
}

TEST(EvaluatePositioning, ErrorGrowsWithDistanceOnCenterColumn) {
  GridSpec g{1, 4, {0.0, 0.0, 5.0, 35.0}, 400};
  const EvalReport r = evaluate_positioning(g, ml_spec(KindSet::all()), {}, 5);
  for (std::size_t j = 1; j < r.points.size(); ++j) EXPECT_GT(r.points[j].rmse, r.points[j - 1].rmse);
}

TEST(EvaluatePositioning, RangeHelpsTwoAngles) {
  GridSpec g = GridSpec::desk();
  g.samples_per_point = 150;
  const double angles = evaluate_positioning(g, ml_spec(kAngles), {}, 2).area_stats.rmse;
  const double all = evaluate_positioning(g, ml_spec(KindSet::all()), {}, 2).area_stats.rmse;
  EXPECT_LT(all, 0.7 * angles);
}

TEST(EvaluatePositioning, WorkerCountDoesNotChangeResults) {
  GridSpec g = GridSpec::desk();
  g.samples_per_point = 60;
  EvalOptions one, four;
  four.workers = 4;
  expect_same(evaluate_positioning(g, ml_spec(KindSet::all()), {}, 9, one),
              evaluate_positioning(g, ml_spec(KindSet::all()), {}, 9, four));
  const auto a = evaluate_positioning(g, ml_spec(KindSet::all()), {}, 9, one);
  const auto b = evaluate_positioning(g, ml_spec(KindSet::all()), {}, 10, one);
  EXPECT_NE(a.area_stats.rmse, b.area_stats.rmse);
}

TEST(Calibration, NoiselessHitsFloor) {
  GridSpec g = GridSpec::desk();
  g.samples_per_point = 5;
  const FixedCovariance fc = calibrate_fixed_covariance(g, KindSet::all(), noiseless(), 1);
  EXPECT_EQ(fc.sigma_x2, kCalibrationVarianceFloor);
  EXPECT_EQ(fc.sigma_y2, kCalibrationVarianceFloor);
  const Eigen::Matrix2d m = fixed_covariance_matrix(fc);
  EXPECT_EQ(m(0, 0), fc.sigma_x2);
  EXPECT_EQ(m(1, 1), fc.sigma_y2);
  EXPECT_EQ(m(0, 1), 0.0);
}

TEST(Calibration, MatchesSquaredAreaRmse) {
  GridSpec g = GridSpec::desk();
  g.samples_per_point = 100;
  const auto r = evaluate_positioning(g, ml_spec(KindSet::all()), {}, 4);
  const auto fc = calibrate_fixed_covariance(g, KindSet::all(), {}, 4);
  EXPECT_DOUBLE_EQ(fc.sigma_x2, r.area_stats.rmse_x * r.area_stats.rmse_x);
  EXPECT_DOUBLE_EQ(fc.sigma_y2, r.area_stats.rmse_y * r.area_stats.rmse_y);
}

TEST(Calibration, DoublingNoiseQuadruplesVariances) {
  GridSpec g = GridSpec::desk();
  g.samples_per_point = 400;
  ScenarioConfig small;
  small.sigma_r = 0.05;
  small.sigma_eta = 0.005;
  ScenarioConfig twice = small;
  twice.sigma_r *= 2;
  twice.sigma_eta *= 2;
  const auto a = calibrate_fixed_covariance(g, KindSet::all(), small, 8);
  const auto b = calibrate_fixed_covariance(g, KindSet::all(), twice, 8);
  EXPECT_NEAR(b.sigma_x2 / a.sigma_x2, 4.0, 1.0);
  EXPECT_NEAR(b.sigma_y2 / a.sigma_y2, 4.0, 1.0);
}

namespace {

TrackingCampaign small_campaign(const FixedCovariance& fc) {
  TrackingCampaign c = TrackingCampaign::desk();
  c.n_tracks = 2;
  c.trials_per_track = 2;
  c.trajectory.duration = 10.0;
  c.fusion = ml_spec(KindSet::all());
  c.fusion.covariance = CovarianceMode::Fixed;
  c.fusion.fixed = fc;
  return c;
}

}  // namespace

TEST(EvaluateTracking, NoiselessStraightTracks) {
  TrackingCampaign c = small_campaign({1e-6, 1e-6});
  c.trajectory.turn_std = 0.0;
  c.trajectory.period_choices = {1e8};
  const TrackingReport r = evaluate_tracking(c, noiseless(), 3);
  EXPECT_GT(r.position.count, 0u);
  EXPECT_LT(r.position.rmse, 0.01);
  EXPECT_EQ(r.estimate_failures, 0u);
}

TEST(EvaluateTracking, ImprovesOnRawEstimates) {
  const TrackingCampaign c = small_campaign({0.16, 0.3});
  const TrackingReport r = evaluate_tracking(c, {}, 21);
  EXPECT_GT(r.raw_position.count, 0u);
  EXPECT_LT(r.position.rmse, r.raw_position.rmse);
  EXPECT_GT(r.improvement(), 0.0);
  EXPECT_GE(r.position.rmse * r.position.rmse, r.position.mean_abs * r.position.mean_abs);
}

TEST(EvaluateTracking, DeterministicAcrossWorkers) {
  TrackingCampaign c = small_campaign({0.16, 0.3});
  const TrackingReport a = evaluate_tracking(c, {}, 5);
  c.workers = 3;
  const TrackingReport b = evaluate_tracking(c, {}, 5);
  EXPECT_EQ(a.position.rmse, b.position.rmse);
  EXPECT_EQ(a.velocity.rmse, b.velocity.rmse);
  EXPECT_EQ(a.raw_position.rmse, b.raw_position.rmse);
  EXPECT_EQ(a.position.cdf.values(), b.position.cdf.values());
  EXPECT_EQ(a.updates, b.updates);
}

TEST(EvaluateTracking, SinkSeesEveryTrialInOrder) {
  TrackingCampaign c = small_campaign({0.16, 0.3});
  c.workers = 2;
  std::vector<std::pair<std::size_t, std::size_t>> order;
  std::size_t rows = 0;
  const TrackingReport r = evaluate_tracking(c, {}, 5, [&](std::size_t track, std::size_t trial, const TrackReport& tr) {
    order.emplace_back(track, trial);
    rows += tr.ticks.size();
  });
  const std::vector<std::pair<std::size_t, std::size_t>> want{{0, 0}, {0, 1}, {1, 0}, {1, 1}};
  EXPECT_EQ(order, want);
  EXPECT_EQ(rows, 4u * c.trajectory.sample_count());
  EXPECT_EQ(r.ticks, rows);
}

TEST(EvaluateTracking, ResetOnlyForTwoAngles) {
  EXPECT_TRUE(tracker_for(kAngles, {}).reset_enabled);
  EXPECT_FALSE(tracker_for(KindSet::all(), {}).reset_enabled);
  EXPECT_FALSE(tracker_for(kAodRange, {}).reset_enabled);
}

TEST(Seeds, DerivedStreamsDiffer) {
  EXPECT_NE(derive_seed(1, 0, 0), derive_seed(1, 0, 1));
  EXPECT_NE(derive_seed(1, 0, 1), derive_seed(1, 1, 0));
  EXPECT_NE(derive_seed(1, 2, 3), derive_seed(2, 2, 3));
  EXPECT_EQ(derive_seed(7, 2, 3), derive_seed(7, 2, 3));
}

TEST(ParallelFor, VisitsEveryIndexAndPropagatesErrors) {
  std::vector<int> hits(1000, 0);
  parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i] += 1; });
  for (int h : hits) EXPECT_EQ(h, 1);
  EXPECT_THROW(parallel_for(10, 3,
                            [](std::size_t i) {
                              if (i == 6) throw Error(ErrorCode::InvalidArgument, "boom");
                            }),
               Error);
}
