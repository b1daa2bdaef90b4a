#pragma once

// Monte-Carlo harnesses: grid positioning evaluation, fixed-covariance
// calibration and tracking campaigns, plus RMSE / empirical CDF statistics.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "bistatic/error.hpp"
#include "bistatic/estimator.hpp"
#include "bistatic/geometry.hpp"
#include "bistatic/kalman_tracker.hpp"
#include "bistatic/parallel.hpp"
#include "bistatic/trajectory.hpp"

namespace bistatic {

/// Minimum target distance to the baseline on evaluation grids.
inline constexpr double kMinBaselineDistance = 5.0;
/// Floor applied to calibrated fixed-covariance variances.
inline constexpr double kCalibrationVarianceFloor = 1e-6;
/// Radius of the random ML initial guess around the ground truth.
inline constexpr double kInitialGuessRadius = 3.0;

inline Rect default_evaluation_area() { return {-15.0, 15.0, -5.0, 25.0}; }

// ---------------------------------------------------------------------------
// Statistics

inline double rmse(std::span<const Eigen::Vector2d> errors) {
  if (errors.empty()) throw Error(ErrorCode::InvalidArgument, "rmse of an empty error list");
  double sum = 0.0;
  for (const auto& e : errors) sum += e.squaredNorm();
  return std::sqrt(sum / static_cast<double>(errors.size()));
}

/// Sorted empirical distribution of scalar samples.
class EmpiricalCdf {
 public:
  EmpiricalCdf() = default;
  explicit EmpiricalCdf(std::vector<double> samples) : sorted_(std::move(samples)) {
    for (double v : sorted_)
      if (std::isnan(v)) throw Error(ErrorCode::InvalidArgument, "cdf samples must not be NaN");
    std::sort(sorted_.begin(), sorted_.end());
  }

  std::size_t size() const { return sorted_.size(); }
  bool empty() const { return sorted_.empty(); }
  const std::vector<double>& values() const { return sorted_; }

  /// Nearest-rank percentile, p in [0, 100].
  double percentile(double p) const {
    if (sorted_.empty()) throw Error(ErrorCode::InvalidArgument, "percentile of an empty cdf");
    if (!(p >= 0.0 && p <= 100.0)) throw Error(ErrorCode::InvalidArgument, "percentile must lie in [0, 100]");
    const double n = static_cast<double>(sorted_.size());
    const auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * n - 1e-9));
    return sorted_[std::clamp<std::size_t>(rank, 1, sorted_.size()) - 1];
  }

  /// Fraction of samples <= x.
  double fraction_at(double x) const {
    if (sorted_.empty()) return 0.0;
    const auto it = std::upper_bound(sorted_.begin(), sorted_.end(), x);
    return static_cast<double>(it - sorted_.begin()) / static_cast<double>(sorted_.size());
  }

  /// (value, cumulative fraction) at every sample, or at most max_points
  /// evenly spaced ranks (always including the last one).
  std::vector<std::pair<double, double>> points(std::size_t max_points = 0) const {
    std::vector<std::pair<double, double>> out;
    const std::size_t n = sorted_.size();
    if (n == 0) return out;
    const std::size_t count = max_points == 0 ? n : std::min(n, max_points);
    out.reserve(count);
    for (std::size_t k = 1; k <= count; ++k) {
      const std::size_t rank = count == n ? k : (k * n + count - 1) / count;
      out.emplace_back(sorted_[rank - 1], static_cast<double>(rank) / static_cast<double>(n));
    }
    return out;
  }

 private:
  std::vector<double> sorted_;
};

inline EmpiricalCdf cdf(std::vector<double> samples) {
  if (samples.empty()) throw Error(ErrorCode::InvalidArgument, "cdf of an empty sample list");
  return EmpiricalCdf(std::move(samples));
}

/// Running moments of 2-D errors. Merging is done in a fixed order by the
/// harnesses so totals do not depend on scheduling.
struct ErrorAccumulator {
  std::size_t count = 0;
  double sum_sq_x = 0.0;
  double sum_sq_y = 0.0;
  double sum_abs = 0.0;
  std::vector<double> abs_samples;

  void add(const Eigen::Vector2d& e, bool keep_sample = true) {
    ++count;
    sum_sq_x += e.x() * e.x();
    sum_sq_y += e.y() * e.y();
    const double a = e.norm();
    sum_abs += a;
    if (keep_sample) abs_samples.push_back(a);
  }

  void merge(const ErrorAccumulator& o) {
    count += o.count;
    sum_sq_x += o.sum_sq_x;
    sum_sq_y += o.sum_sq_y;
    sum_abs += o.sum_abs;
    abs_samples.insert(abs_samples.end(), o.abs_samples.begin(), o.abs_samples.end());
  }
};

struct ErrorStats {
  std::size_t count = 0;
  double rmse_x = 0.0;
  double rmse_y = 0.0;
  double rmse = 0.0;
  double mean_abs = 0.0;
  EmpiricalCdf cdf;

  static ErrorStats from(const ErrorAccumulator& acc) {
    ErrorStats s;
    s.count = acc.count;
    if (acc.count > 0) {
      const double n = static_cast<double>(acc.count);
      s.rmse_x = std::sqrt(acc.sum_sq_x / n);
      s.rmse_y = std::sqrt(acc.sum_sq_y / n);
      s.rmse = std::sqrt((acc.sum_sq_x + acc.sum_sq_y) / n);
      s.mean_abs = acc.sum_abs / n;
    }
    s.cdf = EmpiricalCdf(acc.abs_samples);
    return s;
  }
};

using DiscardCounts = std::map<ErrorCode, std::size_t>;

inline std::size_t total(const DiscardCounts& d) {
  std::size_t n = 0;
  for (const auto& [code, count] : d) n += count;
  return n;
}

inline void merge_into(DiscardCounts& into, const DiscardCounts& from) {
  for (const auto& [code, count] : from) into[code] += count;
}

// ---------------------------------------------------------------------------
// Positioning grid evaluation

struct GridSpec {
  std::size_t nx = 10;
  std::size_t ny = 10;
  Rect bounds{-15.0, 15.0, 5.0, 35.0};
  std::size_t samples_per_point = 5000;

  static GridSpec paper() { return {}; }
  static GridSpec desk() { return {5, 5, {-15.0, 15.0, 5.0, 35.0}, 500}; }

  void validate() const {
    if (nx < 1 || ny < 1) throw Error(ErrorCode::InvalidArgument, "grid counts must be >= 1");
    if (!(bounds.x_min <= bounds.x_max) || !(bounds.y_min <= bounds.y_max))
      throw Error(ErrorCode::InvalidArgument, "grid bounds must be ordered");
    if ((nx > 1 && !(bounds.x_min < bounds.x_max)) || (ny > 1 && !(bounds.y_min < bounds.y_max)))
      throw Error(ErrorCode::InvalidArgument, "grid bounds must span a non-empty interval");
    if (samples_per_point < 1) throw Error(ErrorCode::InvalidArgument, "samples_per_point must be >= 1");
  }

  std::size_t size() const { return nx * ny; }

  /// Point i (x index) , j (y index); x varies fastest in index().
  Position point(std::size_t i, std::size_t j) const {
    auto lerp = [](double a, double b, std::size_t k, std::size_t n) {
      return n == 1 ? a : a + (b - a) * static_cast<double>(k) / static_cast<double>(n - 1);
    };
    return {lerp(bounds.x_min, bounds.x_max, i, nx), lerp(bounds.y_min, bounds.y_max, j, ny)};
  }
  Position point(std::size_t index) const { return point(index % nx, index / nx); }

  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

struct PointResult {
  Position truth;
  std::size_t draws = 0;
  std::size_t estimates = 0;
  DiscardCounts discards;
  double rmse_x = 0.0;
  double rmse_y = 0.0;
  double rmse = 0.0;
  double mean_abs = 0.0;
  bool in_area = false;
};

struct EvalReport {
  std::vector<PointResult> points;
  Rect area = default_evaluation_area();
  // Pooled over all estimates at grid points inside `area`.
  ErrorStats area_stats;
  // Mean of per-point RMSE over grid points inside `area`.
  double mean_point_rmse = 0.0;
  DiscardCounts discards;
  std::size_t draws = 0;
  std::size_t estimates = 0;
};

struct EvalOptions {
  Rect area = default_evaluation_area();
  std::size_t workers = 1;
  // Keep per-sample absolute errors for the area CDF.
  bool keep_samples = true;
};

inline bool grid_point_in_area(const Rect& area, const Position& p) { return area.expanded(1e-9).contains(p); }

/// Uniform draw from the disk of the given radius around `center`.
template <class Rng>
Position random_guess(const Position& center, double radius, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double r = radius * std::sqrt(u(rng));
  const double a = 2.0 * std::numbers::pi * u(rng);
  return {center.x + r * std::cos(a), center.y + r * std::sin(a)};
}

/// Draws grid.samples_per_point noisy measurement sets at every grid point,
/// estimates with `fusion` and aggregates errors. Failed estimates (including
/// angle-only intersections behind the baseline) are discarded and counted
/// by reason; they do not enter any RMSE.
inline EvalReport evaluate_positioning(const GridSpec& grid, const FusionSpec& fusion, const ScenarioConfig& cfg,
                                       std::uint64_t seed, const EvalOptions& opts = {}) {
  grid.validate();
  cfg.validate();
  FusionSpec spec = fusion;
  spec.covariance = CovarianceMode::None;
  spec.validate();
  if (grid.bounds.y_min < kMinBaselineDistance)
    throw Error(ErrorCode::InvalidArgument, "grid points must keep 5 m distance to the baseline");

  struct Work {
    PointResult result;
    ErrorAccumulator acc;
  };
  std::vector<Work> work(grid.size());
  parallel_for(grid.size(), opts.workers, [&](std::size_t idx) {
    Work& w = work[idx];
    w.result.truth = grid.point(idx);
    w.result.in_area = grid_point_in_area(opts.area, w.result.truth);
    std::mt19937_64 rng(derive_seed(seed, idx));
    for (std::size_t s = 0; s < grid.samples_per_point; ++s) {
      ++w.result.draws;
      const MeasurementSet set = sample_noisy(w.result.truth, spec.kinds, cfg, rng);
      std::optional<Position> guess;
      if (spec.estimator == Estimator::Ml) guess = random_guess(w.result.truth, kInitialGuessRadius, rng);
      try {
        const PositionEstimate est = estimate_position(set, spec, cfg, guess);
        ++w.result.estimates;
        w.acc.add(est.p_hat.vec() - w.result.truth.vec(), opts.keep_samples && w.result.in_area);
      } catch (const Error& e) {
        ++w.result.discards[e.code()];
      }
    }
    const ErrorStats st = ErrorStats::from(ErrorAccumulator{w.acc.count, w.acc.sum_sq_x, w.acc.sum_sq_y, w.acc.sum_abs, {}});
    w.result.rmse_x = st.rmse_x;
    w.result.rmse_y = st.rmse_y;
    w.result.rmse = st.rmse;
    w.result.mean_abs = st.mean_abs;
  });

  EvalReport report;
  report.area = opts.area;
  ErrorAccumulator area_acc;
  std::size_t in_area_points = 0;
  double point_rmse_sum = 0.0;
  for (auto& w : work) {
    report.draws += w.result.draws;
    report.estimates += w.result.estimates;
    merge_into(report.discards, w.result.discards);
    if (w.result.in_area) {
      area_acc.merge(w.acc);
      if (w.result.estimates > 0) {
        ++in_area_points;
        point_rmse_sum += w.result.rmse;
      }
    }
    report.points.push_back(std::move(w.result));
  }
  report.area_stats = ErrorStats::from(area_acc);
  report.mean_point_rmse = in_area_points ? point_rmse_sum / static_cast<double>(in_area_points) : 0.0;
  return report;
}

/// Per-axis squared RMSE of the ML estimator over the evaluation area,
/// floored at kCalibrationVarianceFloor.
inline FixedCovariance calibrate_fixed_covariance(const GridSpec& grid, KindSet kinds, const ScenarioConfig& cfg,
                                                  std::uint64_t seed, const EvalOptions& opts = {},
                                                  const MlConfig& ml = {}) {
  FusionSpec spec;
  spec.estimator = Estimator::Ml;
  spec.kinds = kinds;
  spec.covariance = CovarianceMode::None;
  spec.ml = ml;
  EvalOptions o = opts;
  o.keep_samples = false;
  const EvalReport r = evaluate_positioning(grid, spec, cfg, seed, o);
  return {std::max(r.area_stats.rmse_x * r.area_stats.rmse_x, kCalibrationVarianceFloor),
          std::max(r.area_stats.rmse_y * r.area_stats.rmse_y, kCalibrationVarianceFloor)};
}

// ---------------------------------------------------------------------------
// Tracking campaign

struct TrackingCampaign {
  std::size_t n_tracks = 120;
  std::size_t trials_per_track = 40;
  TrajectoryConfig trajectory;
  TrackerConfig tracker;
  FusionSpec fusion;
  Rect area = default_evaluation_area();
  // Keep every k-th in-area tick error for the CDFs (0 disables CDFs).
  std::size_t cdf_stride = 1;
  std::size_t workers = 1;

  static TrackingCampaign paper() { return {}; }
  static TrackingCampaign desk() {
    TrackingCampaign c;
    c.n_tracks = 10;
    c.trials_per_track = 5;
    return c;
  }

  void validate() const {
    if (n_tracks < 1 || trials_per_track < 1) throw Error(ErrorCode::InvalidArgument, "campaign counts must be >= 1");
    if (!area.valid()) throw Error(ErrorCode::InvalidArgument, "evaluation area must be ordered");
    trajectory.validate();
    tracker.validate();
    fusion.validate();
    if (std::abs(trajectory.dt - tracker.dt) > 1e-12)
      throw Error(ErrorCode::InvalidArgument, "trajectory and tracker dt must agree");
  }
};

/// Two-angle fusion needs the reset policy; other fusions run without it.
inline TrackerConfig tracker_for(const KindSet& kinds, TrackerConfig base) {
  base.reset_enabled = kinds == KindSet{MeasurementKind::NafTx, MeasurementKind::NafRx};
  return base;
}

struct TrackingReport {
  ErrorStats position;
  ErrorStats velocity;
  // Per-tick estimates fed to the tracker, same ticks and area restriction.
  ErrorStats raw_position;
  std::size_t ticks = 0;
  std::size_t updates = 0;
  std::size_t gated = 0;
  std::size_t estimate_failures = 0;
  std::size_t update_failures = 0;
  std::size_t resets = 0;

  /// Relative reduction of position RMSE against the raw estimates.
  double improvement() const { return raw_position.rmse > 0.0 ? 1.0 - position.rmse / raw_position.rmse : 0.0; }
};

/// Called once per (track, trial) in index order.
using TrialSink = std::function<void(std::size_t track, std::size_t trial, const TrackReport&)>;

inline Trajectory campaign_trajectory(const TrackingCampaign& c, std::uint64_t seed, std::size_t track) {
  std::mt19937_64 rng(derive_seed(seed, track, ~std::uint64_t{0}));
  return sample_trajectory(c.trajectory, rng);
}

inline std::vector<TrackInput> make_track_inputs(const Trajectory& traj, KindSet kinds, const ScenarioConfig& cfg,
                                                 std::uint64_t stream_seed) {
  std::mt19937_64 rng(stream_seed);
  std::vector<TrackInput> inputs;
  inputs.reserve(traj.samples.size());
  for (const auto& s : traj.samples) inputs.push_back({s.t, sample_noisy(s.p, kinds, cfg, rng), s.state()});
  return inputs;
}

/// Runs n_tracks generated trajectories with trials_per_track independent
/// noise realizations each. Errors are counted only while the true position
/// lies inside the evaluation area.
inline TrackingReport evaluate_tracking(const TrackingCampaign& campaign, const ScenarioConfig& cfg,
                                        std::uint64_t seed, const TrialSink& sink = {}) {
  campaign.validate();
  cfg.validate();
  ErrorAccumulator pos, vel, raw;
  TrackingReport report;

  for (std::size_t track = 0; track < campaign.n_tracks; ++track) {
    const Trajectory traj = campaign_trajectory(campaign, seed, track);
    struct Trial {
      TrackReport report;
      ErrorAccumulator pos, vel, raw;
    };
    std::vector<Trial> trials(campaign.trials_per_track);
    parallel_for(trials.size(), campaign.workers, [&](std::size_t trial) {
      const auto inputs = make_track_inputs(traj, campaign.fusion.kinds, cfg, derive_seed(seed, track, trial));
      Trial& t = trials[trial];
      t.report = run_track(inputs, campaign.fusion, cfg, campaign.tracker);
      std::size_t kept = 0;
      for (const TickRecord& rec : t.report.ticks) {
        if (!rec.has_state()) continue;
        const Position truth{rec.truth[0], rec.truth[1]};
        if (!campaign.area.contains(truth)) continue;
        const bool keep = campaign.cdf_stride > 0 && kept++ % campaign.cdf_stride == 0;
        t.pos.add(rec.state.head<2>() - rec.truth.head<2>(), keep);
        t.vel.add(rec.state.tail<2>() - rec.truth.tail<2>(), keep);
        if (rec.has_estimate()) t.raw.add(rec.estimate.vec() - truth.vec(), keep);
      }
    });
    for (std::size_t trial = 0; trial < trials.size(); ++trial) {
      const Trial& t = trials[trial];
      pos.merge(t.pos);
      vel.merge(t.vel);
      raw.merge(t.raw);
      report.ticks += t.report.ticks.size();
      report.updates += t.report.updates;
      report.gated += t.report.gated;
      report.estimate_failures += t.report.estimate_failures;
      report.update_failures += t.report.update_failures;
      report.resets += t.report.resets;
      if (sink) sink(track, trial, t.report);
    }
  }
  report.position = ErrorStats::from(pos);
  report.velocity = ErrorStats::from(vel);
  report.raw_position = ErrorStats::from(raw);
  return report;
}

}  // namespace bistatic
