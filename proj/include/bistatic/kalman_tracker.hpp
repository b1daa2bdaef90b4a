#pragma once

// Converted-measurement Kalman filter: constant-velocity dynamics, Cartesian
// position observations with per-estimate covariance, distance gating and a
// ground-truth reset policy.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "bistatic/error.hpp"
#include "bistatic/estimator.hpp"
#include "bistatic/geometry.hpp"

namespace bistatic {

using StateVector = Eigen::Vector4d;  // [px, py, vx, vy]

struct KinematicState {
  StateVector theta = StateVector::Zero();
  Eigen::Matrix4d P = Eigen::Matrix4d::Zero();
  double t = 0.0;

  Position position() const { return {theta[0], theta[1]}; }
  Eigen::Vector2d velocity() const { return theta.tail<2>(); }
};

/// How q_diag becomes the per-step process noise: Discrete uses it as-is,
/// Rate multiplies it by dt (a per-second intensity).
enum class ProcessNoiseModel { Discrete, Rate };

constexpr std::string_view to_string(ProcessNoiseModel m) { return m == ProcessNoiseModel::Discrete ? "discrete" : "rate"; }

struct TrackerConfig {
  double dt = 0.01;
  std::array<double, 4> q_diag{0.3, 0.3, 0.3, 0.3};
  ProcessNoiseModel process_noise = ProcessNoiseModel::Rate;
  std::array<double, 4> p0_diag{0.01, 0.01, 0.01, 0.01};
  double gate_radius = 8.0;
  bool reset_enabled = false;
  double reset_timeout = 0.5;
  Rect area_bounds{-15.0, 15.0, -5.0, 25.0};
  double area_margin = 5.0;
  // Start from the first successful estimate with zero velocity instead of truth.
  bool cold_start = false;

  void validate() const {
    if (!(dt > 0.0)) throw Error(ErrorCode::InvalidArgument, "tracker dt must be > 0");
    for (double q : q_diag)
      if (!(q >= 0.0)) throw Error(ErrorCode::InvalidArgument, "q_diag entries must be >= 0");
    for (double p : p0_diag)
      if (!(p >= 0.0)) throw Error(ErrorCode::InvalidArgument, "p0_diag entries must be >= 0");
    if (!(gate_radius > 0.0)) throw Error(ErrorCode::InvalidArgument, "gate_radius must be > 0");
    if (!(reset_timeout > 0.0)) throw Error(ErrorCode::InvalidArgument, "reset_timeout must be > 0");
    if (!area_bounds.valid()) throw Error(ErrorCode::InvalidArgument, "area_bounds must be ordered");
    if (!(area_margin >= 0.0)) throw Error(ErrorCode::InvalidArgument, "area_margin must be >= 0");
  }

  Eigen::Matrix4d transition() const {
    Eigen::Matrix4d a = Eigen::Matrix4d::Identity();
    a(0, 2) = dt;
    a(1, 3) = dt;
    return a;
  }

  Eigen::Matrix4d process_noise_matrix() const {
    const double scale = process_noise == ProcessNoiseModel::Rate ? dt : 1.0;
    return (scale * Eigen::Vector4d(q_diag[0], q_diag[1], q_diag[2], q_diag[3])).asDiagonal();
  }

  Eigen::Matrix4d initial_covariance() const {
    return Eigen::Vector4d(p0_diag[0], p0_diag[1], p0_diag[2], p0_diag[3]).asDiagonal();
  }

  friend bool operator==(const TrackerConfig&, const TrackerConfig&) = default;
};

inline KinematicState predict(const KinematicState& s, const TrackerConfig& cfg) {
  const Eigen::Matrix4d a = cfg.transition();
  KinematicState out;
  out.theta = a * s.theta;
  out.P = a * s.P * a.transpose() + cfg.process_noise_matrix();
  out.P = (0.5 * (out.P + out.P.transpose())).eval();
  out.t = s.t + cfg.dt;
  return out;
}

/// Joseph-form update with a position observation.
inline KinematicState update(const KinematicState& s, const PositionEstimate& est, const TrackerConfig&) {
  Eigen::Matrix<double, 2, 4> h = Eigen::Matrix<double, 2, 4>::Zero();
  h(0, 0) = 1.0;
  h(1, 1) = 1.0;
  const Eigen::Matrix2d r = est.cov;
  const Eigen::Matrix2d innovation_cov = h * s.P * h.transpose() + r;
  const double det = innovation_cov.determinant();
  if (!std::isfinite(det) || std::abs(det) <= std::numeric_limits<double>::min())
    throw Error(ErrorCode::SingularInnovation, "innovation covariance is singular");
  const Eigen::Matrix<double, 4, 2> gain = s.P * h.transpose() * innovation_cov.inverse();
  const Eigen::Vector2d innovation = est.p_hat.vec() - h * s.theta;

  KinematicState out = s;
  out.theta = s.theta + gain * innovation;
  const Eigen::Matrix4d i_kh = Eigen::Matrix4d::Identity() - gain * h;
  out.P = i_kh * s.P * i_kh.transpose() + gain * r * gain.transpose();
  out.P = (0.5 * (out.P + out.P.transpose())).eval();
  return out;
}

/// Accepts estimates within gate_radius of the state position (inclusive).
inline bool gate(const KinematicState& s, const PositionEstimate& est, const TrackerConfig& cfg) {
  return distance(s.position(), est.p_hat) <= cfg.gate_radius;
}

enum class ResetReason : std::uint8_t { None, Timeout, OutsideArea };

constexpr std::string_view to_string(ResetReason r) {
  switch (r) {
    case ResetReason::None: return "none";
    case ResetReason::Timeout: return "timeout";
    case ResetReason::OutsideArea: return "outside-area";
  }
  return "?";
}

struct TrackHistory {
  double last_update_t = 0.0;
};

inline ResetReason reset_trigger(const KinematicState& s, const TrackHistory& history, const TrackerConfig& cfg) {
  if (!cfg.reset_enabled) return ResetReason::None;
  if (s.t - history.last_update_t > cfg.reset_timeout + 1e-9) return ResetReason::Timeout;
  if (!cfg.area_bounds.expanded(cfg.area_margin).contains(s.position())) return ResetReason::OutsideArea;
  return ResetReason::None;
}

struct ResetResult {
  KinematicState state;
  ResetReason reason = ResetReason::None;
};

/// Re-initializes the state from ground truth when a reset rule fires.
inline ResetResult maybe_reset(const KinematicState& s, TrackHistory& history, const TrackerConfig& cfg,
                               const std::optional<StateVector>& ground_truth) {
  const ResetReason reason = reset_trigger(s, history, cfg);
  if (reason == ResetReason::None) return {s, reason};
  if (!ground_truth) throw Error(ErrorCode::MissingGroundTruth, "reset requested without ground truth");
  KinematicState out;
  out.theta = *ground_truth;
  out.P = cfg.initial_covariance();
  out.t = s.t;
  history.last_update_t = s.t;
  return {out, reason};
}

// ---------------------------------------------------------------------------
// Track runner

struct TrackInput {
  double t = 0.0;
  MeasurementSet measurements;
  StateVector truth = StateVector::Zero();
};

enum class TickOutcome : std::uint8_t { Initialized, Updated, Gated, EstimateFailed, UpdateFailed, Waiting };

constexpr std::string_view to_string(TickOutcome o) {
  switch (o) {
    case TickOutcome::Initialized: return "init";
    case TickOutcome::Updated: return "updated";
    case TickOutcome::Gated: return "gated";
    case TickOutcome::EstimateFailed: return "estimate-failed";
    case TickOutcome::UpdateFailed: return "update-failed";
    case TickOutcome::Waiting: return "waiting";
  }
  return "?";
}

struct TickRecord {
  double t = 0.0;
  StateVector truth = StateVector::Zero();
  // NaN when no estimate was produced.
  Position estimate{std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
  StateVector state = StateVector::Zero();
  TickOutcome outcome = TickOutcome::Initialized;
  ResetReason reset = ResetReason::None;
  std::optional<ErrorCode> error;

  bool has_state() const { return outcome != TickOutcome::Waiting; }
  bool has_estimate() const { return std::isfinite(estimate.x); }
};

struct TrackReport {
  std::vector<TickRecord> ticks;
  std::size_t updates = 0;
  std::size_t gated = 0;
  std::size_t estimate_failures = 0;
  std::size_t update_failures = 0;
  std::size_t resets = 0;
};

/// Runs predict / estimate / gate / update / reset over a measurement stream.
/// Component errors are logged per tick; the run itself never aborts.
inline TrackReport run_track(std::span<const TrackInput> stream, const FusionSpec& fusion, const ScenarioConfig& scenario,
                             const TrackerConfig& cfg) {
  TrackReport report;
  report.ticks.reserve(stream.size());
  if (stream.empty()) return report;

  KinematicState state;
  TrackHistory history;
  bool initialized = false;
  if (!cfg.cold_start) {
    state.theta = stream.front().truth;
    state.P = cfg.initial_covariance();
    state.t = stream.front().t;
    history.last_update_t = state.t;
    initialized = true;
  }

  for (std::size_t i = 0; i < stream.size(); ++i) {
    const TrackInput& in = stream[i];
    TickRecord rec;
    rec.t = in.t;
    rec.truth = in.truth;

    if (initialized && i == 0) {
      rec.outcome = TickOutcome::Initialized;
      rec.state = state.theta;
      report.ticks.push_back(rec);
      continue;
    }
    if (initialized) state = predict(state, cfg);

    std::optional<PositionEstimate> est;
    try {
      std::optional<Position> guess;
      if (initialized) guess = state.position();
      est = estimate_position(in.measurements, fusion, scenario, guess);
      rec.estimate = est->p_hat;
    } catch (const Error& e) {
      rec.error = e.code();
    }

    if (!initialized) {
      if (est) {
        state.theta << est->p_hat.x, est->p_hat.y, 0.0, 0.0;
        state.P = cfg.initial_covariance();
        state.t = in.t;
        history.last_update_t = in.t;
        initialized = true;
        rec.outcome = TickOutcome::Initialized;
      } else {
        rec.outcome = TickOutcome::Waiting;
        ++report.estimate_failures;
      }
      rec.state = state.theta;
      report.ticks.push_back(rec);
      continue;
    }

    if (!est) {
      rec.outcome = TickOutcome::EstimateFailed;
      ++report.estimate_failures;
    } else if (!gate(state, *est, cfg)) {
      rec.outcome = TickOutcome::Gated;
      ++report.gated;
    } else {
      try {
        state = update(state, *est, cfg);
        history.last_update_t = state.t;
        rec.outcome = TickOutcome::Updated;
        ++report.updates;
      } catch (const Error& e) {
        rec.error = e.code();
        rec.outcome = TickOutcome::UpdateFailed;
        ++report.update_failures;
      }
    }

    if (cfg.reset_enabled) {
      const ResetResult rr = maybe_reset(state, history, cfg, in.truth);
      if (rr.reason != ResetReason::None) {
        state = rr.state;
        rec.reset = rr.reason;
        ++report.resets;
      }
    }
    rec.state = state.theta;
    report.ticks.push_back(rec);
  }
  return report;
}

}  // namespace bistatic
