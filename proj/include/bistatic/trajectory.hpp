#pragma once

// Pseudorandom smooth target trajectories: a reflected random walk of
// waypoints, joined by C1 piecewise cubic Bezier curves and traversed with a
// sinusoidal speed profile.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "bistatic/error.hpp"
#include "bistatic/geometry.hpp"

namespace bistatic {

struct TrajectoryConfig {
  Rect area{-15.0, 15.0, 5.0, 25.0};
  double duration = 60.0;
  double dt = 0.01;
  double speed_min = 0.5;
  double speed_max = 3.0;
  std::vector<double> period_choices{30.0, 70.0, 100.0, 1e8};
  double waypoint_step = 6.0;
  double turn_std = 0.6;
  double tangent_scale = 0.5;
  std::uint64_t seed = 1;

  void validate() const {
    if (!area.valid()) throw Error(ErrorCode::InvalidArgument, "trajectory area must be ordered");
    if (!(duration > 0.0) || !(dt > 0.0)) throw Error(ErrorCode::InvalidArgument, "duration and dt must be > 0");
    const double steps = duration / dt;
    if (std::abs(steps - std::round(steps)) > 1e-9 * std::max(1.0, steps))
      throw Error(ErrorCode::InvalidArgument, "duration must be an integer multiple of dt");
    if (!(speed_min > 0.0) || !(speed_min < speed_max))
      throw Error(ErrorCode::InvalidArgument, "speed bounds must satisfy 0 < speed_min < speed_max");
    if (period_choices.empty()) throw Error(ErrorCode::InvalidArgument, "period_choices must not be empty");
    for (double p : period_choices)
      if (!(p > 0.0)) throw Error(ErrorCode::InvalidArgument, "periods must be > 0");
    if (!(waypoint_step > 0.0)) throw Error(ErrorCode::InvalidArgument, "waypoint_step must be > 0");
    if (!(turn_std >= 0.0)) throw Error(ErrorCode::InvalidArgument, "turn_std must be >= 0");
    if (!(tangent_scale > 0.0)) throw Error(ErrorCode::InvalidArgument, "tangent_scale must be > 0");
  }

  std::size_t sample_count() const { return static_cast<std::size_t>(std::llround(duration / dt)) + 1; }

  friend bool operator==(const TrajectoryConfig&, const TrajectoryConfig&) = default;
};

namespace detail {

// Folds a coordinate back into [lo, hi]; returns true when a fold happened.
inline bool reflect(double& v, double lo, double hi) {
  bool flipped = false;
  while (v < lo || v > hi) {
    v = v < lo ? 2.0 * lo - v : 2.0 * hi - v;
    flipped = !flipped;
  }
  return flipped;
}

}  // namespace detail

/// Random walk: uniform start in the area, Gaussian heading changes, fixed
/// leg length, mirror reflection at the area boundary.
template <class Rng>
std::vector<Position> generate_waypoints(const TrajectoryConfig& cfg, Rng& rng, std::size_t extra_legs = 0) {
  std::uniform_real_distribution<double> ux(cfg.area.x_min, cfg.area.x_max), uy(cfg.area.y_min, cfg.area.y_max);
  std::uniform_real_distribution<double> uh(0.0, 2.0 * std::numbers::pi);
  std::normal_distribution<double> unit(0.0, 1.0);
  const auto legs =
      static_cast<std::size_t>(std::ceil(cfg.duration * cfg.speed_max / cfg.waypoint_step)) + 1 + extra_legs;

  std::vector<Position> pts;
  pts.reserve(legs + 1);
  Position p{ux(rng), uy(rng)};
  double heading = uh(rng);
  pts.push_back(p);
  for (std::size_t i = 0; i < legs; ++i) {
    heading += cfg.turn_std * unit(rng);
    Position next{p.x + cfg.waypoint_step * std::cos(heading), p.y + cfg.waypoint_step * std::sin(heading)};
    if (detail::reflect(next.x, cfg.area.x_min, cfg.area.x_max)) heading = std::numbers::pi - heading;
    if (detail::reflect(next.y, cfg.area.y_min, cfg.area.y_max)) heading = -heading;
    pts.push_back(next);
    p = next;
  }
  return pts;
}

/// C1 piecewise cubic Bezier through every waypoint with Catmull-Rom style
/// tangents, plus an arc-length table for constant-speed traversal.
class BezierPath {
 public:
  static constexpr int kTableNodes = 64;

  explicit BezierPath(std::span<const Position> waypoints, double tangent_scale = 0.5,
                      std::optional<Rect> keep_inside = std::nullopt) {
    if (waypoints.size() < 2) throw Error(ErrorCode::InvalidArgument, "a path needs at least two waypoints");
    const std::size_t n = waypoints.size();
    std::vector<Eigen::Vector2d> tangents(n);
    for (std::size_t i = 0; i < n; ++i) {
      const Eigen::Vector2d prev = waypoints[i == 0 ? 0 : i - 1].vec();
      const Eigen::Vector2d next = waypoints[i + 1 == n ? n - 1 : i + 1].vec();
      // One-sided differences at the ends count double to keep the same scale.
      const double w = (i == 0 || i + 1 == n) ? 2.0 * tangent_scale : tangent_scale;
      tangents[i] = w * (next - prev);
      if (keep_inside) tangents[i] *= inside_factor(waypoints[i].vec(), tangents[i] / 3.0, *keep_inside);
    }
    segments_.reserve(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const Eigen::Vector2d a = waypoints[i].vec(), b = waypoints[i + 1].vec();
      segments_.push_back({a, a + tangents[i] / 3.0, b - tangents[i + 1] / 3.0, b});
    }
    build_table();
  }

  std::size_t segment_count() const { return segments_.size(); }
  double length() const { return cumulative_.back(); }
  double segment_length(std::size_t i) const { return cumulative_[i + 1] - cumulative_[i]; }

  /// Point on segment i at local parameter u in [0, 1].
  Eigen::Vector2d point(std::size_t i, double u) const {
    const auto& c = segments_[i];
    const double v = 1.0 - u;
    return v * v * v * c[0] + 3.0 * v * v * u * c[1] + 3.0 * v * u * u * c[2] + u * u * u * c[3];
  }

  Eigen::Vector2d derivative(std::size_t i, double u) const {
    const auto& c = segments_[i];
    const double v = 1.0 - u;
    return 3.0 * v * v * (c[1] - c[0]) + 6.0 * v * u * (c[2] - c[1]) + 3.0 * u * u * (c[3] - c[2]);
  }

  /// Segment index and local parameter for a distance along the path.
  std::pair<std::size_t, double> locate(double s) const {
    s = std::clamp(s, 0.0, length());
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), s);
    std::size_t seg = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, it - cumulative_.begin() - 1));
    seg = std::min(seg, segments_.size() - 1);
    const double local = s - cumulative_[seg];
    const auto& table = tables_[seg];
    auto nt = std::upper_bound(table.begin(), table.end(), local);
    const std::size_t k = std::min<std::size_t>(
        static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, nt - table.begin() - 1)), kTableNodes - 1);
    const double node = static_cast<double>(k) / kTableNodes;
    double lo = node, hi = static_cast<double>(k + 1) / kTableNodes;
    const double span = table[k + 1] - table[k];
    double u = span > 0.0 ? lo + (hi - lo) * (local - table[k]) / span : lo;
    // Newton on L(u) = local, bracketed by the table interval.
    for (int iter = 0; iter < 8; ++iter) {
      const double f = table[k] + arc(seg, node, u) - local;
      if (std::abs(f) < 1e-12) break;
      if (f > 0.0) hi = u; else lo = u;
      const double d = derivative(seg, u).norm();
      double next = d > 0.0 ? u - f / d : 0.5 * (lo + hi);
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      u = next;
    }
    return {seg, u};
  }

  Eigen::Vector2d point_at(double s) const {
    const auto [seg, u] = locate(s);
    return point(seg, u);
  }

  /// Unit tangent at a distance along the path (zero where the curve stalls).
  Eigen::Vector2d tangent_at(double s) const {
    const auto [seg, u] = locate(s);
    const Eigen::Vector2d d = derivative(seg, u);
    const double n = d.norm();
    return n > 0.0 ? Eigen::Vector2d(d / n) : Eigen::Vector2d::Zero();
  }

  /// Arc length of segment i between parameters a and b.
  double arc(std::size_t i, double a, double b) const {
    if (b <= a) return 0.0;
    const double whole = gauss(i, a, b);
    return adaptive(i, a, b, whole, 1e-13 * std::max(1.0, whole), 0);
  }

 private:
  // Largest factor in [0, 1] keeping p +- factor * half inside the rectangle.
  static double inside_factor(const Eigen::Vector2d& p, const Eigen::Vector2d& half, const Rect& r) {
    double f = 1.0;
    auto limit = [&](double room, double extent) {
      if (extent > 0.0) f = std::min(f, std::max(0.0, room) / extent);
    };
    limit(std::min(p.x() - r.x_min, r.x_max - p.x()), std::abs(half.x()));
    limit(std::min(p.y() - r.y_min, r.y_max - p.y()), std::abs(half.y()));
    return f;
  }

  // 5-point Gauss-Legendre on |B'(u)|.
  double gauss(std::size_t i, double a, double b) const {
    static constexpr std::array<double, 5> x{0.0, -0.5384693101056831, 0.5384693101056831, -0.9061798459386640,
                                             0.9061798459386640};
    static constexpr std::array<double, 5> w{0.5688888888888889, 0.4786286704993665, 0.4786286704993665,
                                             0.2369268850561891, 0.2369268850561891};
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    double sum = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) sum += w[k] * derivative(i, mid + half * x[k]).norm();
    return half * sum;
  }

  double adaptive(std::size_t i, double a, double b, double whole, double tol, int depth) const {
    const double m = 0.5 * (a + b);
    const double left = gauss(i, a, m), right = gauss(i, m, b);
    if (depth >= 20 || std::abs(left + right - whole) <= tol) return left + right;
    return adaptive(i, a, m, left, 0.5 * tol, depth + 1) + adaptive(i, m, b, right, 0.5 * tol, depth + 1);
  }

  void build_table() {
    cumulative_.assign(1, 0.0);
    tables_.resize(segments_.size());
    for (std::size_t i = 0; i < segments_.size(); ++i) {
      auto& t = tables_[i];
      t[0] = 0.0;
      for (int k = 0; k < kTableNodes; ++k)
        t[k + 1] = t[k] + arc(i, static_cast<double>(k) / kTableNodes, static_cast<double>(k + 1) / kTableNodes);
      cumulative_.push_back(cumulative_.back() + t[kTableNodes]);
    }
  }

  std::vector<std::array<Eigen::Vector2d, 4>> segments_;
  std::vector<std::array<double, kTableNodes + 1>> tables_;
  std::vector<double> cumulative_;
};

struct SpeedProfile {
  double mid = 1.75;
  double amplitude = 1.25;
  double period = 30.0;
  double phase = 0.0;

  static SpeedProfile from(const TrajectoryConfig& cfg, double period, double phase) {
    return {0.5 * (cfg.speed_min + cfg.speed_max), 0.5 * (cfg.speed_max - cfg.speed_min), period, phase};
  }

  double operator()(double t) const { return mid + amplitude * std::sin(2.0 * std::numbers::pi * t / period + phase); }
};

inline double speed_profile(double t, const TrajectoryConfig& cfg, double period, double phase) {
  return SpeedProfile::from(cfg, period, phase)(t);
}

struct TrajectorySample {
  double t = 0.0;
  Position p;
  Eigen::Vector2d v = Eigen::Vector2d::Zero();

  Eigen::Vector4d state() const { return {p.x, p.y, v.x(), v.y()}; }
};

struct Trajectory {
  std::vector<TrajectorySample> samples;
  SpeedProfile speed;
  std::vector<Position> waypoints;
};

/// Samples one trajectory at cfg.dt. Distance follows the trapezoidal
/// integral of the speed profile and is mapped onto the path by arc length;
/// the sampled velocity is speed times the unit path tangent.
template <class Rng>
Trajectory sample_trajectory(const TrajectoryConfig& cfg, Rng& rng) {
  cfg.validate();
  std::uniform_int_distribution<std::size_t> pick(0, cfg.period_choices.size() - 1);
  std::uniform_real_distribution<double> uphase(0.0, 2.0 * std::numbers::pi);
  Trajectory traj;
  const double period = cfg.period_choices[pick(rng)];
  traj.speed = SpeedProfile::from(cfg, period, uphase(rng));

  const std::size_t n = cfg.sample_count();
  std::vector<double> dist(n, 0.0);
  for (std::size_t k = 1; k < n; ++k) {
    const double t0 = (k - 1) * cfg.dt, t1 = k * cfg.dt;
    dist[k] = dist[k - 1] + 0.5 * (traj.speed(t0) + traj.speed(t1)) * cfg.dt;
  }

  for (std::size_t extra = 0;; extra += 8) {
    traj.waypoints = generate_waypoints(cfg, rng, extra);
    const BezierPath path(traj.waypoints, cfg.tangent_scale, cfg.area);
    if (path.length() < dist.back()) continue;  // stalled curve; extend the walk
    traj.samples.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
      const double t = k * cfg.dt;
      auto& s = traj.samples[k];
      s.t = t;
      s.p = Position::from(path.point_at(dist[k]));
      s.v = traj.speed(t) * path.tangent_at(dist[k]);
    }
    return traj;
  }
}

inline Trajectory sample_trajectory(const TrajectoryConfig& cfg) {
  std::mt19937_64 rng(cfg.seed);
  return sample_trajectory(cfg, rng);
}

}  // namespace bistatic
