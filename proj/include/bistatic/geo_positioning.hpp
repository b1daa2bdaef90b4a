#pragma once

// Closed-form localization from exactly two measurements and first-order
// propagation of the measurement noise into a Cartesian covariance.

#include <array>
#include <cmath>
#include <numbers>
#include <string_view>

#include <Eigen/Dense>

#include "bistatic/error.hpp"
#include "bistatic/geometry.hpp"

namespace bistatic {

enum class EstimateMethod { GeoAngles, GeoAngleRange, Ml };

constexpr std::string_view to_string(EstimateMethod m) {
  switch (m) {
    case EstimateMethod::GeoAngles: return "geo-angles";
    case EstimateMethod::GeoAngleRange: return "geo-angle-range";
    case EstimateMethod::Ml: return "ml";
  }
  return "?";
}

struct PositionEstimate {
  Position p_hat;
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  EstimateMethod method = EstimateMethod::Ml;
  KindSet used_kinds;
  bool underdetermined = false;
};

enum class ArraySide { Tx, Rx };

/// Which closed-form conversion applies to a two-measurement set.
enum class Conversion { Angles, TxAngleRange, RxAngleRange };

struct GeoOptions {
  // Return the raw intersection instead of raising for near-parallel rays or
  // for points behind the baseline. Exactly parallel rays still fail.
  bool raw = false;

  friend bool operator==(const GeoOptions&, const GeoOptions&) = default;
};

inline constexpr double kParallelRayThreshold = 1e-9;

inline Position locate_from_angles(double eta_tx, double eta_rx, const ScenarioConfig& cfg,
                                   GeoOptions opts = {}) {
  const double tan_tx = std::tan(inverse_naf(eta_tx, cfg));
  const double tan_rx = std::tan(inverse_naf(eta_rx, cfg));
  const double diff = tan_rx - tan_tx;
  if (diff == 0.0 || (!opts.raw && std::abs(diff) < kParallelRayThreshold))
    throw Error(ErrorCode::UnresolvableGeometry, "angle rays are parallel");
  const Position p{-cfg.c * (tan_rx + tan_tx) / diff, 2.0 * cfg.c / diff};
  if (!opts.raw && p.y < 0.0) throw Error(ErrorCode::BehindBaseline, "angle intersection behind the baseline");
  return p;
}

/// Distance from one array to the target given a bistatic range. Use
/// phi_prime = pi + phi_tx for the TX array and phi_prime = phi_rx for RX.
inline double bistatic_to_monostatic_range(double phi_prime, double r_b, const ScenarioConfig& cfg) {
  const double den = 2.0 * (r_b - 2.0 * cfg.c * std::sin(phi_prime));
  if (!(den > 0.0)) throw Error(ErrorCode::DegenerateEllipse, "non-positive denominator");
  const double r_m = (r_b * r_b - 4.0 * cfg.c * cfg.c) / den;
  if (!(r_m > 0.0)) throw Error(ErrorCode::DegenerateEllipse, "bistatic range shorter than the baseline");
  return r_m;
}

inline Position locate_from_angle_range(double eta, double r_b, ArraySide side, const ScenarioConfig& cfg) {
  const double phi = inverse_naf(eta, cfg);
  const double phi_prime = side == ArraySide::Tx ? std::numbers::pi + phi : phi;
  const double r_m = bistatic_to_monostatic_range(phi_prime, r_b, cfg);
  const double offset = side == ArraySide::Tx ? -cfg.c : cfg.c;
  return {-r_m * std::sin(phi) + offset, r_m * std::cos(phi)};
}

inline Conversion conversion_for(KindSet kinds) {
  using K = MeasurementKind;
  if (kinds == KindSet{K::NafTx, K::NafRx}) return Conversion::Angles;
  if (kinds == KindSet{K::BistaticRange, K::NafTx}) return Conversion::TxAngleRange;
  if (kinds == KindSet{K::BistaticRange, K::NafRx}) return Conversion::RxAngleRange;
  throw Error(ErrorCode::InvalidArgument, "geometric positioning needs exactly two measurement kinds, got '" +
                                              kinds.label() + "'");
}

/// Applies a conversion to measurement values in canonical order:
/// (eta_tx, eta_rx) for angles, (r_b, eta) for angle + range.
inline Position convert(Conversion conv, const Eigen::Vector2d& m, const ScenarioConfig& cfg,
                        GeoOptions opts = {}) {
  switch (conv) {
    case Conversion::Angles: return locate_from_angles(m[0], m[1], cfg, opts);
    case Conversion::TxAngleRange: return locate_from_angle_range(m[1], m[0], ArraySide::Tx, cfg);
    case Conversion::RxAngleRange: return locate_from_angle_range(m[1], m[0], ArraySide::Rx, cfg);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown conversion");
}

namespace detail {

inline Eigen::Vector2d two_values(const MeasurementSet& set) {
  if (set.size() != 2) throw Error(ErrorCode::InvalidArgument, "geometric positioning needs exactly two measurements");
  return {set[0].value, set[1].value};
}

}  // namespace detail

/// Central-difference Jacobian of a conversion, d p_i / d m_j.
inline Eigen::Matrix2d conversion_jacobian(Conversion conv, const Eigen::Vector2d& m, const ScenarioConfig& cfg) {
  Eigen::Matrix2d jac;
  const GeoOptions raw{true};
  for (int j = 0; j < 2; ++j) {
    const double h = std::max(1e-6, 1e-6 * std::abs(m[j]));
    Eigen::Vector2d hi = m, lo = m;
    hi[j] += h;
    lo[j] -= h;
    jac.col(j) = (convert(conv, hi, cfg, raw).vec() - convert(conv, lo, cfg, raw).vec()) / (2.0 * h);
  }
  return jac;
}

/// First-order covariance sum_j dp_p/dm_j dp_q/dm_j sigma_j^2, linearized at
/// the (noisy) measurement itself.
inline Eigen::Matrix2d taylor_covariance(const MeasurementSet& set, Conversion conv, const ScenarioConfig& cfg,
                                         GeoOptions opts = {}) {
  if (conversion_for(set.kinds()) != conv)
    throw Error(ErrorCode::InvalidArgument, "measurement kinds do not match the conversion");
  const Eigen::Vector2d m = detail::two_values(set);
  convert(conv, m, cfg, opts);  // surface conversion errors at the linearization point
  const Eigen::Matrix2d jac = conversion_jacobian(conv, m, cfg);
  const Eigen::Vector2d var{set[0].variance, set[1].variance};
  Eigen::Matrix2d cov = jac * var.asDiagonal() * jac.transpose();
  return 0.5 * (cov + cov.transpose());
}

/// Closed-form estimate plus Taylor covariance for a two-measurement set.
inline PositionEstimate geo_estimate(const MeasurementSet& set, const ScenarioConfig& cfg, GeoOptions opts = {}) {
  const Conversion conv = conversion_for(set.kinds());
  PositionEstimate est;
  est.p_hat = convert(conv, detail::two_values(set), cfg, opts);
  est.cov = taylor_covariance(set, conv, cfg, opts);
  est.method = conv == Conversion::Angles ? EstimateMethod::GeoAngles : EstimateMethod::GeoAngleRange;
  est.used_kinds = set.kinds();
  return est;
}

}  // namespace bistatic
