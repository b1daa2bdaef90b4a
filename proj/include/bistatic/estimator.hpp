#pragma once

// Estimator + covariance selection shared by the positioning harness and the
// tracker.

#include <optional>
#include <string>
#include <string_view>

#include "bistatic/error.hpp"
#include "bistatic/geo_positioning.hpp"
#include "bistatic/ml_positioning.hpp"

namespace bistatic {

enum class Estimator { Geo, Ml };
enum class CovarianceMode { None, Taylor, Hessian, Fixed };

constexpr std::string_view to_string(Estimator e) { return e == Estimator::Geo ? "geo" : "ml"; }

constexpr std::string_view to_string(CovarianceMode m) {
  switch (m) {
    case CovarianceMode::None: return "none";
    case CovarianceMode::Taylor: return "taylor";
    case CovarianceMode::Hessian: return "hessian";
    case CovarianceMode::Fixed: return "fixed";
  }
  return "?";
}

inline Estimator parse_estimator(std::string_view s) {
  if (s == "geo") return Estimator::Geo;
  if (s == "ml") return Estimator::Ml;
  throw Error(ErrorCode::InvalidArgument, "unknown estimator '" + std::string(s) + "'");
}

inline CovarianceMode parse_covariance_mode(std::string_view s) {
  if (s == "none") return CovarianceMode::None;
  if (s == "taylor") return CovarianceMode::Taylor;
  if (s == "hessian") return CovarianceMode::Hessian;
  if (s == "fixed") return CovarianceMode::Fixed;
  throw Error(ErrorCode::InvalidArgument, "unknown covariance mode '" + std::string(s) + "'");
}

struct FusionSpec {
  Estimator estimator = Estimator::Ml;
  KindSet kinds = KindSet::all();
  CovarianceMode covariance = CovarianceMode::Fixed;
  // Used in Fixed mode, and as the fallback when the Hessian is indefinite.
  std::optional<FixedCovariance> fixed;
  MlConfig ml;
  GeoOptions geo;

  void validate() const {
    if (kinds.empty()) throw Error(ErrorCode::InvalidArgument, "fusion kinds must not be empty");
    if (estimator == Estimator::Geo && kinds.size() != 2)
      throw Error(ErrorCode::InvalidArgument, "geo estimator requires exactly two kinds");
    if (estimator == Estimator::Ml && kinds.size() < 2)
      throw Error(ErrorCode::InvalidArgument, "ml estimator requires at least two kinds");
    if (covariance == CovarianceMode::Taylor && estimator != Estimator::Geo)
      throw Error(ErrorCode::InvalidArgument, "taylor covariance requires the geo estimator");
    if (covariance == CovarianceMode::Hessian && estimator != Estimator::Ml)
      throw Error(ErrorCode::InvalidArgument, "hessian covariance requires the ml estimator");
    if (covariance == CovarianceMode::Fixed && !fixed)
      throw Error(ErrorCode::InvalidArgument, "fixed covariance mode needs calibrated variances");
    if (fixed) fixed->validate();
    ml.validate();
  }

  std::string label() const {
    std::string s = std::string(to_string(estimator)) + ":" + kinds.label();
    if (covariance != CovarianceMode::None) s += ":" + std::string(to_string(covariance));
    return s;
  }

  friend bool operator==(const FusionSpec&, const FusionSpec&) = default;
};

/// Position (and covariance, per the selected mode) from one measurement set.
/// `guess` overrides the ML initial guess in the fusion spec.
inline PositionEstimate estimate_position(const MeasurementSet& set, const FusionSpec& spec,
                                          const ScenarioConfig& cfg, std::optional<Position> guess = std::nullopt) {
  PositionEstimate est;
  if (spec.estimator == Estimator::Geo) {
    const Conversion conv = conversion_for(set.kinds());
    est.p_hat = convert(conv, {set[0].value, set[1].value}, cfg, spec.geo);
    est.method = conv == Conversion::Angles ? EstimateMethod::GeoAngles : EstimateMethod::GeoAngleRange;
    est.used_kinds = set.kinds();
  } else {
    if (guess) {
      MlConfig ml = spec.ml;
      ml.initial_guess = Position{guess->x, std::max(guess->y, ml.y_min)};
      est = ml_fit(set, ml, cfg);
    } else {
      est = ml_fit(set, spec.ml, cfg);
    }
  }

  switch (spec.covariance) {
    case CovarianceMode::None: break;
    case CovarianceMode::Taylor: est.cov = taylor_covariance(set, conversion_for(set.kinds()), cfg, spec.geo); break;
    case CovarianceMode::Fixed: est.cov = fixed_covariance_matrix(spec.fixed.value()); break;
    case CovarianceMode::Hessian:
      try {
        est.cov = hessian_covariance(est.p_hat, set, cfg, spec.ml.y_min);
      } catch (const Error& e) {
        if (!spec.fixed || (e.code() != ErrorCode::IndefiniteHessian && e.code() != ErrorCode::DomainError)) throw;
        est.cov = fixed_covariance_matrix(*spec.fixed);
      }
      break;
  }
  return est;
}

}  // namespace bistatic
