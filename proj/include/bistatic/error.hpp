#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace bistatic {

/// Failure categories raised by the positioning and tracking routines.
enum class ErrorCode {
  InvalidArgument,
  DegenerateAngle,         // angle requested for a point on the array axis
  DomainError,             // py outside the admissible half-plane
  UnresolvableGeometry,    // (near-)parallel angle rays
  BehindBaseline,          // angle-only intersection with py < 0
  DegenerateEllipse,       // non-positive denominator in the monostatic range
  UnderDetermined,         // fewer than two measurements for ML fusion
  MlDiverged,
  IndefiniteHessian,
  SingularInnovation,
  MissingGroundTruth,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "invalid-argument";
    case ErrorCode::DegenerateAngle: return "degenerate-angle";
    case ErrorCode::DomainError: return "domain-error";
    case ErrorCode::UnresolvableGeometry: return "unresolvable-geometry";
    case ErrorCode::BehindBaseline: return "behind-baseline";
    case ErrorCode::DegenerateEllipse: return "degenerate-ellipse-intersection";
    case ErrorCode::UnderDetermined: return "under-determined";
    case ErrorCode::MlDiverged: return "ml-diverged";
    case ErrorCode::IndefiniteHessian: return "indefinite-hessian";
    case ErrorCode::SingularInnovation: return "singular-innovation";
    case ErrorCode::MissingGroundTruth: return "missing-ground-truth";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace bistatic
