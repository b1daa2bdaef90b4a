#pragma once

// Bistatic system model: TX array at (-c, 0), RX array at (+c, 0), both
// uniform linear arrays along the x-axis with boresight towards +y.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <string_view>

#include <Eigen/Dense>

#include "bistatic/error.hpp"

namespace bistatic {

struct ScenarioConfig {
  double c = 5.0;                // half baseline (m)
  double d_over_lambda = 0.5;    // element spacing over carrier wavelength
  double sigma_r = 0.15;         // bistatic range noise std (m)
  double sigma_eta = 0.022;      // NAF noise std
  double dt = 0.01;              // update interval (s)

  void validate() const {
    if (!(c > 0.0)) throw Error(ErrorCode::InvalidArgument, "c must be > 0");
    if (!(d_over_lambda > 0.0)) throw Error(ErrorCode::InvalidArgument, "d_over_lambda must be > 0");
    if (!(sigma_r >= 0.0)) throw Error(ErrorCode::InvalidArgument, "sigma_r must be >= 0");
    if (!(sigma_eta >= 0.0)) throw Error(ErrorCode::InvalidArgument, "sigma_eta must be >= 0");
    if (!(dt > 0.0)) throw Error(ErrorCode::InvalidArgument, "dt must be > 0");
  }

  Eigen::Vector2d tx() const { return {-c, 0.0}; }
  Eigen::Vector2d rx() const { return {c, 0.0}; }

  /// Spacing ratio for which sigma_eta corresponds to the given angular
  /// noise at boresight (d eta / d phi = d/lambda at phi = 0).
  static double spacing_for_boresight_sigma(double sigma_eta, double sigma_phi_deg) {
    return sigma_eta / (sigma_phi_deg * std::numbers::pi / 180.0);
  }

  /// Evaluation scenario: sigma_eta = 0.022 equivalent to 4 degrees at boresight.
  static ScenarioConfig paper() {
    ScenarioConfig s;
    s.d_over_lambda = spacing_for_boresight_sigma(s.sigma_eta, 4.0);
    return s;
  }

  friend bool operator==(const ScenarioConfig&, const ScenarioConfig&) = default;
};

struct Position {
  double x = 0.0;
  double y = 0.0;

  Eigen::Vector2d vec() const { return {x, y}; }
  static Position from(const Eigen::Vector2d& v) { return {v.x(), v.y()}; }
  bool finite() const { return std::isfinite(x) && std::isfinite(y); }

  friend bool operator==(const Position&, const Position&) = default;
};

inline double distance(const Position& a, const Position& b) { return std::hypot(a.x - b.x, a.y - b.y); }

/// Axis-aligned rectangle, bounds inclusive.
struct Rect {
  double x_min = 0.0;
  double x_max = 0.0;
  double y_min = 0.0;
  double y_max = 0.0;

  bool contains(const Position& p) const { return p.x >= x_min && p.x <= x_max && p.y >= y_min && p.y <= y_max; }
  Rect expanded(double margin) const { return {x_min - margin, x_max + margin, y_min - margin, y_max + margin}; }
  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  bool valid() const { return x_min < x_max && y_min < y_max; }

  friend bool operator==(const Rect&, const Rect&) = default;
};

/// Declaration order is the canonical order (range, NafTx, NafRx).
enum class MeasurementKind : std::uint8_t { BistaticRange = 0, NafTx = 1, NafRx = 2 };

inline constexpr std::array<MeasurementKind, 3> kAllKinds = {
    MeasurementKind::BistaticRange, MeasurementKind::NafTx, MeasurementKind::NafRx};

constexpr std::string_view to_string(MeasurementKind kind) {
  switch (kind) {
    case MeasurementKind::BistaticRange: return "range";
    case MeasurementKind::NafTx: return "aod";
    case MeasurementKind::NafRx: return "aoa";
  }
  return "?";
}

/// Subset of measurement kinds, iterated in canonical order.
class KindSet {
 public:
  constexpr KindSet() = default;
  constexpr KindSet(std::initializer_list<MeasurementKind> kinds) {
    for (auto k : kinds) insert(k);
  }

  static constexpr KindSet all() {
    return {MeasurementKind::BistaticRange, MeasurementKind::NafTx, MeasurementKind::NafRx};
  }

  constexpr void insert(MeasurementKind k) { bits_ |= bit(k); }
  constexpr bool contains(MeasurementKind k) const { return (bits_ & bit(k)) != 0; }
  constexpr bool empty() const { return bits_ == 0; }
  constexpr std::size_t size() const {
    return static_cast<std::size_t>((bits_ & 1u) + ((bits_ >> 1) & 1u) + ((bits_ >> 2) & 1u));
  }
  constexpr std::uint8_t bits() const { return bits_; }

  template <class F>
  constexpr void for_each(F&& f) const {
    for (auto k : kAllKinds)
      if (contains(k)) f(k);
  }

  /// "range+aod+aoa" style label in canonical order.
  std::string label() const {
    std::string out;
    for_each([&](MeasurementKind k) {
      if (!out.empty()) out += '+';
      out += to_string(k);
    });
    return out;
  }

  /// Parses a list such as "aod+aoa", "range,aod" or "all".
  static KindSet parse(std::string_view text) {
    KindSet set;
    if (text == "all") return all();
    std::size_t pos = 0;
    while (pos <= text.size()) {
      auto end = text.find_first_of("+, ", pos);
      if (end == std::string_view::npos) end = text.size();
      auto token = text.substr(pos, end - pos);
      if (!token.empty()) {
        if (token == "range" || token == "rb") set.insert(MeasurementKind::BistaticRange);
        else if (token == "aod" || token == "naf_tx" || token == "tx") set.insert(MeasurementKind::NafTx);
        else if (token == "aoa" || token == "naf_rx" || token == "rx") set.insert(MeasurementKind::NafRx);
        else throw Error(ErrorCode::InvalidArgument, "unknown measurement kind '" + std::string(token) + "'");
      }
      pos = end + 1;
    }
    if (set.empty()) throw Error(ErrorCode::InvalidArgument, "empty measurement kind list");
    return set;
  }

  friend constexpr bool operator==(KindSet, KindSet) = default;

 private:
  static constexpr std::uint8_t bit(MeasurementKind k) {
    return static_cast<std::uint8_t>(1u << static_cast<unsigned>(k));
  }
  std::uint8_t bits_ = 0;
};

struct Measurement {
  MeasurementKind kind;
  double value;     // m for range, dimensionless for NAF
  double variance;  // sigma^2 of this entry
};

/// Stack-allocated measurement vector (at most three entries).
using MeasurementVector = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, 3, 1>;

/// Up to one measurement per kind, kept in canonical order.
///
/// Zero variances are accepted so noiseless sets can be represented; the
/// likelihood rejects them and the ML solver floors them.
class MeasurementSet {
 public:
  MeasurementSet() = default;
  MeasurementSet(std::initializer_list<Measurement> entries) {
    for (const auto& m : entries) add(m);
  }

  void add(const Measurement& m) {
    if (size_ == entries_.size()) throw Error(ErrorCode::InvalidArgument, "measurement set holds at most 3 entries");
    if (kinds_.contains(m.kind))
      throw Error(ErrorCode::InvalidArgument, "duplicate measurement kind " + std::string(to_string(m.kind)));
    if (!std::isfinite(m.value)) throw Error(ErrorCode::InvalidArgument, "non-finite measurement value");
    if (!(m.variance >= 0.0) || !std::isfinite(m.variance))
      throw Error(ErrorCode::InvalidArgument, "measurement variance must be finite and >= 0");
    std::size_t i = size_;
    while (i > 0 && entries_[i - 1].kind > m.kind) {
      entries_[i] = entries_[i - 1];
      --i;
    }
    entries_[i] = m;
    ++size_;
    kinds_.insert(m.kind);
  }

  std::size_t size() const { return size_; }
  bool empty() const { return size_ == 0; }
  KindSet kinds() const { return kinds_; }
  const Measurement& operator[](std::size_t i) const { return entries_[i]; }
  const Measurement* begin() const { return entries_.data(); }
  const Measurement* end() const { return entries_.data() + size_; }

  std::optional<Measurement> find(MeasurementKind kind) const {
    for (const auto& m : *this)
      if (m.kind == kind) return m;
    return std::nullopt;
  }

  MeasurementVector values() const {
    MeasurementVector v(static_cast<Eigen::Index>(size_));
    for (std::size_t i = 0; i < size_; ++i) v[static_cast<Eigen::Index>(i)] = entries_[i].value;
    return v;
  }

  MeasurementVector variances() const {
    MeasurementVector v(static_cast<Eigen::Index>(size_));
    for (std::size_t i = 0; i < size_; ++i) v[static_cast<Eigen::Index>(i)] = entries_[i].variance;
    return v;
  }

  friend bool operator==(const MeasurementSet& a, const MeasurementSet& b) {
    if (a.size_ != b.size_) return false;
    for (std::size_t i = 0; i < a.size_; ++i) {
      const auto& x = a.entries_[i];
      const auto& y = b.entries_[i];
      if (x.kind != y.kind || x.value != y.value || x.variance != y.variance) return false;
    }
    return true;
  }

 private:
  std::array<Measurement, 3> entries_{};
  std::size_t size_ = 0;
  KindSet kinds_;
};

// ---------------------------------------------------------------------------
// Forward model

inline double bistatic_range(const Position& p, const ScenarioConfig& cfg) {
  return std::hypot(p.x + cfg.c, p.y) + std::hypot(p.x - cfg.c, p.y);
}

/// Angle of departure at the TX array, measured from boresight.
inline double aod(const Position& p, const ScenarioConfig& cfg) {
  if (p.y == 0.0) throw Error(ErrorCode::DegenerateAngle, "angle undefined for py = 0");
  return -std::atan((p.x + cfg.c) / std::abs(p.y));
}

/// Angle of arrival at the RX array, measured from boresight.
inline double aoa(const Position& p, const ScenarioConfig& cfg) {
  if (p.y == 0.0) throw Error(ErrorCode::DegenerateAngle, "angle undefined for py = 0");
  return -std::atan((p.x - cfg.c) / std::abs(p.y));
}

/// Normalized angular frequency seen by a ULA.
inline double naf(double phi, const ScenarioConfig& cfg) { return cfg.d_over_lambda * std::sin(phi); }

/// Clamps eta to [-d/lambda, d/lambda] before inverting, so the result is
/// always a valid angle in [-pi/2, pi/2].
inline double inverse_naf(double eta, const ScenarioConfig& cfg) {
  const double k = cfg.d_over_lambda;
  return std::asin(std::clamp(eta, -k, k) / k);
}

inline double forward_value(MeasurementKind kind, const Position& p, const ScenarioConfig& cfg) {
  switch (kind) {
    case MeasurementKind::BistaticRange: return bistatic_range(p, cfg);
    case MeasurementKind::NafTx: return naf(aod(p, cfg), cfg);
    case MeasurementKind::NafRx: return naf(aoa(p, cfg), cfg);
  }
  return 0.0;
}

/// Noiseless measurements for the requested kinds, canonical order.
inline MeasurementVector forward_model(const Position& p, KindSet kinds, const ScenarioConfig& cfg) {
  if (!(p.y > 0.0)) throw Error(ErrorCode::DomainError, "forward model requires py > 0");
  MeasurementVector out(static_cast<Eigen::Index>(kinds.size()));
  Eigen::Index i = 0;
  kinds.for_each([&](MeasurementKind k) { out[i++] = forward_value(k, p, cfg); });
  return out;
}

inline double noise_sigma(MeasurementKind kind, const ScenarioConfig& cfg) {
  return kind == MeasurementKind::BistaticRange ? cfg.sigma_r : cfg.sigma_eta;
}

/// Draws one noisy measurement set. One standard-normal variate is consumed
/// per entry, so zero noise reproduces forward_model exactly and the draw
/// count does not depend on the noise level.
template <class Rng>
MeasurementSet sample_noisy(const Position& p, KindSet kinds, const ScenarioConfig& cfg, Rng& rng) {
  const MeasurementVector truth = forward_model(p, kinds, cfg);
  std::normal_distribution<double> unit(0.0, 1.0);
  MeasurementSet set;
  Eigen::Index i = 0;
  kinds.for_each([&](MeasurementKind k) {
    const double sigma = noise_sigma(k, cfg);
    set.add({k, truth[i++] + sigma * unit(rng), sigma * sigma});
  });
  return set;
}

}  // namespace bistatic
