#pragma once

// Maximum-likelihood fusion of any subset of bistatic measurements.
//
// Each measurement is a smooth function f_i(p) of the target position; the
// estimate minimizes sum_i (f_i(p) - m_i)^2 / sigma_i^2 over py >= y_min with
// a damped Gauss-Newton iteration. Covariance comes either from the inverted
// negative Hessian of the log-likelihood or from a calibrated diagonal.

#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "bistatic/error.hpp"
#include "bistatic/geo_positioning.hpp"
#include "bistatic/geometry.hpp"

namespace bistatic {

struct MlConfig {
  double y_min = 0.1;
  std::optional<Position> initial_guess;
  int max_iterations = 100;
  double gradient_tolerance = 1e-8;
  // Convergence also requires the undamped step to fall below this, relative to 1 + |p|.
  double step_tolerance = 1e-12;
  bool grid_fallback = true;
  Rect fallback_bounds{-20.0, 20.0, 0.1, 40.0};
  int fallback_grid = 101;
  // Iterates that leave this radius are treated as divergent.
  double divergence_radius = 1e4;
  // Return single-measurement fits flagged as under-determined instead of raising.
  bool allow_underdetermined = false;

  void validate() const {
    if (!(y_min > 0.0)) throw Error(ErrorCode::InvalidArgument, "y_min must be > 0");
    if (max_iterations < 1) throw Error(ErrorCode::InvalidArgument, "max_iterations must be >= 1");
    if (!(gradient_tolerance > 0.0)) throw Error(ErrorCode::InvalidArgument, "gradient_tolerance must be > 0");
    if (!(step_tolerance > 0.0)) throw Error(ErrorCode::InvalidArgument, "step_tolerance must be > 0");
    if (fallback_grid < 2) throw Error(ErrorCode::InvalidArgument, "fallback_grid must be >= 2");
    if (!fallback_bounds.valid()) throw Error(ErrorCode::InvalidArgument, "fallback_bounds must be ordered");
  }

  friend bool operator==(const MlConfig&, const MlConfig&) = default;
};

struct FixedCovariance {
  double sigma_x2 = 1.0;
  double sigma_y2 = 1.0;

  void validate() const {
    if (!(sigma_x2 > 0.0) || !(sigma_y2 > 0.0))
      throw Error(ErrorCode::InvalidArgument, "fixed covariance variances must be > 0");
  }

  friend bool operator==(const FixedCovariance&, const FixedCovariance&) = default;
};

inline Eigen::Matrix2d fixed_covariance_matrix(const FixedCovariance& fc) {
  Eigen::Matrix2d m = Eigen::Matrix2d::Zero();
  m(0, 0) = fc.sigma_x2;
  m(1, 1) = fc.sigma_y2;
  return m;
}

/// One measurement together with the nodes that produced it. The bistatic
/// case uses the scenario's TX/RX; multistatic setups supply their own.
/// NAF entries refer to the TX node (NafTx) or the RX node (NafRx); all
/// arrays are assumed parallel to the x-axis with boresight towards +y.
struct SensorTerm {
  MeasurementKind kind;
  Eigen::Vector2d tx;
  Eigen::Vector2d rx;
  double value;
  double variance;
};

/// Weight floor used for zero-variance (noiseless) entries.
inline constexpr double kVarianceFloor = 1e-12;

/// Value, gradient and Hessian of one conversion function.
struct TermDerivatives {
  double value;
  Eigen::Vector2d gradient;
  Eigen::Matrix2d hessian;
};

namespace detail {

inline double range_leg(const Eigen::Vector2d& p, const Eigen::Vector2d& node) { return (p - node).norm(); }

inline double naf_value(const Eigen::Vector2d& p, const Eigen::Vector2d& node, double k) {
  const double u = p.x() - node.x();
  const double v = p.y() - node.y();
  return -k * u / std::sqrt(u * u + v * v);
}

inline double term_value(MeasurementKind kind, const Eigen::Vector2d& p, const Eigen::Vector2d& tx,
                         const Eigen::Vector2d& rx, double k) {
  switch (kind) {
    case MeasurementKind::BistaticRange: return range_leg(p, tx) + range_leg(p, rx);
    case MeasurementKind::NafTx: return naf_value(p, tx, k);
    case MeasurementKind::NafRx: return naf_value(p, rx, k);
  }
  return 0.0;
}

inline void add_range_leg(const Eigen::Vector2d& p, const Eigen::Vector2d& node, TermDerivatives& out) {
  const Eigen::Vector2d d = p - node;
  const double rho = d.norm();
  out.value += rho;
  out.gradient += d / rho;
  out.hessian += (Eigen::Matrix2d::Identity() - d * d.transpose() / (rho * rho)) / rho;
}

// f = -k sin(atan(u / v)) = -k u / rho for v > 0.
inline void set_naf(const Eigen::Vector2d& p, const Eigen::Vector2d& node, double k, TermDerivatives& out) {
  const double u = p.x() - node.x();
  const double v = p.y() - node.y();
  const double rho2 = u * u + v * v;
  const double rho = std::sqrt(rho2);
  const double rho3 = rho2 * rho;
  const double rho5 = rho3 * rho2;
  out.value = -k * u / rho;
  out.gradient = {-k * v * v / rho3, k * u * v / rho3};
  const double huu = -3.0 * u * v * v / rho5;
  const double huv = v * (2.0 * u * u - v * v) / rho5;
  const double hvv = u * (2.0 * v * v - u * u) / rho5;
  out.hessian << -k * huu, -k * huv, -k * huv, -k * hvv;
}

}  // namespace detail

/// Closed-form derivatives of a conversion function at p.
inline TermDerivatives term_derivatives(MeasurementKind kind, const Eigen::Vector2d& p, const Eigen::Vector2d& tx,
                                        const Eigen::Vector2d& rx, double d_over_lambda) {
  TermDerivatives out{0.0, Eigen::Vector2d::Zero(), Eigen::Matrix2d::Zero()};
  switch (kind) {
    case MeasurementKind::BistaticRange:
      detail::add_range_leg(p, tx, out);
      detail::add_range_leg(p, rx, out);
      break;
    case MeasurementKind::NafTx: detail::set_naf(p, tx, d_over_lambda, out); break;
    case MeasurementKind::NafRx: detail::set_naf(p, rx, d_over_lambda, out); break;
  }
  return out;
}

/// Bistatic terms for a measurement set (stack storage, canonical order).
struct BistaticTerms {
  std::array<SensorTerm, 3> terms{};
  std::size_t count = 0;

  std::span<const SensorTerm> span() const { return {terms.data(), count}; }
};

inline BistaticTerms make_terms(const MeasurementSet& set, const ScenarioConfig& cfg) {
  BistaticTerms out;
  for (const auto& m : set) out.terms[out.count++] = {m.kind, cfg.tx(), cfg.rx(), m.value, m.variance};
  return out;
}

/// Weighted least-squares cost sum_i (f_i(p) - m_i)^2 / max(var_i, floor).
inline double ml_cost(const Eigen::Vector2d& p, std::span<const SensorTerm> terms, double d_over_lambda) {
  double cost = 0.0;
  for (const auto& t : terms) {
    const double r = detail::term_value(t.kind, p, t.tx, t.rx, d_over_lambda) - t.value;
    cost += r * r / std::max(t.variance, kVarianceFloor);
  }
  return cost;
}

inline double ml_cost(const Position& p, const MeasurementSet& set, const ScenarioConfig& cfg) {
  return ml_cost(p.vec(), make_terms(set, cfg).span(), cfg.d_over_lambda);
}

/// ln L(m | p) for the diagonal Gaussian noise model. Evaluated through
/// forward_model, independently of the analytic derivative code.
inline double log_likelihood(const Position& p, const MeasurementSet& set, const ScenarioConfig& cfg) {
  if (!(p.y > 0.0)) throw Error(ErrorCode::DomainError, "log-likelihood requires py > 0");
  if (set.empty()) throw Error(ErrorCode::InvalidArgument, "empty measurement set");
  const MeasurementVector f = forward_model(p, set.kinds(), cfg);
  double quad = 0.0;
  double log_det = 0.0;
  for (std::size_t i = 0; i < set.size(); ++i) {
    const double var = set[i].variance;
    if (!(var > 0.0)) throw Error(ErrorCode::InvalidArgument, "log-likelihood requires positive variances");
    const double r = f[static_cast<Eigen::Index>(i)] - set[i].value;
    quad += r * r / var;
    log_det += std::log(var);
  }
  const double o = static_cast<double>(set.size());
  return -0.5 * quad - 0.5 * (o * std::log(2.0 * std::numbers::pi) + log_det);
}

/// Hessian of ln L with respect to (px, py), analytic.
inline Eigen::Matrix2d log_likelihood_hessian(const Eigen::Vector2d& p, std::span<const SensorTerm> terms,
                                              double d_over_lambda) {
  Eigen::Matrix2d info = Eigen::Matrix2d::Zero();
  for (const auto& t : terms) {
    const TermDerivatives d = term_derivatives(t.kind, p, t.tx, t.rx, d_over_lambda);
    const double w = 1.0 / std::max(t.variance, kVarianceFloor);
    info += w * (d.gradient * d.gradient.transpose() + (d.value - t.value) * d.hessian);
  }
  return -info;
}

inline Eigen::Matrix2d log_likelihood_hessian(const Position& p, const MeasurementSet& set,
                                              const ScenarioConfig& cfg) {
  if (!(p.y > 0.0)) throw Error(ErrorCode::DomainError, "Hessian requires py > 0");
  return log_likelihood_hessian(p.vec(), make_terms(set, cfg).span(), cfg.d_over_lambda);
}

/// -H^-1 at the estimate; raises IndefiniteHessian if H is not negative definite.
inline Eigen::Matrix2d hessian_covariance(const Position& p_hat, const MeasurementSet& set, const ScenarioConfig& cfg,
                                          double y_min = MlConfig{}.y_min) {
  if (!(p_hat.y > y_min)) throw Error(ErrorCode::DomainError, "Hessian covariance requires py > y_min");
  const Eigen::Matrix2d info = -log_likelihood_hessian(p_hat, set, cfg);
  const Eigen::Matrix2d sym = 0.5 * (info + info.transpose());
  // 2x2 positive definiteness: leading minor and determinant.
  const double det = sym(0, 0) * sym(1, 1) - sym(0, 1) * sym(1, 0);
  if (!(sym(0, 0) > 0.0) || !(det > 0.0) || !std::isfinite(det))
    throw Error(ErrorCode::IndefiniteHessian, "log-likelihood Hessian is not negative definite");
  Eigen::Matrix2d cov;
  cov << sym(1, 1) / det, -sym(0, 1) / det, -sym(1, 0) / det, sym(0, 0) / det;
  return cov;
}

struct MlFitResult {
  Position p;
  double cost = 0.0;
  int iterations = 0;
  bool converged = false;
};

namespace detail {

inline Eigen::Vector2d project(Eigen::Vector2d p, double y_min) {
  p.y() = std::max(p.y(), y_min);
  return p;
}

// Damped Gauss-Newton with multiplicative damping on diag(J^T W J).
inline MlFitResult gauss_newton(std::span<const SensorTerm> terms, Eigen::Vector2d p, const MlConfig& ml, double k) {
  MlFitResult res;
  p = project(p, ml.y_min);
  double cost = ml_cost(p, terms, k);
  double lambda = 1e-3;
  for (int it = 1; it <= ml.max_iterations; ++it) {
    res.iterations = it;
    Eigen::Matrix2d jtj = Eigen::Matrix2d::Zero();
    Eigen::Vector2d jtr = Eigen::Vector2d::Zero();
    for (const auto& t : terms) {
      const TermDerivatives d = term_derivatives(t.kind, p, t.tx, t.rx, k);
      const double w = 1.0 / std::max(t.variance, kVarianceFloor);
      jtj += w * d.gradient * d.gradient.transpose();
      jtr += w * (d.value - t.value) * d.gradient;
    }
    Eigen::Vector2d grad = 2.0 * jtr;
    // Active bound: descent would push py below y_min, so only x moves.
    const bool active = p.y() <= ml.y_min && grad.y() > 0.0;
    if (active) grad.y() = 0.0;
    if (grad.norm() < ml.gradient_tolerance) {
      const Eigen::Vector2d gn =
          active ? Eigen::Vector2d(-jtr.x() / jtj(0, 0), 0.0) : Eigen::Vector2d(-jtj.ldlt().solve(jtr));
      if (!gn.allFinite() || gn.norm() < ml.step_tolerance * (1.0 + p.norm())) {
        res.converged = true;
        break;
      }
    }

    bool accepted = false;
    Eigen::Vector2d next = p;
    double next_cost = cost;
    while (lambda <= 1e12) {
      Eigen::Matrix2d damped = jtj;
      damped.diagonal() += lambda * jtj.diagonal().cwiseMax(1e-12 * (1.0 + jtj.diagonal().maxCoeff()));
      const Eigen::Vector2d delta =
          active ? Eigen::Vector2d(-jtr.x() / damped(0, 0), 0.0) : Eigen::Vector2d(-damped.ldlt().solve(jtr));
      next = project(p + delta, ml.y_min);
      next_cost = ml_cost(next, terms, k);
      if (std::isfinite(next_cost) && next_cost < cost) {
        accepted = true;
        lambda = std::max(lambda / 10.0, 1e-12);
        break;
      }
      lambda *= 10.0;
    }
    if (!accepted) {
      // No descent direction at working precision: stationary point.
      res.converged = true;
      break;
    }
    const double step = (next - p).norm();
    p = next;
    cost = next_cost;
    if (p.norm() > ml.divergence_radius) break;
    if (step < 1e-12 * (1.0 + p.norm())) {
      res.converged = true;
      break;
    }
  }
  res.p = Position::from(p);
  res.cost = cost;
  if (p.norm() > ml.divergence_radius) res.converged = false;
  return res;
}

inline Eigen::Vector2d grid_seed(std::span<const SensorTerm> terms, const MlConfig& ml, double k) {
  const Rect& b = ml.fallback_bounds;
  const int n = ml.fallback_grid;
  Eigen::Vector2d best{0.5 * (b.x_min + b.x_max), std::max(0.5 * (b.y_min + b.y_max), ml.y_min)};
  double best_cost = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    const double x = b.x_min + b.width() * i / (n - 1);
    for (int j = 0; j < n; ++j) {
      const double y = std::max(b.y_min + b.height() * j / (n - 1), ml.y_min);
      const Eigen::Vector2d p{x, y};
      const double c = ml_cost(p, terms, k);
      if (c < best_cost) {
        best_cost = c;
        best = p;
      }
    }
  }
  return best;
}

}  // namespace detail

/// Solves the ML problem for arbitrary sensor terms (bistatic or multistatic).
inline MlFitResult ml_solve(std::span<const SensorTerm> terms, const MlConfig& ml, double d_over_lambda) {
  if (terms.empty()) throw Error(ErrorCode::InvalidArgument, "no measurements to fuse");
  const bool have_guess = ml.initial_guess.has_value();
  const Eigen::Vector2d start =
      have_guess ? ml.initial_guess->vec() : detail::grid_seed(terms, ml, d_over_lambda);
  MlFitResult res = detail::gauss_newton(terms, start, ml, d_over_lambda);
  if (!res.converged && have_guess && ml.grid_fallback)
    res = detail::gauss_newton(terms, detail::grid_seed(terms, ml, d_over_lambda), ml, d_over_lambda);
  if (!res.converged)
    throw Error(ErrorCode::MlDiverged, "no convergence after " + std::to_string(res.iterations) + " iterations");
  return res;
}

/// ML position estimate; the covariance is attached separately.
inline PositionEstimate ml_fit(const MeasurementSet& set, const MlConfig& ml, const ScenarioConfig& cfg) {
  if (set.empty()) throw Error(ErrorCode::InvalidArgument, "empty measurement set");
  const bool under = set.size() < 2;
  if (under && !ml.allow_underdetermined)
    throw Error(ErrorCode::UnderDetermined, "ML fusion needs at least two measurements");
  const BistaticTerms terms = make_terms(set, cfg);
  const MlFitResult res = ml_solve(terms.span(), ml, cfg.d_over_lambda);
  PositionEstimate est;
  est.p_hat = res.p;
  est.method = EstimateMethod::Ml;
  est.used_kinds = set.kinds();
  est.underdetermined = under;
  return est;
}

/// Multistatic extension: any number of terms with their own node positions.
inline PositionEstimate ml_fit_multistatic(std::span<const SensorTerm> terms, const MlConfig& ml,
                                           const ScenarioConfig& cfg) {
  if (terms.size() < 2) throw Error(ErrorCode::UnderDetermined, "ML fusion needs at least two measurements");
  const MlFitResult res = ml_solve(terms, ml, cfg.d_over_lambda);
  PositionEstimate est;
  est.p_hat = res.p;
  est.method = EstimateMethod::Ml;
  for (const auto& t : terms) est.used_kinds.insert(t.kind);
  return est;
}

}  // namespace bistatic
