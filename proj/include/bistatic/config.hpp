#pragma once

// Experiment configuration: a sectioned key = value text format.
//
//   ; comment            # comment
//   [section]
//   key = value
//
// Sections and keys:
//   [scenario]   c, d_over_lambda, sigma_r, sigma_eta, dt
//   [ml]         y_min, max_iterations, gradient_tolerance, step_tolerance, grid_fallback,
//                fallback_bounds, fallback_grid, divergence_radius
//   [tracker]    q_diag, process_noise (rate|discrete), p0_diag, gate_radius,
//                reset (auto|on|off), reset_timeout, area_margin, cold_start
//   [trajectory] area, duration, speed_min, speed_max, periods,
//                waypoint_step, turn_std, tangent_scale
//   [grid]       nx, ny, x_bounds, y_bounds, samples_per_point
//   [campaign]   tracks, trials, cdf_stride
//   [evaluation] area
//   [fusion]     estimator (geo|ml), kinds (e.g. aod+aoa, all),
//                covariance (none|taylor|hessian|fixed), fixed_sigma_x2,
//                fixed_sigma_y2, calibration_file, auto_calibrate
//   [run]        seed, output_dir, workers
//
// Lists are comma separated; rectangles are "x_min, x_max, y_min, y_max" and
// bounds are "min, max". Booleans accept true/false, on/off, yes/no, 1/0.
// Omitted keys keep the preset defaults.

#include <array>
#include <cerrno>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "bistatic/estimator.hpp"
#include "bistatic/evaluation.hpp"
#include "bistatic/geometry.hpp"
#include "bistatic/kalman_tracker.hpp"
#include "bistatic/ml_positioning.hpp"
#include "bistatic/trajectory.hpp"

namespace bistatic {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& what)
      : std::runtime_error(key.empty() ? what : key + ": " + what), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

enum class Preset { Desk, Paper };
enum class ResetMode { Auto, On, Off };

inline Preset parse_preset(std::string_view s) {
  if (s == "desk") return Preset::Desk;
  if (s == "paper") return Preset::Paper;
  throw ConfigError("preset", "unknown preset '" + std::string(s) + "' (expected desk or paper)");
}

struct ExperimentConfig {
  ScenarioConfig scenario = ScenarioConfig::paper();
  MlConfig ml;
  TrackerConfig tracker;
  ResetMode reset = ResetMode::Auto;
  TrajectoryConfig trajectory;
  GridSpec grid = GridSpec::paper();
  std::size_t tracks = 120;
  std::size_t trials = 40;
  std::size_t cdf_stride = 10;
  Rect area = default_evaluation_area();
  FusionSpec fusion;
  std::string calibration_file;
  bool auto_calibrate = true;
  std::uint64_t master_seed = 1;
  std::string output_dir;
  std::size_t workers = 1;

  static ExperimentConfig defaults(Preset preset = Preset::Paper) {
    ExperimentConfig c;
    if (preset == Preset::Desk) {
      c.grid = GridSpec::desk();
      c.tracks = 10;
      c.trials = 5;
      c.cdf_stride = 1;
    }
    return c;
  }

  /// Tracker settings with dt, area and the reset mode applied.
  TrackerConfig resolved_tracker() const {
    TrackerConfig t = tracker;
    t.dt = scenario.dt;
    t.area_bounds = area;
    switch (reset) {
      case ResetMode::Auto: t = tracker_for(fusion.kinds, t); break;
      case ResetMode::On: t.reset_enabled = true; break;
      case ResetMode::Off: t.reset_enabled = false; break;
    }
    return t;
  }

  TrajectoryConfig resolved_trajectory() const {
    TrajectoryConfig t = trajectory;
    t.dt = scenario.dt;
    return t;
  }

  TrackingCampaign campaign() const {
    TrackingCampaign c;
    c.n_tracks = tracks;
    c.trials_per_track = trials;
    c.trajectory = resolved_trajectory();
    c.tracker = resolved_tracker();
    c.fusion = fusion;
    c.area = area;
    c.cdf_stride = cdf_stride;
    c.workers = workers;
    return c;
  }

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

namespace detail {

// Shortest %g form that parses back to the same double.
inline std::string format_exact(double v) {
  char buf[40];
  for (int digits = 15; digits <= 17; ++digits) {
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline double parse_double(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(t.c_str(), &end);
  if (t.empty() || end != t.c_str() + t.size() || errno == ERANGE)
    throw ConfigError(key, "expected a number, got '" + text + "'");
  return v;
}

inline std::uint64_t parse_unsigned(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  char* end = nullptr;
  errno = 0;
  const unsigned long long v = std::strtoull(t.c_str(), &end, 10);
  if (t.empty() || t[0] == '-' || end != t.c_str() + t.size() || errno == ERANGE)
    throw ConfigError(key, "expected a non-negative integer, got '" + text + "'");
  return v;
}

inline bool parse_bool(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  if (t == "true" || t == "on" || t == "yes" || t == "1") return true;
  if (t == "false" || t == "off" || t == "no" || t == "0") return false;
  throw ConfigError(key, "expected a boolean, got '" + text + "'");
}

inline std::vector<double> parse_list(const std::string& key, const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_double(key, item));
  if (out.empty()) throw ConfigError(key, "expected a comma separated list");
  return out;
}

template <std::size_t N>
std::array<double, N> parse_array(const std::string& key, const std::string& text) {
  const auto v = parse_list(key, text);
  if (v.size() != N) throw ConfigError(key, "expected " + std::to_string(N) + " comma separated values");
  std::array<double, N> out{};
  std::copy(v.begin(), v.end(), out.begin());
  return out;
}

inline std::string join(std::span<const double> v) {
  std::string out;
  for (double x : v) {
    if (!out.empty()) out += ", ";
    out += format_exact(x);
  }
  return out;
}

inline Rect parse_rect(const std::string& key, const std::string& text) {
  const auto a = parse_array<4>(key, text);
  return {a[0], a[1], a[2], a[3]};
}

inline std::string format_rect(const Rect& r) {
  const std::array<double, 4> a{r.x_min, r.x_max, r.y_min, r.y_max};
  return join(a);
}

inline std::string_view to_string(ResetMode m) {
  return m == ResetMode::Auto ? "auto" : m == ResetMode::On ? "on" : "off";
}

struct Field {
  std::string section;
  std::string key;
  std::function<void(ExperimentConfig&, const std::string&, const std::string&)> set;
  // Empty result: the key is unset and not serialized.
  std::function<std::string(const ExperimentConfig&)> get;
};

inline const std::vector<Field>& fields() {
  using C = ExperimentConfig;
  using S = std::string;
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    auto real = [&f](S sec, S key, auto getter) {
      f.push_back({sec, key, [getter](C& c, const S& k, const S& v) { getter(c) = parse_double(k, v); },
                   [getter](const C& c) { return format_exact(getter(c)); }});
    };
    auto count = [&f](S sec, S key, auto getter) {
      f.push_back({sec, key,
                   [getter](C& c, const S& k, const S& v) {
                     getter(c) = static_cast<std::remove_cvref_t<decltype(getter(c))>>(parse_unsigned(k, v));
                   },
                   [getter](const C& c) { return std::to_string(getter(c)); }});
    };
    auto flag = [&f](S sec, S key, auto getter) {
      f.push_back({sec, key, [getter](C& c, const S& k, const S& v) { getter(c) = parse_bool(k, v); },
                   [getter](const C& c) { return S(getter(c) ? "true" : "false"); }});
    };
    auto rect = [&f](S sec, S key, auto getter) {
      f.push_back({sec, key, [getter](C& c, const S& k, const S& v) { getter(c) = parse_rect(k, v); },
                   [getter](const C& c) { return format_rect(getter(c)); }});
    };
    auto diag = [&f](S sec, S key, auto getter) {
      f.push_back({sec, key, [getter](C& c, const S& k, const S& v) { getter(c) = parse_array<4>(k, v); },
                   [getter](const C& c) { return join(getter(c)); }});
    };
    auto text = [&f](S sec, S key, auto getter) {
      f.push_back({sec, key, [getter](C& c, const S&, const S& v) { getter(c) = trim(v); },
                   [getter](const C& c) { return getter(c); }});
    };

    real("scenario", "c", [](auto& c) -> auto& { return c.scenario.c; });
    real("scenario", "d_over_lambda", [](auto& c) -> auto& { return c.scenario.d_over_lambda; });
    real("scenario", "sigma_r", [](auto& c) -> auto& { return c.scenario.sigma_r; });
    real("scenario", "sigma_eta", [](auto& c) -> auto& { return c.scenario.sigma_eta; });
    real("scenario", "dt", [](auto& c) -> auto& { return c.scenario.dt; });

    real("ml", "y_min", [](auto& c) -> auto& { return c.ml.y_min; });
    count("ml", "max_iterations", [](auto& c) -> auto& { return c.ml.max_iterations; });
    real("ml", "gradient_tolerance", [](auto& c) -> auto& { return c.ml.gradient_tolerance; });
    real("ml", "step_tolerance", [](auto& c) -> auto& { return c.ml.step_tolerance; });
    flag("ml", "grid_fallback", [](auto& c) -> auto& { return c.ml.grid_fallback; });
    rect("ml", "fallback_bounds", [](auto& c) -> auto& { return c.ml.fallback_bounds; });
    count("ml", "fallback_grid", [](auto& c) -> auto& { return c.ml.fallback_grid; });
    real("ml", "divergence_radius", [](auto& c) -> auto& { return c.ml.divergence_radius; });

    diag("tracker", "q_diag", [](auto& c) -> auto& { return c.tracker.q_diag; });
    f.push_back({"tracker", "process_noise",
                 [](C& c, const S& k, const S& v) {
                   const S t = trim(v);
                   if (t == "rate") c.tracker.process_noise = ProcessNoiseModel::Rate;
                   else if (t == "discrete") c.tracker.process_noise = ProcessNoiseModel::Discrete;
                   else throw ConfigError(k, "expected rate or discrete, got '" + v + "'");
                 },
                 [](const C& c) { return S(to_string(c.tracker.process_noise)); }});
    diag("tracker", "p0_diag", [](auto& c) -> auto& { return c.tracker.p0_diag; });
    real("tracker", "gate_radius", [](auto& c) -> auto& { return c.tracker.gate_radius; });
    f.push_back({"tracker", "reset",
                 [](C& c, const S& k, const S& v) {
                   const S t = trim(v);
                   if (t == "auto") c.reset = ResetMode::Auto;
                   else if (t == "on") c.reset = ResetMode::On;
                   else if (t == "off") c.reset = ResetMode::Off;
                   else throw ConfigError(k, "expected auto, on or off, got '" + v + "'");
                 },
                 [](const C& c) { return S(to_string(c.reset)); }});
    real("tracker", "reset_timeout", [](auto& c) -> auto& { return c.tracker.reset_timeout; });
    real("tracker", "area_margin", [](auto& c) -> auto& { return c.tracker.area_margin; });
    flag("tracker", "cold_start", [](auto& c) -> auto& { return c.tracker.cold_start; });

    rect("trajectory", "area", [](auto& c) -> auto& { return c.trajectory.area; });
    real("trajectory", "duration", [](auto& c) -> auto& { return c.trajectory.duration; });
    real("trajectory", "speed_min", [](auto& c) -> auto& { return c.trajectory.speed_min; });
    real("trajectory", "speed_max", [](auto& c) -> auto& { return c.trajectory.speed_max; });
    f.push_back({"trajectory", "periods",
                 [](C& c, const S& k, const S& v) { c.trajectory.period_choices = parse_list(k, v); },
                 [](const C& c) { return join(c.trajectory.period_choices); }});
    real("trajectory", "waypoint_step", [](auto& c) -> auto& { return c.trajectory.waypoint_step; });
    real("trajectory", "turn_std", [](auto& c) -> auto& { return c.trajectory.turn_std; });
    real("trajectory", "tangent_scale", [](auto& c) -> auto& { return c.trajectory.tangent_scale; });

    count("grid", "nx", [](auto& c) -> auto& { return c.grid.nx; });
    count("grid", "ny", [](auto& c) -> auto& { return c.grid.ny; });
    f.push_back({"grid", "x_bounds",
                 [](C& c, const S& k, const S& v) {
                   const auto b = parse_array<2>(k, v);
                   c.grid.bounds.x_min = b[0];
                   c.grid.bounds.x_max = b[1];
                 },
                 [](const C& c) {
                   const std::array<double, 2> b{c.grid.bounds.x_min, c.grid.bounds.x_max};
                   return join(b);
                 }});
    f.push_back({"grid", "y_bounds",
                 [](C& c, const S& k, const S& v) {
                   const auto b = parse_array<2>(k, v);
                   c.grid.bounds.y_min = b[0];
                   c.grid.bounds.y_max = b[1];
                 },
                 [](const C& c) {
                   const std::array<double, 2> b{c.grid.bounds.y_min, c.grid.bounds.y_max};
                   return join(b);
                 }});
    count("grid", "samples_per_point", [](auto& c) -> auto& { return c.grid.samples_per_point; });

    count("campaign", "tracks", [](auto& c) -> auto& { return c.tracks; });
    count("campaign", "trials", [](auto& c) -> auto& { return c.trials; });
    count("campaign", "cdf_stride", [](auto& c) -> auto& { return c.cdf_stride; });

    rect("evaluation", "area", [](auto& c) -> auto& { return c.area; });

    f.push_back({"fusion", "estimator",
                 [](C& c, const S& k, const S& v) {
                   try {
                     c.fusion.estimator = parse_estimator(trim(v));
                   } catch (const Error& e) {
                     throw ConfigError(k, e.what());
                   }
                 },
                 [](const C& c) { return S(to_string(c.fusion.estimator)); }});
    f.push_back({"fusion", "kinds",
                 [](C& c, const S& k, const S& v) {
                   try {
                     c.fusion.kinds = KindSet::parse(trim(v));
                   } catch (const Error& e) {
                     throw ConfigError(k, e.what());
                   }
                 },
                 [](const C& c) { return c.fusion.kinds.label(); }});
    f.push_back({"fusion", "covariance",
                 [](C& c, const S& k, const S& v) {
                   try {
                     c.fusion.covariance = parse_covariance_mode(trim(v));
                   } catch (const Error& e) {
                     throw ConfigError(k, e.what());
                   }
                 },
                 [](const C& c) { return S(to_string(c.fusion.covariance)); }});
    f.push_back({"fusion", "fixed_sigma_x2",
                 [](C& c, const S& k, const S& v) {
                   if (!c.fusion.fixed) c.fusion.fixed = FixedCovariance{0.0, 0.0};
                   c.fusion.fixed->sigma_x2 = parse_double(k, v);
                 },
                 [](const C& c) { return c.fusion.fixed ? format_exact(c.fusion.fixed->sigma_x2) : S(); }});
    f.push_back({"fusion", "fixed_sigma_y2",
                 [](C& c, const S& k, const S& v) {
                   if (!c.fusion.fixed) c.fusion.fixed = FixedCovariance{0.0, 0.0};
                   c.fusion.fixed->sigma_y2 = parse_double(k, v);
                 },
                 [](const C& c) { return c.fusion.fixed ? format_exact(c.fusion.fixed->sigma_y2) : S(); }});
    text("fusion", "calibration_file", [](auto& c) -> auto& { return c.calibration_file; });
    flag("fusion", "auto_calibrate", [](auto& c) -> auto& { return c.auto_calibrate; });

    count("run", "seed", [](auto& c) -> auto& { return c.master_seed; });
    text("run", "output_dir", [](auto& c) -> auto& { return c.output_dir; });
    count("run", "workers", [](auto& c) -> auto& { return c.workers; });
    return f;
  }();
  return table;
}

inline const Field* find_field(std::string_view section, std::string_view key) {
  for (const auto& f : fields())
    if (f.section == section && f.key == key) return &f;
  return nullptr;
}

inline void check(bool ok, const char* key, const std::string& what) {
  if (!ok) throw ConfigError(key, what);
}

template <class Fn>
void wrap(const char* section, Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    throw ConfigError(section, e.what());
  }
}

}  // namespace detail

/// Checks every invariant; the diagnostic names the offending key.
inline void validate(const ExperimentConfig& c) {
  using detail::check;
  const auto& s = c.scenario;
  check(s.c > 0.0, "scenario.c", "must be > 0");
  check(s.d_over_lambda > 0.0, "scenario.d_over_lambda", "must be > 0");
  check(s.sigma_r >= 0.0, "scenario.sigma_r", "must be >= 0");
  check(s.sigma_eta >= 0.0, "scenario.sigma_eta", "must be >= 0");
  check(s.dt > 0.0, "scenario.dt", "must be > 0");
  check(c.ml.y_min > 0.0, "ml.y_min", "must be > 0");
  check(c.ml.max_iterations >= 1, "ml.max_iterations", "must be >= 1");
  check(c.ml.gradient_tolerance > 0.0, "ml.gradient_tolerance", "must be > 0");
  check(c.ml.step_tolerance > 0.0, "ml.step_tolerance", "must be > 0");
  check(c.ml.fallback_bounds.valid(), "ml.fallback_bounds", "must be ordered");
  check(c.ml.fallback_grid >= 2, "ml.fallback_grid", "must be >= 2");
  check(c.ml.divergence_radius > 0.0, "ml.divergence_radius", "must be > 0");
  for (double q : c.tracker.q_diag) check(q >= 0.0, "tracker.q_diag", "entries must be >= 0");
  for (double p : c.tracker.p0_diag) check(p >= 0.0, "tracker.p0_diag", "entries must be >= 0");
  check(c.tracker.gate_radius > 0.0, "tracker.gate_radius", "must be > 0");
  check(c.tracker.reset_timeout > 0.0, "tracker.reset_timeout", "must be > 0");
  check(c.tracker.area_margin >= 0.0, "tracker.area_margin", "must be >= 0");
  check(c.trajectory.area.valid(), "trajectory.area", "must be ordered");
  check(c.trajectory.duration > 0.0, "trajectory.duration", "must be > 0");
  check(c.trajectory.speed_min > 0.0, "trajectory.speed_min", "must be > 0");
  check(c.trajectory.speed_max > c.trajectory.speed_min, "trajectory.speed_max", "must exceed speed_min");
  check(!c.trajectory.period_choices.empty(), "trajectory.periods", "must not be empty");
  for (double p : c.trajectory.period_choices) check(p > 0.0, "trajectory.periods", "entries must be > 0");
  check(c.trajectory.waypoint_step > 0.0, "trajectory.waypoint_step", "must be > 0");
  check(c.trajectory.turn_std >= 0.0, "trajectory.turn_std", "must be >= 0");
  check(c.trajectory.tangent_scale > 0.0, "trajectory.tangent_scale", "must be > 0");
  detail::wrap("trajectory.duration", [&] { c.resolved_trajectory().validate(); });
  check(c.grid.nx >= 1, "grid.nx", "must be >= 1");
  check(c.grid.ny >= 1, "grid.ny", "must be >= 1");
  check(c.grid.bounds.x_min <= c.grid.bounds.x_max, "grid.x_bounds", "must be ordered");
  check(c.grid.bounds.y_min <= c.grid.bounds.y_max, "grid.y_bounds", "must be ordered");
  check(c.grid.bounds.y_min >= kMinBaselineDistance, "grid.y_bounds", "points must keep 5 m distance to the baseline");
  check(c.grid.samples_per_point >= 1, "grid.samples_per_point", "must be >= 1");
  check(c.tracks >= 1, "campaign.tracks", "must be >= 1");
  check(c.trials >= 1, "campaign.trials", "must be >= 1");
  check(c.area.valid(), "evaluation.area", "must be ordered");

  const FusionSpec& f = c.fusion;
  if (f.estimator == Estimator::Geo) check(f.kinds.size() == 2, "fusion.kinds", "geo estimator requires exactly two kinds");
  else check(f.kinds.size() >= 2, "fusion.kinds", "ml estimator requires at least two kinds");
  if (f.covariance == CovarianceMode::Taylor)
    check(f.estimator == Estimator::Geo, "fusion.covariance", "taylor requires estimator = geo");
  if (f.covariance == CovarianceMode::Hessian)
    check(f.estimator == Estimator::Ml, "fusion.covariance", "hessian requires estimator = ml");
  if (f.fixed) {
    check(f.fixed->sigma_x2 > 0.0, "fusion.fixed_sigma_x2", "must be set and > 0");
    check(f.fixed->sigma_y2 > 0.0, "fusion.fixed_sigma_y2", "must be set and > 0");
  }
  if (f.covariance == CovarianceMode::Fixed)
    check(f.fixed || !c.calibration_file.empty() || c.auto_calibrate, "fusion.covariance",
          "fixed needs fixed_sigma_x2/fixed_sigma_y2, a calibration_file or auto_calibrate = true");
}

/// Parses config text on top of `base`; `overrides` are "section.key=value"
/// strings applied after the text.
inline ExperimentConfig parse_config(std::string_view text, ExperimentConfig base = ExperimentConfig::defaults(),
                                     const std::vector<std::string>& overrides = {}) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    std::istringstream in{std::string(text)};
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("", "malformed config (line " + std::to_string(e.line()) + "): " + e.message());
  }

  struct Entry {
    std::string section, key, value;
  };
  std::vector<Entry> entries;
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw ConfigError(section, "key outside of a section (or empty section)");
    for (const auto& [key, value] : body) entries.push_back({section, key, value.data()});
  }
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    const auto dot = o.find('.');
    if (eq == std::string::npos || dot == std::string::npos || dot > eq)
      throw ConfigError(o, "override must look like section.key=value");
    entries.push_back({detail::trim(o.substr(0, dot)), detail::trim(o.substr(dot + 1, eq - dot - 1)), o.substr(eq + 1)});
  }

  ExperimentConfig cfg = std::move(base);
  for (const auto& e : entries) {
    const std::string name = e.section + "." + e.key;
    const detail::Field* f = detail::find_field(e.section, e.key);
    if (!f) throw ConfigError(name, "unknown key");
    f->set(cfg, name, e.value);
  }
  validate(cfg);
  return cfg;
}

/// Writes every key in parseable form; parse_config(serialize(c)) == c.
/// Without `runtime`, settings that cannot change results (run.workers,
/// run.output_dir) are left out.
inline std::string serialize(const ExperimentConfig& c, bool runtime = true) {
  std::string out;
  std::string current;
  for (const auto& f : detail::fields()) {
    if (!runtime && f.section == "run" && (f.key == "workers" || f.key == "output_dir")) continue;
    const std::string value = f.get(c);
    if (value.empty()) continue;
    if (f.section != current) {
      if (!current.empty()) out += '\n';
      out += "[" + f.section + "]\n";
      current = f.section;
    }
    out += f.key + " = " + value + "\n";
  }
  return out;
}

}  // namespace bistatic
