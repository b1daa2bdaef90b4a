#pragma once

// Output files: JSON summaries and CSV tables. Every file carries the
// resolved config and master seed.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "bistatic/config.hpp"
#include "bistatic/evaluation.hpp"
#include "bistatic/kalman_tracker.hpp"
#include "bistatic/trajectory.hpp"

namespace bistatic {

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kOutputDirEnv = "BISTATIC_OUTPUT_DIR";

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Json = nlohmann::ordered_json;

/// Fixed 9 significant digits.
inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

/// Config value, else $BISTATIC_OUTPUT_DIR, else "bistatic_out".
inline std::filesystem::path resolve_output_dir(const ExperimentConfig& cfg) {
  if (!cfg.output_dir.empty()) return cfg.output_dir;
  if (const char* env = std::getenv(kOutputDirEnv); env && *env) return env;
  return "bistatic_out";
}

inline void ensure_directory(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir))
    throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());
}

inline void write_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// "# "-prefixed copy of the resolved config for CSV headers.
inline std::string comment_header(const ExperimentConfig& cfg) {
  std::string out = "# master_seed = " + std::to_string(cfg.master_seed) + "\n";
  std::istringstream in(serialize(cfg, false));
  for (std::string line; std::getline(in, line);) out += line.empty() ? "#\n" : "# " + line + "\n";
  return out;
}

/// Config as {section: {key: value}} with values in their text form.
inline Json config_json(const ExperimentConfig& cfg) {
  Json j = Json::object();
  std::istringstream in(serialize(cfg, false));
  std::string section;
  for (std::string line; std::getline(in, line);) {
    if (line.empty()) continue;
    if (line.front() == '[') {
      section = line.substr(1, line.size() - 2);
      j[section] = Json::object();
      continue;
    }
    const auto eq = line.find(" = ");
    j[section][line.substr(0, eq)] = line.substr(eq + 3);
  }
  return j;
}

inline Json summary_header(const ExperimentConfig& cfg, std::string_view command) {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["command"] = command;
  j["master_seed"] = cfg.master_seed;
  j["config"] = config_json(cfg);
  return j;
}

inline Json to_json(const DiscardCounts& d) {
  Json j = Json::object();
  for (const auto& [code, n] : d) j[std::string(to_string(code))] = n;
  return j;
}

inline Json to_json(const ErrorStats& s) {
  Json j;
  j["count"] = s.count;
  j["rmse"] = s.rmse;
  j["rmse_x"] = s.rmse_x;
  j["rmse_y"] = s.rmse_y;
  j["mean_abs"] = s.mean_abs;
  if (!s.cdf.empty()) {
    j["p50"] = s.cdf.percentile(50);
    j["p95"] = s.cdf.percentile(95);
  }
  return j;
}

inline Json to_json(const EvalReport& r) {
  Json j;
  j["area"] = {r.area.x_min, r.area.x_max, r.area.y_min, r.area.y_max};
  j["area_stats"] = to_json(r.area_stats);
  j["mean_point_rmse"] = r.mean_point_rmse;
  j["draws"] = r.draws;
  j["estimates"] = r.estimates;
  j["discards"] = to_json(r.discards);
  return j;
}

inline Json to_json(const TrackingReport& r) {
  Json j;
  j["position"] = to_json(r.position);
  j["velocity"] = to_json(r.velocity);
  j["raw_position"] = to_json(r.raw_position);
  j["improvement"] = r.improvement();
  j["ticks"] = r.ticks;
  j["updates"] = r.updates;
  j["gated"] = r.gated;
  j["estimate_failures"] = r.estimate_failures;
  j["update_failures"] = r.update_failures;
  j["resets"] = r.resets;
  return j;
}

inline std::string heatmap_header() { return "series,x,y,rmse,rmse_x,rmse_y,mean_abs,estimates,discards,in_area\n"; }

/// One row per grid point.
inline void append_heatmap(std::string& out, const EvalReport& r, std::string_view series) {
  for (const auto& p : r.points) {
    out += std::string(series) + "," + fmt(p.truth.x) + "," + fmt(p.truth.y) + "," + fmt(p.rmse) + "," +
           fmt(p.rmse_x) + "," + fmt(p.rmse_y) + "," + fmt(p.mean_abs) + "," + std::to_string(p.estimates) + "," +
           std::to_string(total(p.discards)) + "," + (p.in_area ? "1" : "0") + "\n";
  }
}

inline std::string cdf_header() { return "series,value,fraction\n"; }

/// (value, fraction) rows, downsampled to at most max_points.
inline void append_cdf(std::string& out, const EmpiricalCdf& c, std::string_view series, std::size_t max_points) {
  for (const auto& [v, f] : c.points(max_points)) out += std::string(series) + "," + fmt(v) + "," + fmt(f) + "\n";
}

inline std::string track_log_header() {
  return "track,trial,t,truth_x,truth_y,truth_vx,truth_vy,est_x,est_y,state_x,state_y,state_vx,state_vy,outcome,reset\n";
}

inline void append_track_log(std::string& out, std::size_t track, std::size_t trial, const TrackReport& report) {
  for (const TickRecord& r : report.ticks) {
    out += std::to_string(track) + "," + std::to_string(trial) + "," + fmt(r.t);
    for (int i = 0; i < 4; ++i) out += "," + fmt(r.truth[i]);
    out += "," + fmt(r.estimate.x) + "," + fmt(r.estimate.y);
    for (int i = 0; i < 4; ++i) out += "," + fmt(r.state[i]);
    out += ",";
    out += to_string(r.outcome);
    out += ",";
    out += to_string(r.reset);
    out += "\n";
  }
}

inline std::string trajectory_header() { return "track,t,x,y,vx,vy,speed\n"; }

inline void append_trajectory(std::string& out, const Trajectory& traj, std::size_t track) {
  for (const auto& s : traj.samples)
    out += std::to_string(track) + "," + fmt(s.t) + "," + fmt(s.p.x) + "," + fmt(s.p.y) + "," + fmt(s.v.x()) + "," +
           fmt(s.v.y()) + "," + fmt(traj.speed(s.t)) + "\n";
}

inline Json calibration_json(const FixedCovariance& fc, KindSet kinds, const ExperimentConfig& cfg) {
  Json j = summary_header(cfg, "calibrate");
  j["kinds"] = kinds.label();
  j["sigma_x2"] = fc.sigma_x2;
  j["sigma_y2"] = fc.sigma_y2;
  return j;
}

inline FixedCovariance read_calibration(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  try {
    const Json j = Json::parse(text);
    FixedCovariance fc{j.at("sigma_x2").get<double>(), j.at("sigma_y2").get<double>()};
    fc.validate();
    return fc;
  } catch (const Json::exception& e) {
    throw ConfigError("fusion.calibration_file", "invalid calibration file '" + path.string() + "': " + e.what());
  } catch (const Error& e) {
    throw ConfigError("fusion.calibration_file", e.what());
  }
}

}  // namespace bistatic
