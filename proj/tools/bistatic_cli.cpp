// Command-line driver: positioning grid evaluation, fixed-covariance
// calibration, tracking campaigns and trajectory export.

#include <chrono>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bistatic/config.hpp"
#include "bistatic/evaluation.hpp"
#include "bistatic/io.hpp"

namespace fs = std::filesystem;
using namespace bistatic;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;

struct CommonOptions {
  std::string config_file;
  std::vector<std::string> overrides;
  std::string preset = "paper";
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::string output_dir;
  std::size_t cdf_points = 2000;
};

ExperimentConfig load_config(const CommonOptions& o) {
  const std::string text = o.config_file.empty() ? std::string() : read_file(o.config_file);
  std::vector<std::string> overrides = o.overrides;
  if (o.seed) overrides.push_back("run.seed=" + std::to_string(*o.seed));
  if (o.workers) overrides.push_back("run.workers=" + std::to_string(*o.workers));
  if (!o.output_dir.empty()) overrides.push_back("run.output_dir=" + o.output_dir);
  return parse_config(text, ExperimentConfig::defaults(parse_preset(o.preset)), overrides);
}

class Stopwatch {
 public:
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count(); }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

FusionSpec row_spec(Estimator e, KindSet kinds, const ExperimentConfig& cfg) {
  FusionSpec f;
  f.estimator = e;
  f.kinds = kinds;
  f.covariance = CovarianceMode::None;
  f.ml = cfg.ml;
  return f;
}

/// Estimator x measurement-subset rows of the positioning table.
std::vector<FusionSpec> positioning_rows(const ExperimentConfig& cfg) {
  using K = MeasurementKind;
  return {row_spec(Estimator::Ml, {K::NafTx, K::NafRx}, cfg),
          row_spec(Estimator::Geo, {K::BistaticRange, K::NafTx}, cfg),
          row_spec(Estimator::Ml, {K::BistaticRange, K::NafTx}, cfg),
          row_spec(Estimator::Ml, {K::BistaticRange, K::NafRx}, cfg),
          row_spec(Estimator::Ml, KindSet::all(), cfg)};
}

EvalOptions eval_options(const ExperimentConfig& cfg) {
  EvalOptions o;
  o.area = cfg.area;
  o.workers = cfg.workers;
  return o;
}

int cmd_positioning(const ExperimentConfig& cfg, const CommonOptions& opts, bool configured_only) {
  const fs::path dir = resolve_output_dir(cfg);
  ensure_directory(dir);
  std::vector<FusionSpec> rows;
  if (configured_only) {
    FusionSpec f = cfg.fusion;
    f.covariance = CovarianceMode::None;
    rows.push_back(f);
  } else {
    rows = positioning_rows(cfg);
  }

  Json summary = summary_header(cfg, "positioning");
  summary["rows"] = Json::array();
  std::string heat = comment_header(cfg) + heatmap_header();
  std::string cdfs = comment_header(cfg) + cdf_header();

  std::printf("%-5s %-16s %10s %10s %10s %10s %10s %9s %7s\n", "est", "kinds", "rmse[m]", "rmse_x", "rmse_y",
              "mean_abs", "p95[m]", "discards", "time[s]");
  for (const FusionSpec& f : rows) {
    const Stopwatch sw;
    const EvalReport r = evaluate_positioning(cfg.grid, f, cfg.scenario, cfg.master_seed, eval_options(cfg));
    const std::string label = f.label();
    const double p95 = r.area_stats.cdf.empty() ? 0.0 : r.area_stats.cdf.percentile(95);
    std::printf("%-5s %-16s %10.4f %10.4f %10.4f %10.4f %10.4f %9zu %7.1f\n", std::string(to_string(f.estimator)).c_str(),
                f.kinds.label().c_str(), r.area_stats.rmse, r.area_stats.rmse_x, r.area_stats.rmse_y,
                r.area_stats.mean_abs, p95, total(r.discards), sw.seconds());
    std::fflush(stdout);

    Json row = to_json(r);
    row["series"] = label;
    summary["rows"].push_back(row);
    append_heatmap(heat, r, label);
    append_cdf(cdfs, r.area_stats.cdf, label, opts.cdf_points);
  }
  write_file(dir / "summary.json", summary.dump(2) + "\n");
  write_file(dir / "positioning_heatmap.csv", heat);
  write_file(dir / "errors_cdf.csv", cdfs);
  std::printf("wrote %s\n", dir.string().c_str());
  return kExitOk;
}

FixedCovariance run_calibration(const ExperimentConfig& cfg, KindSet kinds) {
  return calibrate_fixed_covariance(cfg.grid, kinds, cfg.scenario, cfg.master_seed, eval_options(cfg), cfg.ml);
}

int cmd_calibrate(const ExperimentConfig& cfg) {
  const fs::path dir = resolve_output_dir(cfg);
  ensure_directory(dir);
  const Stopwatch sw;
  const FixedCovariance fc = run_calibration(cfg, cfg.fusion.kinds);
  std::printf("kinds %s: sigma_x2 = %.6g m^2, sigma_y2 = %.6g m^2 (%.1f s)\n", cfg.fusion.kinds.label().c_str(),
              fc.sigma_x2, fc.sigma_y2, sw.seconds());
  const Json cal = calibration_json(fc, cfg.fusion.kinds, cfg);
  write_file(dir / "calibration.json", cal.dump(2) + "\n");
  Json summary = summary_header(cfg, "calibrate");
  summary["calibration"] = {{"kinds", cfg.fusion.kinds.label()}, {"sigma_x2", fc.sigma_x2}, {"sigma_y2", fc.sigma_y2}};
  write_file(dir / "summary.json", summary.dump(2) + "\n");
  std::printf("wrote %s\n", dir.string().c_str());
  return kExitOk;
}

/// Fills fusion.fixed from the config, a calibration file or a fresh
/// calibration run, in that order.
ExperimentConfig with_fixed_covariance(ExperimentConfig cfg, std::string& source) {
  const bool needs = cfg.fusion.covariance == CovarianceMode::Fixed || cfg.fusion.covariance == CovarianceMode::Hessian;
  if (!needs || cfg.fusion.fixed) {
    source = cfg.fusion.fixed ? "config" : "unused";
    return cfg;
  }
  if (!cfg.calibration_file.empty()) {
    cfg.fusion.fixed = read_calibration(cfg.calibration_file);
    source = "file";
  } else if (cfg.auto_calibrate) {
    cfg.fusion.fixed = run_calibration(cfg, cfg.fusion.kinds);
    source = "calibrated";
  } else {
    source = "none";
  }
  return cfg;
}

int cmd_tracking(const ExperimentConfig& input, const CommonOptions& opts, bool track_log) {
  const fs::path dir = resolve_output_dir(input);
  ensure_directory(dir);
  std::string source;
  const ExperimentConfig cfg = with_fixed_covariance(input, source);
  if (cfg.fusion.fixed)
    std::printf("fixed covariance (%s): sigma_x2 = %.6g, sigma_y2 = %.6g\n", source.c_str(), cfg.fusion.fixed->sigma_x2,
                cfg.fusion.fixed->sigma_y2);

  std::ofstream log;
  if (track_log) {
    log.open(dir / "track_log.csv", std::ios::binary | std::ios::trunc);
    if (!log) throw IoError("cannot open '" + (dir / "track_log.csv").string() + "' for writing");
    log << comment_header(cfg) << track_log_header();
  }
  std::string buffer;
  const Stopwatch sw;
  const TrackingReport r = evaluate_tracking(cfg.campaign(), cfg.scenario, cfg.master_seed,
                                             [&](std::size_t track, std::size_t trial, const TrackReport& rep) {
                                               if (!track_log) return;
                                               buffer.clear();
                                               append_track_log(buffer, track, trial, rep);
                                               log << buffer;
                                               if (!log) throw IoError("failed writing track_log.csv");
                                             });
  if (track_log) log.close();

  std::printf("%-24s %10s %10s %10s %12s %8s %8s %7s\n", "fusion", "pos[m]", "vel[m/s]", "raw[m]", "improvement",
              "gated", "resets", "time[s]");
  std::printf("%-24s %10.4f %10.4f %10.4f %11.1f%% %8zu %8zu %7.1f\n", cfg.fusion.label().c_str(), r.position.rmse,
              r.velocity.rmse, r.raw_position.rmse, 100.0 * r.improvement(), r.gated, r.resets, sw.seconds());

  Json summary = summary_header(cfg, "tracking");
  summary["fixed_covariance_source"] = source;
  summary["tracking"] = to_json(r);
  write_file(dir / "summary.json", summary.dump(2) + "\n");
  std::string cdfs = comment_header(cfg) + cdf_header();
  append_cdf(cdfs, r.position.cdf, "position", opts.cdf_points);
  append_cdf(cdfs, r.velocity.cdf, "velocity", opts.cdf_points);
  append_cdf(cdfs, r.raw_position.cdf, "raw_position", opts.cdf_points);
  write_file(dir / "errors_cdf.csv", cdfs);
  std::printf("wrote %s\n", dir.string().c_str());
  return kExitOk;
}

int cmd_trajectory(const ExperimentConfig& cfg) {
  const fs::path dir = resolve_output_dir(cfg);
  ensure_directory(dir);
  const TrackingCampaign campaign = cfg.campaign();
  std::string csv = comment_header(cfg) + trajectory_header();
  Json summary = summary_header(cfg, "trajectory");
  summary["tracks"] = Json::array();
  for (std::size_t track = 0; track < cfg.tracks; ++track) {
    const Trajectory traj = campaign_trajectory(campaign, cfg.master_seed, track);
    double length = 0.0;
    for (std::size_t k = 1; k < traj.samples.size(); ++k) length += distance(traj.samples[k].p, traj.samples[k - 1].p);
    append_trajectory(csv, traj, track);
    summary["tracks"].push_back({{"track", track},
                                 {"samples", traj.samples.size()},
                                 {"length", length},
                                 {"period", traj.speed.period},
                                 {"phase", traj.speed.phase},
                                 {"waypoints", traj.waypoints.size()}});
  }
  write_file(dir / "trajectories.csv", csv);
  write_file(dir / "summary.json", summary.dump(2) + "\n");
  std::printf("%zu trajectories, wrote %s\n", cfg.tracks, dir.string().c_str());
  return kExitOk;
}

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("-c,--config", o.config_file, "Config file ([section] key = value)");
  cmd->add_option("-s,--set", o.overrides, "Override a config key: section.key=value (repeatable)");
  cmd->add_option("--preset", o.preset, "Default scale: desk or paper")->check(CLI::IsMember({"desk", "paper"}));
  cmd->add_option("--seed", o.seed, "Master seed");
  cmd->add_option("-j,--workers", o.workers, "Parallel workers (0 = all cores)");
  cmd->add_option("-o,--output-dir", o.output_dir, std::string("Output directory (default: $") + kOutputDirEnv + ")");
  cmd->add_option("--cdf-points", o.cdf_points, "Maximum rows per CDF series")->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bistatic positioning and tracking experiments"};
  app.require_subcommand(1);
  CommonOptions opts;
  bool configured_only = false;
  bool no_track_log = false;
  bool print_config = false;

  auto* positioning = app.add_subcommand("positioning", "Grid positioning RMSE table, heatmap and CDFs");
  add_common(positioning, opts);
  positioning->add_flag("--configured-only", configured_only, "Evaluate only the [fusion] estimator and kinds");
  auto* calibrate = app.add_subcommand("calibrate", "Fixed covariance from the positioning grid");
  add_common(calibrate, opts);
  auto* tracking = app.add_subcommand("tracking", "Tracking campaign with the [fusion] settings");
  add_common(tracking, opts);
  tracking->add_flag("--no-track-log", no_track_log, "Skip the per-tick track_log.csv");
  auto* trajectory = app.add_subcommand("trajectory", "Export the campaign trajectories");
  add_common(trajectory, opts);
  for (auto* cmd : {positioning, calibrate, tracking, trajectory})
    cmd->add_flag("--print-config", print_config, "Print the resolved config and exit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    const ExperimentConfig cfg = load_config(opts);
    if (print_config) {
      std::printf("%s", serialize(cfg).c_str());
      return kExitOk;
    }
    if (positioning->parsed()) return cmd_positioning(cfg, opts, configured_only);
    if (calibrate->parsed()) return cmd_calibrate(cfg);
    if (tracking->parsed()) return cmd_tracking(cfg, opts, !no_track_log);
    if (trajectory->parsed()) return cmd_trajectory(cfg);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const IoError& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return kExitIo;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitFailure;
  }
  return kExitFailure;
}
