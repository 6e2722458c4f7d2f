#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "regimescan/baselines.hpp"
#include "regimescan/oracle.hpp"
#include "regimescan/refine.hpp"
#include "regimescan/screen.hpp"

namespace regimescan {

struct RunConfig {
  std::string system = "malthus";
  std::string dataset_path;  // empty: simulate from the sim.* settings
  std::string out_dir = "out";
  std::uint64_t seed = 1;
  int parallelism = 1;
  bool with_certificates = true;
  bool with_baselines = true;

  double t0 = 0.0, T = 100.0;
  std::vector<double> breakpoints;
  std::vector<Vec> regimes;
  Vec x0;
  double dt = 0.01, dt_obs = 0.1;
  double noise_sigma = 0.0;

  double window_len = 2.0, step = 1.0;
  double gamma = 3.0, epsilon = 1e-12;
  TrainConfig screen_cfg;
  TrainConfig refine_cfg;

  RegimeSchedule schedule() const;
};

// Published benchmark settings: "<system>-paper" keeps the full training
// budget (30000 iterations, widths 64/80); "<system>-desk" cuts it to
// 2000/3000 iterations at width 32 so an end-to-end run takes minutes.
RunConfig preset(const std::string& name);
const std::vector<std::string>& preset_names();

// Flat "key = value" text, '#' comments. Unknown keys are rejected.
RunConfig parse_config_text(const std::string& text);
RunConfig load_config_file(const std::string& path);
void apply_override(RunConfig& config, const std::string& assignment);  // "key=value"
std::string serialize_config(const RunConfig& config);

struct PipelineResult {
  RunConfig config;
  TrajectoryDataset dataset;
  Trajectory traj;
  ScreenReport screen;
  std::vector<RefineResult> refinements;
  std::vector<FloorCertificate> certificates;
  nlohmann::json report;
};

// simulate (or load) -> screen -> refine each candidate cluster -> optional
// certificates and baselines; writes report.json, CSV tables, and SVG plots
// into config.out_dir. Deterministic in (config, seed): reruns are
// byte-identical.
PipelineResult run_pipeline(const RunConfig& config);

// theta initialization for a cluster: the fitted parameters of the nearest
// windows entirely left/right of the candidate interval.
std::pair<Vec, Vec> neighbor_thetas(const ScreenReport& report, const CandidateCluster& cluster);

nlohmann::json baselines_from_thetas(const std::vector<Vec>& theta_series, double t_start,
                                     double step, int gmm_components, int max_peaks,
                                     std::uint64_t seed);

struct TimingReport {
  int task_count = 0;
  int workers = 0;
  double t_serial = 0.0;  // measured at P=1 (or estimated as K * mean task time)
  bool serial_estimated = false;
  double t_parallel = 0.0;
  double speedup = 0.0;
  double efficiency = 0.0;
  double model_t_parallel = 0.0;  // ceil(K/P) * t_sub + c2, fitted at P=1
};

// Fits `task_count` copies of the plan's first window under each worker count
// and compares measured wall-clock against the ceil(K/P) cost model.
std::vector<TimingReport> bench_parallel(const RunConfig& config,
                                         const std::vector<int>& worker_counts,
                                         int task_count = 32);

nlohmann::json timing_to_json(const std::vector<TimingReport>& reports);

std::string trajectory_svg(const TrajectoryDataset& ds, const std::vector<double>& tau_hats);
std::string params_svg(const ScreenReport& screen, const std::vector<RefineResult>& refs);

}  // namespace regimescan
