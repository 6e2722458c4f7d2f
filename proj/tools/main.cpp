#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "regimescan/errors.hpp"
#include "regimescan/pipeline.hpp"
#include "regimescan/rng.hpp"
#include "regimescan/simulate.hpp"
#include "regimescan/svg.hpp"

namespace {

using namespace regimescan;

struct CommonOpts {
  std::string preset_name;
  std::string config_path;
  std::vector<std::string> sets;
  std::string out_dir;
  std::string dataset;
  std::uint64_t seed = 0;
  bool seed_given = false;
  int parallelism = 0;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  auto* p = cmd->add_option("--preset", opts.preset_name,
                            "named benchmark setting, e.g. malthus-desk");
  auto* c = cmd->add_option("--config", opts.config_path, "key = value config file");
  p->excludes(c);
  cmd->add_option("--set", opts.sets, "override a config key, key=value (repeatable)");
  cmd->add_option("--out", opts.out_dir, "output directory");
  cmd->add_option("--dataset", opts.dataset, "load observations from this CSV instead of simulating");
  cmd->add_option("--seed", opts.seed, "global seed")->each([&](const std::string&) {
    opts.seed_given = true;
  });
  cmd->add_option("-j,--parallelism", opts.parallelism, "worker threads for window fits");
}

RunConfig build_config(const CommonOpts& opts) {
  RunConfig config;
  if (!opts.preset_name.empty())
    config = preset(opts.preset_name);
  else if (!opts.config_path.empty())
    config = load_config_file(opts.config_path);
  for (const std::string& s : opts.sets) apply_override(config, s);
  if (!opts.out_dir.empty()) config.out_dir = opts.out_dir;
  if (!opts.dataset.empty()) config.dataset_path = opts.dataset;
  if (opts.seed_given) config.seed = opts.seed;
  if (opts.parallelism > 0) config.parallelism = opts.parallelism;
  return config;
}

struct SimData {
  Trajectory traj;
  TrajectoryDataset ds;
};

SimData simulate_or_load(const RunConfig& config, const SystemSpec& sys) {
  SimData out;
  if (!config.dataset_path.empty()) {
    out.ds = read_dataset(config.dataset_path);
    if (out.ds.system != sys.id)
      throw ConfigError("dataset was generated for " + system_spec(out.ds.system).name +
                        ", config says " + sys.name);
    out.traj = integrate(sys, out.ds.schedule, out.ds.x0, out.ds.dt);
  } else {
    out.traj = integrate(sys, config.schedule(), config.x0, config.dt);
    out.ds = sample_observations(out.traj, config.dt_obs, config.noise_sigma, config.seed);
  }
  return out;
}

void write_json(const std::string& path, const nlohmann::json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

int cmd_simulate(const RunConfig& config) {
  const SystemSpec sys = system_by_name(config.system);
  const Trajectory traj = integrate(sys, config.schedule(), config.x0, config.dt);
  const TrajectoryDataset ds =
      sample_observations(traj, config.dt_obs, config.noise_sigma, config.seed);
  std::filesystem::create_directories(config.out_dir);
  const std::string path = config.out_dir + "/dataset.csv";
  write_dataset(path, ds);
  std::cout << sys.name << ": " << ds.obs_times.size() << " observations on ["
            << ds.schedule.t0 << ", " << ds.schedule.T << "] -> " << path << "\n";
  return 0;
}

int cmd_screen(const RunConfig& config) {
  const SystemSpec sys = system_by_name(config.system);
  const SimData sim = simulate_or_load(config, sys);
  const WindowPlan plan =
      build_windows(sim.ds.schedule.t0, sim.ds.schedule.T, config.window_len, config.step);
  const ScreenReport report = run_screen(sim.ds, sys, plan, config.screen_cfg, config.gamma,
                                         config.parallelism, config.seed, config.epsilon);
  std::filesystem::create_directories(config.out_dir);
  nlohmann::json j;
  j["schema"] = 1;
  j["system"] = sys.name;
  j["config_text"] = serialize_config(config);
  j["screen"] = screen_report_to_json(report);
  write_json(config.out_dir + "/screen.json", j);
  write_text_file(config.out_dir + "/screen.csv", screen_report_csv(report));
  write_text_file(config.out_dir + "/screen.svg", screen_scores_svg(report));
  if (report.clusters.empty()) {
    std::cout << "no change point detected (" << plan.size() << " windows)\n";
    return 4;
  }
  for (size_t i = 0; i < report.clusters.size(); ++i) {
    const auto& c = report.clusters[i];
    std::cout << "cluster " << i << ": windows";
    for (int m : c.members) std::cout << " " << m;
    std::cout << ", candidate interval [" << c.lo << ", " << c.hi << "]\n";
  }
  return 0;
}

int cmd_run(const RunConfig& config, bool refine_only) {
  RunConfig effective = config;
  if (refine_only) {
    effective.with_certificates = false;
    effective.with_baselines = false;
  }
  const PipelineResult res = run_pipeline(effective);
  if (res.screen.clusters.empty()) {
    std::cout << "no change point detected\n";
  }
  for (size_t i = 0; i < res.refinements.size(); ++i) {
    const auto& r = res.refinements[i];
    std::cout << "cluster " << i << ": tau_hat = " << r.tau_hat << " on [" << r.t_lo << ", "
              << r.t_hi << "]\n  theta_minus = [";
    for (Eigen::Index k = 0; k < r.theta_minus.size(); ++k)
      std::cout << (k ? ", " : "") << r.theta_minus[k];
    std::cout << "]\n  theta_plus  = [";
    for (Eigen::Index k = 0; k < r.theta_plus.size(); ++k)
      std::cout << (k ? ", " : "") << r.theta_plus[k];
    std::cout << "]\n";
  }
  std::cout << "report: " << effective.out_dir << "/report.json\n";
  return 0;
}

int cmd_certify(const RunConfig& config) {
  const SystemSpec sys = system_by_name(config.system);
  const SimData sim = simulate_or_load(config, sys);
  const WindowPlan plan =
      build_windows(sim.ds.schedule.t0, sim.ds.schedule.T, config.window_len, config.step);
  std::filesystem::create_directories(config.out_dir);

  nlohmann::json j;
  j["schema"] = 1;
  j["system"] = sys.name;
  j["config_text"] = serialize_config(config);
  j["certificates"] = nlohmann::json::array();
  std::string csv = "k,a,b,crossing,floor,bound,margin\n";
  int crossing = 0, failed = 0;
  for (int k = 0; k < plan.size(); ++k) {
    const auto& [a, b] = plan.windows[static_cast<size_t>(k)];
    const FloorCertificate cert = certify_window(a, b, sim.traj, sys);
    crossing += cert.crossing ? 1 : 0;
    failed += cert.pass ? 0 : 1;
    nlohmann::json jc;
    jc["window"] = {cert.a, cert.b};
    jc["crossing"] = cert.crossing;
    jc["floor"] = cert.floor;
    jc["bound"] = cert.bound;
    jc["simplified_bound"] = cert.simplified_bound;
    jc["alpha"] = cert.alpha;
    jc["margin"] = cert.margin;
    jc["pass"] = cert.pass;
    if (cert.crossing) jc["tau"] = cert.tau;
    j["certificates"].push_back(jc);
    char line[256];
    std::snprintf(line, sizeof(line), "%d,%.17g,%.17g,%d,%.17g,%.17g,%.17g\n", k, a, b,
                  cert.crossing ? 1 : 0, cert.floor, cert.bound, cert.margin);
    csv += line;
  }
  j["floors"] = oracle_screen(sim.traj, sys, plan);
  write_json(config.out_dir + "/certify.json", j);
  write_text_file(config.out_dir + "/certificates.csv", csv);
  std::cout << plan.size() << " windows, " << crossing << " crossing, " << failed
            << " certificate failures -> " << config.out_dir << "/certificates.csv\n";
  return 0;
}

int cmd_baseline(const RunConfig& config, const std::string& source) {
  const SystemSpec sys = system_by_name(config.system);
  const SimData sim = simulate_or_load(config, sys);
  const WindowPlan plan =
      build_windows(sim.ds.schedule.t0, sim.ds.schedule.T, config.window_len, config.step);

  std::vector<Vec> thetas;
  if (source == "oracle") {
    for (const auto& [a, b] : plan.windows) thetas.push_back(wls_theta(a, b, sim.traj, sys));
  } else if (source == "screen") {
    const ScreenReport report = run_screen(sim.ds, sys, plan, config.screen_cfg, config.gamma,
                                           config.parallelism, config.seed, config.epsilon);
    for (const auto& fit : report.fits) thetas.push_back(fit.theta_hat);
  } else {
    throw ConfigError("baseline source must be 'oracle' or 'screen'");
  }

  std::set<std::vector<double>> distinct;
  for (const Vec& r : sim.ds.schedule.regimes)
    distinct.insert(std::vector<double>(r.data(), r.data() + r.size()));
  const int K_mix = distinct.empty() ? 3 : static_cast<int>(distinct.size());
  const int max_peaks = static_cast<int>(sim.ds.schedule.breakpoints.size());
  const double center0 = 0.5 * (plan.windows.front().first + plan.windows.front().second);

  nlohmann::json j;
  j["schema"] = 1;
  j["system"] = sys.name;
  j["theta_source"] = source;
  j["config_text"] = serialize_config(config);
  j["baselines"] = baselines_from_thetas(thetas, center0, plan.step, K_mix,
                                         max_peaks > 0 ? max_peaks : -1,
                                         mix_seed(config.seed, 0xba5eULL));
  std::filesystem::create_directories(config.out_dir);
  write_json(config.out_dir + "/baseline.json", j);
  std::cout << "segmentation breakpoints at t =";
  for (const auto& t : j["baselines"]["pelt"]["breakpoint_times"]) std::cout << " " << t;
  std::cout << "\nmixture peaks at t =";
  for (const auto& t : j["baselines"]["gmm"]["peak_times"]) std::cout << " " << t;
  std::cout << "\n-> " << config.out_dir << "/baseline.json\n";
  return 0;
}

int cmd_bench(const RunConfig& config, std::vector<int> workers, int tasks) {
  if (workers.empty()) workers = {1, 2, 4, 8};
  const std::vector<TimingReport> reports = bench_parallel(config, workers, tasks);
  std::filesystem::create_directories(config.out_dir);
  nlohmann::json j;
  j["schema"] = 1;
  j["system"] = config.system;
  j["timings"] = timing_to_json(reports);
  write_json(config.out_dir + "/bench.json", j);
  std::printf("%4s %6s %10s %10s %10s %10s\n", "P", "K", "T_p[s]", "speedup", "eff", "model[s]");
  for (const auto& r : reports)
    std::printf("%4d %6d %10.3f %10.2f %10.2f %10.3f\n", r.workers, r.task_count, r.t_parallel,
                r.speedup, r.efficiency, r.model_t_parallel);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"change-point detection and parameter estimation for regime-switching ODEs"};
  app.require_subcommand(1);

  CommonOpts opts;
  std::string baseline_source = "oracle";
  std::vector<int> bench_workers;
  int bench_tasks = 32;

  CLI::App* simulate_cmd = app.add_subcommand("simulate", "integrate a system and write observations");
  CLI::App* screen_cmd = app.add_subcommand("screen", "stage I: window fits and candidate intervals");
  CLI::App* refine_cmd = app.add_subcommand("refine", "stage I + II: refine each candidate interval");
  CLI::App* run_cmd = app.add_subcommand("run", "full pipeline with certificates and baselines");
  CLI::App* certify_cmd = app.add_subcommand("certify", "exact residual floors and lower bounds");
  CLI::App* baseline_cmd = app.add_subcommand("baseline", "segmentation and mixture detectors");
  CLI::App* bench_cmd = app.add_subcommand("bench", "parallel window-fit scaling measurement");
  for (CLI::App* cmd : {simulate_cmd, screen_cmd, refine_cmd, run_cmd, certify_cmd, baseline_cmd,
                        bench_cmd})
    add_common(cmd, opts);
  baseline_cmd->add_option("--source", baseline_source,
                           "theta sequence source: oracle (exact) or screen (trained)");
  bench_cmd->add_option("--workers", bench_workers, "worker counts to measure")->delimiter(',');
  bench_cmd->add_option("--tasks", bench_tasks, "number of identical window fits");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const RunConfig config = build_config(opts);
    if (simulate_cmd->parsed()) return cmd_simulate(config);
    if (screen_cmd->parsed()) return cmd_screen(config);
    if (refine_cmd->parsed()) return cmd_run(config, true);
    if (run_cmd->parsed()) return cmd_run(config, false);
    if (certify_cmd->parsed()) return cmd_certify(config);
    if (baseline_cmd->parsed()) return cmd_baseline(config, baseline_source);
    if (bench_cmd->parsed()) return cmd_bench(config, bench_workers, bench_tasks);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const TrainingError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
