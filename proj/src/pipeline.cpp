#include "regimescan/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <thread>

#include "regimescan/errors.hpp"
#include "regimescan/rng.hpp"
#include "regimescan/simulate.hpp"
#include "regimescan/svg.hpp"

namespace regimescan {

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double parse_num(const std::string& s, const std::string& key) {
  try {
    size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ParseError("bad numeric value for " + key + ": '" + s + "'");
  }
}

long parse_int(const std::string& s, const std::string& key) {
  try {
    size_t used = 0;
    const long v = std::stol(s, &used);
    if (used != s.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ParseError("bad integer value for " + key + ": '" + s + "'");
  }
}

std::uint64_t parse_u64(const std::string& s, const std::string& key) {
  try {
    if (s.empty() || s[0] == '-') throw std::invalid_argument("negative");
    size_t used = 0;
    const unsigned long long v = std::stoull(s, &used);
    if (used != s.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ParseError("bad seed value for " + key + ": '" + s + "'");
  }
}

bool parse_bool(const std::string& s, const std::string& key) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw ParseError("bad boolean value for " + key + ": '" + s + "'");
}

std::vector<double> parse_num_list(const std::string& s, const std::string& key) {
  std::vector<double> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(parse_num(item, key));
  }
  return out;
}

std::vector<Vec> parse_vec_list(const std::string& s, const std::string& key) {
  std::vector<Vec> out;
  std::string group;
  std::istringstream in(s);
  while (std::getline(in, group, ';')) {
    group = trim(group);
    if (group.empty()) continue;
    const std::vector<double> nums = parse_num_list(group, key);
    out.push_back(Eigen::Map<const Vec>(nums.data(), static_cast<Eigen::Index>(nums.size())));
  }
  return out;
}

std::string join_nums(const std::vector<double>& v) {
  std::string out;
  for (size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + fmt17(v[i]);
  return out;
}

std::string join_vec(const Vec& v) {
  std::string out;
  for (Eigen::Index i = 0; i < v.size(); ++i) out += (i ? "," : "") + fmt17(v[i]);
  return out;
}

std::string join_vecs(const std::vector<Vec>& vs) {
  std::string out;
  for (size_t i = 0; i < vs.size(); ++i) out += (i ? "; " : "") + join_vec(vs[i]);
  return out;
}

void apply_kv(RunConfig& c, const std::string& key, const std::string& value) {
  if (key == "system")
    c.system = value;
  else if (key == "dataset")
    c.dataset_path = value;
  else if (key == "out_dir")
    c.out_dir = value;
  else if (key == "seed")
    c.seed = parse_u64(value, key);
  else if (key == "parallelism")
    c.parallelism = static_cast<int>(parse_int(value, key));
  else if (key == "with_certificates")
    c.with_certificates = parse_bool(value, key);
  else if (key == "with_baselines")
    c.with_baselines = parse_bool(value, key);
  else if (key == "sim.t0")
    c.t0 = parse_num(value, key);
  else if (key == "sim.T")
    c.T = parse_num(value, key);
  else if (key == "sim.breakpoints")
    c.breakpoints = parse_num_list(value, key);
  else if (key == "sim.regimes")
    c.regimes = parse_vec_list(value, key);
  else if (key == "sim.x0") {
    const std::vector<double> nums = parse_num_list(value, key);
    c.x0 = Eigen::Map<const Vec>(nums.data(), static_cast<Eigen::Index>(nums.size()));
  } else if (key == "sim.dt")
    c.dt = parse_num(value, key);
  else if (key == "sim.dt_obs")
    c.dt_obs = parse_num(value, key);
  else if (key == "sim.noise_sigma")
    c.noise_sigma = parse_num(value, key);
  else if (key == "screen.window_len")
    c.window_len = parse_num(value, key);
  else if (key == "screen.step")
    c.step = parse_num(value, key);
  else if (key == "screen.gamma")
    c.gamma = parse_num(value, key);
  else if (key == "screen.epsilon")
    c.epsilon = parse_num(value, key);
  else if (key == "screen.iterations")
    c.screen_cfg.iterations = static_cast<int>(parse_int(value, key));
  else if (key == "screen.lr_net")
    c.screen_cfg.lr_net = parse_num(value, key);
  else if (key == "screen.lr_theta")
    c.screen_cfg.lr_theta = parse_num(value, key);
  else if (key == "screen.lambda")
    c.screen_cfg.lambda = parse_num(value, key);
  else if (key == "screen.reg_lambda")
    c.screen_cfg.reg_lambda = parse_num(value, key);
  else if (key == "screen.collocation")
    c.screen_cfg.collocation_count = static_cast<int>(parse_int(value, key));
  else if (key == "screen.median_window")
    c.screen_cfg.median_window = static_cast<int>(parse_int(value, key));
  else if (key == "screen.hidden_layers")
    c.screen_cfg.mlp.hidden_layers = static_cast<int>(parse_int(value, key));
  else if (key == "screen.width")
    c.screen_cfg.mlp.width = static_cast<int>(parse_int(value, key));
  else if (key == "refine.iterations")
    c.refine_cfg.iterations = static_cast<int>(parse_int(value, key));
  else if (key == "refine.lr_net")
    c.refine_cfg.lr_net = parse_num(value, key);
  else if (key == "refine.lr_theta")
    c.refine_cfg.lr_theta = parse_num(value, key);
  else if (key == "refine.lr_eta")
    c.refine_cfg.lr_eta = parse_num(value, key);
  else if (key == "refine.lambda")
    c.refine_cfg.lambda = parse_num(value, key);
  else if (key == "refine.reg_lambda")
    c.refine_cfg.reg_lambda = parse_num(value, key);
  else if (key == "refine.collocation")
    c.refine_cfg.collocation_count = static_cast<int>(parse_int(value, key));
  else if (key == "refine.median_window")
    c.refine_cfg.median_window = static_cast<int>(parse_int(value, key));
  else if (key == "refine.hidden_layers")
    c.refine_cfg.mlp.hidden_layers = static_cast<int>(parse_int(value, key));
  else if (key == "refine.width")
    c.refine_cfg.mlp.width = static_cast<int>(parse_int(value, key));
  else
    throw ParseError("unknown config key: " + key);
}

template <typename F>
auto stage(const char* name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ParseError& e) {
    throw ParseError(std::string(name) + ": " + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError(std::string(name) + ": " + e.what());
  } catch (const IdentifiabilityError& e) {
    throw IdentifiabilityError(std::string(name) + ": " + e.what());
  } catch (const IntegrationError& e) {
    throw IntegrationError(std::string(name) + ": " + e.what());
  } catch (const TrainingError& e) {
    throw TrainingError(std::string(name) + ": " + e.what());
  }
}

}  // namespace

RegimeSchedule RunConfig::schedule() const {
  RegimeSchedule s;
  s.t0 = t0;
  s.T = T;
  s.breakpoints = breakpoints;
  s.regimes = regimes;
  return s;
}

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names = {
      "malthus-paper",   "malthus-desk",   "logistic-paper",        "logistic-desk",
      "vanderpol-paper", "vanderpol-desk", "lotka_volterra-paper",  "lotka_volterra-desk",
      "lorenz-paper",    "lorenz-desk"};
  return names;
}

RunConfig preset(const std::string& name) {
  const auto dash = name.rfind('-');
  if (dash == std::string::npos) throw ConfigError("unknown preset: " + name);
  const std::string system = name.substr(0, dash);
  const std::string mode = name.substr(dash + 1);
  if (mode != "paper" && mode != "desk") throw ConfigError("unknown preset: " + name);

  RunConfig c;
  c.system = system;
  c.out_dir = "out/" + name;
  auto vec = [](std::initializer_list<double> xs) {
    Vec v(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) v[i++] = x;
    return v;
  };

  if (system == "malthus") {
    c.breakpoints = {40.0};
    c.regimes = {vec({0.1}), vec({0.05})};
    c.x0 = vec({1.0});
  } else if (system == "logistic") {
    c.breakpoints = {60.0};
    c.regimes = {vec({0.1}), vec({0.05})};
    c.x0 = vec({10.0});
  } else if (system == "vanderpol") {
    c.breakpoints = {40.0, 80.0};
    c.regimes = {vec({1.0}), vec({0.1}), vec({0.5})};
    c.x0 = vec({2.0, 0.0});
  } else if (system == "lotka_volterra") {
    c.breakpoints = {20.0, 40.0, 60.0, 80.0};
    c.regimes = {vec({2, 1, 2, 1}), vec({4, 2, 3, 4}), vec({3, 4, 1, 2}), vec({4, 2, 3, 4}),
                 vec({2, 1, 2, 1})};
    c.x0 = vec({1.0, 1.0});
  } else if (system == "lorenz") {
    c.T = 20.0;
    c.dt = 0.001;
    c.dt_obs = 0.01;
    c.window_len = 0.2;
    c.step = 0.1;
    c.breakpoints = {8.0, 16.0};
    c.regimes = {vec({10.0, 28.0, 8.0 / 3.0}), vec({12.0, 16.0, 10.0 / 3.0}),
                 vec({14.0, 20.0, 3.0})};
    c.x0 = vec({1.0, 1.0, 1.0});
    c.screen_cfg.collocation_count = 40;
    c.refine_cfg.collocation_count = 40;
  } else {
    throw ConfigError("unknown preset: " + name);
  }

  c.screen_cfg.iterations = 30000;
  c.screen_cfg.mlp.width = 64;
  c.refine_cfg.iterations = 30000;
  c.refine_cfg.mlp.width = 80;

  if (mode == "desk") {
    c.screen_cfg.iterations = 2000;
    c.refine_cfg.iterations = 3000;
    c.screen_cfg.mlp.width = 32;
    c.refine_cfg.mlp.width = 32;
    // Large parameter values need a faster theta walk at the short budget.
    if (system == "lotka_volterra") c.screen_cfg.lr_theta = 5e-3;
    if (system == "lorenz") c.screen_cfg.lr_theta = 2e-2;
  }
  return c;
}

RunConfig parse_config_text(const std::string& text) {
  RunConfig c;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  std::optional<double> partition, delta;
  bool explicit_len = false, explicit_step = false;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ParseError("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      if (key == "screen.partition") {
        partition = parse_num(value, key);
        continue;
      }
      if (key == "screen.delta") {
        delta = parse_num(value, key);
        continue;
      }
      if (key == "screen.window_len") explicit_len = true;
      if (key == "screen.step") explicit_step = true;
      apply_kv(c, key, value);
    } catch (const ParseError& e) {
      throw ParseError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (partition.has_value() || delta.has_value()) {
    if (!(partition.has_value() && delta.has_value()))
      throw ParseError("screen.partition and screen.delta must be given together");
    if (explicit_len || explicit_step)
      throw ParseError("give either screen.window_len/step or screen.partition/delta, not both");
    c.step = *partition;
    c.window_len = *partition + 2.0 * *delta;
  }
  return c;
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_config_text(buf.str());
  } catch (const ParseError& e) {
    throw ParseError(path + ":" + e.what());
  }
}

void apply_override(RunConfig& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos)
    throw ParseError("override must look like key=value, got '" + assignment + "'");
  const std::string key = trim(assignment.substr(0, eq));
  if (key == "screen.partition" || key == "screen.delta")
    throw ParseError(key + " is only accepted in config files (it pairs with its twin key)");
  apply_kv(config, key, trim(assignment.substr(eq + 1)));
}

std::string serialize_config(const RunConfig& c) {
  std::string out;
  auto kv = [&out](const std::string& k, const std::string& v) { out += k + " = " + v + "\n"; };
  kv("system", c.system);
  if (!c.dataset_path.empty()) kv("dataset", c.dataset_path);
  kv("out_dir", c.out_dir);
  kv("seed", std::to_string(c.seed));
  kv("parallelism", std::to_string(c.parallelism));
  kv("with_certificates", c.with_certificates ? "true" : "false");
  kv("with_baselines", c.with_baselines ? "true" : "false");
  kv("sim.t0", fmt17(c.t0));
  kv("sim.T", fmt17(c.T));
  kv("sim.breakpoints", join_nums(c.breakpoints));
  kv("sim.regimes", join_vecs(c.regimes));
  kv("sim.x0", join_vec(c.x0));
  kv("sim.dt", fmt17(c.dt));
  kv("sim.dt_obs", fmt17(c.dt_obs));
  kv("sim.noise_sigma", fmt17(c.noise_sigma));
  kv("screen.window_len", fmt17(c.window_len));
  kv("screen.step", fmt17(c.step));
  kv("screen.gamma", fmt17(c.gamma));
  kv("screen.epsilon", fmt17(c.epsilon));
  kv("screen.iterations", std::to_string(c.screen_cfg.iterations));
  kv("screen.lr_net", fmt17(c.screen_cfg.lr_net));
  kv("screen.lr_theta", fmt17(c.screen_cfg.lr_theta));
  kv("screen.lambda", fmt17(c.screen_cfg.lambda));
  kv("screen.reg_lambda", fmt17(c.screen_cfg.reg_lambda));
  kv("screen.collocation", std::to_string(c.screen_cfg.collocation_count));
  kv("screen.median_window", std::to_string(c.screen_cfg.median_window));
  kv("screen.hidden_layers", std::to_string(c.screen_cfg.mlp.hidden_layers));
  kv("screen.width", std::to_string(c.screen_cfg.mlp.width));
  kv("refine.iterations", std::to_string(c.refine_cfg.iterations));
  kv("refine.lr_net", fmt17(c.refine_cfg.lr_net));
  kv("refine.lr_theta", fmt17(c.refine_cfg.lr_theta));
  kv("refine.lr_eta", fmt17(c.refine_cfg.lr_eta));
  kv("refine.lambda", fmt17(c.refine_cfg.lambda));
  kv("refine.reg_lambda", fmt17(c.refine_cfg.reg_lambda));
  kv("refine.collocation", std::to_string(c.refine_cfg.collocation_count));
  kv("refine.median_window", std::to_string(c.refine_cfg.median_window));
  kv("refine.hidden_layers", std::to_string(c.refine_cfg.mlp.hidden_layers));
  kv("refine.width", std::to_string(c.refine_cfg.mlp.width));
  return out;
}

std::pair<Vec, Vec> neighbor_thetas(const ScreenReport& report,
                                    const CandidateCluster& cluster) {
  const auto& windows = report.plan.windows;
  const int K = report.plan.size();
  const double tol = 1e-9 * (report.plan.T - report.plan.t0);
  int left = -1, right = -1;
  for (int k = 0; k < K; ++k) {
    if (windows[static_cast<size_t>(k)].second <= cluster.lo + tol) left = k;
    if (right < 0 && windows[static_cast<size_t>(k)].first >= cluster.hi - tol) right = k;
  }
  if (left < 0) left = std::max(0, cluster.members.front() - 1);
  if (right < 0) right = std::min(K - 1, cluster.members.back() + 1);
  return {report.fits[static_cast<size_t>(left)].theta_hat,
          report.fits[static_cast<size_t>(right)].theta_hat};
}

nlohmann::json baselines_from_thetas(const std::vector<Vec>& theta_series, double t_start,
                                     double step, int gmm_components, int max_peaks,
                                     std::uint64_t seed) {
  nlohmann::json j;
  const double psi = default_pelt_penalty(theta_series);
  const SegmentationResult seg = pelt_segment(theta_series, psi);
  j["psi"] = psi;
  nlohmann::json jp;
  jp["breakpoint_indices"] = seg.breakpoints;
  std::vector<double> bp_times;
  for (int idx : seg.breakpoints) bp_times.push_back(t_start + step * idx);
  jp["breakpoint_times"] = bp_times;
  jp["total_cost"] = seg.total_cost;
  jp["segment_means"] = nlohmann::json::array();
  for (const Vec& m : seg.segment_means)
    jp["segment_means"].push_back(std::vector<double>(m.data(), m.data() + m.size()));
  j["pelt"] = jp;

  const Eigen::Index d = theta_series.front().size();
  std::vector<Mat> posteriors;
  nlohmann::json jg;
  jg["K"] = gmm_components;
  bool floored = false;
  std::vector<double> logliks;
  for (Eigen::Index i = 0; i < d; ++i) {
    std::vector<double> values;
    values.reserve(theta_series.size());
    for (const Vec& th : theta_series) values.push_back(th[i]);
    Gmm1d g = gmm_em_1d(values, gmm_components, 200, mix_seed(seed, static_cast<std::uint64_t>(i)));
    floored = floored || g.variance_floored;
    logliks.push_back(g.loglik_trace.back());
    posteriors.push_back(g.posteriors);
  }
  const ChangeProbability cp = changepoint_probability(posteriors, t_start, step, max_peaks);
  jg["variance_floored"] = floored;
  jg["final_loglik"] = logliks;
  jg["p"] = std::vector<double>(cp.p.data(), cp.p.data() + cp.p.size());
  jg["peak_times"] = cp.peak_times;
  jg["intervals"] = nlohmann::json::array();
  for (const auto& [lo, hi] : cp.intervals) jg["intervals"].push_back({lo, hi});
  j["gmm"] = jg;
  return j;
}

std::string trajectory_svg(const TrajectoryDataset& ds, const std::vector<double>& tau_hats) {
  const SystemSpec sys = system_spec(ds.system);
  const double t_lo = ds.obs_times.front(), t_hi = ds.obs_times.back();
  const double y_lo = ds.obs_states.minCoeff(), y_hi = ds.obs_states.maxCoeff();
  const double pad = 0.05 * std::max(y_hi - y_lo, 1e-6);
  Plot plot(t_lo, t_hi, y_lo - pad, y_hi + pad, sys.name + " trajectory", "t", "state");
  std::vector<std::pair<std::string, std::string>> legend;
  for (int r = 0; r < sys.state_dim; ++r) {
    const std::string color = Plot::palette()[static_cast<size_t>(r) % Plot::palette().size()];
    std::vector<double> ys(ds.obs_times.size());
    for (size_t i = 0; i < ds.obs_times.size(); ++i)
      ys[i] = ds.obs_states(r, static_cast<Eigen::Index>(i));
    plot.polyline(ds.obs_times, ys, color, 1.2);
    legend.emplace_back("x" + std::to_string(r + 1), color);
  }
  for (double bp : ds.schedule.breakpoints) plot.vline(bp, "#888888", true);
  for (double tau : tau_hats) plot.vline(tau, "#d62728", false);
  plot.legend(legend);
  return plot.finish();
}

std::string params_svg(const ScreenReport& screen, const std::vector<RefineResult>& refs) {
  const int K = screen.plan.size();
  if (K == 0 || screen.fits.empty()) throw ConfigError("params plot needs a screen report");
  const Eigen::Index d = screen.fits.front().theta_hat.size();
  std::vector<double> centers(static_cast<size_t>(K));
  for (int k = 0; k < K; ++k)
    centers[static_cast<size_t>(k)] =
        0.5 * (screen.plan.windows[static_cast<size_t>(k)].first +
               screen.plan.windows[static_cast<size_t>(k)].second);
  double y_lo = 0.0, y_hi = 0.0;
  for (const auto& fit : screen.fits) {
    y_lo = std::min(y_lo, fit.theta_hat.minCoeff());
    y_hi = std::max(y_hi, fit.theta_hat.maxCoeff());
  }
  const double pad = 0.05 * std::max(y_hi - y_lo, 1e-6);
  Plot plot(screen.plan.t0, screen.plan.T, y_lo - pad, y_hi + pad,
            "window parameter estimates", "t", "theta");
  std::vector<std::pair<std::string, std::string>> legend;
  for (Eigen::Index i = 0; i < d; ++i) {
    const std::string color = Plot::palette()[static_cast<size_t>(i) % Plot::palette().size()];
    std::vector<double> ys(static_cast<size_t>(K));
    for (int k = 0; k < K; ++k) ys[static_cast<size_t>(k)] = screen.fits[static_cast<size_t>(k)].theta_hat[i];
    plot.steps(centers, ys, color);
    legend.emplace_back("theta" + std::to_string(i + 1), color);
  }
  for (const auto& r : refs) plot.vline(r.tau_hat, "#d62728", false);
  plot.legend(legend);
  return plot.finish();
}

nlohmann::json timing_to_json(const std::vector<TimingReport>& reports) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : reports) {
    nlohmann::json j;
    j["K"] = r.task_count;
    j["P"] = r.workers;
    j["t_serial"] = r.t_serial;
    j["serial_estimated"] = r.serial_estimated;
    j["t_parallel"] = r.t_parallel;
    j["speedup"] = r.speedup;
    j["efficiency"] = r.efficiency;
    j["model_t_parallel"] = r.model_t_parallel;
    arr.push_back(j);
  }
  return arr;
}

std::vector<TimingReport> bench_parallel(const RunConfig& config,
                                         const std::vector<int>& worker_counts,
                                         int task_count) {
  if (task_count < 1) throw ConfigError("bench needs at least one task");
  const SystemSpec sys = system_by_name(config.system);
  const Trajectory traj = integrate(sys, config.schedule(), config.x0, config.dt);
  const TrajectoryDataset ds =
      sample_observations(traj, config.dt_obs, config.noise_sigma, config.seed);
  const double a = config.t0, b = config.t0 + config.window_len;
  const Vec theta0 = Vec::Zero(sys.param_dim);

  auto run_at = [&](int P) {
    std::atomic<int> next{0};
    std::atomic<bool> failed{false};
    std::vector<double> sink(static_cast<size_t>(task_count), 0.0);
    auto worker = [&]() {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= task_count || failed.load()) return;
        try {
          LocalFit fit = fit_window(ds, a, b, sys, config.screen_cfg, theta0,
                                    mix_seed(config.seed, 5000 + static_cast<std::uint64_t>(i)), i);
          sink[static_cast<size_t>(i)] = fit.terminal_median;
        } catch (...) {
          failed.store(true);
          return;
        }
      }
    };
    const auto start = std::chrono::steady_clock::now();
    std::vector<std::thread> pool;
    for (int i = 0; i < P - 1; ++i) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    const auto end = std::chrono::steady_clock::now();
    if (failed.load()) throw TrainingError("bench task diverged");
    return std::chrono::duration<double>(end - start).count();
  };

  const double t1 = run_at(1);
  const double t_sub = t1 / task_count;
  std::vector<TimingReport> out;
  for (int P : worker_counts) {
    if (P < 1) throw ConfigError("worker count must be >= 1");
    TimingReport r;
    r.task_count = task_count;
    r.workers = P;
    r.t_serial = t1;
    r.serial_estimated = false;
    r.t_parallel = P == 1 ? t1 : run_at(P);
    r.speedup = r.t_serial / r.t_parallel;
    r.efficiency = r.speedup / P;
    r.model_t_parallel = std::ceil(static_cast<double>(task_count) / P) * t_sub;
    out.push_back(r);
  }
  return out;
}

PipelineResult run_pipeline(const RunConfig& config) {
  PipelineResult res;
  res.config = config;
  const SystemSpec sys = system_by_name(config.system);
  std::filesystem::create_directories(config.out_dir);

  stage("simulate", [&] {
    if (!config.dataset_path.empty()) {
      res.dataset = read_dataset(config.dataset_path);
      if (res.dataset.system != sys.id)
        throw ConfigError("dataset was generated for " + system_spec(res.dataset.system).name +
                          ", config says " + sys.name);
      res.traj = integrate(sys, res.dataset.schedule, res.dataset.x0, res.dataset.dt);
    } else {
      res.traj = integrate(sys, config.schedule(), config.x0, config.dt);
      res.dataset = sample_observations(res.traj, config.dt_obs, config.noise_sigma, config.seed);
      write_dataset(config.out_dir + "/dataset.csv", res.dataset);
    }
    return 0;
  });

  const RegimeSchedule& sched = res.dataset.schedule;
  const WindowPlan plan = stage("screen", [&] {
    return build_windows(sched.t0, sched.T, config.window_len, config.step);
  });
  res.screen = stage("screen", [&] {
    return run_screen(res.dataset, sys, plan, config.screen_cfg, config.gamma,
                      config.parallelism, config.seed, config.epsilon);
  });

  stage("refine", [&] {
    for (size_t i = 0; i < res.screen.clusters.size(); ++i) {
      const auto& cluster = res.screen.clusters[i];
      const auto [theta_left, theta_right] = neighbor_thetas(res.screen, cluster);
      res.refinements.push_back(refine(res.dataset, sys, cluster.lo, cluster.hi, theta_left,
                                       theta_right, config.refine_cfg,
                                       mix_seed(config.seed, 1000 + static_cast<std::uint64_t>(i))));
    }
    return 0;
  });

  if (config.with_certificates) {
    stage("certify", [&] {
      for (const auto& [a, b] : plan.windows)
        res.certificates.push_back(certify_window(a, b, res.traj, sys));
      return 0;
    });
  }

  nlohmann::json baselines;
  if (config.with_baselines) {
    baselines = stage("baseline", [&] {
      std::vector<Vec> thetas;
      thetas.reserve(res.screen.fits.size());
      for (const auto& fit : res.screen.fits) thetas.push_back(fit.theta_hat);
      std::set<std::vector<double>> distinct;
      for (const Vec& r : sched.regimes)
        distinct.insert(std::vector<double>(r.data(), r.data() + r.size()));
      const int K_mix = sched.regimes.empty() ? 3 : static_cast<int>(distinct.size());
      const int max_peaks =
          res.screen.clusters.empty() ? -1 : static_cast<int>(res.screen.clusters.size());
      const double center0 = 0.5 * (plan.windows.front().first + plan.windows.front().second);
      return baselines_from_thetas(thetas, center0, plan.step, std::max(1, K_mix), max_peaks,
                                   mix_seed(config.seed, 0xba5eULL));
    });
  }

  stage("report", [&] {
    nlohmann::json report;
    report["schema"] = 1;
    report["system"] = sys.name;
    report["config_text"] = serialize_config(config);
    report["screen"] = screen_report_to_json(res.screen);
    report["refine"] = nlohmann::json::array();
    std::vector<double> tau_hats;
    for (const auto& r : res.refinements) {
      report["refine"].push_back(refine_result_to_json(r, &sched));
      tau_hats.push_back(r.tau_hat);
    }
    if (config.with_certificates) {
      report["certificates"] = nlohmann::json::array();
      std::string cert_csv = "k,a,b,crossing,floor,bound,margin\n";
      for (size_t k = 0; k < res.certificates.size(); ++k) {
        const auto& c = res.certificates[k];
        nlohmann::json jc;
        jc["window"] = {c.a, c.b};
        jc["crossing"] = c.crossing;
        jc["floor"] = c.floor;
        jc["bound"] = c.bound;
        jc["simplified_bound"] = c.simplified_bound;
        jc["alpha"] = c.alpha;
        jc["margin"] = c.margin;
        jc["pass"] = c.pass;
        if (c.crossing) jc["tau"] = c.tau;
        report["certificates"].push_back(jc);
        cert_csv += std::to_string(k) + "," + fmt17(c.a) + "," + fmt17(c.b) + "," +
                    (c.crossing ? "1" : "0") + "," + fmt17(c.floor) + "," + fmt17(c.bound) +
                    "," + fmt17(c.margin) + "\n";
      }
      write_text_file(config.out_dir + "/certificates.csv", cert_csv);
    }
    if (config.with_baselines) report["baselines"] = baselines;
    nlohmann::json summary;
    summary["cluster_count"] = res.screen.clusters.size();
    summary["tau_hat"] = tau_hats;
    summary["true_breakpoints"] = sched.breakpoints;
    report["summary"] = summary;
    res.report = report;

    write_text_file(config.out_dir + "/report.json", res.report.dump(2) + "\n");
    write_text_file(config.out_dir + "/screen.csv", screen_report_csv(res.screen));
    write_text_file(config.out_dir + "/screen.svg", screen_scores_svg(res.screen));
    write_text_file(config.out_dir + "/trajectory.svg", trajectory_svg(res.dataset, tau_hats));
    write_text_file(config.out_dir + "/params.svg", params_svg(res.screen, res.refinements));
    return 0;
  });

  return res;
}

}  // namespace regimescan
