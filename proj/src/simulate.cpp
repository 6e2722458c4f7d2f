#include "regimescan/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "regimescan/errors.hpp"
#include "regimescan/rng.hpp"

namespace regimescan {

using nlohmann::json;

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

json vec_to_json(const Vec& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Vec vec_from_json(const json& a) {
  Vec v(a.size());
  for (size_t i = 0; i < a.size(); ++i) v(static_cast<Eigen::Index>(i)) = a[i].get<double>();
  return v;
}

}  // namespace

Trajectory integrate(const SystemSpec& sys, const RegimeSchedule& schedule, const Vec& x0,
                     double dt) {
  schedule.validate(sys.param_dim);
  if (!(dt > 0)) throw ConfigError("integration step must be positive");
  if (x0.size() != sys.state_dim) throw ConfigError("x0 has wrong dimension");

  const double span = schedule.T - schedule.t0;
  const long n_steps = std::lround(span / dt);
  if (n_steps < 1 || std::abs(n_steps * dt - span) > 1e-9 * span)
    throw ConfigError("dt does not divide the horizon");

  Trajectory traj;
  traj.system = sys.id;
  traj.dt = span / static_cast<double>(n_steps);
  traj.times.resize(static_cast<size_t>(n_steps) + 1);
  for (long i = 0; i <= n_steps; ++i)
    traj.times[static_cast<size_t>(i)] =
        schedule.t0 + span * static_cast<double>(i) / static_cast<double>(n_steps);
  traj.times.back() = schedule.T;

  // Snap breakpoints onto the grid so each RK4 step lives in a single regime.
  RegimeSchedule snapped = schedule;
  for (double& tau : snapped.breakpoints) {
    long j = std::lround((tau - schedule.t0) / span * static_cast<double>(n_steps));
    j = std::clamp(j, 1L, n_steps - 1);
    double snapped_tau = traj.times[static_cast<size_t>(j)];
    if (std::abs(snapped_tau - tau) > 0.5 * traj.dt)
      std::cerr << "warning: breakpoint " << tau << " snapped to grid node " << snapped_tau
                << " (shift exceeds dt/2)\n";
    tau = snapped_tau;
  }
  snapped.validate(sys.param_dim);
  traj.schedule = snapped;

  traj.states.resize(sys.state_dim, static_cast<Eigen::Index>(n_steps) + 1);
  Vec x = x0;
  traj.states.col(0) = x;
  const double h = traj.dt;
  for (long i = 0; i < n_steps; ++i) {
    double t = traj.times[static_cast<size_t>(i)];
    // Right-continuous lookup at the left node: a step starting at a breakpoint
    // already belongs to the new regime, and no step crosses one.
    const Vec theta = theta_at(snapped, t);
    Vec k1 = eval_field(sys, t, x, theta);
    Vec k2 = eval_field(sys, t + 0.5 * h, x + (0.5 * h) * k1, theta);
    Vec k3 = eval_field(sys, t + 0.5 * h, x + (0.5 * h) * k2, theta);
    Vec k4 = eval_field(sys, t + h, x + h * k3, theta);
    x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!x.allFinite())
      throw IntegrationError(sys.name + ": state became non-finite at t = " +
                             std::to_string(traj.times[static_cast<size_t>(i + 1)]));
    traj.states.col(static_cast<Eigen::Index>(i + 1)) = x;
  }
  return traj;
}

TrajectoryDataset sample_observations(const Trajectory& traj, double dt_obs,
                                      double noise_sigma, std::uint64_t seed) {
  if (!(dt_obs > 0)) throw ConfigError("dt_obs must be positive");
  if (noise_sigma < 0) throw ConfigError("noise_sigma must be nonnegative");
  const double ratio = dt_obs / traj.dt;
  const long stride = std::lround(ratio);
  if (stride < 1 || std::abs(ratio - static_cast<double>(stride)) > 1e-9)
    throw ConfigError("dt_obs must be an integer multiple of dt");

  TrajectoryDataset ds;
  ds.system = traj.system;
  ds.schedule = traj.schedule;
  ds.x0 = traj.states.col(0);
  ds.dt = traj.dt;
  ds.dt_obs = dt_obs;
  ds.noise_sigma = noise_sigma;
  ds.seed = seed;

  const long n = static_cast<long>(traj.times.size());
  for (long i = 0; i < n; i += stride) ds.obs_times.push_back(traj.times[static_cast<size_t>(i)]);
  ds.obs_states.resize(traj.states.rows(), static_cast<Eigen::Index>(ds.obs_times.size()));
  Eigen::Index c = 0;
  for (long i = 0; i < n; i += stride) ds.obs_states.col(c++) = traj.states.col(i);

  if (noise_sigma > 0) {
    Rng rng(mix_seed(seed, 0x6f62730aULL));
    for (Eigen::Index j = 0; j < ds.obs_states.cols(); ++j)
      for (Eigen::Index r = 0; r < ds.obs_states.rows(); ++r)
        ds.obs_states(r, j) += noise_sigma * rng.normal();
  }
  return ds;
}

void write_dataset(const std::string& path, const TrajectoryDataset& ds) {
  std::ofstream csv(path);
  if (!csv) throw ConfigError("cannot open " + path + " for writing");
  csv << "t";
  for (Eigen::Index r = 0; r < ds.obs_states.rows(); ++r) csv << ",x" << (r + 1);
  csv << "\n";
  for (size_t j = 0; j < ds.obs_times.size(); ++j) {
    csv << fmt17(ds.obs_times[j]);
    for (Eigen::Index r = 0; r < ds.obs_states.rows(); ++r)
      csv << "," << fmt17(ds.obs_states(r, static_cast<Eigen::Index>(j)));
    csv << "\n";
  }

  json side;
  side["schema"] = 1;
  side["system"] = system_spec(ds.system).name;
  side["t0"] = ds.schedule.t0;
  side["T"] = ds.schedule.T;
  side["breakpoints"] = ds.schedule.breakpoints;
  json regs = json::array();
  for (const Vec& r : ds.schedule.regimes) regs.push_back(vec_to_json(r));
  side["regimes"] = regs;
  side["x0"] = vec_to_json(ds.x0);
  side["dt"] = ds.dt;
  side["dt_obs"] = ds.dt_obs;
  side["noise_sigma"] = ds.noise_sigma;
  side["seed"] = ds.seed;
  std::ofstream sj(path + ".json");
  if (!sj) throw ConfigError("cannot open " + path + ".json for writing");
  sj << side.dump(2) << "\n";
}

TrajectoryDataset read_dataset(const std::string& path) {
  std::ifstream sj(path + ".json");
  if (!sj) throw ParseError("missing dataset sidecar " + path + ".json");
  json side;
  try {
    sj >> side;
  } catch (const json::exception& e) {
    throw ParseError(path + ".json: " + e.what());
  }

  TrajectoryDataset ds;
  ds.system = system_by_name(side.at("system").get<std::string>()).id;
  ds.schedule.t0 = side.at("t0").get<double>();
  ds.schedule.T = side.at("T").get<double>();
  ds.schedule.breakpoints = side.at("breakpoints").get<std::vector<double>>();
  for (const auto& r : side.at("regimes")) ds.schedule.regimes.push_back(vec_from_json(r));
  ds.x0 = vec_from_json(side.at("x0"));
  ds.dt = side.at("dt").get<double>();
  ds.dt_obs = side.at("dt_obs").get<double>();
  ds.noise_sigma = side.at("noise_sigma").get<double>();
  ds.seed = side.at("seed").get<std::uint64_t>();

  const SystemSpec sys = system_spec(ds.system);
  ds.schedule.validate(sys.param_dim);

  std::ifstream csv(path);
  if (!csv) throw ParseError("cannot open " + path);
  std::string line;
  if (!std::getline(csv, line)) throw ParseError(path + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::string want_header = "t";
  for (int r = 0; r < sys.state_dim; ++r) want_header += ",x" + std::to_string(r + 1);
  if (line != want_header)
    throw ParseError(path + ":1: header mismatch, expected '" + want_header + "'");

  std::vector<double> times;
  std::vector<Vec> rows;
  int line_no = 1;
  while (std::getline(csv, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;  // tolerate trailing newline
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> vals;
    while (std::getline(ss, cell, ',')) {
      size_t used = 0;
      double v = 0;
      try {
        v = std::stod(cell, &used);
      } catch (const std::exception&) {
        throw ParseError(path + ":" + std::to_string(line_no) + ": bad number '" + cell + "'");
      }
      if (used != cell.size())
        throw ParseError(path + ":" + std::to_string(line_no) + ": bad number '" + cell + "'");
      vals.push_back(v);
    }
    if (static_cast<int>(vals.size()) != sys.state_dim + 1)
      throw ParseError(path + ":" + std::to_string(line_no) + ": expected " +
                       std::to_string(sys.state_dim + 1) + " columns, got " +
                       std::to_string(vals.size()));
    times.push_back(vals[0]);
    Vec x(sys.state_dim);
    for (int r = 0; r < sys.state_dim; ++r) x(r) = vals[static_cast<size_t>(r) + 1];
    rows.push_back(std::move(x));
  }
  ds.obs_times = std::move(times);
  ds.obs_states.resize(sys.state_dim, static_cast<Eigen::Index>(rows.size()));
  for (size_t j = 0; j < rows.size(); ++j) ds.obs_states.col(static_cast<Eigen::Index>(j)) = rows[j];
  return ds;
}

double malthus_closed_form(double x0, double r, double t) { return x0 * std::exp(r * t); }

double logistic_closed_form(double x0, double r, double q, double t) {
  double e = std::exp(r * t);
  return q * x0 * e / (q + x0 * (e - 1.0));
}

}  // namespace regimescan
