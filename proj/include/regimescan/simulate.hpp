#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "regimescan/dynamics.hpp"

namespace regimescan {

struct TrajectoryDataset {
  SystemId system;
  RegimeSchedule schedule;  // provenance (ground truth when synthetic)
  Vec x0;
  double dt = 0.0;
  double dt_obs = 0.0;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
  std::vector<double> obs_times;
  Mat obs_states;  // state_dim x obs_times.size()
};

// Classical RK4 on a uniform grid, parameters switched right-continuously at
// breakpoints. Breakpoints are snapped to the nearest grid node first (warning
// to stderr if the shift exceeds dt/2), so no step straddles a regime change.
Trajectory integrate(const SystemSpec& sys, const RegimeSchedule& schedule, const Vec& x0,
                     double dt);

// Subsample the grid every dt_obs (must be an integer multiple of dt) and add
// iid Gaussian noise per component when noise_sigma > 0.
TrajectoryDataset sample_observations(const Trajectory& traj, double dt_obs,
                                      double noise_sigma, std::uint64_t seed);

// CSV with header t,x1,...,xn plus a JSON sidecar <path>.json holding the
// provenance needed to reconstruct the dataset struct.
void write_dataset(const std::string& path, const TrajectoryDataset& ds);
TrajectoryDataset read_dataset(const std::string& path);

// Closed forms used by tests and the integrator's own accuracy checks.
double malthus_closed_form(double x0, double r, double t);
double logistic_closed_form(double x0, double r, double q, double t);

}  // namespace regimescan
