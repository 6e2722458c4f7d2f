#pragma once

#include <cstdint>
#include <vector>

#include "regimescan/nn.hpp"
#include "regimescan/simulate.hpp"

namespace regimescan {

struct TrainConfig {
  int iterations = 30000;
  double lr_net = 5e-3;
  double lr_theta = 1e-3;
  double lr_eta = 1e-2;  // change-point logit (refinement stage only)
  double lambda = 1.0;
  double reg_lambda = 0.0;
  int collocation_count = 50;
  int median_window = 100;
  MlpSpec mlp;

  void validate() const;
};

struct LocalFit {
  int window_index = -1;
  double a = 0.0, b = 0.0;
  Vec theta_hat;
  std::vector<double> residual_trace;  // normalized energy per iteration, length L
  double terminal_median = 0.0;        // median of the last median_window entries
  double terminal_mean = 0.0;          // mean of the same entries, kept for reporting
  Mlp net;
  IoMaps maps;
  std::uint64_t seed = 0;
};

// Everything a window trainer consumes: observations inside [a, b] with unit
// data weights, the collocation grid, and normalization maps derived from the
// window's own data.
struct WindowBatches {
  std::vector<double> obs_t;
  Mat obs_x;
  std::vector<double> v;
  std::vector<double> col_t, col_w;
  IoMaps maps;
};

WindowBatches window_batches(const TrajectoryDataset& ds, double a, double b,
                             const SystemSpec& sys, int collocation_count, int min_obs);

// Joint Adam on (network, theta) against the window's observations and a
// uniform collocation grid with trapezoid weights. Deterministic in all
// arguments. Diverging runs restart once with halved rates and seed+1.
LocalFit fit_window(const TrajectoryDataset& ds, double a, double b, const SystemSpec& sys,
                    const TrainConfig& config, const Vec& theta_init, std::uint64_t seed,
                    int window_index = -1);

// E = sum_i w_i ||dxhat/dt - f||^2 at the given parameters; Ebar = E / sum w.
std::pair<double, double> residual_energy(const Mlp& net, const IoMaps& maps, const Vec& theta,
                                          const SystemSpec& sys,
                                          const std::vector<double>& col_t,
                                          const std::vector<double>& w);

// Median of the last M trace entries.
double terminal_score(const std::vector<double>& residual_trace, int M);

// Uniform collocation nodes and trapezoid weights over [a, b].
void collocation_grid(double a, double b, int count, std::vector<double>& t,
                      std::vector<double>& w);

}  // namespace regimescan
