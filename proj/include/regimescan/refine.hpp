#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include <json.hpp>

#include "regimescan/local_pinn.hpp"

namespace regimescan {

// tau = t_lo + (t_hi - t_lo) * sigmoid(eta); strictly inside (t_lo, t_hi).
double tau_of_eta(double eta, double t_lo, double t_hi);

// sigmoid(kappa * (t - tau))
double gate(double t, double tau, double kappa);

// theta(t) = theta_minus + (theta_plus - theta_minus) * gate(t, tau(eta), kappa)
Vec gated_theta(double t, const Vec& theta_minus, const Vec& theta_plus, double eta,
                double kappa, double t_lo, double t_hi);

struct RefineResult {
  double t_lo = 0.0, t_hi = 0.0;  // candidate interval
  double eta_hat = 0.0;
  double tau_hat = 0.0;
  double kappa_final = 0.0;
  Vec theta_minus, theta_plus;
  std::array<int, 3> phase_iterations{};
  std::array<double, 3> phase_final_loss{};
  std::vector<double> loss_trace;  // total loss per iteration, phases concatenated
  Mlp net;
  IoMaps maps;
  std::uint64_t seed = 0;
};

// Three-phase training inside a candidate interval: the network alone on the
// data term, then the change-point logit alone on the physics term, then all
// variables jointly while the gate sharpness ramps geometrically from 10/W to
// 200/W (W = interval width). Diverging runs restart once with halved rates
// and seed+1.
RefineResult refine(const TrajectoryDataset& ds, const SystemSpec& sys, double t_lo,
                    double t_hi, const Vec& theta_left, const Vec& theta_right,
                    const TrainConfig& config, std::uint64_t seed);

// Optional truth schedule adds squared errors against the nearest true change
// point and its adjacent regimes.
nlohmann::json refine_result_to_json(const RefineResult& result,
                                     const RegimeSchedule* truth = nullptr);

}  // namespace regimescan
