#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "regimescan/local_pinn.hpp"
#include "regimescan/simulate.hpp"

namespace regimescan {

struct WindowPlan {
  double t0 = 0.0, T = 0.0;
  double window_len = 0.0, step = 0.0;
  std::vector<std::pair<double, double>> windows;

  int size() const { return static_cast<int>(windows.size()); }
};

// Sliding windows [t0 + k*step, t0 + k*step + window_len]; the last window is
// back-shifted to end exactly at T so the plan covers the whole horizon.
WindowPlan build_windows(double t0, double T, double window_len, double step);

// Z_k = (S_k - median(S)) / (MAD(S) + epsilon), exactly this formula.
Vec mad_normalize(const Vec& scores, double epsilon = 1e-12);

struct CandidateCluster {
  std::vector<int> members;  // maximal run of consecutive flagged indices
  int k_star = -1;           // argmax of S within members, smallest index on ties
  double lo = 0.0, hi = 0.0;  // candidate interval: k_star's window plus neighbors
};

std::vector<CandidateCluster> select_candidates(const WindowPlan& plan, const Vec& scores,
                                                const Vec& z, double gamma);

struct ScreenReport {
  WindowPlan plan;
  double gamma = 3.0;
  double epsilon = 1e-12;
  Vec scores;       // per-window terminal median of the residual trace
  Vec scores_mean;  // terminal mean, reported alongside
  Vec z;
  // When MAD(S) < 1e-15 * median(S) the Z denominator is floored at
  // max(epsilon, 1e-6 * median(S)) so numerically equal scores are not flagged.
  bool mad_degenerate = false;
  std::vector<LocalFit> fits;
  std::vector<CandidateCluster> clusters;
};

// Fits every window of the plan (parallel over `parallelism` workers,
// per-window seeds so the result is worker-count invariant) and screens the
// terminal scores.
ScreenReport run_screen(const TrajectoryDataset& ds, const SystemSpec& sys,
                        const WindowPlan& plan, const TrainConfig& config, double gamma,
                        int parallelism, std::uint64_t seed, double epsilon = 1e-12);

// Training-free reference screen: the exact residual floor of every window.
std::vector<double> oracle_screen(const Trajectory& traj, const SystemSpec& sys,
                                  const WindowPlan& plan);

nlohmann::json screen_report_to_json(const ScreenReport& report);
std::string screen_report_csv(const ScreenReport& report);
std::string screen_scores_svg(const ScreenReport& report);

}  // namespace regimescan
