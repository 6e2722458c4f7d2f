#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "regimescan/dynamics.hpp"

namespace regimescan {

struct SegmentationResult {
  std::vector<int> breakpoints;  // start index of each new segment, strictly increasing
  std::vector<Vec> segment_means;
  double total_cost = 0.0;  // sum of segment SSE + psi * breakpoints.size()
};

// Exact penalized segmentation with squared-error cost (summed over vector
// components), dynamic programming with inequality pruning.
SegmentationResult pelt_segment(const std::vector<Vec>& series, double psi);

// Same optimum without pruning; O(n^2) candidates, used to validate pelt_segment.
SegmentationResult exhaustive_segment(const std::vector<Vec>& series, double psi);

// 2 * dim * log(n) * median over the series of squared deviation from the
// componentwise median.
double default_pelt_penalty(const std::vector<Vec>& series);

struct Gmm1d {
  Vec weights, means, variances;
  Mat posteriors;  // n x K
  std::vector<double> loglik_trace;
  bool variance_floored = false;
};

// Standard EM with 5 deterministic restarts (quantile means first, then random
// data points); best final log-likelihood wins. Variances are floored at
// 1e-8 * var(values).
Gmm1d gmm_em_1d(const std::vector<double>& values, int K, int iters, std::uint64_t seed);

struct ChangeProbability {
  Mat p_param;  // n x d, three-point inconsistency per parameter
  Vec p;        // combined probability, mean over parameters
  std::vector<int> peak_indices;
  std::vector<double> peak_times;
  std::vector<std::pair<double, double>> intervals;  // per-peak credible interval
};

// posteriors: one n x K responsibility matrix per parameter dimension.
// p_i(t) = 1 - sum_k gamma(t-dt) gamma(t) gamma(t+dt), endpoints duplicated.
// max_peaks > 0 keeps the top peaks by height; otherwise every local maximum
// with p >= 0.5 is reported. Peaks closer than 4 grid steps are merged.
ChangeProbability changepoint_probability(const std::vector<Mat>& posteriors, double t_start,
                                          double dt, int max_peaks);

}  // namespace regimescan
