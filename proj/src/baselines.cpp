#include "regimescan/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "regimescan/errors.hpp"
#include "regimescan/rng.hpp"

namespace regimescan {

namespace {

struct PrefixSums {
  std::vector<Vec> s1;         // s1[i] = sum of series[0..i)
  std::vector<double> s2;      // s2[i] = sum of squared norms

  explicit PrefixSums(const std::vector<Vec>& series) {
    const Eigen::Index d = series.front().size();
    s1.assign(series.size() + 1, Vec::Zero(d));
    s2.assign(series.size() + 1, 0.0);
    for (size_t i = 0; i < series.size(); ++i) {
      s1[i + 1] = s1[i] + series[i];
      s2[i + 1] = s2[i] + series[i].squaredNorm();
    }
  }

  // SSE of the segment covering indices [s, t)
  double cost(int s, int t) const {
    const int n = t - s;
    const Vec sum = s1[static_cast<size_t>(t)] - s1[static_cast<size_t>(s)];
    return s2[static_cast<size_t>(t)] - s2[static_cast<size_t>(s)] - sum.squaredNorm() / n;
  }
};

SegmentationResult segment_dp(const std::vector<Vec>& series, double psi, bool prune) {
  if (series.empty()) throw ConfigError("cannot segment an empty sequence");
  for (const Vec& v : series)
    if (v.size() != series.front().size())
      throw ConfigError("segmentation series entries differ in dimension");
  const int n = static_cast<int>(series.size());
  const PrefixSums ps(series);

  std::vector<double> F(static_cast<size_t>(n) + 1,
                        std::numeric_limits<double>::infinity());
  std::vector<int> prev(static_cast<size_t>(n) + 1, 0);
  F[0] = -psi;
  std::vector<int> cand = {0};
  for (int t = 1; t <= n; ++t) {
    double best = std::numeric_limits<double>::infinity();
    int best_s = 0;
    for (int s : cand) {
      const double c = F[static_cast<size_t>(s)] + ps.cost(s, t) + psi;
      if (c < best) {
        best = c;
        best_s = s;
      }
    }
    F[static_cast<size_t>(t)] = best;
    prev[static_cast<size_t>(t)] = best_s;
    if (prune) {
      std::vector<int> kept;
      for (int s : cand)
        if (F[static_cast<size_t>(s)] + ps.cost(s, t) <= best) kept.push_back(s);
      cand = std::move(kept);
    }
    cand.push_back(t);
  }

  SegmentationResult out;
  std::vector<int> bounds;
  for (int t = n; t > 0; t = prev[static_cast<size_t>(t)]) bounds.push_back(t);
  bounds.push_back(0);
  std::reverse(bounds.begin(), bounds.end());
  for (size_t i = 1; i + 1 < bounds.size(); ++i) out.breakpoints.push_back(bounds[i]);
  for (size_t i = 0; i + 1 < bounds.size(); ++i) {
    const int s = bounds[i], t = bounds[i + 1];
    out.segment_means.push_back(
        (ps.s1[static_cast<size_t>(t)] - ps.s1[static_cast<size_t>(s)]) / (t - s));
  }
  out.total_cost = F[static_cast<size_t>(n)];
  return out;
}

double log_gauss(double x, double mu, double var) {
  const double d = x - mu;
  return -0.5 * (std::log(2.0 * std::numbers::pi * var) + d * d / var);
}

Gmm1d em_run(const std::vector<double>& values, Vec means, int K, int iters,
             double var_floor, double init_var) {
  const int n = static_cast<int>(values.size());
  Gmm1d g;
  g.weights = Vec::Constant(K, 1.0 / K);
  g.means = std::move(means);
  g.variances = Vec::Constant(K, init_var);
  g.posteriors = Mat::Zero(n, K);
  g.loglik_trace.reserve(static_cast<size_t>(iters));

  for (int it = 0; it < iters; ++it) {
    double loglik = 0.0;
    for (int i = 0; i < n; ++i) {
      Vec logp(K);
      for (int k = 0; k < K; ++k)
        logp[k] = std::log(g.weights[k]) + log_gauss(values[static_cast<size_t>(i)],
                                                     g.means[k], g.variances[k]);
      const double mx = logp.maxCoeff();
      const double lse = mx + std::log((logp.array() - mx).exp().sum());
      loglik += lse;
      g.posteriors.row(i) = (logp.array() - lse).exp();
    }
    g.loglik_trace.push_back(loglik);

    for (int k = 0; k < K; ++k) {
      const double resp = g.posteriors.col(k).sum();
      if (resp < 1e-12) {
        g.weights[k] = 1e-12;
        continue;
      }
      double mu = 0.0;
      for (int i = 0; i < n; ++i) mu += g.posteriors(i, k) * values[static_cast<size_t>(i)];
      mu /= resp;
      double var = 0.0;
      for (int i = 0; i < n; ++i) {
        const double d = values[static_cast<size_t>(i)] - mu;
        var += g.posteriors(i, k) * d * d;
      }
      var /= resp;
      if (var < var_floor) {
        var = var_floor;
        g.variance_floored = true;
      }
      g.weights[k] = resp / n;
      g.means[k] = mu;
      g.variances[k] = var;
    }
    g.weights /= g.weights.sum();
  }
  return g;
}

}  // namespace

SegmentationResult pelt_segment(const std::vector<Vec>& series, double psi) {
  if (!(psi > 0.0)) throw ConfigError("segmentation penalty must be positive");
  if (series.size() < 2) throw ConfigError("segmentation needs at least 2 points");
  return segment_dp(series, psi, true);
}

SegmentationResult exhaustive_segment(const std::vector<Vec>& series, double psi) {
  if (!(psi > 0.0)) throw ConfigError("segmentation penalty must be positive");
  if (series.size() < 2) throw ConfigError("segmentation needs at least 2 points");
  return segment_dp(series, psi, false);
}

double default_pelt_penalty(const std::vector<Vec>& series) {
  if (series.empty()) throw ConfigError("cannot derive a penalty from an empty sequence");
  const Eigen::Index d = series.front().size();
  const int n = static_cast<int>(series.size());
  Vec med(d);
  for (Eigen::Index c = 0; c < d; ++c) {
    std::vector<double> col;
    col.reserve(series.size());
    for (const Vec& v : series) col.push_back(v[c]);
    std::sort(col.begin(), col.end());
    med[c] = col.size() % 2 ? col[col.size() / 2]
                            : 0.5 * (col[col.size() / 2 - 1] + col[col.size() / 2]);
  }
  std::vector<double> dev;
  dev.reserve(series.size());
  for (const Vec& v : series) dev.push_back((v - med).squaredNorm());
  std::sort(dev.begin(), dev.end());
  const double med_dev =
      dev.size() % 2 ? dev[dev.size() / 2] : 0.5 * (dev[dev.size() / 2 - 1] + dev[dev.size() / 2]);
  return 2.0 * static_cast<double>(d) * std::log(std::max(2, n)) * std::max(med_dev, 1e-12);
}

Gmm1d gmm_em_1d(const std::vector<double>& values, int K, int iters, std::uint64_t seed) {
  if (K < 1) throw ConfigError("mixture needs K >= 1");
  if (static_cast<int>(values.size()) < K)
    throw ConfigError("mixture needs at least K data points");
  if (iters < 1) throw ConfigError("mixture needs at least one iteration");

  const int n = static_cast<int>(values.size());
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var /= n;
  const double base_var = std::max(var, 1e-12);
  const double var_floor = 1e-8 * base_var;

  std::vector<double> sorted = values;
  std::sort(sorted.begin(), sorted.end());

  Gmm1d best;
  double best_loglik = -std::numeric_limits<double>::infinity();
  for (int restart = 0; restart < 5; ++restart) {
    Vec means(K);
    if (restart == 0) {
      for (int k = 0; k < K; ++k) {
        const double q = (k + 0.5) / K;
        means[k] = sorted[static_cast<size_t>(
            std::min<int>(n - 1, static_cast<int>(q * n)))];
      }
    } else {
      Rng rng(mix_seed(seed, static_cast<std::uint64_t>(restart)));
      for (int k = 0; k < K; ++k)
        means[k] = values[static_cast<size_t>(rng.index(static_cast<std::size_t>(n)))];
    }
    Gmm1d run = em_run(values, std::move(means), K, iters, var_floor, base_var);
    if (run.loglik_trace.back() > best_loglik) {
      best_loglik = run.loglik_trace.back();
      best = std::move(run);
    }
  }
  return best;
}

ChangeProbability changepoint_probability(const std::vector<Mat>& posteriors, double t_start,
                                          double dt, int max_peaks) {
  if (posteriors.empty()) throw ConfigError("need posteriors for at least one parameter");
  const Eigen::Index n = posteriors.front().rows();
  if (n < 3) throw ConfigError("need at least 3 time points");
  for (const Mat& g : posteriors)
    if (g.rows() != n) throw ConfigError("posterior matrices differ in length");

  const int d = static_cast<int>(posteriors.size());
  ChangeProbability out;
  out.p_param = Mat::Zero(n, d);
  for (int i = 0; i < d; ++i) {
    const Mat& g = posteriors[static_cast<size_t>(i)];
    for (Eigen::Index t = 0; t < n; ++t) {
      const Eigen::Index tm = std::max<Eigen::Index>(0, t - 1);
      const Eigen::Index tp = std::min<Eigen::Index>(n - 1, t + 1);
      double keep = 0.0;
      for (Eigen::Index k = 0; k < g.cols(); ++k) keep += g(tm, k) * g(t, k) * g(tp, k);
      out.p_param(t, i) = 1.0 - keep;
    }
  }
  out.p = out.p_param.rowwise().mean();

  // Local maxima, tallest first, merged when closer than 4 grid steps.
  std::vector<Eigen::Index> maxima;
  for (Eigen::Index t = 0; t < n; ++t) {
    const double left = t > 0 ? out.p[t - 1] : -1.0;
    const double right = t + 1 < n ? out.p[t + 1] : -1.0;
    if (out.p[t] >= left && out.p[t] >= right) maxima.push_back(t);
  }
  std::sort(maxima.begin(), maxima.end(), [&](Eigen::Index a, Eigen::Index b) {
    if (out.p[a] != out.p[b]) return out.p[a] > out.p[b];
    return a < b;
  });
  for (Eigen::Index t : maxima) {
    if (max_peaks > 0 && static_cast<int>(out.peak_indices.size()) >= max_peaks) break;
    if (max_peaks <= 0 && out.p[t] < 0.5) break;
    bool too_close = false;
    for (int kept : out.peak_indices)
      if (std::abs(static_cast<long>(kept) - static_cast<long>(t)) < 4) too_close = true;
    if (too_close) continue;
    out.peak_indices.push_back(static_cast<int>(t));
  }
  std::sort(out.peak_indices.begin(), out.peak_indices.end());

  for (int t : out.peak_indices) {
    out.peak_times.push_back(t_start + dt * t);
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < d; ++i) {
      Eigen::Index best = std::max<Eigen::Index>(0, t - 3);
      const Eigen::Index last = std::min<Eigen::Index>(n - 1, t + 3);
      for (Eigen::Index s = best; s <= last; ++s)
        if (out.p_param(s, i) > out.p_param(best, i)) best = s;
      const double tau = t_start + dt * static_cast<double>(best);
      lo = std::min(lo, tau);
      hi = std::max(hi, tau);
    }
    out.intervals.emplace_back(lo, hi);
  }
  return out;
}

}  // namespace regimescan
