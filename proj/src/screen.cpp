#include "regimescan/screen.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <sstream>
#include <thread>

#include "regimescan/errors.hpp"
#include "regimescan/oracle.hpp"
#include "regimescan/rng.hpp"
#include "regimescan/svg.hpp"

namespace regimescan {

namespace {

double median_of(std::vector<double> v) {
  if (v.empty()) throw ConfigError("median of empty set");
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

WindowPlan build_windows(double t0, double T, double window_len, double step) {
  if (!(step > 0.0) || !(window_len > step) || !(window_len <= T - t0))
    throw ConfigError("window plan requires 0 < step < window_len <= T - t0");
  WindowPlan plan;
  plan.t0 = t0;
  plan.T = T;
  plan.window_len = window_len;
  plan.step = step;
  const double tol = 1e-9 * (T - t0);
  for (int k = 0;; ++k) {
    const double a = t0 + k * step;
    if (a + window_len >= T - tol) {
      plan.windows.emplace_back(T - window_len, T);
      break;
    }
    plan.windows.emplace_back(a, a + window_len);
  }
  return plan;
}

Vec mad_normalize(const Vec& scores, double epsilon) {
  if (scores.size() == 0) throw ConfigError("mad_normalize needs at least one score");
  if (!(epsilon > 0.0)) throw ConfigError("mad_normalize needs epsilon > 0");
  std::vector<double> s(scores.data(), scores.data() + scores.size());
  const double med = median_of(s);
  for (double& v : s) v = std::abs(v - med);
  const double mad = median_of(s);
  return (scores.array() - med) / (mad + epsilon);
}

std::vector<CandidateCluster> select_candidates(const WindowPlan& plan, const Vec& scores,
                                                const Vec& z, double gamma) {
  if (!(gamma > 0.0)) throw ConfigError("gamma must be positive");
  const int K = plan.size();
  if (scores.size() != K || z.size() != K)
    throw ConfigError("scores and z must have one entry per window");
  std::vector<CandidateCluster> clusters;
  int k = 0;
  while (k < K) {
    if (z[k] < gamma) {
      ++k;
      continue;
    }
    CandidateCluster cluster;
    while (k < K && z[k] >= gamma) cluster.members.push_back(k++);
    cluster.k_star = cluster.members.front();
    for (int m : cluster.members)
      if (scores[m] > scores[cluster.k_star]) cluster.k_star = m;
    const int lo_k = std::max(0, cluster.k_star - 1);
    const int hi_k = std::min(K - 1, cluster.k_star + 1);
    cluster.lo = plan.windows[lo_k].first;
    cluster.hi = plan.windows[hi_k].second;
    clusters.push_back(std::move(cluster));
  }
  return clusters;
}

ScreenReport run_screen(const TrajectoryDataset& ds, const SystemSpec& sys,
                        const WindowPlan& plan, const TrainConfig& config, double gamma,
                        int parallelism, std::uint64_t seed, double epsilon) {
  if (plan.windows.empty()) throw ConfigError("empty window plan");
  if (ds.obs_times.empty()) throw ConfigError("dataset has no observations");
  const double tol = 1e-9 * (plan.T - plan.t0);
  if (plan.t0 < ds.obs_times.front() - tol || plan.T > ds.obs_times.back() + tol)
    throw ConfigError("window plan extends beyond the data horizon");
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
  config.validate();

  const int K = plan.size();
  std::vector<LocalFit> fits(K);
  std::vector<std::exception_ptr> errors(K);
  std::atomic<int> next{0};
  const Vec theta0 = Vec::Zero(sys.param_dim);

  auto worker = [&]() {
    for (;;) {
      const int k = next.fetch_add(1);
      if (k >= K) return;
      try {
        fits[k] = fit_window(ds, plan.windows[k].first, plan.windows[k].second, sys, config,
                             theta0, mix_seed(seed, static_cast<std::uint64_t>(k)), k);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };

  const int P = std::max(1, std::min(parallelism, K));
  std::vector<std::thread> pool;
  for (int i = 0; i < P - 1; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  for (int k = 0; k < K; ++k) {
    if (!errors[k]) continue;
    try {
      std::rethrow_exception(errors[k]);
    } catch (const ConfigError& e) {
      throw ConfigError("window " + std::to_string(k) + ": " + e.what());
    } catch (const TrainingError& e) {
      throw TrainingError("window " + std::to_string(k) + ": " + e.what());
    }
  }

  ScreenReport report;
  report.plan = plan;
  report.gamma = gamma;
  report.epsilon = epsilon;
  report.scores = Vec(K);
  report.scores_mean = Vec(K);
  for (int k = 0; k < K; ++k) {
    report.scores[k] = fits[k].terminal_median;
    report.scores_mean[k] = fits[k].terminal_mean;
  }

  std::vector<double> s(report.scores.data(), report.scores.data() + K);
  const double med = median_of(s);
  for (double& v : s) v = std::abs(v - med);
  const double mad = median_of(s);
  if (mad < 1e-15 * med) {
    report.mad_degenerate = true;
    const double denom = std::max(report.epsilon, 1e-6 * med);
    report.z = (report.scores.array() - med) / denom;
  } else {
    report.z = mad_normalize(report.scores, report.epsilon);
  }

  report.clusters = select_candidates(plan, report.scores, report.z, gamma);
  report.fits = std::move(fits);
  return report;
}

std::vector<double> oracle_screen(const Trajectory& traj, const SystemSpec& sys,
                                  const WindowPlan& plan) {
  std::vector<double> floors;
  floors.reserve(plan.windows.size());
  for (const auto& [a, b] : plan.windows) floors.push_back(residual_floor(a, b, traj, sys));
  return floors;
}

nlohmann::json screen_report_to_json(const ScreenReport& report) {
  nlohmann::json j;
  j["gamma"] = report.gamma;
  j["epsilon"] = report.epsilon;
  j["mad_degenerate"] = report.mad_degenerate;
  j["window_len"] = report.plan.window_len;
  j["step"] = report.plan.step;
  j["windows"] = nlohmann::json::array();
  for (const auto& [a, b] : report.plan.windows) j["windows"].push_back({a, b});
  j["S"] = std::vector<double>(report.scores.data(), report.scores.data() + report.scores.size());
  j["S_mean"] = std::vector<double>(report.scores_mean.data(),
                                    report.scores_mean.data() + report.scores_mean.size());
  j["Z"] = std::vector<double>(report.z.data(), report.z.data() + report.z.size());
  j["theta_hat"] = nlohmann::json::array();
  for (const auto& fit : report.fits)
    j["theta_hat"].push_back(
        std::vector<double>(fit.theta_hat.data(), fit.theta_hat.data() + fit.theta_hat.size()));
  j["clusters"] = nlohmann::json::array();
  for (const auto& c : report.clusters) {
    nlohmann::json jc;
    jc["members"] = c.members;
    jc["k_star"] = c.k_star;
    jc["interval"] = {c.lo, c.hi};
    j["clusters"].push_back(jc);
  }
  return j;
}

std::string screen_report_csv(const ScreenReport& report) {
  std::string out = "k,a,b,S,Z\n";
  for (int k = 0; k < report.plan.size(); ++k) {
    out += std::to_string(k) + "," + fmt17(report.plan.windows[k].first) + "," +
           fmt17(report.plan.windows[k].second) + "," + fmt17(report.scores[k]) + "," +
           fmt17(report.z[k]) + "\n";
  }
  return out;
}

std::string screen_scores_svg(const ScreenReport& report) {
  const int K = report.plan.size();
  std::vector<double> logs(K);
  for (int k = 0; k < K; ++k) logs[k] = std::log10(std::max(report.scores[k], 1e-16));
  const double lo = *std::min_element(logs.begin(), logs.end());
  const double hi = *std::max_element(logs.begin(), logs.end());
  const double pad = 0.05 * std::max(hi - lo, 1e-3);
  Plot plot(report.plan.t0, report.plan.T, lo - pad, hi + pad, "terminal residual energy by window",
            "t", "log10 S_k");
  for (const auto& c : report.clusters) plot.hband(c.lo, c.hi, "#ffd54f", 0.35);
  for (int k = 0; k < K; ++k) {
    const auto& [a, b] = report.plan.windows[k];
    const double mid = 0.5 * (a + b);
    plot.bar(mid - 0.4 * report.plan.step, mid + 0.4 * report.plan.step, logs[k], "#1f77b4");
  }
  return plot.finish();
}

}  // namespace regimescan
