#include "regimescan/local_pinn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "regimescan/errors.hpp"
#include "regimescan/rng.hpp"

namespace regimescan {

void TrainConfig::validate() const {
  if (iterations < 1) throw ConfigError("iterations must be >= 1");
  if (median_window < 1 || median_window > iterations)
    throw ConfigError("median window must satisfy 1 <= M <= iterations");
  if (!(lr_net > 0) || !(lr_theta > 0) || !(lr_eta > 0))
    throw ConfigError("learning rates must be positive");
  if (!(lambda > 0)) throw ConfigError("lambda must be positive");
  if (reg_lambda < 0) throw ConfigError("reg_lambda must be nonnegative");
  if (collocation_count < 2) throw ConfigError("collocation_count must be >= 2");
  mlp.validate();
}

void collocation_grid(double a, double b, int count, std::vector<double>& t,
                      std::vector<double>& w) {
  if (!(b > a)) throw ConfigError("collocation interval is empty");
  if (count < 2) throw ConfigError("need at least 2 collocation points");
  t.resize(static_cast<size_t>(count));
  w.resize(static_cast<size_t>(count));
  const double h = (b - a) / (count - 1);
  for (int i = 0; i < count; ++i) {
    t[static_cast<size_t>(i)] = a + h * i;
    w[static_cast<size_t>(i)] = (i == 0 || i == count - 1) ? 0.5 * h : h;
  }
  t.back() = b;
}

WindowBatches window_batches(const TrajectoryDataset& ds, double a, double b,
                             const SystemSpec& sys, int collocation_count,
                             int min_obs) {
  WindowBatches wb;
  const double tol = 1e-9 * std::max(1.0, std::abs(ds.schedule.T));
  std::vector<Eigen::Index> idx;
  for (size_t j = 0; j < ds.obs_times.size(); ++j)
    if (ds.obs_times[j] >= a - tol && ds.obs_times[j] <= b + tol)
      idx.push_back(static_cast<Eigen::Index>(j));
  if (static_cast<int>(idx.size()) < min_obs)
    throw ConfigError("window [" + std::to_string(a) + ", " + std::to_string(b) + "] contains " +
                      std::to_string(idx.size()) + " observations, need >= " +
                      std::to_string(min_obs));

  wb.obs_t.reserve(idx.size());
  wb.obs_x.resize(sys.state_dim, static_cast<Eigen::Index>(idx.size()));
  for (size_t j = 0; j < idx.size(); ++j) {
    wb.obs_t.push_back(ds.obs_times[static_cast<size_t>(idx[j])]);
    wb.obs_x.col(static_cast<Eigen::Index>(j)) = ds.obs_states.col(idx[j]);
  }
  wb.v.assign(idx.size(), 1.0);
  collocation_grid(a, b, collocation_count, wb.col_t, wb.col_w);

  wb.maps.t_center = 0.5 * (a + b);
  wb.maps.t_scale = 2.0 / (b - a);
  Vec center = wb.obs_x.rowwise().mean();
  Vec scale(sys.state_dim);
  for (int r = 0; r < sys.state_dim; ++r) {
    double var = (wb.obs_x.row(r).array() - center(r)).square().mean();
    double floor = 1e-2 * std::max(1.0, std::abs(center(r)));
    scale(r) = std::max(std::sqrt(var), floor);
  }
  wb.maps.x_center = center;
  wb.maps.x_scale = scale;
  return wb;
}

LocalFit fit_window(const TrajectoryDataset& ds, double a, double b, const SystemSpec& sys,
                    const TrainConfig& config, const Vec& theta_init, std::uint64_t seed,
                    int window_index) {
  config.validate();
  if (theta_init.size() != sys.param_dim) throw ConfigError("theta_init has wrong dimension");
  if (!theta_init.allFinite()) throw ConfigError("theta_init must be finite");

  WindowBatches wb = window_batches(ds, a, b, sys, config.collocation_count, 2);
  const double total_w = std::accumulate(wb.col_w.begin(), wb.col_w.end(), 0.0);

  MlpSpec spec = config.mlp;
  spec.input_dim = 1;
  spec.output_dim = sys.state_dim;

  for (int attempt = 0; attempt < 2; ++attempt) {
    const double lr_scale = attempt == 0 ? 1.0 : 0.5;
    LocalFit fit{window_index, a, b, theta_init, {}, 0.0, 0.0, Mlp(spec), wb.maps,
                 seed + static_cast<std::uint64_t>(attempt)};
    init_glorot(fit.net, fit.seed);
    AdamState st_phi(fit.net.flat.size());
    AdamState st_theta(sys.param_dim);
    fit.residual_trace.reserve(static_cast<size_t>(config.iterations));

    bool diverged = false;
    for (int iter = 0; iter < config.iterations; ++iter) {
      LossGrads lg = loss_and_gradients(fit.net, fit.theta_hat, sys, wb.obs_t, wb.obs_x, wb.v,
                                        wb.col_t, wb.col_w, config.lambda, config.reg_lambda,
                                        wb.maps);
      if (!std::isfinite(lg.loss.total) || lg.loss.total > 1e8) {
        if (attempt == 1)
          throw TrainingError("window fit diverged twice (iteration " + std::to_string(iter) +
                              ", window [" + std::to_string(a) + ", " + std::to_string(b) + "])");
        diverged = true;
        break;
      }
      fit.residual_trace.push_back(lg.physics_energy / total_w);
      adam_step(st_phi, fit.net.flat, lg.grad_phi, config.lr_net * lr_scale);
      adam_step(st_theta, fit.theta_hat, lg.grad_theta, config.lr_theta * lr_scale);
    }
    if (diverged) continue;

    fit.terminal_median = terminal_score(fit.residual_trace, config.median_window);
    const auto tail = fit.residual_trace.end() - config.median_window;
    fit.terminal_mean =
        std::accumulate(tail, fit.residual_trace.end(), 0.0) / config.median_window;
    return fit;
  }
  throw TrainingError("unreachable: fit_window restart fell through");
}

std::pair<double, double> residual_energy(const Mlp& net, const IoMaps& maps, const Vec& theta,
                                          const SystemSpec& sys,
                                          const std::vector<double>& col_t,
                                          const std::vector<double>& w) {
  if (col_t.empty() || col_t.size() != w.size())
    throw ConfigError("residual_energy needs matching nonempty collocation set and weights");
  double energy = 0.0, total_w = 0.0;
  Vec x_scale = maps.x_scale.size() ? maps.x_scale : Vec::Ones(net.spec().output_dim);
  for (size_t i = 0; i < col_t.size(); ++i) {
    if (!(w[i] > 0)) throw ConfigError("collocation weights must be positive");
    auto [u, udot] = forward_with_time_derivative(net, maps.to_xi(col_t[i]));
    Vec xhat = maps.apply_x(u);
    Vec xdot = udot.cwiseProduct(x_scale) * maps.t_scale;
    Vec r = xdot - eval_field(sys, col_t[i], xhat, theta);
    energy += w[i] * r.squaredNorm();
    total_w += w[i];
  }
  return {energy, energy / total_w};
}

double terminal_score(const std::vector<double>& residual_trace, int M) {
  if (M < 1 || M > static_cast<int>(residual_trace.size()))
    throw ConfigError("terminal_score: median window exceeds trace length");
  std::vector<double> tail(residual_trace.end() - M, residual_trace.end());
  std::sort(tail.begin(), tail.end());
  const size_t n = tail.size();
  return n % 2 ? tail[n / 2] : 0.5 * (tail[n / 2 - 1] + tail[n / 2]);
}

}  // namespace regimescan
