#include "regimescan/refine.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "regimescan/errors.hpp"
#include "regimescan/rng.hpp"

namespace regimescan {

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

double tau_of_eta(double eta, double t_lo, double t_hi) {
  if (!(t_hi > t_lo)) throw ConfigError("tau_of_eta requires t_lo < t_hi");
  return t_lo + (t_hi - t_lo) * sigmoid(eta);
}

double gate(double t, double tau, double kappa) {
  if (!(kappa > 0.0)) throw ConfigError("gate sharpness must be positive");
  return sigmoid(kappa * (t - tau));
}

Vec gated_theta(double t, const Vec& theta_minus, const Vec& theta_plus, double eta,
                double kappa, double t_lo, double t_hi) {
  if (theta_minus.size() != theta_plus.size())
    throw ConfigError("gated_theta: parameter vectors differ in length");
  const double g = gate(t, tau_of_eta(eta, t_lo, t_hi), kappa);
  return theta_minus + (theta_plus - theta_minus) * g;
}

RefineResult refine(const TrajectoryDataset& ds, const SystemSpec& sys, double t_lo,
                    double t_hi, const Vec& theta_left, const Vec& theta_right,
                    const TrainConfig& config, std::uint64_t seed) {
  config.validate();
  if (!(t_hi > t_lo)) throw ConfigError("candidate interval is empty");
  if (theta_left.size() != sys.param_dim || theta_right.size() != sys.param_dim)
    throw ConfigError("neighbor parameter estimates have wrong dimension");
  if (!theta_left.allFinite() || !theta_right.allFinite())
    throw ConfigError("neighbor parameter estimates must be finite");

  const WindowBatches wb = window_batches(ds, t_lo, t_hi, sys, config.collocation_count, 4);

  const double width = t_hi - t_lo;
  const double kappa_lo = 10.0 / width;
  const double kappa_hi = 200.0 / width;
  const int L = config.iterations;
  const int n1 = (2 * L) / 5;
  const int n2 = L / 5;
  const int n3 = L - n1 - n2;

  MlpSpec spec = config.mlp;
  spec.input_dim = 1;
  spec.output_dim = sys.state_dim;

  for (int attempt = 0; attempt < 2; ++attempt) {
    const double lr_scale = attempt == 0 ? 1.0 : 0.5;
    RefineResult res;
    res.t_lo = t_lo;
    res.t_hi = t_hi;
    res.theta_minus = theta_left;
    res.theta_plus = theta_right;
    res.phase_iterations = {n1, n2, n3};
    res.net = Mlp(spec);
    res.maps = wb.maps;
    res.seed = seed + static_cast<std::uint64_t>(attempt);
    init_glorot(res.net, res.seed);
    res.loss_trace.reserve(static_cast<size_t>(L));

    AdamState st_phi(res.net.flat.size());
    AdamState st_tm(sys.param_dim);
    AdamState st_tp(sys.param_dim);
    AdamState st_eta(1);
    Vec eta_v = Vec::Zero(1);

    bool diverged = false;
    int phase = 0;
    for (int iter = 0; iter < L && !diverged; ++iter) {
      phase = iter < n1 ? 0 : (iter < n1 + n2 ? 1 : 2);
      double kappa = kappa_lo;
      if (phase == 2) {
        const int i = iter - n1 - n2;
        const double frac = n3 > 1 ? static_cast<double>(i) / (n3 - 1) : 1.0;
        kappa = kappa_lo * std::pow(kappa_hi / kappa_lo, frac);
      }
      const bool with_data = phase != 1;
      const bool with_physics = phase != 0;

      GatedLossGrads g = gated_loss_and_gradients(
          res.net, res.theta_minus, res.theta_plus, eta_v[0], kappa, t_lo, t_hi, sys, wb.obs_t,
          wb.obs_x, wb.v, wb.col_t, wb.col_w, config.lambda, config.reg_lambda, wb.maps,
          with_data, with_physics);
      if (!std::isfinite(g.loss.total) || g.loss.total > 1e8) {
        if (attempt == 1)
          throw TrainingError("refinement diverged twice (iteration " + std::to_string(iter) +
                              ", interval [" + std::to_string(t_lo) + ", " +
                              std::to_string(t_hi) + "])");
        diverged = true;
        break;
      }
      res.loss_trace.push_back(g.loss.total);
      res.phase_final_loss[static_cast<size_t>(phase)] = g.loss.total;

      if (phase == 0) {
        adam_step(st_phi, res.net.flat, g.grad_phi, config.lr_net * lr_scale);
      } else if (phase == 1) {
        Vec ge(1);
        ge[0] = g.grad_eta;
        adam_step(st_eta, eta_v, ge, config.lr_eta * lr_scale);
      } else {
        adam_step(st_phi, res.net.flat, g.grad_phi, config.lr_net * lr_scale);
        adam_step(st_tm, res.theta_minus, g.grad_theta_minus, config.lr_theta * lr_scale);
        adam_step(st_tp, res.theta_plus, g.grad_theta_plus, config.lr_theta * lr_scale);
        Vec ge(1);
        ge[0] = g.grad_eta;
        adam_step(st_eta, eta_v, ge, config.lr_eta * lr_scale);
      }
      res.kappa_final = kappa;
    }
    if (diverged) continue;

    res.eta_hat = eta_v[0];
    res.tau_hat = tau_of_eta(res.eta_hat, t_lo, t_hi);
    return res;
  }
  throw TrainingError("unreachable: refine restart fell through");
}

nlohmann::json refine_result_to_json(const RefineResult& result, const RegimeSchedule* truth) {
  nlohmann::json j;
  j["interval"] = {result.t_lo, result.t_hi};
  j["tau_hat"] = result.tau_hat;
  j["eta_hat"] = result.eta_hat;
  j["kappa_final"] = result.kappa_final;
  j["theta_minus"] = std::vector<double>(result.theta_minus.data(),
                                         result.theta_minus.data() + result.theta_minus.size());
  j["theta_plus"] = std::vector<double>(result.theta_plus.data(),
                                        result.theta_plus.data() + result.theta_plus.size());
  j["phase_iterations"] = result.phase_iterations;
  j["phase_final_loss"] = result.phase_final_loss;
  j["seed"] = result.seed;
  if (truth != nullptr && !truth->breakpoints.empty()) {
    int best = 0;
    for (size_t i = 1; i < truth->breakpoints.size(); ++i)
      if (std::abs(truth->breakpoints[i] - result.tau_hat) <
          std::abs(truth->breakpoints[static_cast<size_t>(best)] - result.tau_hat))
        best = static_cast<int>(i);
    const double tau_true = truth->breakpoints[static_cast<size_t>(best)];
    const Vec& th_minus = truth->regimes[static_cast<size_t>(best)];
    const Vec& th_plus = truth->regimes[static_cast<size_t>(best) + 1];
    nlohmann::json e;
    e["tau_true"] = tau_true;
    e["tau_sq_err"] = (result.tau_hat - tau_true) * (result.tau_hat - tau_true);
    e["theta_minus_sq_err"] = (result.theta_minus - th_minus).squaredNorm();
    e["theta_plus_sq_err"] = (result.theta_plus - th_plus).squaredNorm();
    j["truth"] = e;
  }
  return j;
}

}  // namespace regimescan
