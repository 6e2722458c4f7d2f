#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "regimescan/dynamics.hpp"

namespace regimescan {

struct MlpSpec {
  int input_dim = 1;
  int output_dim = 1;
  int hidden_layers = 4;
  int width = 64;

  void validate() const;
};

// tanh MLP with all weights and biases in one flat vector (layer views are
// Eigen maps into it), so optimizer state indexes the same storage.
class Mlp {
 public:
  Mlp() = default;  // empty placeholder, usable only as an assignment target
  explicit Mlp(const MlpSpec& spec);

  const MlpSpec& spec() const { return spec_; }
  int layer_count() const { return spec_.hidden_layers + 1; }
  int fan_in(int layer) const { return dims_[static_cast<size_t>(layer)]; }
  int fan_out(int layer) const { return dims_[static_cast<size_t>(layer) + 1]; }

  Eigen::Map<Mat> weight(int layer);
  Eigen::Map<const Mat> weight(int layer) const;
  Eigen::Map<Vec> bias(int layer);
  Eigen::Map<const Vec> bias(int layer) const;

  Vec flat;

 private:
  MlpSpec spec_;
  std::vector<int> dims_;
  std::vector<Eigen::Index> w_off_, b_off_;
};

// Glorot-uniform weights, zero biases, deterministic in the seed.
void init_glorot(Mlp& net, std::uint64_t seed);

Vec forward(const Mlp& net, double t);
// (value, exact d/dt of the value) — forward-mode through every layer.
std::pair<Vec, Vec> forward_with_time_derivative(const Mlp& net, double t);

// Affine maps applied around the raw network u(.): the network sees
// xi = (t - t_center) * t_scale and the model output is
// xhat = x_center + x_scale .* u(xi), so dxhat/dt = x_scale .* u'(xi) * t_scale.
// Input normalization keeps tanh layers out of saturation for t up to 100;
// output normalization keeps window fits trainable when states reach O(10^3).
struct IoMaps {
  double t_center = 0.0;
  double t_scale = 1.0;
  Vec x_center;  // empty = zeros
  Vec x_scale;   // empty = ones

  static IoMaps identity() { return {}; }
  double to_xi(double t) const { return (t - t_center) * t_scale; }
  Vec apply_x(const Vec& u) const;
};

struct LossParts {
  double total = 0.0;
  double data = 0.0;
  double physics = 0.0;  // lambda * energy
  double reg = 0.0;
};

struct LossGrads {
  LossParts loss;
  Vec grad_phi;
  Vec grad_theta;
  double physics_energy = 0.0;  // sum_i w_i ||R_i||^2, lambda excluded
};

// loss = sum_j v_j ||xhat(t_j) - x_d(t_j)||^2
//      + lambda * sum_i w_i ||dxhat/dt(s_i) - f(s_i, xhat(s_i); theta)||^2
//      + reg_lambda * ||phi||^2
// Gradients are exact: reverse accumulation through the network composed with
// the forward-mode time derivative (no finite differences anywhere).
LossGrads loss_and_gradients(const Mlp& net, const Vec& theta, const SystemSpec& sys,
                             const std::vector<double>& obs_t, const Mat& obs_x,
                             const std::vector<double>& v,
                             const std::vector<double>& col_t, const std::vector<double>& w,
                             double lambda, double reg_lambda, const IoMaps& maps);

struct GatedLossGrads {
  LossParts loss;
  Vec grad_phi;
  Vec grad_theta_minus;
  Vec grad_theta_plus;
  double grad_eta = 0.0;
  double physics_energy = 0.0;
};

// Same objective with theta(t) = theta_minus + (theta_plus - theta_minus) *
// sigmoid(kappa * (t - tau(eta))) inside the physics term; gradients also flow
// to theta_minus, theta_plus and the change-point variable eta. The data and
// physics terms can be switched off individually (phase 1 / phase 2 training).
GatedLossGrads gated_loss_and_gradients(const Mlp& net, const Vec& theta_minus,
                                        const Vec& theta_plus, double eta, double kappa,
                                        double t_lo, double t_hi, const SystemSpec& sys,
                                        const std::vector<double>& obs_t, const Mat& obs_x,
                                        const std::vector<double>& v,
                                        const std::vector<double>& col_t,
                                        const std::vector<double>& w, double lambda,
                                        double reg_lambda, const IoMaps& maps,
                                        bool include_data, bool include_physics);

struct AdamState {
  Vec m, v;
  long step = 0;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

  explicit AdamState(Eigen::Index n) : m(Vec::Zero(n)), v(Vec::Zero(n)) {}
};

// Standard Adam with bias correction; throws TrainingError on non-finite grads.
void adam_step(AdamState& state, Eigen::Ref<Vec> vars, const Vec& grad, double lr);

}  // namespace regimescan
