#include "regimescan/nn.hpp"

#include <cmath>

#include "regimescan/errors.hpp"
#include "regimescan/rng.hpp"

namespace regimescan {

void MlpSpec::validate() const {
  if (input_dim < 1 || output_dim < 1 || hidden_layers < 1 || width < 1)
    throw ConfigError("invalid network shape");
}

Mlp::Mlp(const MlpSpec& spec) : spec_(spec) {
  spec_.validate();
  dims_.push_back(spec_.input_dim);
  for (int l = 0; l < spec_.hidden_layers; ++l) dims_.push_back(spec_.width);
  dims_.push_back(spec_.output_dim);

  Eigen::Index off = 0;
  for (int l = 0; l < layer_count(); ++l) {
    w_off_.push_back(off);
    off += static_cast<Eigen::Index>(fan_out(l)) * fan_in(l);
    b_off_.push_back(off);
    off += fan_out(l);
  }
  flat = Vec::Zero(off);
}

Eigen::Map<Mat> Mlp::weight(int layer) {
  return {flat.data() + w_off_[static_cast<size_t>(layer)], fan_out(layer), fan_in(layer)};
}
Eigen::Map<const Mat> Mlp::weight(int layer) const {
  return {flat.data() + w_off_[static_cast<size_t>(layer)], fan_out(layer), fan_in(layer)};
}
Eigen::Map<Vec> Mlp::bias(int layer) {
  return {flat.data() + b_off_[static_cast<size_t>(layer)], fan_out(layer)};
}
Eigen::Map<const Vec> Mlp::bias(int layer) const {
  return {flat.data() + b_off_[static_cast<size_t>(layer)], fan_out(layer)};
}

void init_glorot(Mlp& net, std::uint64_t seed) {
  Rng rng(seed);
  for (int l = 0; l < net.layer_count(); ++l) {
    double g = std::sqrt(6.0 / (net.fan_in(l) + net.fan_out(l)));
    auto W = net.weight(l);
    for (Eigen::Index c = 0; c < W.cols(); ++c)
      for (Eigen::Index r = 0; r < W.rows(); ++r) W(r, c) = rng.uniform(-g, g);
    net.bias(l).setZero();
  }
}

Vec IoMaps::apply_x(const Vec& u) const {
  Vec out = u;
  if (x_scale.size()) out = out.cwiseProduct(x_scale);
  if (x_center.size()) out += x_center;
  return out;
}

namespace {

// Forward activations (and input tangents when requested) for a batch of
// network inputs; layout is one column per point.
struct BatchCache {
  std::vector<Mat> A;     // A[0] = inputs; A[l] = tanh output of layer l-1
  std::vector<Mat> Adot;  // d/dxi of A
  std::vector<Mat> Zdot;  // pre-activation tangents per hidden layer
  Mat Y, Ydot;
};

void forward_batch(const Mlp& net, const Eigen::RowVectorXd& xi, bool tangent, BatchCache& c) {
  const int H = net.spec().hidden_layers;
  const Eigen::Index N = xi.size();
  c.A.assign(static_cast<size_t>(H) + 1, Mat());
  c.A[0] = xi;
  if (tangent) {
    c.Adot.assign(static_cast<size_t>(H) + 1, Mat());
    c.Zdot.assign(static_cast<size_t>(H), Mat());
    c.Adot[0] = Mat::Ones(1, N);
  }
  for (int l = 0; l < H; ++l) {
    Mat Z = net.weight(l) * c.A[static_cast<size_t>(l)];
    Z.colwise() += net.bias(l);
    c.A[static_cast<size_t>(l) + 1] = Z.array().tanh().matrix();
    if (tangent) {
      c.Zdot[static_cast<size_t>(l)] = net.weight(l) * c.Adot[static_cast<size_t>(l)];
      c.Adot[static_cast<size_t>(l) + 1] =
          ((1.0 - c.A[static_cast<size_t>(l) + 1].array().square()) *
           c.Zdot[static_cast<size_t>(l)].array())
              .matrix();
    }
  }
  c.Y = net.weight(H) * c.A[static_cast<size_t>(H)];
  c.Y.colwise() += net.bias(H);
  if (tangent) c.Ydot = net.weight(H) * c.Adot[static_cast<size_t>(H)];
}

// Reverse pass for a loss with direct dependence on both the outputs (gY) and
// their input tangents (gYdot, may be null). Hidden layers need the product
// rule through Adot = (1 - A^2) .* Zdot, which is why Zdot is cached.
void backward_batch(const Mlp& net, const BatchCache& c, const Mat& gY, const Mat* gYdot,
                    Mlp& grad) {
  const int H = net.spec().hidden_layers;
  const bool tangent = gYdot != nullptr;

  grad.weight(H).noalias() += gY * c.A[static_cast<size_t>(H)].transpose();
  if (tangent) grad.weight(H).noalias() += *gYdot * c.Adot[static_cast<size_t>(H)].transpose();
  grad.bias(H) += gY.rowwise().sum();

  Mat r = net.weight(H).transpose() * gY;
  Mat s;
  if (tangent) s = net.weight(H).transpose() * (*gYdot);

  for (int l = H - 1; l >= 0; --l) {
    const Mat& Al = c.A[static_cast<size_t>(l) + 1];
    Mat tp = (1.0 - Al.array().square()).matrix();
    Mat dZ, dZdot;
    if (tangent) {
      dZ = (tp.array() * r.array() -
            2.0 * Al.array() * tp.array() * c.Zdot[static_cast<size_t>(l)].array() * s.array())
               .matrix();
      dZdot = (tp.array() * s.array()).matrix();
    } else {
      dZ = (tp.array() * r.array()).matrix();
    }
    grad.weight(l).noalias() += dZ * c.A[static_cast<size_t>(l)].transpose();
    if (tangent)
      grad.weight(l).noalias() += dZdot * c.Adot[static_cast<size_t>(l)].transpose();
    grad.bias(l) += dZ.rowwise().sum();
    if (l > 0) {
      r = net.weight(l).transpose() * dZ;
      if (tangent) s = net.weight(l).transpose() * dZdot;
    }
  }
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

Vec forward(const Mlp& net, double t) {
  BatchCache c;
  Eigen::RowVectorXd xi(1);
  xi(0) = t;
  forward_batch(net, xi, false, c);
  return c.Y.col(0);
}

std::pair<Vec, Vec> forward_with_time_derivative(const Mlp& net, double t) {
  BatchCache c;
  Eigen::RowVectorXd xi(1);
  xi(0) = t;
  forward_batch(net, xi, true, c);
  return {c.Y.col(0), c.Ydot.col(0)};
}

// The constant-theta loss is the gated loss with theta_minus == theta_plus;
// the gate then cancels everywhere and the two theta gradients partition.
LossGrads loss_and_gradients(const Mlp& net, const Vec& theta, const SystemSpec& sys,
                             const std::vector<double>& obs_t, const Mat& obs_x,
                             const std::vector<double>& v, const std::vector<double>& col_t,
                             const std::vector<double>& w, double lambda, double reg_lambda,
                             const IoMaps& maps) {
  GatedLossGrads g = gated_loss_and_gradients(net, theta, theta, 0.0, 1.0, 0.0, 1.0, sys, obs_t,
                                              obs_x, v, col_t, w, lambda, reg_lambda, maps,
                                              true, true);
  LossGrads out;
  out.loss = g.loss;
  out.grad_phi = std::move(g.grad_phi);
  // with theta_minus == theta_plus the two halves partition the full gradient
  out.grad_theta = g.grad_theta_minus + g.grad_theta_plus;
  out.physics_energy = g.physics_energy;
  return out;
}

GatedLossGrads gated_loss_and_gradients(const Mlp& net, const Vec& theta_minus,
                                        const Vec& theta_plus, double eta, double kappa,
                                        double t_lo, double t_hi, const SystemSpec& sys,
                                        const std::vector<double>& obs_t, const Mat& obs_x,
                                        const std::vector<double>& v,
                                        const std::vector<double>& col_t,
                                        const std::vector<double>& w, double lambda,
                                        double reg_lambda, const IoMaps& maps,
                                        bool include_data, bool include_physics) {
  if (theta_minus.size() != theta_plus.size())
    throw ConfigError("gated parameter vectors differ in length");
  if (obs_t.empty() && include_data) throw ConfigError("empty observation batch");
  if (col_t.empty() && include_physics) throw ConfigError("empty collocation batch");
  if (!(lambda > 0)) throw ConfigError("lambda must be positive");
  if (reg_lambda < 0) throw ConfigError("reg_lambda must be nonnegative");

  const int d = net.spec().output_dim;
  const Eigen::Index m = theta_minus.size();
  Vec x_scale = maps.x_scale.size() ? maps.x_scale : Vec::Ones(d);

  GatedLossGrads out;
  Mlp grad(net.spec());  // zero-initialized accumulator with the same layout
  out.grad_theta_minus = Vec::Zero(m);
  out.grad_theta_plus = Vec::Zero(m);

  if (include_data) {
    const Eigen::Index N = static_cast<Eigen::Index>(obs_t.size());
    if (obs_x.cols() != N || obs_x.rows() != d || v.size() != obs_t.size())
      throw ConfigError("observation batch shapes disagree");
    Eigen::RowVectorXd xi(N);
    for (Eigen::Index j = 0; j < N; ++j) xi(j) = maps.to_xi(obs_t[static_cast<size_t>(j)]);
    BatchCache c;
    forward_batch(net, xi, false, c);
    Mat gY(d, N);
    for (Eigen::Index j = 0; j < N; ++j) {
      Vec xhat = maps.apply_x(c.Y.col(j));
      Vec diff = xhat - obs_x.col(j);
      out.loss.data += v[static_cast<size_t>(j)] * diff.squaredNorm();
      gY.col(j) = (2.0 * v[static_cast<size_t>(j)]) * diff.cwiseProduct(x_scale);
    }
    backward_batch(net, c, gY, nullptr, grad);
  }

  if (include_physics) {
    const Eigen::Index N = static_cast<Eigen::Index>(col_t.size());
    if (w.size() != col_t.size()) throw ConfigError("collocation batch shapes disagree");
    Eigen::RowVectorXd xi(N);
    for (Eigen::Index i = 0; i < N; ++i) xi(i) = maps.to_xi(col_t[static_cast<size_t>(i)]);
    BatchCache c;
    forward_batch(net, xi, true, c);

    const double tau = t_lo + (t_hi - t_lo) * sigmoid(eta);
    const Vec dtheta = theta_plus - theta_minus;
    const bool gated = dtheta.squaredNorm() > 0.0;

    Mat gY(d, N), gYdot(d, N);
    double grad_tau = 0.0;
    for (Eigen::Index i = 0; i < N; ++i) {
      const double t = col_t[static_cast<size_t>(i)];
      const double wi = w[static_cast<size_t>(i)];
      Vec xhat = maps.apply_x(c.Y.col(i));
      Vec xdot = c.Ydot.col(i).cwiseProduct(x_scale) * maps.t_scale;
      double gate_i = gated ? sigmoid(kappa * (t - tau)) : 0.0;
      Vec theta_i = gated ? Vec(theta_minus + gate_i * dtheta) : theta_minus;

      Vec f = eval_field(sys, t, xhat, theta_i);
      Vec R = xdot - f;
      out.physics_energy += wi * R.squaredNorm();

      Mat Jf = eval_state_jacobian(sys, t, xhat, theta_i);
      Vec gR = (2.0 * lambda * wi) * R;
      gY.col(i) = (-Jf.transpose() * gR).cwiseProduct(x_scale);
      gYdot.col(i) = gR.cwiseProduct(x_scale) * maps.t_scale;

      Mat G = eval_affine_parts(sys, t, xhat).G;
      Vec gtheta = -G.transpose() * gR;  // d(physics)/d(theta_i)
      out.grad_theta_minus += (1.0 - gate_i) * gtheta;
      out.grad_theta_plus += gate_i * gtheta;
      if (gated) {
        // dJ/dgate * dgate/dtau
        double dJ_dgate = gtheta.dot(dtheta);
        grad_tau += dJ_dgate * (-kappa * gate_i * (1.0 - gate_i));
      }
    }
    out.loss.physics = lambda * out.physics_energy;
    if (gated) {
      double sig = sigmoid(eta);
      out.grad_eta = grad_tau * (t_hi - t_lo) * sig * (1.0 - sig);
    }
    backward_batch(net, c, gY, &gYdot, grad);
  }

  if (reg_lambda > 0) {
    out.loss.reg = reg_lambda * net.flat.squaredNorm();
    grad.flat += (2.0 * reg_lambda) * net.flat;
  }

  out.loss.total = out.loss.data + out.loss.physics + out.loss.reg;
  out.grad_phi = std::move(grad.flat);
  return out;
}

void adam_step(AdamState& state, Eigen::Ref<Vec> vars, const Vec& grad, double lr) {
  if (!(lr > 0)) throw ConfigError("learning rate must be positive");
  if (grad.size() != vars.size() || state.m.size() != vars.size())
    throw ConfigError("adam_step shape mismatch");
  if (!grad.allFinite()) throw TrainingError("non-finite gradient in adam_step");
  state.step += 1;
  state.m = state.beta1 * state.m + (1.0 - state.beta1) * grad;
  state.v = state.beta2 * state.v + (1.0 - state.beta2) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  vars.array() -=
      lr * (state.m.array() / c1) / ((state.v.array() / c2).sqrt() + state.eps);
}

}  // namespace regimescan
