#include <doctest.h>

#include <cmath>
#include <vector>

#include "regimescan/dynamics.hpp"
#include "regimescan/errors.hpp"
#include "regimescan/local_pinn.hpp"
#include "regimescan/nn.hpp"
#include "regimescan/rng.hpp"

using namespace regimescan;

namespace {

struct Batch {
  SystemSpec sys;
  std::vector<double> obs_t;
  Mat obs_x;
  std::vector<double> v;
  std::vector<double> col_t, col_w;
  IoMaps maps;
};

// A small hand-built training batch on [0, 2]: exponential-growth data,
// six observations, eleven collocation nodes.
Batch exp_batch() {
  Batch b;
  b.sys = system_by_name("malthus");
  for (int j = 0; j <= 5; ++j) {
    b.obs_t.push_back(0.4 * j);
    b.v.push_back(1.0);
  }
  b.obs_x.resize(1, 6);
  for (int j = 0; j <= 5; ++j) b.obs_x(0, j) = std::exp(0.1 * b.obs_t[static_cast<size_t>(j)]);
  collocation_grid(0.0, 2.0, 11, b.col_t, b.col_w);
  b.maps.t_center = 1.0;
  b.maps.t_scale = 1.0;
  return b;
}

Mlp small_net(int output_dim, std::uint64_t seed) {
  MlpSpec spec;
  spec.input_dim = 1;
  spec.output_dim = output_dim;
  spec.hidden_layers = 2;
  spec.width = 8;
  Mlp net(spec);
  init_glorot(net, seed);
  return net;
}

double fd_loss_phi(Mlp net, Eigen::Index i, double h, const Vec& theta, const Batch& b,
                   double lambda, double reg_lambda) {
  net.flat(i) += h;
  return loss_and_gradients(net, theta, b.sys, b.obs_t, b.obs_x, b.v, b.col_t, b.col_w, lambda,
                            reg_lambda, b.maps)
      .loss.total;
}

}  // namespace

TEST_SUITE("nn") {

TEST_CASE("forward-mode time derivative equals a central difference") {
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    Mlp net = small_net(2, 100 + static_cast<std::uint64_t>(trial));
    const double xi = rng.uniform(-1.0, 1.0);
    const auto [u, du] = forward_with_time_derivative(net, xi);
    CHECK((u - forward(net, xi)).norm() == 0.0);
    const double h = 1e-5;
    const Vec fd = (forward(net, xi + h) - forward(net, xi - h)) / (2.0 * h);
    CHECK((du - fd).norm() <= 1e-7 * (1.0 + fd.norm()));
  }
}

TEST_CASE("glorot initialization is deterministic and in range") {
  Mlp a = small_net(1, 9);
  Mlp b = small_net(1, 9);
  Mlp c = small_net(1, 10);
  CHECK((a.flat - b.flat).norm() == 0.0);
  CHECK((a.flat - c.flat).norm() > 0.0);
  for (int l = 0; l < a.layer_count(); ++l) {
    const double limit = std::sqrt(6.0 / (a.fan_in(l) + a.fan_out(l)));
    CHECK(a.weight(l).cwiseAbs().maxCoeff() <= limit);
    CHECK(a.bias(l).cwiseAbs().maxCoeff() == 0.0);
  }
  CHECK_THROWS_AS(Mlp(MlpSpec{1, 1, -1, 8}), ConfigError);
  CHECK_THROWS_AS(Mlp(MlpSpec{1, 1, 2, 0}), ConfigError);
}

TEST_CASE("io maps recenter time and rescale outputs") {
  IoMaps maps;
  maps.t_center = 11.0;
  maps.t_scale = 1.0;  // window [10, 12]
  CHECK(maps.to_xi(10.0) == doctest::Approx(-1.0));
  CHECK(maps.to_xi(12.0) == doctest::Approx(1.0));

  Vec u(2);
  u << 1.0, -2.0;
  CHECK((IoMaps::identity().apply_x(u) - u).norm() == 0.0);

  maps.x_center = Vec::Constant(2, 5.0);
  maps.x_scale = Vec::Constant(2, 3.0);
  const Vec mapped = maps.apply_x(u);
  CHECK(mapped(0) == doctest::Approx(8.0));
  CHECK(mapped(1) == doctest::Approx(-1.0));
}

TEST_CASE("loss gradients match central differences") {
  const Batch b = exp_batch();
  Rng rng(17);
  const double lambda = 1.0, reg_lambda = 1e-4;
  for (int trial = 0; trial < 5; ++trial) {
    const Mlp net = small_net(1, 200 + static_cast<std::uint64_t>(trial));
    Vec theta(1);
    theta(0) = rng.uniform(-0.5, 0.5);
    const LossGrads g = loss_and_gradients(net, theta, b.sys, b.obs_t, b.obs_x, b.v, b.col_t,
                                           b.col_w, lambda, reg_lambda, b.maps);
    CHECK(g.loss.total ==
          doctest::Approx(g.loss.data + g.loss.physics + g.loss.reg).epsilon(1e-12));
    CHECK(g.loss.physics == doctest::Approx(lambda * g.physics_energy).epsilon(1e-12));

    for (Eigen::Index i = 0; i < net.flat.size(); i += 7) {
      const double h = 1e-5 * std::max(1.0, std::abs(net.flat(i)));
      const double fd = (fd_loss_phi(net, i, h, theta, b, lambda, reg_lambda) -
                         fd_loss_phi(net, i, -h, theta, b, lambda, reg_lambda)) /
                        (2.0 * h);
      CHECK(std::abs(g.grad_phi(i) - fd) <= 1e-4 * std::max(std::abs(fd), 1e-2));
    }

    const double h = 1e-6;
    Vec tp = theta, tm = theta;
    tp(0) += h;
    tm(0) -= h;
    const double fd_theta =
        (loss_and_gradients(net, tp, b.sys, b.obs_t, b.obs_x, b.v, b.col_t, b.col_w, lambda,
                            reg_lambda, b.maps)
             .loss.total -
         loss_and_gradients(net, tm, b.sys, b.obs_t, b.obs_x, b.v, b.col_t, b.col_w, lambda,
                            reg_lambda, b.maps)
             .loss.total) /
        (2.0 * h);
    CHECK(std::abs(g.grad_theta(0) - fd_theta) <= 1e-4 * std::max(std::abs(fd_theta), 1e-2));
  }
}

TEST_CASE("gated loss collapses to the plain loss when both regimes agree") {
  const Batch b = exp_batch();
  const Mlp net = small_net(1, 33);
  Vec theta(1);
  theta(0) = 0.2;
  const LossGrads plain = loss_and_gradients(net, theta, b.sys, b.obs_t, b.obs_x, b.v, b.col_t,
                                             b.col_w, 1.0, 0.0, b.maps);
  const GatedLossGrads gated =
      gated_loss_and_gradients(net, theta, theta, 0.3, 5.0, 0.0, 2.0, b.sys, b.obs_t, b.obs_x,
                               b.v, b.col_t, b.col_w, 1.0, 0.0, b.maps, true, true);
  CHECK(gated.loss.total == doctest::Approx(plain.loss.total).epsilon(1e-12));
  CHECK((gated.grad_phi - plain.grad_phi).norm() <= 1e-12 * (1.0 + plain.grad_phi.norm()));
  CHECK((gated.grad_theta_minus + gated.grad_theta_plus - plain.grad_theta).norm() <=
        1e-12 * (1.0 + plain.grad_theta.norm()));
  CHECK(std::abs(gated.grad_eta) <= 1e-12);  // moving tau changes nothing here
}

TEST_CASE("gated loss gradients match central differences") {
  const Batch b = exp_batch();
  Rng rng(23);
  for (int trial = 0; trial < 5; ++trial) {
    const Mlp net = small_net(1, 300 + static_cast<std::uint64_t>(trial));
    Vec th_minus(1), th_plus(1);
    th_minus(0) = rng.uniform(0.0, 0.3);
    th_plus(0) = rng.uniform(-0.3, 0.0);
    const double eta = rng.uniform(-1.0, 1.0);
    const double kappa = rng.uniform(2.0, 30.0);

    auto total = [&](const Vec& a, const Vec& c, double e) {
      return gated_loss_and_gradients(net, a, c, e, kappa, 0.0, 2.0, b.sys, b.obs_t, b.obs_x,
                                      b.v, b.col_t, b.col_w, 1.0, 0.0, b.maps, true, true)
          .loss.total;
    };
    const GatedLossGrads g =
        gated_loss_and_gradients(net, th_minus, th_plus, eta, kappa, 0.0, 2.0, b.sys, b.obs_t,
                                 b.obs_x, b.v, b.col_t, b.col_w, 1.0, 0.0, b.maps, true, true);

    const double h = 1e-6;
    Vec p = th_minus;
    p(0) += h;
    Vec m = th_minus;
    m(0) -= h;
    double fd = (total(p, th_plus, eta) - total(m, th_plus, eta)) / (2.0 * h);
    CHECK(std::abs(g.grad_theta_minus(0) - fd) <= 1e-4 * std::max(std::abs(fd), 1e-2));

    p = th_plus;
    p(0) += h;
    m = th_plus;
    m(0) -= h;
    fd = (total(th_minus, p, eta) - total(th_minus, m, eta)) / (2.0 * h);
    CHECK(std::abs(g.grad_theta_plus(0) - fd) <= 1e-4 * std::max(std::abs(fd), 1e-2));

    fd = (total(th_minus, th_plus, eta + h) - total(th_minus, th_plus, eta - h)) / (2.0 * h);
    CHECK(std::abs(g.grad_eta - fd) <= 1e-4 * std::max(std::abs(fd), 1e-2));
  }
}

TEST_CASE("phase switches silence the data or physics term") {
  const Batch b = exp_batch();
  const Mlp net = small_net(1, 55);
  Vec th_minus(1), th_plus(1);
  th_minus(0) = 0.1;
  th_plus(0) = -0.1;

  const GatedLossGrads no_physics =
      gated_loss_and_gradients(net, th_minus, th_plus, 0.0, 10.0, 0.0, 2.0, b.sys, b.obs_t,
                               b.obs_x, b.v, b.col_t, b.col_w, 1.0, 0.0, b.maps, true, false);
  CHECK(no_physics.loss.physics == 0.0);
  CHECK(no_physics.grad_theta_minus.norm() == 0.0);
  CHECK(no_physics.grad_theta_plus.norm() == 0.0);
  CHECK(no_physics.grad_eta == 0.0);
  CHECK(no_physics.loss.data > 0.0);

  const GatedLossGrads no_data =
      gated_loss_and_gradients(net, th_minus, th_plus, 0.0, 10.0, 0.0, 2.0, b.sys, b.obs_t,
                               b.obs_x, b.v, b.col_t, b.col_w, 1.0, 0.0, b.maps, false, true);
  CHECK(no_data.loss.data == 0.0);
  CHECK(no_data.loss.physics > 0.0);
}

TEST_CASE("one adam step from rest moves by the learning rate") {
  Vec vars = Vec::Zero(2);
  Vec grad(2);
  grad << 1.0, -4.0;
  AdamState st(2);
  adam_step(st, vars, grad, 0.1);
  CHECK(st.step == 1);
  // bias-corrected m-hat = g, v-hat = g^2, so the move is lr * sign(g).
  CHECK(vars(0) == doctest::Approx(-0.1).epsilon(1e-7));
  CHECK(vars(1) == doctest::Approx(0.1).epsilon(1e-7));

  Vec bad(2);
  bad << 1.0, std::nan("");
  CHECK_THROWS_AS(adam_step(st, vars, bad, 0.1), TrainingError);
}

}  // TEST_SUITE
