#include <doctest.h>

#include <cmath>

#include "regimescan/errors.hpp"
#include "regimescan/oracle.hpp"
#include "regimescan/rng.hpp"
#include "regimescan/simulate.hpp"

using namespace regimescan;

namespace {

Vec vec(std::initializer_list<double> xs) {
  Vec v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

Trajectory malthus_traj() {
  RegimeSchedule s;
  s.t0 = 0.0;
  s.T = 100.0;
  s.breakpoints = {40.0};
  s.regimes = {vec({0.1}), vec({0.05})};
  return integrate(system_by_name("malthus"), s, vec({1.0}), 0.01);
}

Trajectory lv_traj() {
  RegimeSchedule s;
  s.t0 = 0.0;
  s.T = 60.0;
  s.breakpoints = {20.0, 40.0};
  s.regimes = {vec({2.0, 1.0, 2.0, 1.0}), vec({4.0, 2.0, 3.0, 4.0}), vec({3.0, 4.0, 1.0, 2.0})};
  return integrate(system_by_name("lotka_volterra"), s, vec({1.0, 1.0}), 0.01);
}

// Independent re-derivation of the split information matrices: full-window
// trapezoid weights, nodes at or after tau feed the post-change side.
void split_matrices(const Trajectory& traj, const SystemSpec& sys, double a, double b,
                    double tau, Mat& A_minus, Mat& A_plus, double& len_minus,
                    double& len_plus) {
  const int ia = traj.node_index(a);
  const int ib = traj.node_index(b);
  A_minus = Mat::Zero(sys.param_dim, sys.param_dim);
  A_plus = Mat::Zero(sys.param_dim, sys.param_dim);
  len_minus = len_plus = 0.0;
  for (int j = ia; j <= ib; ++j) {
    const double w = (j == ia || j == ib) ? 0.5 * traj.dt : traj.dt;
    const double t = traj.times[static_cast<size_t>(j)];
    const Mat G = eval_affine_parts(sys, t, traj.states.col(j)).G;
    if (t < tau) {
      A_minus.noalias() += w * (G.transpose() * G);
      len_minus += w;
    } else {
      A_plus.noalias() += w * (G.transpose() * G);
      len_plus += w;
    }
  }
}

}  // namespace

TEST_SUITE("oracle") {

TEST_CASE("least squares recovers the generating parameters exactly") {
  const Trajectory traj = malthus_traj();
  const SystemSpec sys = system_by_name("malthus");
  CHECK(std::abs(wls_theta(10.0, 12.0, traj, sys)(0) - 0.1) <= 1e-10);
  CHECK(std::abs(wls_theta(60.0, 62.0, traj, sys)(0) - 0.05) <= 1e-10);

  const Trajectory lv = lv_traj();
  const SystemSpec lv_sys = system_by_name("lotka_volterra");
  const Vec th = wls_theta(5.0, 9.0, lv, lv_sys);
  CHECK((th - vec({2.0, 1.0, 2.0, 1.0})).norm() <= 1e-8);
}

TEST_CASE("least squares is affine in the generating parameters") {
  // Shifting every regime by c shifts the derivative data by G*c, so the
  // estimate must shift by exactly c while the states stay fixed.
  const Trajectory traj = lv_traj();
  const SystemSpec sys = system_by_name("lotka_volterra");
  Trajectory shifted = traj;
  const Vec c = vec({0.5, -0.25, 1.0, 2.0});
  for (Vec& r : shifted.schedule.regimes) r += c;
  const Vec base = wls_theta(11.0, 14.0, traj, sys);
  const Vec moved = wls_theta(11.0, 14.0, shifted, sys);
  CHECK((moved - base - c).norm() <= 1e-9);
}

TEST_CASE("identifiability failure is reported, not silently inverted") {
  RegimeSchedule s;
  s.t0 = 0.0;
  s.T = 10.0;
  s.regimes = {vec({0.1})};
  const Trajectory flat = integrate(system_by_name("malthus"), s, vec({0.0}), 0.01);
  CHECK_THROWS_AS(wls_theta(2.0, 4.0, flat, system_by_name("malthus")), IdentifiabilityError);
}

TEST_CASE("window residual is the information-matrix quadratic") {
  const Trajectory traj = malthus_traj();
  const SystemSpec sys = system_by_name("malthus");
  const InformationMatrix im = information_matrix(sys, traj, 10.0, 12.0);
  const double d = 0.05;  // probe at theta_true + d
  const double res = window_residual(10.0, 12.0, traj, sys, vec({0.1 + d}));
  CHECK(res == doctest::Approx(d * d * im.M(0, 0)).epsilon(1e-10));

  const Trajectory lv = lv_traj();
  const SystemSpec lv_sys = system_by_name("lotka_volterra");
  const InformationMatrix im_lv = information_matrix(lv_sys, lv, 5.0, 9.0);
  Rng rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    Vec dtheta(4);
    for (int i = 0; i < 4; ++i) dtheta(i) = rng.uniform(-0.5, 0.5);
    const Vec probe = vec({2.0, 1.0, 2.0, 1.0}) + dtheta;
    const double got = window_residual(5.0, 9.0, lv, lv_sys, probe);
    const double expected = dtheta.dot(im_lv.M * dtheta);
    CHECK(got == doctest::Approx(expected).epsilon(1e-9));
  }
}

TEST_CASE("residual floor vanishes off the change point and is a true minimum") {
  const Trajectory traj = malthus_traj();
  const SystemSpec sys = system_by_name("malthus");
  CHECK(residual_floor(10.0, 12.0, traj, sys) <= 1e-10);
  CHECK(residual_floor(60.0, 62.0, traj, sys) <= 1e-10);

  const double floor = residual_floor(39.0, 41.0, traj, sys);
  CHECK(floor > 1e-4);
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const Vec probe = vec({rng.uniform(-0.5, 0.5)});
    CHECK(window_residual(39.0, 41.0, traj, sys, probe) >= floor - 1e-9);
  }
}

TEST_CASE("crossing floor equals the two-regime quadratic computed from scratch") {
  const Trajectory traj = malthus_traj();
  const SystemSpec sys = system_by_name("malthus");
  Mat A_minus, A_plus;
  double len_minus = 0.0, len_plus = 0.0;
  split_matrices(traj, sys, 39.0, 41.0, 40.0, A_minus, A_plus, len_minus, len_plus);
  const Vec th_minus = vec({0.1}), th_plus = vec({0.05});
  const Vec th_star =
      (A_minus + A_plus).ldlt().solve(A_minus * th_minus + A_plus * th_plus);
  const Vec dm = th_star - th_minus, dp = th_star - th_plus;
  const double expected = dm.dot(A_minus * dm) + dp.dot(A_plus * dp);
  CHECK(residual_floor(39.0, 41.0, traj, sys) == doctest::Approx(expected).epsilon(1e-10));
  // Split lengths inherit the trapezoid end corrections.
  CHECK(len_minus == doctest::Approx(1.0 - 0.005).epsilon(1e-9));
  CHECK(len_plus == doctest::Approx(1.0 + 0.005).epsilon(1e-9));
}

TEST_CASE("weighted average leans toward the longer side") {
  const Vec avg = weighted_avg_theta(1.0, 3.0, vec({0.0}), vec({4.0}));
  CHECK(avg(0) == doctest::Approx(3.0));
  const Vec same = weighted_avg_theta(2.0, 2.0, vec({1.0, 5.0}), vec({3.0, 7.0}));
  CHECK(same(0) == doctest::Approx(2.0));
  CHECK(same(1) == doctest::Approx(6.0));
}

TEST_CASE("lower bound formula and its simplified variant") {
  const FloorBound even = floor_bound(1.0, 1.0, 0.05, 2.0);
  CHECK(even.full == doctest::Approx(0.0025).epsilon(1e-14));
  CHECK(even.simplified == doctest::Approx(0.0025).epsilon(1e-14));

  const FloorBound skew = floor_bound(1.0, 3.0, 0.1, 2.0);
  CHECK(skew.full == doctest::Approx(2.0 * 0.75 * 0.01).epsilon(1e-14));
  CHECK(skew.simplified == doctest::Approx(0.5 * 2.0 * 1.0 * 0.01).epsilon(1e-14));
  CHECK(skew.full >= skew.simplified);

  CHECK_THROWS_AS(floor_bound(0.0, 0.0, 0.1, 2.0), ConfigError);
}

TEST_CASE("certificates pass on every window of the exponential benchmark") {
  const Trajectory traj = malthus_traj();
  const SystemSpec sys = system_by_name("malthus");
  int crossing_count = 0;
  for (int k = 0; k < 99; ++k) {
    const double a = static_cast<double>(k), b = a + 2.0;
    const FloorCertificate cert = certify_window(a, b, traj, sys);
    CHECK(cert.pass);
    if (cert.crossing) {
      ++crossing_count;
      CHECK(cert.tau == doctest::Approx(40.0));
      CHECK(cert.delta_theta_norm == doctest::Approx(0.05).epsilon(1e-12));
      CHECK(cert.floor >= cert.bound - 1e-9);
      CHECK(cert.bound >= cert.simplified_bound - 1e-15);
      CHECK(cert.alpha > 0.0);
    } else {
      CHECK(cert.floor <= 1e-10);
    }
  }
  // The node at t = 40 carries the new regime, so [38,40] mixes regimes while
  // [40,42] is entirely post-switch: two crossings.
  CHECK(crossing_count == 2);
}

TEST_CASE("a window across two change points is refused") {
  const Trajectory lv = lv_traj();
  CHECK_THROWS_AS(certify_window(19.0, 41.0, lv, system_by_name("lotka_volterra")),
                  ConfigError);
}

TEST_CASE("floors are stable under grid refinement") {
  RegimeSchedule s;
  s.t0 = 0.0;
  s.T = 100.0;
  s.breakpoints = {40.0};
  s.regimes = {vec({0.1}), vec({0.05})};
  const SystemSpec sys = system_by_name("malthus");
  const Trajectory coarse = integrate(sys, s, vec({1.0}), 0.01);
  const Trajectory fine = integrate(sys, s, vec({1.0}), 0.005);
  const double f_coarse = residual_floor(39.0, 41.0, coarse, sys);
  const double f_fine = residual_floor(39.0, 41.0, fine, sys);
  CHECK(std::abs(f_coarse - f_fine) <= 0.01 * f_fine);
}

TEST_CASE("post-change residual respects the eigenvalue bound") {
  const Trajectory traj = malthus_traj();
  const SystemSpec sys = system_by_name("malthus");
  const PostChangeCheck chk = post_change_check(45.0, 55.0, traj, sys, vec({0.1}));
  CHECK(chk.pass);
  CHECK(chk.margin >= -1e-9);
  // One parameter: the bound is tight, residual = gamma_plus * |shift| exactly.
  CHECK(chk.residual_norm == doctest::Approx(chk.gamma_plus * 0.05).epsilon(1e-9));
  const InformationMatrix im = information_matrix(sys, traj, 45.0, 55.0);
  CHECK(chk.gamma_plus == doctest::Approx(std::sqrt(im.M(0, 0))).epsilon(1e-12));

  const Trajectory lv = lv_traj();
  const SystemSpec lv_sys = system_by_name("lotka_volterra");
  Rng rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    Vec tilde(4);
    for (int i = 0; i < 4; ++i) tilde(i) = rng.uniform(0.0, 5.0);
    const PostChangeCheck c2 = post_change_check(45.0, 55.0, lv, lv_sys, tilde);
    CHECK(c2.margin >= -1e-9);
  }

  // The window must start at or after a change point and contain none inside.
  CHECK_THROWS_AS(post_change_check(10.0, 20.0, traj, sys, vec({0.1})), ConfigError);
  CHECK_THROWS_AS(post_change_check(15.0, 25.0, lv, lv_sys, vec({1.0, 1.0, 1.0, 1.0})),
                  ConfigError);
}

}  // TEST_SUITE
