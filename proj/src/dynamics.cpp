#include "regimescan/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "regimescan/errors.hpp"

namespace regimescan {

namespace {

void check_dims(const SystemSpec& sys, const Vec& x, const Vec* theta) {
  if (x.size() != sys.state_dim)
    throw ConfigError(sys.name + ": state has dimension " + std::to_string(x.size()) +
                      ", expected " + std::to_string(sys.state_dim));
  if (theta && theta->size() != sys.param_dim)
    throw ConfigError(sys.name + ": parameter vector has dimension " +
                      std::to_string(theta->size()) + ", expected " +
                      std::to_string(sys.param_dim));
}

}  // namespace

SystemSpec system_spec(SystemId id) {
  switch (id) {
    case SystemId::malthus:         return {id, 1, 1, "malthus"};
    case SystemId::logistic:        return {id, 1, 1, "logistic"};
    case SystemId::vanderpol:       return {id, 2, 1, "vanderpol"};
    case SystemId::lotka_volterra:  return {id, 2, 4, "lotka_volterra"};
    case SystemId::lorenz:          return {id, 3, 3, "lorenz"};
  }
  throw ConfigError("unknown system id");
}

const std::vector<SystemSpec>& all_systems() {
  static const std::vector<SystemSpec> systems = {
      system_spec(SystemId::malthus), system_spec(SystemId::logistic),
      system_spec(SystemId::vanderpol), system_spec(SystemId::lotka_volterra),
      system_spec(SystemId::lorenz)};
  return systems;
}

SystemSpec system_by_name(std::string_view name) {
  for (const auto& s : all_systems())
    if (name == s.name) return s;
  // accept the hyphenated spelling used in preset names
  if (name == "lotka" || name == "lotka-volterra") return system_spec(SystemId::lotka_volterra);
  throw ConfigError("unknown system '" + std::string(name) + "'");
}

void RegimeSchedule::validate(int param_dim) const {
  if (!(t0 < T)) throw ConfigError("schedule horizon is empty");
  if (regimes.size() != breakpoints.size() + 1)
    throw ConfigError("schedule needs exactly one more regime than breakpoints");
  double prev = t0;
  for (double tau : breakpoints) {
    if (!(tau > prev) || !(tau < T))
      throw ConfigError("breakpoints must be strictly increasing inside (t0, T)");
    prev = tau;
  }
  for (const Vec& r : regimes) {
    if (r.size() != param_dim)
      throw ConfigError("regime parameter vector has wrong dimension");
    if (!r.allFinite()) throw ConfigError("regime parameters must be finite");
  }
  if (!allow_equal_adjacent) {
    for (size_t i = 0; i + 1 < regimes.size(); ++i)
      if ((regimes[i] - regimes[i + 1]).norm() == 0.0)
        throw ConfigError("adjacent regimes are equal at breakpoint " +
                          std::to_string(breakpoints[i]));
  }
}

int RegimeSchedule::regime_index(double t) const {
  const double tol = 1e-12 * std::max(1.0, std::abs(T));
  if (t < t0 - tol || t > T + tol)
    throw ConfigError("time " + std::to_string(t) + " outside schedule horizon [" +
                      std::to_string(t0) + ", " + std::to_string(T) + "]");
  int i = 0;
  while (i < static_cast<int>(breakpoints.size()) && t >= breakpoints[i]) ++i;
  return i;
}

Vec theta_at(const RegimeSchedule& s, double t) { return s.regimes[s.regime_index(t)]; }

Vec eval_field(const SystemSpec& sys, double t, const Vec& x, const Vec& theta) {
  (void)t;
  check_dims(sys, x, &theta);
  Vec f(sys.state_dim);
  switch (sys.id) {
    case SystemId::malthus:
      f(0) = theta(0) * x(0);
      break;
    case SystemId::logistic:
      f(0) = theta(0) * x(0) * (1.0 - x(0) / sys.logistic_capacity);
      break;
    case SystemId::vanderpol: {
      double M = x(0), N = x(1), mu = theta(0);
      f(0) = N;
      f(1) = mu * (1.0 - M * M) * N - M;
      break;
    }
    case SystemId::lotka_volterra: {
      double S = x(0), W = x(1);
      double alpha = theta(0), beta = theta(1), gamma = theta(2), delta = theta(3);
      f(0) = S * (alpha - beta * W);
      f(1) = -W * (gamma - delta * S);
      break;
    }
    case SystemId::lorenz: {
      double U = x(0), V = x(1), W = x(2);
      double sigma = theta(0), r = theta(1), b = theta(2);
      f(0) = sigma * (V - U);
      f(1) = r * U - V - U * W;
      f(2) = U * V - b * W;
      break;
    }
  }
  return f;
}

AffineParts eval_affine_parts(const SystemSpec& sys, double t, const Vec& x) {
  (void)t;
  check_dims(sys, x, nullptr);
  AffineParts p;
  p.G = Mat::Zero(sys.state_dim, sys.param_dim);
  p.b = Vec::Zero(sys.state_dim);
  switch (sys.id) {
    case SystemId::malthus:
      p.G(0, 0) = x(0);
      break;
    case SystemId::logistic:
      p.G(0, 0) = x(0) * (1.0 - x(0) / sys.logistic_capacity);
      break;
    case SystemId::vanderpol: {
      double M = x(0), N = x(1);
      p.G(1, 0) = (1.0 - M * M) * N;
      p.b(0) = N;
      p.b(1) = -M;
      break;
    }
    case SystemId::lotka_volterra: {
      double S = x(0), W = x(1);
      p.G(0, 0) = S;
      p.G(0, 1) = -S * W;
      p.G(1, 2) = -W;
      p.G(1, 3) = W * S;
      break;
    }
    case SystemId::lorenz: {
      double U = x(0), V = x(1), W = x(2);
      p.G(0, 0) = V - U;
      p.G(1, 1) = U;
      p.G(2, 2) = -W;
      p.b(1) = -V - U * W;
      p.b(2) = U * V;
      break;
    }
  }
  return p;
}

Mat eval_state_jacobian(const SystemSpec& sys, double t, const Vec& x, const Vec& theta) {
  (void)t;
  check_dims(sys, x, &theta);
  Mat J = Mat::Zero(sys.state_dim, sys.state_dim);
  switch (sys.id) {
    case SystemId::malthus:
      J(0, 0) = theta(0);
      break;
    case SystemId::logistic:
      J(0, 0) = theta(0) * (1.0 - 2.0 * x(0) / sys.logistic_capacity);
      break;
    case SystemId::vanderpol: {
      double M = x(0), N = x(1), mu = theta(0);
      J(0, 1) = 1.0;
      J(1, 0) = -2.0 * mu * M * N - 1.0;
      J(1, 1) = mu * (1.0 - M * M);
      break;
    }
    case SystemId::lotka_volterra: {
      double S = x(0), W = x(1);
      double alpha = theta(0), beta = theta(1), gamma = theta(2), delta = theta(3);
      J(0, 0) = alpha - beta * W;
      J(0, 1) = -beta * S;
      J(1, 0) = delta * W;
      J(1, 1) = -gamma + delta * S;
      break;
    }
    case SystemId::lorenz: {
      double U = x(0), V = x(1), W = x(2);
      double sigma = theta(0), r = theta(1), b = theta(2);
      J(0, 0) = -sigma;
      J(0, 1) = sigma;
      J(1, 0) = r - W;
      J(1, 1) = -1.0;
      J(1, 2) = -U;
      J(2, 0) = V;
      J(2, 1) = U;
      J(2, 2) = -b;
      break;
    }
  }
  return J;
}

int Trajectory::node_index(double t, double tol_scale) const {
  const double span = times.back() - times.front();
  long i = std::lround((t - times.front()) / span * static_cast<double>(times.size() - 1));
  i = std::clamp(i, 0L, static_cast<long>(times.size()) - 1);
  if (std::abs(times[static_cast<size_t>(i)] - t) > tol_scale * std::max(span, 1.0))
    throw ConfigError("time " + std::to_string(t) + " is not a grid node");
  return static_cast<int>(i);
}

InformationMatrix information_matrix(const SystemSpec& sys, const Trajectory& traj,
                                     double a, double b) {
  if (b < a) std::swap(a, b);
  const double span = traj.t_end() - traj.t0();
  if (a < traj.t0() - 1e-9 * span || b > traj.t_end() + 1e-9 * span)
    throw ConfigError("interval [" + std::to_string(a) + ", " + std::to_string(b) +
                      "] not covered by the trajectory");
  InformationMatrix out;
  out.a = a;
  out.b = b;
  out.M = Mat::Zero(sys.param_dim, sys.param_dim);
  int ia = traj.node_index(a);
  int ib = traj.node_index(b);
  if (ia == ib) return out;
  for (int j = ia; j <= ib; ++j) {
    double w = (j == ia || j == ib) ? 0.5 * traj.dt : traj.dt;
    Mat G = eval_affine_parts(sys, traj.times[static_cast<size_t>(j)], traj.states.col(j)).G;
    out.M.noalias() += w * (G.transpose() * G);
  }
  return out;
}

double alpha_estimate(const SystemSpec& sys, const Trajectory& traj,
                      const std::vector<std::pair<double, double>>& intervals) {
  if (intervals.empty()) throw ConfigError("alpha_estimate needs at least one interval");
  double alpha = std::numeric_limits<double>::infinity();
  for (auto [a, b] : intervals) {
    if (!(b > a)) throw ConfigError("alpha_estimate: zero-length interval");
    InformationMatrix im = information_matrix(sys, traj, a, b);
    Eigen::SelfAdjointEigenSolver<Mat> es(im.M);
    alpha = std::min(alpha, es.eigenvalues().minCoeff() / (b - a));
  }
  return alpha;
}

}  // namespace regimescan
