#pragma once

#include <Eigen/Dense>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace regimescan {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

enum class SystemId { malthus, logistic, vanderpol, lotka_volterra, lorenz };

struct SystemSpec {
  SystemId id;
  int state_dim;
  int param_dim;
  std::string name;
  // Logistic carrying capacity; a known constant, never estimated.
  double logistic_capacity = 100.0;
};

SystemSpec system_spec(SystemId id);
SystemSpec system_by_name(std::string_view name);
const std::vector<SystemSpec>& all_systems();

// Piecewise-constant parameter schedule over [t0, T]. Regime i is active on
// [breakpoints[i-1], breakpoints[i]) with breakpoints[-1] = t0 (right-continuous).
struct RegimeSchedule {
  double t0 = 0.0;
  double T = 0.0;
  std::vector<double> breakpoints;  // strictly increasing, inside (t0, T)
  std::vector<Vec> regimes;         // breakpoints.size() + 1 entries
  bool allow_equal_adjacent = false;

  void validate(int param_dim) const;
  int regime_index(double t) const;
};

Vec theta_at(const RegimeSchedule& s, double t);

Vec eval_field(const SystemSpec& sys, double t, const Vec& x, const Vec& theta);

// f(t,x;theta) = G(t,x) * theta + b(t,x)
struct AffineParts {
  Mat G;
  Vec b;
};
AffineParts eval_affine_parts(const SystemSpec& sys, double t, const Vec& x);

// df/dx at (t, x, theta); analytic, used by the loss gradients.
Mat eval_state_jacobian(const SystemSpec& sys, double t, const Vec& x, const Vec& theta);

// Simulated solution on a uniform grid. Carries its schedule so downstream
// exact computations (floors, certificates) can evaluate the true field.
struct Trajectory {
  SystemId system;
  RegimeSchedule schedule;
  std::vector<double> times;  // uniform, includes every breakpoint as a node
  Mat states;                 // state_dim x times.size()
  double dt = 0.0;

  double t0() const { return times.front(); }
  double t_end() const { return times.back(); }
  // Nearest grid node; throws if t is farther than tol from any node.
  int node_index(double t, double tol_scale = 1e-6) const;
};

struct InformationMatrix {
  Mat M;  // symmetric PSD, param_dim x param_dim
  double a = 0.0, b = 0.0;
};

// M(J) = integral over J of G^T G dt, composite trapezoid on the trajectory
// grid restricted to [a, b]. a == b gives the zero matrix.
InformationMatrix information_matrix(const SystemSpec& sys, const Trajectory& traj,
                                     double a, double b);

// min over intervals of lambda_min(M(J)) / |J|
double alpha_estimate(const SystemSpec& sys, const Trajectory& traj,
                      const std::vector<std::pair<double, double>>& intervals);

}  // namespace regimescan
