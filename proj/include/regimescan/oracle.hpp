#pragma once

#include <vector>

#include "regimescan/dynamics.hpp"

namespace regimescan {

// Certificate for one window of the plan. All quantities share one discrete
// measure: the full-window trapezoid node weights, split at tau with the node
// at tau assigned to the right side (right-continuous schedules). Under that
// convention floor == the quadratic-form identity exactly and the bound chain
// floor >= alpha * |I-||I+|/(|I-|+|I+|) * ||dtheta||^2 holds algebraically.
struct FloorCertificate {
  double a = 0.0, b = 0.0;
  bool crossing = false;
  double tau = 0.0;  // meaningful when crossing
  double floor = 0.0;
  double bound = 0.0;             // alpha * (lm*lp/(lm+lp)) * ||dtheta||^2
  double simplified_bound = 0.0;  // (alpha/2) * min(lm, lp) * ||dtheta||^2
  double alpha = 0.0;
  double len_minus = 0.0, len_plus = 0.0;  // discrete measures of the two sides
  double delta_theta_norm = 0.0;
  double margin = 0.0;  // floor - bound (crossing) or floor (non-crossing)
  bool pass = false;
};

// Minimizer of the window's residual quadratic: solves M(window) theta = rhs
// with rhs = integral of G^T (xdot - b), xdot evaluated exactly from the true
// schedule. Throws IdentifiabilityError when M is numerically singular.
Vec wls_theta(double a, double b, const Trajectory& traj, const SystemSpec& sys);

// (|I-| theta_minus + |I+| theta_plus) / (|I-| + |I+|)
Vec weighted_avg_theta(double len_minus, double len_plus, const Vec& theta_minus,
                       const Vec& theta_plus);

// Residual energy of a fixed constant theta over the window (trapezoid).
double window_residual(double a, double b, const Trajectory& traj, const SystemSpec& sys,
                       const Vec& theta);

// inf over theta of the window residual = window_residual at wls_theta.
double residual_floor(double a, double b, const Trajectory& traj, const SystemSpec& sys);

struct FloorBound {
  double full = 0.0;
  double simplified = 0.0;
};

// Certified lower bound for a window crossed by a single change point.
FloorBound floor_bound(double len_minus, double len_plus, double delta_theta_norm, double alpha);

// Full certificate; windows with two or more interior change points are not
// certifiable by the single-crossing bound and raise ConfigError. alpha <= 0
// (the default) estimates alpha from the window's own split matrices, which
// keeps the floor >= bound chain exact; a positive alpha overrides it.
FloorCertificate certify_window(double a, double b, const Trajectory& traj,
                                const SystemSpec& sys, double alpha = -1.0);

struct PostChangeCheck {
  double residual_norm = 0.0;
  double gamma_plus = 0.0;
  double bound = 0.0;  // gamma_plus * ||theta_plus - theta_tilde||
  double margin = 0.0;
  bool pass = false;
};

// L2 residual of running the wrong constant parameters theta_tilde on a
// post-change interval, against the identifiability bound
// gamma_plus = sqrt(lambda_min(M(E+))). The interval must lie after the first
// change point and strictly inside one regime.
PostChangeCheck post_change_check(double a, double b, const Trajectory& traj,
                                  const SystemSpec& sys, const Vec& theta_tilde);

}  // namespace regimescan
