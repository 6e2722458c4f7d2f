#include "regimescan/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "regimescan/errors.hpp"

namespace regimescan {

namespace {

struct WindowNodes {
  int ia = 0, ib = 0;
  std::vector<double> w;  // trapezoid weights, indexed ia..ib
};

WindowNodes window_nodes(double a, double b, const Trajectory& traj) {
  if (!(a < b)) throw ConfigError("window requires a < b");
  WindowNodes nodes;
  nodes.ia = traj.node_index(a);
  nodes.ib = traj.node_index(b);
  if (nodes.ib - nodes.ia < 1) throw ConfigError("window shorter than one grid cell");
  const int count = nodes.ib - nodes.ia + 1;
  nodes.w.assign(count, traj.dt);
  nodes.w.front() = traj.dt / 2.0;
  nodes.w.back() = traj.dt / 2.0;
  return nodes;
}

Vec true_xdot(const Trajectory& traj, const SystemSpec& sys, int j) {
  const double t = traj.times[j];
  return eval_field(sys, t, traj.states.col(j), theta_at(traj.schedule, t));
}

}  // namespace

Vec wls_theta(double a, double b, const Trajectory& traj, const SystemSpec& sys) {
  const WindowNodes nodes = window_nodes(a, b, traj);
  Mat M = Mat::Zero(sys.param_dim, sys.param_dim);
  Vec rhs = Vec::Zero(sys.param_dim);
  for (int j = nodes.ia; j <= nodes.ib; ++j) {
    const double w = nodes.w[j - nodes.ia];
    const AffineParts parts = eval_affine_parts(sys, traj.times[j], traj.states.col(j));
    M.noalias() += w * parts.G.transpose() * parts.G;
    rhs.noalias() += w * parts.G.transpose() * (true_xdot(traj, sys, j) - parts.b);
  }
  Eigen::SelfAdjointEigenSolver<Mat> eig(M);
  const double lambda_min = eig.eigenvalues().minCoeff();
  if (lambda_min <= 1e-12) {
    std::ostringstream msg;
    msg << "information matrix singular on [" << a << ", " << b
        << "]: lambda_min = " << lambda_min;
    throw IdentifiabilityError(msg.str());
  }
  return M.ldlt().solve(rhs);
}

Vec weighted_avg_theta(double len_minus, double len_plus, const Vec& theta_minus,
                       const Vec& theta_plus) {
  const double total = len_minus + len_plus;
  if (!(total > 0.0)) throw ConfigError("weighted average requires positive total length");
  return (len_minus * theta_minus + len_plus * theta_plus) / total;
}

double window_residual(double a, double b, const Trajectory& traj, const SystemSpec& sys,
                       const Vec& theta) {
  const WindowNodes nodes = window_nodes(a, b, traj);
  double energy = 0.0;
  for (int j = nodes.ia; j <= nodes.ib; ++j) {
    const Vec r = true_xdot(traj, sys, j) -
                  eval_field(sys, traj.times[j], traj.states.col(j), theta);
    energy += nodes.w[j - nodes.ia] * r.squaredNorm();
  }
  return energy;
}

double residual_floor(double a, double b, const Trajectory& traj, const SystemSpec& sys) {
  return window_residual(a, b, traj, sys, wls_theta(a, b, traj, sys));
}

FloorBound floor_bound(double len_minus, double len_plus, double delta_theta_norm,
                       double alpha) {
  const double total = len_minus + len_plus;
  if (!(total > 0.0)) throw ConfigError("floor bound requires positive window length");
  FloorBound out;
  const double d2 = delta_theta_norm * delta_theta_norm;
  out.full = alpha * (len_minus * len_plus / total) * d2;
  out.simplified = 0.5 * alpha * std::min(len_minus, len_plus) * d2;
  return out;
}

FloorCertificate certify_window(double a, double b, const Trajectory& traj,
                                const SystemSpec& sys, double alpha) {
  const WindowNodes nodes = window_nodes(a, b, traj);
  FloorCertificate cert;
  cert.a = a;
  cert.b = b;

  // Change points whose node splits the window's measure: the node at the
  // change point carries the new regime (right-continuous switch), so a
  // breakpoint on the right edge still mixes regimes, one on the left does not.
  std::vector<double> interior;
  for (double bp : traj.schedule.breakpoints) {
    const int jb = traj.node_index(bp);
    if (jb > nodes.ia && jb <= nodes.ib) interior.push_back(bp);
  }
  if (interior.size() > 1) {
    std::ostringstream msg;
    msg << "window [" << a << ", " << b << "] crosses " << interior.size()
        << " change points; the certificate covers a single crossing";
    throw ConfigError(msg.str());
  }

  cert.floor = residual_floor(a, b, traj, sys);
  if (interior.empty()) {
    cert.crossing = false;
    cert.margin = cert.floor;
    cert.pass = true;
    return cert;
  }

  cert.crossing = true;
  cert.tau = interior.front();
  const int j_tau = traj.node_index(cert.tau);

  Mat A_minus = Mat::Zero(sys.param_dim, sys.param_dim);
  Mat A_plus = Mat::Zero(sys.param_dim, sys.param_dim);
  double len_minus = 0.0, len_plus = 0.0;
  for (int j = nodes.ia; j <= nodes.ib; ++j) {
    const double w = nodes.w[j - nodes.ia];
    const AffineParts parts = eval_affine_parts(sys, traj.times[j], traj.states.col(j));
    const Mat gram = parts.G.transpose() * parts.G;
    if (j < j_tau) {
      A_minus.noalias() += w * gram;
      len_minus += w;
    } else {
      A_plus.noalias() += w * gram;
      len_plus += w;
    }
  }
  cert.len_minus = len_minus;
  cert.len_plus = len_plus;

  if (alpha > 0.0) {
    cert.alpha = alpha;
  } else {
    Eigen::SelfAdjointEigenSolver<Mat> eig_minus(A_minus);
    Eigen::SelfAdjointEigenSolver<Mat> eig_plus(A_plus);
    cert.alpha = std::min(eig_minus.eigenvalues().minCoeff() / len_minus,
                          eig_plus.eigenvalues().minCoeff() / len_plus);
  }

  const Vec theta_minus = theta_at(traj.schedule, a);
  const Vec theta_plus = theta_at(traj.schedule, cert.tau);
  cert.delta_theta_norm = (theta_plus - theta_minus).norm();

  const FloorBound bound =
      floor_bound(len_minus, len_plus, cert.delta_theta_norm, cert.alpha);
  cert.bound = bound.full;
  cert.simplified_bound = bound.simplified;
  cert.margin = cert.floor - cert.bound;
  cert.pass = cert.margin >= -1e-9 * std::max(1.0, cert.bound);
  return cert;
}

PostChangeCheck post_change_check(double a, double b, const Trajectory& traj,
                                  const SystemSpec& sys, const Vec& theta_tilde) {
  if (traj.schedule.breakpoints.empty())
    throw ConfigError("post-change check requires a schedule with a change point");
  const double first_bp = traj.schedule.breakpoints.front();
  if (a < first_bp - 1e-9)
    throw ConfigError("post-change interval must start at or after the first change point");
  for (double bp : traj.schedule.breakpoints) {
    if (bp > a + 1e-9 && bp < b - 1e-9)
      throw ConfigError("post-change interval must lie inside a single regime");
  }

  PostChangeCheck check;
  check.residual_norm = std::sqrt(window_residual(a, b, traj, sys, theta_tilde));
  const InformationMatrix info = information_matrix(sys, traj, a, b);
  Eigen::SelfAdjointEigenSolver<Mat> eig(info.M);
  check.gamma_plus = std::sqrt(std::max(0.0, eig.eigenvalues().minCoeff()));
  const Vec theta_plus = theta_at(traj.schedule, 0.5 * (a + b));
  check.bound = check.gamma_plus * (theta_plus - theta_tilde).norm();
  check.margin = check.residual_norm - check.bound;
  check.pass = check.margin >= -1e-9;
  return check;
}

}  // namespace regimescan
