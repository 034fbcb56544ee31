#pragma once

#include "epinet/model.hpp"
#include "epinet/rng.hpp"

#include <functional>
#include <vector>

namespace epinet {

/// One scaled transition class: jump vector in state space, propensity as a
/// function of the scaled state, and its gradient (for action descent).
struct Jump {
  Vector direction;
  std::function<double(const Vector&)> propensity;
  std::function<Vector(const Vector&)> propensity_grad;
};

struct JumpSpec {
  int dim = 0;
  std::vector<Jump> jumps;

  /// Mean velocity sum_e direction_e * propensity_e(x).
  Vector drift(const Vector& x) const;
};

/// Scaled transition classes of the population process: inflow B_i + b_i x_i,
/// death d_i x_i, transfer theta(i,j) x_i.
JumpSpec population_jumps(const NetworkModel& model);

/// Scaled transition classes of the SIR process, state stacked (s, i, r).
/// The printed rate function repeats the death-rate block twice; the
/// duplicate is off by default and available for comparison.
JumpSpec sir_jumps(const NetworkModel& model,
                   bool duplicate_death_block = false);

struct LocalRate {
  double value = 0.0;
  Vector u_opt;
  bool boundary_hit = false;  // supremum attained on the |u|_inf = u_max box
  double grad_norm = 0.0;     // inner-maximization first-order residual
};

/// Local rate function L(x, beta) = sup_u [beta.u - sum_e (e^{u.v_e}-1)
/// lambda_e(x)], evaluated by safeguarded Newton on the box |u|_inf <= u_max.
/// Zero exactly when beta equals the drift. Velocity components pointing
/// where no jump exists have a non-attained supremum; the box value is
/// returned with boundary_hit set.
LocalRate local_rate(const JumpSpec& jumps, const Vector& x,
                     const Vector& velocity, double u_max = 40.0);

struct ActionPath {
  std::vector<double> times;
  std::vector<Vector> points;
  double action = 0.0;
  double richardson_error = 0.0;
  bool any_boundary_hit = false;
};

/// Composite trapezoid quadrature of L along the piecewise-linear path,
/// velocities by centered differences (one-sided at the ends). Fills
/// action and a Richardson error estimate from the half-resolution grid.
void path_action(const JumpSpec& jumps, ActionPath& path, double u_max = 40.0);

struct ExitTarget {
  enum class Kind { point, ball_exit } kind = Kind::point;
  Vector point;        // target point, or ball center for ball_exit
  double radius = 0.0; // sup-norm ball radius (ball_exit)

  static ExitTarget to_point(Vector y);
  static ExitTarget ball(Vector center, double radius);
};

struct MinimizeOptions {
  double horizon = 10.0;
  int grid_m = 64;  // number of intervals (>= 8)
  int restarts = 4;
  double u_max = 40.0;
  int max_iterations = 600;
  double tol = 1e-9;
  RngSpec rng{};
};

/// Quasi-Newton minimum-action path from `start` to the target over a fixed
/// uniform grid; endpoints pinned, ball-exit terminals optimized on the
/// sphere. Returns the best path over all restarts; its action is an upper
/// bound on the exit cost.
ActionPath minimize_action(const JumpSpec& jumps, const Vector& start,
                           const ExitTarget& target,
                           const MinimizeOptions& opts = {});

}  // namespace epinet
