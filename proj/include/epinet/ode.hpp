#pragma once

#include "epinet/spectral.hpp"

#include <vector>

namespace epinet {

/// Closed-form solution of z' = A z + B: z(t) = e^{tA}(x0 - z*) + z* with
/// z* = -A^{-1} B. Requires invertible A.
Vector linear_flow(const Matrix& A, const Vector& B, const Vector& x0,
                   double t);

/// Same flow evaluated on a whole grid; reuses the step propagator when the
/// grid is uniform.
std::vector<Vector> linear_flow_grid(const Matrix& A, const Vector& B,
                                     const Vector& x0,
                                     const std::vector<double>& times);

/// Infection-pressure denominator of the deterministic SIR system:
/// the instantaneous node total s_k+i_k+r_k (matching the stochastic rates)
/// or the fixed equilibrium z*_k (the variant printed alongside Theorem 2).
enum class DenominatorMode { current_total, z_star };

struct DeterministicState {
  Vector s, i, r;
};

struct OdeTrajectory {
  std::vector<double> times;
  std::vector<DeterministicState> states;
};

/// Right-hand side of the 3n-dimensional SIR system, state stacked (s,i,r).
Vector sir_rhs(const NetworkModel& model, const Vector& z_star,
               DenominatorMode mode, const Vector& state);
Matrix sir_jacobian(const NetworkModel& model, const Vector& z_star,
                    DenominatorMode mode, const Vector& state);

/// Adaptive embedded Runge-Kutta (Dormand-Prince 5(4)) integration of the
/// SIR system. Steps that would leave the nonnegative orthant are rejected
/// and retried smaller. Requires i != 0 initially (domain E).
OdeTrajectory integrate_sir_ode(const NetworkModel& model,
                                const Vector& z_star,
                                const DeterministicState& init, double t_end,
                                double rel_tol = 1e-9,
                                DenominatorMode mode =
                                    DenominatorMode::current_total,
                                int max_samples = 1000);

struct Endemic1D {
  double s, i, r;
};

/// Closed-form endemic steady state of the one-node system; requires
/// d > b and beta > d + gamma.
Endemic1D endemic_equilibrium_1d(double B, double b, double d, double beta,
                                 double gamma);

struct EquilibriumReport {
  DeterministicState point;
  double residual = 0.0;
  double jacobian_abscissa = 0.0;
  enum class Class { stable_endemic, unstable, disease_free } classification =
      Class::disease_free;
  bool converged = false;
  int iterations = 0;
};

/// Damped Newton search for a stationary point of the SIR system, started
/// from s = 0.8 z*, i = 0.1 z*, r = 0.1 z*. Classification from the Jacobian
/// spectral abscissa at the root; roots with i ~ 0 report disease-free.
EquilibriumReport find_endemic_equilibrium(const NetworkModel& model,
                                           const Vector& z_star,
                                           DenominatorMode mode =
                                               DenominatorMode::current_total);

/// V(t) = s - s* log s + i - i* log i along a one-node trajectory;
/// non-increasing when the total population sits at z*.
std::vector<double> lyapunov_V(const OdeTrajectory& trajectory, double s_star,
                               double i_star);

}  // namespace epinet
