#pragma once

#include "epinet/model.hpp"

namespace epinet {

/// Drift matrix of the mean scaled population: d/dt E[X/N] = A z + B.
/// Diagonal A(i,i) = b[i] - d[i] - sum_{j != i} theta(i,j); off-diagonal
/// A(i,j) = theta(j,i). Metzler by construction.
struct DemographyMatrix {
  Matrix A;
};

struct SubcriticalityReport {
  double spectral_abscissa = 0.0;
  bool subcritical = false;
  bool boundary = false;  // abscissa numerically at 0
};

DemographyMatrix build_A(const NetworkModel& model);

/// Spectral abscissa (max real part of the eigenvalues) and the sign test.
/// An exact zero classifies as non-subcritical with a boundary flag.
SubcriticalityReport check_subcritical(const DemographyMatrix& demo);

/// Equilibrium scaled population z* solving A z + B = 0.
/// Requires a subcritical A; refined until ||A z + B||_inf < 1e-12 ||B||_inf.
Vector equilibrium_population(const DemographyMatrix& demo, const Vector& B);

/// Mean offspring matrix C = (diag(sigma) - theta)^-1 diag(beta):
/// C(i,j) = expected secondary infections in node j caused by an infective
/// starting in node i.
Matrix offspring_matrix(const NetworkModel& model);

/// Perron root of a nonnegative matrix (dominant eigenvalue, real).
/// Dense eigensolve for n <= 200, power iteration with dense fallback above.
double r0(const Matrix& C);

/// Maximal real eigenvalue of M with M(i,i) = beta[i] - sigma[i] and
/// M(i,j) = theta(i,j): the early exponential growth rate of the
/// approximating branching process. Positive iff r0 > 1.
double growth_rate_lambda1(const NetworkModel& model);

/// v = -(A^T)^-1 B; strictly positive for connected subcritical models with
/// B != 0. Throws NumericalError if a non-positive entry shows up.
Vector lyapunov_vector(const DemographyMatrix& demo, const Vector& B);

/// Everything the `analyze` subcommand reports. z_star is empty when the
/// model is not subcritical (A is then singular or unstable).
struct OutbreakAnalysis {
  Matrix A;
  double spectral_abscissa = 0.0;
  bool subcritical = false;
  Vector z_star;  // empty unless subcritical
  Matrix C;
  double R0 = 0.0;
  double lambda1 = 0.0;
  Vector q;
  Vector p;  // 1 - q
  double p_I0 = 0.0;
  bool r0_boundary = false;  // R0 numerically at 1
  bool fixed_point_converged = true;
};

/// Solves A x = rhs by partial-pivot LU with iterative refinement until
/// ||A x - rhs||_inf <= tol * ||rhs||_inf (a few refinement sweeps).
Vector solve_refined(const Matrix& A, const Vector& rhs, double tol = 1e-12);

}  // namespace epinet
