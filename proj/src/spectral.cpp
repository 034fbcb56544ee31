#include "epinet/spectral.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

namespace epinet {

DemographyMatrix build_A(const NetworkModel& model) {
  const int n = model.n;
  Matrix A = model.theta.transpose();
  const Vector out = model.theta_out();
  for (int i = 0; i < n; ++i) {
    A(i, i) = model.b[i] - model.d[i] - out[i];
  }
  return DemographyMatrix{std::move(A)};
}

namespace {

double spectral_abscissa(const Matrix& M) {
  Eigen::EigenSolver<Matrix> solver(M, /*computeEigenvectors=*/false);
  if (solver.info() != Eigen::Success) {
    throw NumericalError("eigenvalue solver did not converge");
  }
  return solver.eigenvalues().real().maxCoeff();
}

}  // namespace

SubcriticalityReport check_subcritical(const DemographyMatrix& demo) {
  SubcriticalityReport report;
  report.spectral_abscissa = spectral_abscissa(demo.A);
  report.boundary = report.spectral_abscissa == 0.0;
  report.subcritical = report.spectral_abscissa < 0.0;
  return report;
}

Vector solve_refined(const Matrix& A, const Vector& rhs, double tol) {
  Eigen::PartialPivLU<Matrix> lu(A);
  Vector x = lu.solve(rhs);
  const double scale = std::max(rhs.cwiseAbs().maxCoeff(), 1e-300);
  for (int sweep = 0; sweep < 5; ++sweep) {
    const Vector residual = rhs - A * x;
    if (residual.cwiseAbs().maxCoeff() <= tol * scale) return x;
    x += lu.solve(residual);
  }
  const double res = (rhs - A * x).cwiseAbs().maxCoeff();
  if (!(res <= tol * scale * 100)) {
    throw NumericalError("linear solve did not reach requested residual "
                         "(system close to singular)");
  }
  return x;
}

Vector equilibrium_population(const DemographyMatrix& demo, const Vector& B) {
  return solve_refined(demo.A, -B);
}

Matrix offspring_matrix(const NetworkModel& model) {
  const int n = model.n;
  const Vector sigma = model.sigma();
  Matrix lhs = -model.theta;
  for (int i = 0; i < n; ++i) {
    if (sigma[i] <= 0.0) {
      throw NumericalError("sigma[" + std::to_string(i) +
                           "] = 0: node has no outflow, offspring matrix "
                           "undefined");
    }
    lhs(i, i) = sigma[i];
  }
  Matrix C(n, n);
  for (int j = 0; j < n; ++j) {
    Vector rhs = Vector::Zero(n);
    rhs[j] = model.beta[j];
    C.col(j) = solve_refined(lhs, rhs);
  }
  return C;
}

double r0(const Matrix& C) {
  const int n = static_cast<int>(C.rows());
  if (C.cwiseAbs().maxCoeff() == 0.0) return 0.0;
  if (n <= 200) return spectral_abscissa(C);

  // Power iteration on C + I; the shift keeps the iteration stable for
  // periodic structure. Falls back to the dense solve on stagnation.
  Vector x = Vector::Ones(n) / std::sqrt(static_cast<double>(n));
  double lambda = 0.0;
  for (int it = 0; it < 10000; ++it) {
    Vector y = C * x + x;
    const double norm = y.norm();
    if (norm == 0.0) return 0.0;
    y /= norm;
    const double estimate = x.dot(C * y + y);
    if (it > 2 && std::abs(estimate - lambda) <= 1e-13 * std::abs(estimate)) {
      const Vector r = C * y - (estimate - 1.0) * y;
      if (r.cwiseAbs().maxCoeff() <= 1e-10 * std::abs(estimate)) {
        return estimate - 1.0;
      }
    }
    lambda = estimate;
    x = y;
  }
  return spectral_abscissa(C);
}

double growth_rate_lambda1(const NetworkModel& model) {
  const int n = model.n;
  Matrix M = model.theta;
  const Vector sigma = model.sigma();
  for (int i = 0; i < n; ++i) M(i, i) = model.beta[i] - sigma[i];
  return spectral_abscissa(M);
}

Vector lyapunov_vector(const DemographyMatrix& demo, const Vector& B) {
  const Matrix At = demo.A.transpose();
  const Vector v = solve_refined(At, -B);
  if (!(v.minCoeff() > 0.0)) {
    throw NumericalError("Lyapunov vector has a non-positive entry: model is "
                         "not connected-subcritical with B != 0");
  }
  return v;
}

}  // namespace epinet
