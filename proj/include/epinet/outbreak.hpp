#pragma once

#include "epinet/spectral.hpp"

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include <memory>

namespace epinet {

/// Evaluates the offspring probability generating function G of the
/// approximating branching process by linear solve:
///   (diag(lambda(s)) - theta) G(s) = d + gamma,
/// with lambda_i(s) = (1 - s_i) beta_i + sigma_i.
///
/// The solver caches the sparsity pattern of the system, which is the same
/// for every s; only the diagonal changes between calls.
class PgfSolver {
 public:
  explicit PgfSolver(const NetworkModel& model);
  ~PgfSolver();
  PgfSolver(PgfSolver&&) noexcept;
  PgfSolver& operator=(PgfSolver&&) noexcept;

  /// G(s) for s in [0,1]^n, entrywise in [0,1]. Throws ValidationError on s
  /// outside the cube, NumericalError on a singular system.
  Vector eval(const Vector& s) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// One-shot G(s) without pattern reuse.
Vector eval_G(const NetworkModel& model, const Vector& s);

struct FixedPointResult {
  Vector q;                     // last iterate
  int iterations = 0;
  double gap = 0.0;             // ||s_{k+1} - s_k||_inf at termination
  double residual = 0.0;        // ||G(q) - q||_inf
  double rate_estimate = 0.0;   // smoothed gap ratio (linear convergence rate)
  bool converged = false;
  bool monotone = true;         // iterates stayed entrywise nondecreasing
};

/// Minimal fixed point q of G by iteration from s = 0; entrywise
/// nondecreasing and bounded by 1 along the way. q = 1 iff r0 <= 1.
/// Start points other than 0 are accepted, but the minimal-fixed-point
/// guarantee only holds for s = 0.
FixedPointResult extinction_probs(const NetworkModel& model,
                                  double tol = 1e-12,
                                  long max_iter = 1000000,
                                  const Vector* start = nullptr);

/// 1 - prod_k q_k^{I0_k}; probability that an epidemic seeded with I0
/// escapes early extinction.
double major_outbreak_prob(const Vector& q, const CountVector& I0);

/// Assembles the full analytic bundle: A, abscissa, z*, C, R0, lambda1,
/// q, p, p_I0. Skips z* when the model is not subcritical.
OutbreakAnalysis analyze(const NetworkModel& model, const CountVector& I0,
                         double tol = 1e-12, long max_iter = 1000000);

}  // namespace epinet
