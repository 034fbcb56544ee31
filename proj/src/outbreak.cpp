#include "epinet/outbreak.hpp"

#include <cmath>
#include <vector>

namespace epinet {

struct PgfSolver::Impl {
  int n = 0;
  Vector beta;
  Vector sigma;
  Vector omega;  // d + gamma
  bool dense = false;
  Matrix dense_lhs;                        // rebuilt diagonal per call
  Eigen::SparseMatrix<double> sparse_lhs;  // pattern fixed, values per call
  mutable Eigen::SparseLU<Eigen::SparseMatrix<double>> sparse_solver;
  bool pattern_analyzed = false;
  std::vector<int> diag_index;  // offsets of diagonal entries in value array
};

PgfSolver::PgfSolver(const NetworkModel& model) : impl_(new Impl) {
  Impl& im = *impl_;
  im.n = model.n;
  im.beta = model.beta;
  im.sigma = model.sigma();
  im.omega = model.d + model.gamma;
  if (im.omega.maxCoeff() <= 0.0) {
    throw ValidationError("PGF undefined: all d[i] + gamma[i] are zero");
  }
  im.dense = model.n <= 32;
  if (im.dense) {
    im.dense_lhs = -model.theta;
  } else {
    std::vector<Eigen::Triplet<double>> trip;
    for (int i = 0; i < im.n; ++i) {
      trip.emplace_back(i, i, 1.0);
      for (int j = 0; j < im.n; ++j) {
        if (j != i && model.theta(i, j) > 0) {
          trip.emplace_back(i, j, -model.theta(i, j));
        }
      }
    }
    im.sparse_lhs.resize(im.n, im.n);
    im.sparse_lhs.setFromTriplets(trip.begin(), trip.end());
    im.sparse_lhs.makeCompressed();
    im.sparse_solver.analyzePattern(im.sparse_lhs);
    im.pattern_analyzed = true;
    im.diag_index.assign(im.n, -1);
    for (int k = 0; k < im.sparse_lhs.outerSize(); ++k) {
      for (Eigen::SparseMatrix<double>::InnerIterator it(im.sparse_lhs, k); it;
           ++it) {
        if (it.row() == it.col()) {
          im.diag_index[it.row()] = static_cast<int>(&it.valueRef() -
                                                     im.sparse_lhs.valuePtr());
        }
      }
    }
  }
}

PgfSolver::~PgfSolver() = default;
PgfSolver::PgfSolver(PgfSolver&&) noexcept = default;
PgfSolver& PgfSolver::operator=(PgfSolver&&) noexcept = default;

Vector PgfSolver::eval(const Vector& s) const {
  Impl& im = *impl_;
  if (s.size() != im.n) throw ValidationError("PGF argument has wrong size");
  for (int i = 0; i < im.n; ++i) {
    if (!(s[i] >= 0.0 && s[i] <= 1.0)) {
      throw ValidationError("PGF argument outside [0,1]^n");
    }
  }
  Vector g(im.n);
  if (im.dense) {
    Matrix lhs = im.dense_lhs;
    for (int i = 0; i < im.n; ++i) {
      lhs(i, i) = (1.0 - s[i]) * im.beta[i] + im.sigma[i];
    }
    g = solve_refined(lhs, im.omega);
  } else {
    double* values = im.sparse_lhs.valuePtr();
    for (int i = 0; i < im.n; ++i) {
      values[im.diag_index[i]] = (1.0 - s[i]) * im.beta[i] + im.sigma[i];
    }
    im.sparse_solver.factorize(im.sparse_lhs);
    if (im.sparse_solver.info() != Eigen::Success) {
      throw NumericalError("PGF system singular (connectivity or absorption "
                           "assumption violated)");
    }
    g = im.sparse_solver.solve(im.omega);
  }
  // The exact solution lies in [0,1]^n; trim roundoff spill.
  for (int i = 0; i < im.n; ++i) g[i] = std::min(1.0, std::max(0.0, g[i]));
  return g;
}

Vector eval_G(const NetworkModel& model, const Vector& s) {
  return PgfSolver(model).eval(s);
}

FixedPointResult extinction_probs(const NetworkModel& model, double tol,
                                  long max_iter, const Vector* start) {
  if (!(tol > 0)) throw ValidationError("tol must be positive");
  if (max_iter < 1) throw ValidationError("max_iter must be positive");
  PgfSolver solver(model);
  FixedPointResult res;
  Vector s = start ? *start : Vector::Zero(model.n);
  const bool from_zero = (start == nullptr);
  double prev_gap = -1.0;
  double rate = 0.0;
  int rate_samples = 0;
  for (long k = 0; k < max_iter; ++k) {
    const Vector next = solver.eval(s);
    res.gap = (next - s).cwiseAbs().maxCoeff();
    if (from_zero && (next - s).minCoeff() < -1e-13) res.monotone = false;
    if (prev_gap > 0 && res.gap > 0) {
      rate += res.gap / prev_gap;
      ++rate_samples;
    }
    prev_gap = res.gap;
    s = next;
    res.iterations = static_cast<int>(k + 1);
    if (res.gap < tol) {
      res.converged = true;
      break;
    }
  }
  res.q = s;
  res.residual = (solver.eval(s) - s).cwiseAbs().maxCoeff();
  res.rate_estimate = rate_samples > 0 ? rate / rate_samples : 0.0;
  return res;
}

double major_outbreak_prob(const Vector& q, const CountVector& I0) {
  if (q.size() != I0.size()) {
    throw ValidationError("q and I0 dimension mismatch");
  }
  double prod = 1.0;
  for (int i = 0; i < q.size(); ++i) {
    if (!(q[i] >= 0.0 && q[i] <= 1.0)) {
      throw ValidationError("q entries must lie in [0,1]");
    }
    if (I0[i] < 0) throw ValidationError("I0 entries must be nonnegative");
    if (I0[i] > 0) prod *= std::pow(q[i], static_cast<double>(I0[i]));
  }
  return 1.0 - prod;
}

OutbreakAnalysis analyze(const NetworkModel& model, const CountVector& I0,
                         double tol, long max_iter) {
  model.validate();
  OutbreakAnalysis out;
  DemographyMatrix demo = build_A(model);
  const SubcriticalityReport sub = check_subcritical(demo);
  out.spectral_abscissa = sub.spectral_abscissa;
  out.subcritical = sub.subcritical;
  if (sub.subcritical && model.B.maxCoeff() > 0.0) {
    out.z_star = equilibrium_population(demo, model.B);
  }
  out.A = std::move(demo.A);
  out.C = offspring_matrix(model);
  out.R0 = r0(out.C);
  out.r0_boundary = out.R0 == 1.0;
  out.lambda1 = growth_rate_lambda1(model);
  FixedPointResult fp = extinction_probs(model, tol, max_iter);
  out.fixed_point_converged = fp.converged;
  out.q = std::move(fp.q);
  out.p = Vector::Ones(model.n) - out.q;
  out.p_I0 = major_outbreak_prob(out.q, I0);
  return out;
}

}  // namespace epinet
