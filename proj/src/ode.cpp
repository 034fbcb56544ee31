#include "epinet/ode.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>

namespace epinet {

Vector linear_flow(const Matrix& A, const Vector& B, const Vector& x0,
                   double t) {
  const Vector z_star = solve_refined(A, -B);
  return (t * A).exp() * (x0 - z_star) + z_star;
}

std::vector<Vector> linear_flow_grid(const Matrix& A, const Vector& B,
                                     const Vector& x0,
                                     const std::vector<double>& times) {
  std::vector<Vector> out;
  out.reserve(times.size());
  if (times.empty()) return out;
  const Vector z_star = solve_refined(A, -B);

  bool uniform = times.size() >= 2;
  const double dt0 = uniform ? times[1] - times[0] : 0.0;
  for (std::size_t k = 2; k < times.size() && uniform; ++k) {
    uniform = std::abs((times[k] - times[k - 1]) - dt0) <= 1e-9 * (1 + dt0);
  }
  if (uniform && times.size() >= 2) {
    const Matrix step = (dt0 * A).exp();
    Vector w = (times[0] * A).exp() * (x0 - z_star);
    for (std::size_t k = 0; k < times.size(); ++k) {
      out.push_back(w + z_star);
      w = step * w;
    }
  } else {
    for (double t : times) out.push_back(linear_flow(A, B, x0, t));
  }
  return out;
}

namespace {

Vector stack(const DeterministicState& st) {
  const int n = static_cast<int>(st.s.size());
  Vector y(3 * n);
  y.segment(0, n) = st.s;
  y.segment(n, n) = st.i;
  y.segment(2 * n, n) = st.r;
  return y;
}

DeterministicState unstack(const Vector& y) {
  const int n = static_cast<int>(y.size()) / 3;
  return DeterministicState{y.segment(0, n), y.segment(n, n),
                            y.segment(2 * n, n)};
}

}  // namespace

Vector sir_rhs(const NetworkModel& model, const Vector& z_star,
               DenominatorMode mode, const Vector& state) {
  const int n = model.n;
  Vector out(3 * n);
  const auto s = state.segment(0, n);
  const auto i = state.segment(n, n);
  const auto r = state.segment(2 * n, n);
  const Vector outflow_all = model.theta_out();
  for (int k = 0; k < n; ++k) {
    const double total = s[k] + i[k] + r[k];
    double infect = 0.0;
    if (i[k] > 0 && s[k] > 0) {
      const double den =
          mode == DenominatorMode::current_total ? total : z_star[k];
      infect = den > 0 ? model.beta[k] * i[k] * s[k] / den : 0.0;
    }
    double in_s = 0, in_i = 0, in_r = 0;
    for (int j = 0; j < n; ++j) {
      if (j == k) continue;
      in_s += model.theta(j, k) * s[j];
      in_i += model.theta(j, k) * i[j];
      in_r += model.theta(j, k) * r[j];
    }
    const double outflow = outflow_all[k];
    out[k] = model.B[k] + model.b[k] * total - model.d[k] * s[k] + in_s -
             outflow * s[k] - infect;
    out[n + k] = infect - (model.d[k] + model.gamma[k]) * i[k] + in_i -
                 outflow * i[k];
    out[2 * n + k] =
        model.gamma[k] * i[k] - model.d[k] * r[k] + in_r - outflow * r[k];
  }
  return out;
}

Matrix sir_jacobian(const NetworkModel& model, const Vector& z_star,
                    DenominatorMode mode, const Vector& state) {
  const int n = model.n;
  Matrix J = Matrix::Zero(3 * n, 3 * n);
  const auto s = state.segment(0, n);
  const auto i = state.segment(n, n);
  const auto r = state.segment(2 * n, n);
  const Vector outflow = model.theta_out();
  for (int k = 0; k < n; ++k) {
    // Demographic blocks.
    J(k, k) += model.b[k] - model.d[k] - outflow[k];
    J(k, n + k) += model.b[k];
    J(k, 2 * n + k) += model.b[k];
    J(n + k, n + k) += -(model.d[k] + model.gamma[k]) - outflow[k];
    J(2 * n + k, n + k) += model.gamma[k];
    J(2 * n + k, 2 * n + k) += -model.d[k] - outflow[k];
    for (int j = 0; j < n; ++j) {
      if (j == k) continue;
      J(k, j) += model.theta(j, k);
      J(n + k, n + j) += model.theta(j, k);
      J(2 * n + k, 2 * n + j) += model.theta(j, k);
    }
    // Infection term.
    double ds = 0, di = 0, dr = 0;
    if (mode == DenominatorMode::current_total) {
      const double total = s[k] + i[k] + r[k];
      if (total > 0) {
        const double t2 = total * total;
        ds = model.beta[k] * i[k] * (i[k] + r[k]) / t2;
        di = model.beta[k] * s[k] * (s[k] + r[k]) / t2;
        dr = -model.beta[k] * i[k] * s[k] / t2;
      }
    } else if (z_star[k] > 0) {
      ds = model.beta[k] * i[k] / z_star[k];
      di = model.beta[k] * s[k] / z_star[k];
    }
    J(k, k) -= ds;
    J(k, n + k) -= di;
    J(k, 2 * n + k) -= dr;
    J(n + k, k) += ds;
    J(n + k, n + k) += di;
    J(n + k, 2 * n + k) += dr;
  }
  return J;
}

namespace {

// Dormand-Prince 5(4) coefficients.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                 a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                 a64 = 49.0 / 176, a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                 b5 = -2187.0 / 6784, b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                 e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

}  // namespace

OdeTrajectory integrate_sir_ode(const NetworkModel& model,
                                const Vector& z_star,
                                const DeterministicState& init, double t_end,
                                double rel_tol, DenominatorMode mode,
                                int max_samples) {
  model.validate();
  if (init.i.size() != model.n || init.s.size() != model.n ||
      init.r.size() != model.n) {
    throw ValidationError("initial state dimension mismatch");
  }
  if (init.i.maxCoeff() <= 0.0 && model.beta.maxCoeff() > 0.0) {
    throw ValidationError("initial state not in E: i = 0");
  }
  if (!(t_end > 0)) throw ValidationError("t_end must be positive");

  auto f = [&](const Vector& y) { return sir_rhs(model, z_star, mode, y); };

  OdeTrajectory traj;
  Vector y = stack(init);
  double t = 0;
  traj.times.push_back(0);
  traj.states.push_back(init);
  const double sample_dt = t_end / std::max(1, max_samples - 1);
  double next_sample = sample_dt;

  double h = t_end / 100.0;
  const double h_min = t_end * 1e-14;
  const double abs_tol = rel_tol;  // states are O(1)-scaled densities
  Vector k1 = f(y);
  std::int64_t rejected_boundary = 0;

  while (t < t_end) {
    h = std::min(h, t_end - t);
    const Vector k2 = f(y + h * (a21 * k1));
    const Vector k3 = f(y + h * (a31 * k1 + a32 * k2));
    const Vector k4 = f(y + h * (a41 * k1 + a42 * k2 + a43 * k3));
    const Vector k5 = f(y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
    const Vector k6 =
        f(y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
    Vector y5 = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    const Vector k7 = f(y5);
    const Vector err_vec =
        h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

    double err = 0;
    for (int m = 0; m < y.size(); ++m) {
      const double scale =
          abs_tol + rel_tol * std::max(std::abs(y[m]), std::abs(y5[m]));
      err = std::max(err, std::abs(err_vec[m]) / scale);
    }
    const bool negative = y5.minCoeff() < 0;
    if (err <= 1.0 && !negative) {
      t += h;
      y = y5;
      k1 = k7;  // FSAL
      while (next_sample <= t + 1e-15 && traj.times.back() < t_end) {
        // Sample on step boundaries; the grid is for inspection, not for
        // accuracy, so the step end is good enough.
        traj.times.push_back(t);
        traj.states.push_back(unstack(y));
        next_sample += sample_dt;
      }
      h *= std::min(5.0, std::max(0.2, 0.9 * std::pow(err + 1e-300, -0.2)));
    } else {
      if (negative) ++rejected_boundary;
      h *= negative ? 0.5 : std::max(0.1, 0.9 * std::pow(err, -0.2));
    }
    if (h < h_min) {
      throw NumericalError("step size underflow at t = " + std::to_string(t));
    }
  }
  if (traj.times.back() < t_end) {
    traj.times.push_back(t_end);
    traj.states.push_back(unstack(y));
  } else {
    traj.times.back() = t_end;
    traj.states.back() = unstack(y);
  }
  return traj;
}

Endemic1D endemic_equilibrium_1d(double B, double b, double d, double beta,
                                 double gamma) {
  if (!(d > b)) {
    throw ValidationError("endemic equilibrium requires d > b "
                          "(subcriticality)");
  }
  if (!(beta > d + gamma)) {
    throw ValidationError("no endemic equilibrium: beta <= d + gamma");
  }
  if (!(B > 0)) throw ValidationError("endemic equilibrium requires B > 0");
  const double z = B / (d - b);
  Endemic1D eq;
  eq.s = (d + gamma) / beta * z;
  eq.i = d * z * (1.0 / (d + gamma) - 1.0 / beta);
  eq.r = gamma * z * (1.0 / (d + gamma) - 1.0 / beta);
  return eq;
}

EquilibriumReport find_endemic_equilibrium(const NetworkModel& model,
                                           const Vector& z_star,
                                           DenominatorMode mode) {
  model.validate();
  if (z_star.size() != model.n) {
    throw ValidationError("z_star dimension mismatch");
  }
  const int n = model.n;
  Vector y(3 * n);
  y.segment(0, n) = 0.8 * z_star;
  y.segment(n, n) = 0.1 * z_star;
  y.segment(2 * n, n) = 0.1 * z_star;

  EquilibriumReport report;
  double res = sir_rhs(model, z_star, mode, y).cwiseAbs().maxCoeff();
  const int max_iter = 200;
  for (int it = 0; it < max_iter && res > 1e-10; ++it) {
    const Vector fy = sir_rhs(model, z_star, mode, y);
    const Matrix J = sir_jacobian(model, z_star, mode, y);
    Vector delta = J.partialPivLu().solve(-fy);
    // Halve until the residual actually drops (and stay in the orthant).
    double step = 1.0;
    Vector y_new;
    double res_new = res;
    for (int halvings = 0; halvings < 60; ++halvings) {
      y_new = (y + step * delta).cwiseMax(0.0);
      res_new = sir_rhs(model, z_star, mode, y_new).cwiseAbs().maxCoeff();
      if (res_new < res) break;
      step *= 0.5;
    }
    if (!(res_new < res)) break;  // stalled
    y = y_new;
    res = res_new;
    report.iterations = it + 1;
  }
  report.point = unstack(y);
  report.residual = res;
  report.converged = res <= 1e-10;

  const Matrix J = sir_jacobian(model, z_star, mode, y);
  Eigen::EigenSolver<Matrix> es(J, false);
  if (es.info() != Eigen::Success) {
    throw NumericalError("Jacobian eigensolve failed at equilibrium");
  }
  report.jacobian_abscissa = es.eigenvalues().real().maxCoeff();

  const double i_scale = std::max(1e-12, z_star.cwiseAbs().maxCoeff());
  if (report.point.i.minCoeff() <= 1e-8 * i_scale) {
    report.classification = EquilibriumReport::Class::disease_free;
  } else if (report.jacobian_abscissa < 0) {
    report.classification = EquilibriumReport::Class::stable_endemic;
  } else {
    report.classification = EquilibriumReport::Class::unstable;
  }
  return report;
}

std::vector<double> lyapunov_V(const OdeTrajectory& trajectory, double s_star,
                               double i_star) {
  std::vector<double> v;
  v.reserve(trajectory.states.size());
  for (const auto& st : trajectory.states) {
    if (st.s.size() != 1) {
      throw ValidationError("lyapunov_V is defined for one-node trajectories");
    }
    const double s = st.s[0];
    const double i = st.i[0];
    if (!(s > 0) || !(i > 0)) {
      throw ValidationError("lyapunov_V needs positive s and i samples");
    }
    v.push_back(s - s_star * std::log(s) + i - i_star * std::log(i));
  }
  return v;
}

}  // namespace epinet
