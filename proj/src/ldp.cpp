#include "epinet/ldp.hpp"

#include <Eigen/Cholesky>

#include <cmath>

namespace epinet {

Vector JumpSpec::drift(const Vector& x) const {
  Vector v = Vector::Zero(dim);
  for (const auto& jump : jumps) v += jump.direction * jump.propensity(x);
  return v;
}

JumpSpec population_jumps(const NetworkModel& model) {
  const int n = model.n;
  JumpSpec spec;
  spec.dim = n;
  for (int i = 0; i < n; ++i) {
    Vector up = Vector::Zero(n);
    up[i] = 1;
    spec.jumps.push_back(
        {up,
         [&model, i](const Vector& x) { return model.B[i] + model.b[i] * x[i]; },
         [&model, i, n](const Vector&) {
           Vector g = Vector::Zero(n);
           g[i] = model.b[i];
           return g;
         }});
    Vector down = Vector::Zero(n);
    down[i] = -1;
    spec.jumps.push_back(
        {down, [&model, i](const Vector& x) { return model.d[i] * x[i]; },
         [&model, i, n](const Vector&) {
           Vector g = Vector::Zero(n);
           g[i] = model.d[i];
           return g;
         }});
    for (int j = 0; j < n; ++j) {
      if (j == i || model.theta(i, j) <= 0) continue;
      Vector move = Vector::Zero(n);
      move[i] = -1;
      move[j] = 1;
      const double th = model.theta(i, j);
      spec.jumps.push_back(
          {move, [th, i](const Vector& x) { return th * x[i]; },
           [th, i, n](const Vector&) {
             Vector g = Vector::Zero(n);
             g[i] = th;
             return g;
           }});
    }
  }
  return spec;
}

JumpSpec sir_jumps(const NetworkModel& model, bool duplicate_death_block) {
  const int n = model.n;
  const int dim = 3 * n;
  JumpSpec spec;
  spec.dim = dim;
  auto unit = [dim](int idx, double v) {
    Vector e = Vector::Zero(dim);
    e[idx] = v;
    return e;
  };

  for (int j = 0; j < n; ++j) {
    // Inflow of susceptibles: B_j + b_j (s_j + i_j + r_j).
    spec.jumps.push_back(
        {unit(j, 1),
         [&model, j, n](const Vector& y) {
           return model.B[j] +
                  model.b[j] * (y[j] + y[n + j] + y[2 * n + j]);
         },
         [&model, j, n, dim](const Vector&) {
           Vector g = Vector::Zero(dim);
           g[j] = g[n + j] = g[2 * n + j] = model.b[j];
           return g;
         }});
    const int death_copies = duplicate_death_block ? 2 : 1;
    for (int copy = 0; copy < death_copies; ++copy) {
      for (int c = 0; c < 3; ++c) {
        const int idx = c * n + j;
        spec.jumps.push_back(
            {unit(idx, -1),
             [&model, j, idx](const Vector& y) { return model.d[j] * y[idx]; },
             [&model, j, idx, dim](const Vector&) {
               Vector g = Vector::Zero(dim);
               g[idx] = model.d[j];
               return g;
             }});
      }
    }
    // Infection s -> i.
    Vector infect = Vector::Zero(dim);
    infect[j] = -1;
    infect[n + j] = 1;
    spec.jumps.push_back(
        {infect,
         [&model, j, n](const Vector& y) {
           const double total = y[j] + y[n + j] + y[2 * n + j];
           if (total <= 0 || y[j] <= 0 || y[n + j] <= 0) return 0.0;
           return model.beta[j] * y[j] * y[n + j] / total;
         },
         [&model, j, n, dim](const Vector& y) {
           Vector g = Vector::Zero(dim);
           const double s = y[j], i = y[n + j], r = y[2 * n + j];
           const double total = s + i + r;
           if (total <= 0 || s <= 0 || i <= 0) return g;
           const double t2 = total * total;
           g[j] = model.beta[j] * i * (i + r) / t2;
           g[n + j] = model.beta[j] * s * (s + r) / t2;
           g[2 * n + j] = -model.beta[j] * s * i / t2;
           return g;
         }});
    // Recovery i -> r.
    Vector recover = Vector::Zero(dim);
    recover[n + j] = -1;
    recover[2 * n + j] = 1;
    spec.jumps.push_back(
        {recover,
         [&model, j, n](const Vector& y) { return model.gamma[j] * y[n + j]; },
         [&model, j, n, dim](const Vector&) {
           Vector g = Vector::Zero(dim);
           g[n + j] = model.gamma[j];
           return g;
         }});
    for (int k = 0; k < n; ++k) {
      if (k == j || model.theta(j, k) <= 0) continue;
      const double th = model.theta(j, k);
      for (int c = 0; c < 3; ++c) {
        const int from = c * n + j;
        const int to = c * n + k;
        Vector move = Vector::Zero(dim);
        move[from] = -1;
        move[to] = 1;
        spec.jumps.push_back(
            {move, [th, from](const Vector& y) { return th * y[from]; },
             [th, from, dim](const Vector&) {
               Vector g = Vector::Zero(dim);
               g[from] = th;
               return g;
             }});
      }
    }
  }
  return spec;
}

namespace {

// Objective of the inner maximization and its derivatives at u, for the
// propensities lambda_e frozen at x.
struct InnerEval {
  double value;
  Vector grad;
  Matrix hess;  // negative semidefinite
};

InnerEval inner_eval(const JumpSpec& jumps, const std::vector<double>& lambda,
                     const Vector& velocity, const Vector& u, bool want_hess) {
  const int d = static_cast<int>(u.size());
  InnerEval ev{velocity.dot(u), velocity, Matrix()};
  if (want_hess) ev.hess = Matrix::Zero(d, d);
  for (std::size_t e = 0; e < jumps.jumps.size(); ++e) {
    if (lambda[e] <= 0) continue;
    const Vector& v = jumps.jumps[e].direction;
    const double w = std::exp(u.dot(v)) * lambda[e];
    ev.value -= w - lambda[e];
    ev.grad -= w * v;
    if (want_hess) ev.hess -= w * v * v.transpose();
  }
  return ev;
}

}  // namespace

LocalRate local_rate(const JumpSpec& jumps, const Vector& x,
                     const Vector& velocity, double u_max) {
  if (x.size() != jumps.dim || velocity.size() != jumps.dim) {
    throw ValidationError("local_rate dimension mismatch");
  }
  std::vector<double> lambda(jumps.jumps.size());
  double lambda_sum = 0;
  for (std::size_t e = 0; e < jumps.jumps.size(); ++e) {
    lambda[e] = jumps.jumps[e].propensity(x);
    lambda_sum += lambda[e];
  }
  const double scale =
      1.0 + velocity.cwiseAbs().maxCoeff() + lambda_sum;
  const double tol = 1e-12 * scale;

  const int d = jumps.dim;
  Vector u = Vector::Zero(d);
  InnerEval ev = inner_eval(jumps, lambda, velocity, u, true);

  for (int it = 0; it < 200; ++it) {
    // Projected first-order residual on the box.
    double resid = 0;
    for (int k = 0; k < d; ++k) {
      double g = ev.grad[k];
      if (u[k] >= u_max && g > 0) g = 0;
      if (u[k] <= -u_max && g < 0) g = 0;
      resid = std::max(resid, std::abs(g));
    }
    if (resid <= tol) break;

    // Newton direction with a ridge safeguard (hess is NSD, possibly
    // singular when the jumps do not span).
    Matrix H = -ev.hess;
    const double ridge = 1e-12 * (1.0 + H.diagonal().cwiseAbs().maxCoeff());
    H.diagonal().array() += ridge;
    Vector step = Eigen::LDLT<Matrix>(H).solve(ev.grad);
    if (!step.allFinite() || step.dot(ev.grad) <= 0) step = ev.grad;

    double alpha = 1.0;
    bool improved = false;
    for (int bt = 0; bt < 60; ++bt) {
      Vector u_try = (u + alpha * step).cwiseMax(-u_max).cwiseMin(u_max);
      InnerEval ev_try = inner_eval(jumps, lambda, velocity, u_try, false);
      if (ev_try.value > ev.value) {
        u = u_try;
        ev = inner_eval(jumps, lambda, velocity, u, true);
        improved = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!improved) break;
  }

  LocalRate out;
  out.u_opt = u;
  out.value = std::max(0.0, ev.value);
  out.grad_norm = ev.grad.cwiseAbs().maxCoeff();
  for (int k = 0; k < d; ++k) {
    if ((u[k] >= u_max && ev.grad[k] > tol) ||
        (u[k] <= -u_max && ev.grad[k] < -tol)) {
      out.boundary_hit = true;
    }
  }
  return out;
}

namespace {

std::vector<Vector> grid_velocities(const std::vector<double>& times,
                                    const std::vector<Vector>& pts) {
  const std::size_t m = pts.size();
  std::vector<Vector> v(m);
  if (m == 1) {
    v[0] = Vector::Zero(pts[0].size());
    return v;
  }
  v[0] = (pts[1] - pts[0]) / (times[1] - times[0]);
  for (std::size_t k = 1; k + 1 < m; ++k) {
    v[k] = (pts[k + 1] - pts[k - 1]) / (times[k + 1] - times[k - 1]);
  }
  v[m - 1] = (pts[m - 1] - pts[m - 2]) / (times[m - 1] - times[m - 2]);
  return v;
}

double trapezoid_action(const JumpSpec& jumps, const std::vector<double>& times,
                        const std::vector<Vector>& pts, double u_max,
                        bool* boundary) {
  const auto vel = grid_velocities(times, pts);
  double total = 0;
  std::vector<double> values(pts.size());
  for (std::size_t k = 0; k < pts.size(); ++k) {
    const LocalRate lr = local_rate(jumps, pts[k], vel[k], u_max);
    values[k] = lr.value;
    if (boundary && lr.boundary_hit) *boundary = true;
  }
  for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
    total += 0.5 * (values[k] + values[k + 1]) * (times[k + 1] - times[k]);
  }
  return total;
}

}  // namespace

void path_action(const JumpSpec& jumps, ActionPath& path, double u_max) {
  if (path.points.size() != path.times.size() || path.points.empty()) {
    throw ValidationError("path grid invalid");
  }
  path.any_boundary_hit = false;
  path.action = trapezoid_action(jumps, path.times, path.points, u_max,
                                 &path.any_boundary_hit);
  if (path.points.size() >= 5) {
    std::vector<double> coarse_t;
    std::vector<Vector> coarse_p;
    for (std::size_t k = 0; k < path.points.size(); k += 2) {
      coarse_t.push_back(path.times[k]);
      coarse_p.push_back(path.points[k]);
    }
    if (coarse_t.back() != path.times.back()) {
      coarse_t.push_back(path.times.back());
      coarse_p.push_back(path.points.back());
    }
    const double coarse =
        trapezoid_action(jumps, coarse_t, coarse_p, u_max, nullptr);
    path.richardson_error = std::abs(path.action - coarse) / 3.0;
  } else {
    path.richardson_error = 0.0;
  }
}

ExitTarget ExitTarget::to_point(Vector y) {
  ExitTarget t;
  t.kind = Kind::point;
  t.point = std::move(y);
  return t;
}

ExitTarget ExitTarget::ball(Vector center, double radius) {
  ExitTarget t;
  t.kind = Kind::ball_exit;
  t.point = std::move(center);
  t.radius = radius;
  return t;
}

namespace {

// Action and gradient for the stacked free coordinates. The path is
// x_0..x_m on a uniform grid; x_0 always pinned, x_m pinned unless
// ball-exit. Envelope theorem: dL/dx = -sum_e (e^{u.v}-1) dlambda_e/dx,
// dL/dbeta = u_opt.
class PathObjective {
 public:
  PathObjective(const JumpSpec& jumps, Vector start, const ExitTarget& target,
                int m, double horizon, double u_max)
      : jumps_(jumps),
        start_(std::move(start)),
        target_(target),
        m_(m),
        dt_(horizon / m),
        u_max_(u_max),
        dim_(jumps.dim) {}

  int free_points() const {
    return target_.kind == ExitTarget::Kind::ball_exit ? m_ : m_ - 1;
  }

  std::vector<Vector> assemble(const Vector& vars) const {
    std::vector<Vector> pts(m_ + 1);
    pts[0] = start_;
    for (int k = 1; k <= free_points(); ++k) {
      pts[k] = vars.segment((k - 1) * dim_, dim_);
    }
    if (target_.kind == ExitTarget::Kind::point) pts[m_] = target_.point;
    return pts;
  }

  Vector project(Vector vars) const {
    for (int k = 1; k < m_; ++k) {
      vars.segment((k - 1) * dim_, dim_) =
          vars.segment((k - 1) * dim_, dim_).cwiseMax(0.0);
    }
    if (target_.kind == ExitTarget::Kind::ball_exit) {
      auto tail = vars.segment((m_ - 1) * dim_, dim_);
      Vector y = tail;
      for (int pass = 0; pass < 3; ++pass) {
        Vector offset = y - target_.point;
        double norm = offset.cwiseAbs().maxCoeff();
        if (norm <= 0) {
          offset = Vector::Zero(dim_);
          offset[0] = 1;
          norm = 1;
        }
        y = target_.point + offset * (target_.radius / norm);
        y = y.cwiseMax(0.0);
      }
      tail = y;
    }
    return vars;
  }

  double eval(const Vector& vars, Vector* grad) const {
    const auto pts = assemble(vars);
    std::vector<double> times(m_ + 1);
    for (int k = 0; k <= m_; ++k) times[k] = k * dt_;
    const auto vel = grid_velocities(times, pts);

    std::vector<double> L(m_ + 1);
    std::vector<Vector> u(m_ + 1);
    std::vector<Vector> dLdx(m_ + 1, Vector::Zero(dim_));
    for (int k = 0; k <= m_; ++k) {
      const LocalRate lr = local_rate(jumps_, pts[k], vel[k], u_max_);
      L[k] = lr.value;
      u[k] = lr.u_opt;
      if (grad) {
        Vector g = Vector::Zero(dim_);
        for (const auto& jump : jumps_.jumps) {
          const double w =
              std::exp(std::min(lr.u_opt.dot(jump.direction), 700.0));
          if (w != 1.0) g -= (w - 1.0) * jump.propensity_grad(pts[k]);
        }
        dLdx[k] = g;
      }
    }
    double action = 0;
    for (int k = 0; k < m_; ++k) action += 0.5 * (L[k] + L[k + 1]) * dt_;

    if (grad) {
      grad->setZero();
      auto weight = [this](int k) { return (k == 0 || k == m_) ? 0.5 : 1.0; };
      auto add = [&](int point_idx, const Vector& contribution) {
        if (point_idx >= 1 && point_idx <= free_points()) {
          grad->segment((point_idx - 1) * dim_, dim_) += contribution;
        }
      };
      for (int k = 0; k <= m_; ++k) {
        add(k, dt_ * weight(k) * dLdx[k]);
        // Velocity chain rule: v_k depends on neighbors of x_k.
        const Vector uw = dt_ * weight(k) * u[k];
        if (k == 0) {
          add(1, uw / dt_);
        } else if (k == m_) {
          add(m_, uw / dt_);
          add(m_ - 1, -uw / dt_);
        } else {
          add(k + 1, uw / (2 * dt_));
          add(k - 1, -uw / (2 * dt_));
        }
      }
    }
    return action;
  }

 private:
  const JumpSpec& jumps_;
  Vector start_;
  const ExitTarget& target_;
  int m_;
  double dt_;
  double u_max_;
  int dim_;
};

// Projected L-BFGS with Armijo backtracking.
Vector lbfgs_minimize(const PathObjective& obj, Vector x, int max_iter,
                      double tol, double* final_value) {
  const int mem = 8;
  std::vector<Vector> s_hist, y_hist;
  Vector grad(x.size()), grad_new(x.size());
  double f = obj.eval(x, &grad);

  for (int it = 0; it < max_iter; ++it) {
    if (grad.cwiseAbs().maxCoeff() <= tol * (1.0 + std::abs(f))) break;

    // Two-loop recursion.
    Vector q = grad;
    std::vector<double> alpha(s_hist.size());
    for (int k = static_cast<int>(s_hist.size()) - 1; k >= 0; --k) {
      const double rho = 1.0 / y_hist[k].dot(s_hist[k]);
      alpha[k] = rho * s_hist[k].dot(q);
      q -= alpha[k] * y_hist[k];
    }
    if (!s_hist.empty()) {
      const auto& s_last = s_hist.back();
      const auto& y_last = y_hist.back();
      q *= s_last.dot(y_last) / y_last.dot(y_last);
    }
    for (std::size_t k = 0; k < s_hist.size(); ++k) {
      const double rho = 1.0 / y_hist[k].dot(s_hist[k]);
      const double beta = rho * y_hist[k].dot(q);
      q += (alpha[k] - beta) * s_hist[k];
    }
    Vector dir = -q;
    if (dir.dot(grad) >= 0) {
      dir = -grad;
      s_hist.clear();
      y_hist.clear();
    }

    double step = 1.0;
    bool accepted = false;
    Vector x_new;
    double f_new = f;
    for (int bt = 0; bt < 40; ++bt) {
      x_new = obj.project(x + step * dir);
      f_new = obj.eval(x_new, &grad_new);
      if (f_new <= f + 1e-4 * step * dir.dot(grad) ||
          (f_new < f && bt > 20)) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;

    Vector s_vec = x_new - x;
    Vector y_vec = grad_new - grad;
    if (y_vec.dot(s_vec) > 1e-12 * s_vec.norm() * y_vec.norm()) {
      s_hist.push_back(std::move(s_vec));
      y_hist.push_back(std::move(y_vec));
      if (static_cast<int>(s_hist.size()) > mem) {
        s_hist.erase(s_hist.begin());
        y_hist.erase(y_hist.begin());
      }
    }
    x = std::move(x_new);
    f = f_new;
    grad = grad_new;
  }
  *final_value = f;
  return x;
}

}  // namespace

ActionPath minimize_action(const JumpSpec& jumps, const Vector& start,
                           const ExitTarget& target,
                           const MinimizeOptions& opts) {
  if (start.size() != jumps.dim) {
    throw ValidationError("start dimension mismatch");
  }
  if (opts.grid_m < 8) throw ValidationError("grid_m must be at least 8");
  if (target.point.size() != jumps.dim) {
    throw ValidationError("target dimension mismatch");
  }

  // Degenerate request: already at the target.
  if (target.kind == ExitTarget::Kind::point &&
      (target.point - start).cwiseAbs().maxCoeff() == 0.0) {
    ActionPath trivial;
    trivial.times = {0.0};
    trivial.points = {start};
    trivial.action = 0.0;
    return trivial;
  }

  const int m = opts.grid_m;
  const int dim = jumps.dim;
  ActionPath best;
  double best_action = std::numeric_limits<double>::infinity();

  for (int restart = 0; restart < std::max(1, opts.restarts); ++restart) {
    Rng rng(RngSpec{opts.rng.seed, opts.rng.stream + restart});
    // Terminal point: the target itself, or a point on the exit sphere.
    Vector terminal;
    if (target.kind == ExitTarget::Kind::point) {
      terminal = target.point;
    } else {
      Vector w(dim);
      if (restart == 0) {
        w = Vector::Ones(dim);
      } else {
        for (int k = 0; k < dim; ++k) w[k] = 2.0 * rng.uniform01() - 1.0;
      }
      const double norm = std::max(w.cwiseAbs().maxCoeff(), 1e-12);
      terminal = (target.point + w * (target.radius / norm)).cwiseMax(0.0);
    }

    PathObjective obj(jumps, start, target, m, opts.horizon, opts.u_max);
    Vector vars(obj.free_points() * dim);
    for (int k = 1; k <= obj.free_points(); ++k) {
      const double frac = static_cast<double>(k) / m;
      Vector pt = (1 - frac) * start + frac * terminal;
      if (restart > 0) {
        const double span =
            std::max(1e-3, (terminal - start).cwiseAbs().maxCoeff());
        for (int c = 0; c < dim; ++c) {
          pt[c] += 0.05 * span * (2.0 * rng.uniform01() - 1.0);
        }
        pt = pt.cwiseMax(0.0);
      }
      vars.segment((k - 1) * dim, dim) = pt;
    }
    vars = obj.project(vars);

    double value = 0;
    vars = lbfgs_minimize(obj, vars, opts.max_iterations, opts.tol, &value);
    if (value < best_action) {
      best_action = value;
      best.points = obj.assemble(vars);
      best.times.resize(m + 1);
      for (int k = 0; k <= m; ++k) {
        best.times[k] = opts.horizon * k / static_cast<double>(m);
      }
    }
  }
  path_action(jumps, best, opts.u_max);
  return best;
}

}  // namespace epinet
