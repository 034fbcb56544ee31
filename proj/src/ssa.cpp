#include "epinet/ssa.hpp"

#include "epinet/spectral.hpp"

#include <algorithm>
#include <cmath>

namespace epinet {

const char* to_string(EventKind kind) {
  switch (kind) {
    case EventKind::inflow: return "inflow";
    case EventKind::death: return "death";
    case EventKind::transfer: return "transfer";
    case EventKind::death_s: return "death_s";
    case EventKind::death_i: return "death_i";
    case EventKind::death_r: return "death_r";
    case EventKind::transfer_s: return "transfer_s";
    case EventKind::transfer_i: return "transfer_i";
    case EventKind::transfer_r: return "transfer_r";
    case EventKind::infection: return "infection";
    case EventKind::recovery: return "recovery";
    case EventKind::branch_birth: return "branch_birth";
    case EventKind::branch_death: return "branch_death";
    case EventKind::branch_move: return "branch_move";
    default: return "unknown";
  }
}

const char* to_string(EndReason reason) {
  switch (reason) {
    case EndReason::extinct: return "extinct";
    case EndReason::horizon: return "horizon";
    case EndReason::cap: return "cap";
    case EndReason::exited: return "exited";
    case EndReason::major: return "major";
    default: return "unknown";
  }
}

OutbreakClassifier default_classifier(double N, double z_star_l1, double frac) {
  OutbreakClassifier c;
  const double scale = frac * N * z_star_l1;
  c.size_threshold = std::max(100.0, scale);
  c.infectives_threshold =
      scale > 0 ? scale : std::numeric_limits<double>::infinity();
  return c;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct EdgeList {
  // out[j] = (target, theta(j, target)) for theta(j, target) > 0
  std::vector<std::vector<std::pair<int, double>>> out;
  Vector row_sum;

  explicit EdgeList(const NetworkModel& m) : out(m.n), row_sum(m.theta_out()) {
    for (int j = 0; j < m.n; ++j) {
      for (int k = 0; k < m.n; ++k) {
        if (k != j && m.theta(j, k) > 0) out[j].emplace_back(k, m.theta(j, k));
      }
    }
  }
};

// Shared snapshot/event bookkeeping for the drivers below.
class Recorder {
 public:
  Recorder(EventTrajectory& out, const SimOptions& opts, double t_end)
      : out_(out), opts_(opts) {
    if (opts.snapshot_points > 1 && std::isfinite(t_end)) {
      out_.grid_times.resize(opts.snapshot_points);
      for (int k = 0; k < opts.snapshot_points; ++k) {
        out_.grid_times[k] = t_end * k / (opts.snapshot_points - 1);
      }
    }
  }

  // Record grid states due strictly before time t.
  template <typename SnapshotFn>
  void advance(double t, SnapshotFn&& snapshot) {
    while (next_grid_ < out_.grid_times.size() &&
           out_.grid_times[next_grid_] < t) {
      snapshot();
      ++next_grid_;
    }
  }

  // Flush remaining grid points with the terminal state.
  template <typename SnapshotFn>
  void finish(SnapshotFn&& snapshot) {
    while (next_grid_ < out_.grid_times.size()) {
      snapshot();
      ++next_grid_;
    }
  }

  void event(double t, EventKind kind, int from, int to) {
    if (opts_.record_events) {
      out_.events.push_back(Event{t, kind, from, to});
    }
  }

 private:
  EventTrajectory& out_;
  const SimOptions& opts_;
  std::size_t next_grid_ = 0;
};

// Walks component propensities of one node in a fixed order.
class Picker {
 public:
  explicit Picker(double u) : u_(u) {}
  bool take(double w) {
    if (u_ < w) return true;
    u_ -= w;
    return false;
  }

 private:
  double u_;
};

class PopulationStepper {
 public:
  PopulationStepper(const NetworkModel& m, double N, CountVector x)
      : m_(m), edges_(m), N_(N), x_(std::move(x)), node_sum_(m.n) {
    for (int j = 0; j < m_.n; ++j) node_sum_[j] = node_propensity(j);
    total_ = node_sum_.sum();
  }

  struct Step {
    double dt;
    EventKind kind;
    int from, to;
  };

  double total() const { return total_; }
  const CountVector& state() const { return x_; }

  // Draws holding time and event; does not apply it.
  Step next(Rng& rng) {
    Step s{rng.exponential(total_), EventKind::death, -1, -1};
    double u = rng.uniform01() * total_;
    int j = 0;
    for (; j < m_.n - 1; ++j) {
      if (u < node_sum_[j]) break;
      u -= node_sum_[j];
    }
    s.from = j;
    const double xj = static_cast<double>(x_[j]);
    const double inflow = N_ * m_.B[j] + m_.b[j] * xj;
    if (u < inflow) {
      s.kind = EventKind::inflow;
      s.to = j;
      return s;
    }
    u -= inflow;
    if (u < m_.d[j] * xj || edges_.out[j].empty()) {
      s.kind = EventKind::death;
      return s;
    }
    u -= m_.d[j] * xj;
    s.kind = EventKind::transfer;
    s.to = edges_.out[j].back().first;
    for (const auto& [k, th] : edges_.out[j]) {
      if (u < th * xj) {
        s.to = k;
        break;
      }
      u -= th * xj;
    }
    return s;
  }

  void apply(const Step& s) {
    switch (s.kind) {
      case EventKind::inflow: x_[s.from] += 1; break;
      case EventKind::death: x_[s.from] -= 1; break;
      case EventKind::transfer:
        x_[s.from] -= 1;
        x_[s.to] += 1;
        refresh(s.to);
        break;
      default: break;
    }
    refresh(s.from);
    if (++since_resum_ >= 65536) {
      total_ = node_sum_.sum();
      since_resum_ = 0;
    }
  }

  void kind_propensities(
      std::array<double, static_cast<std::size_t>(EventKind::kCount)>& k)
      const {
    double inflow = 0, death = 0, transfer = 0;
    for (int j = 0; j < m_.n; ++j) {
      const double xj = static_cast<double>(x_[j]);
      inflow += N_ * m_.B[j] + m_.b[j] * xj;
      death += m_.d[j] * xj;
      transfer += edges_.row_sum[j] * xj;
    }
    k[static_cast<std::size_t>(EventKind::inflow)] = inflow;
    k[static_cast<std::size_t>(EventKind::death)] = death;
    k[static_cast<std::size_t>(EventKind::transfer)] = transfer;
  }

 private:
  double node_propensity(int j) const {
    const double xj = static_cast<double>(x_[j]);
    return N_ * m_.B[j] + (m_.b[j] + m_.d[j] + edges_.row_sum[j]) * xj;
  }

  void refresh(int j) {
    const double fresh = node_propensity(j);
    total_ += fresh - node_sum_[j];
    node_sum_[j] = fresh;
  }

  const NetworkModel& m_;
  EdgeList edges_;
  double N_;
  CountVector x_;
  Vector node_sum_;
  double total_ = 0;
  int since_resum_ = 0;
};

class SirStepper {
 public:
  SirStepper(const NetworkModel& m, double N, SIRState state)
      : m_(m), edges_(m), N_(N), st_(std::move(state)), node_sum_(m.n) {
    for (int j = 0; j < m_.n; ++j) node_sum_[j] = node_propensity(j);
    total_ = node_sum_.sum();
  }

  struct Step {
    double dt;
    EventKind kind;
    int from, to;
  };

  double total() const { return total_; }
  const SIRState& state() const { return st_; }

  Step next(Rng& rng) {
    Step s{rng.exponential(total_), EventKind::recovery, -1, -1};
    double u = rng.uniform01() * total_;
    int j = 0;
    for (; j < m_.n - 1; ++j) {
      if (u < node_sum_[j]) break;
      u -= node_sum_[j];
    }
    s.from = j;
    const double sj = static_cast<double>(st_.s[j]);
    const double ij = static_cast<double>(st_.i[j]);
    const double rj = static_cast<double>(st_.r[j]);
    const double xj = sj + ij + rj;

    Picker pick(u);
    if (pick.take(N_ * m_.B[j] + m_.b[j] * xj)) {
      s.kind = EventKind::inflow;
      s.to = j;
      return s;
    }
    if (pick.take(m_.d[j] * sj)) {
      s.kind = EventKind::death_s;
      return s;
    }
    if (pick.take(m_.d[j] * ij)) {
      s.kind = EventKind::death_i;
      return s;
    }
    if (pick.take(m_.d[j] * rj)) {
      s.kind = EventKind::death_r;
      return s;
    }
    if (pick.take(infection_rate(j))) {
      s.kind = EventKind::infection;
      s.to = j;
      return s;
    }
    if (pick.take(m_.gamma[j] * ij)) {
      s.kind = EventKind::recovery;
      return s;
    }
    // Transfers: per edge, split by compartment.
    for (std::size_t e = 0; e < edges_.out[j].size(); ++e) {
      const auto& [k, th] = edges_.out[j][e];
      if (pick.take(th * sj)) {
        s.kind = EventKind::transfer_s;
        s.to = k;
        return s;
      }
      if (pick.take(th * ij)) {
        s.kind = EventKind::transfer_i;
        s.to = k;
        return s;
      }
      if (pick.take(th * rj)) {
        s.kind = EventKind::transfer_r;
        s.to = k;
        return s;
      }
    }
    // Roundoff overflow: fall back to the heaviest class in this node.
    s.kind = fallback_kind(j, &s.to);
    return s;
  }

  void apply(const Step& s) {
    switch (s.kind) {
      case EventKind::inflow: st_.s[s.from] += 1; break;
      case EventKind::death_s: st_.s[s.from] -= 1; break;
      case EventKind::death_i: st_.i[s.from] -= 1; break;
      case EventKind::death_r: st_.r[s.from] -= 1; break;
      case EventKind::infection:
        st_.s[s.from] -= 1;
        st_.i[s.from] += 1;
        break;
      case EventKind::recovery:
        st_.i[s.from] -= 1;
        st_.r[s.from] += 1;
        break;
      case EventKind::transfer_s:
        st_.s[s.from] -= 1;
        st_.s[s.to] += 1;
        refresh(s.to);
        break;
      case EventKind::transfer_i:
        st_.i[s.from] -= 1;
        st_.i[s.to] += 1;
        refresh(s.to);
        break;
      case EventKind::transfer_r:
        st_.r[s.from] -= 1;
        st_.r[s.to] += 1;
        refresh(s.to);
        break;
      default: break;
    }
    refresh(s.from);
    if (++since_resum_ >= 65536) {
      total_ = node_sum_.sum();
      since_resum_ = 0;
    }
  }

  void kind_propensities(
      std::array<double, static_cast<std::size_t>(EventKind::kCount)>& k)
      const {
    auto at = [&k](EventKind kind) -> double& {
      return k[static_cast<std::size_t>(kind)];
    };
    for (int j = 0; j < m_.n; ++j) {
      const double sj = static_cast<double>(st_.s[j]);
      const double ij = static_cast<double>(st_.i[j]);
      const double rj = static_cast<double>(st_.r[j]);
      at(EventKind::inflow) += N_ * m_.B[j] + m_.b[j] * (sj + ij + rj);
      at(EventKind::death_s) += m_.d[j] * sj;
      at(EventKind::death_i) += m_.d[j] * ij;
      at(EventKind::death_r) += m_.d[j] * rj;
      at(EventKind::infection) += infection_rate(j);
      at(EventKind::recovery) += m_.gamma[j] * ij;
      at(EventKind::transfer_s) += edges_.row_sum[j] * sj;
      at(EventKind::transfer_i) += edges_.row_sum[j] * ij;
      at(EventKind::transfer_r) += edges_.row_sum[j] * rj;
    }
  }

 private:
  double infection_rate(int j) const {
    // 0/0 at an empty node is 0: no infectives can sit there anyway.
    const double ij = static_cast<double>(st_.i[j]);
    const double sj = static_cast<double>(st_.s[j]);
    if (ij <= 0 || sj <= 0) return 0.0;
    const double xj = sj + ij + static_cast<double>(st_.r[j]);
    return m_.beta[j] * ij * sj / xj;
  }

  double node_propensity(int j) const {
    const double sj = static_cast<double>(st_.s[j]);
    const double ij = static_cast<double>(st_.i[j]);
    const double rj = static_cast<double>(st_.r[j]);
    const double xj = sj + ij + rj;
    return N_ * m_.B[j] + m_.b[j] * xj + m_.d[j] * xj +
           edges_.row_sum[j] * xj + infection_rate(j) + m_.gamma[j] * ij;
  }

  EventKind fallback_kind(int j, int* to) const {
    if (st_.i[j] > 0 && m_.gamma[j] > 0) return EventKind::recovery;
    if (st_.s[j] > 0 && m_.d[j] > 0) return EventKind::death_s;
    if (!edges_.out[j].empty() && st_.s[j] > 0) {
      *to = edges_.out[j].front().first;
      return EventKind::transfer_s;
    }
    *to = j;
    return EventKind::inflow;
  }

  void refresh(int j) {
    const double fresh = node_propensity(j);
    total_ += fresh - node_sum_[j];
    node_sum_[j] = fresh;
  }

  const NetworkModel& m_;
  EdgeList edges_;
  double N_;
  SIRState st_;
  Vector node_sum_;
  double total_ = 0;
  int since_resum_ = 0;
};

class BranchingStepper {
 public:
  BranchingStepper(const NetworkModel& m, CountVector state)
      : m_(m), edges_(m), x_(std::move(state)), node_sum_(m.n) {
    for (int j = 0; j < m_.n; ++j) node_sum_[j] = node_propensity(j);
    total_ = node_sum_.sum();
  }

  struct Step {
    double dt;
    EventKind kind;
    int from, to;
  };

  double total() const { return total_; }
  const CountVector& state() const { return x_; }

  Step next(Rng& rng) {
    Step s{rng.exponential(total_), EventKind::branch_death, -1, -1};
    double u = rng.uniform01() * total_;
    int j = 0;
    for (; j < m_.n - 1; ++j) {
      if (u < node_sum_[j]) break;
      u -= node_sum_[j];
    }
    s.from = j;
    const double ij = static_cast<double>(x_[j]);
    if (u < m_.beta[j] * ij) {
      s.kind = EventKind::branch_birth;
      s.to = j;
      return s;
    }
    u -= m_.beta[j] * ij;
    if (u < (m_.d[j] + m_.gamma[j]) * ij || edges_.out[j].empty()) {
      s.kind = EventKind::branch_death;
      return s;
    }
    u -= (m_.d[j] + m_.gamma[j]) * ij;
    s.kind = EventKind::branch_move;
    s.to = edges_.out[j].back().first;
    for (const auto& [k, th] : edges_.out[j]) {
      if (u < th * ij) {
        s.to = k;
        break;
      }
      u -= th * ij;
    }
    return s;
  }

  void apply(const Step& s) {
    switch (s.kind) {
      case EventKind::branch_birth: x_[s.from] += 1; break;
      case EventKind::branch_death: x_[s.from] -= 1; break;
      case EventKind::branch_move:
        x_[s.from] -= 1;
        x_[s.to] += 1;
        refresh(s.to);
        break;
      default: break;
    }
    refresh(s.from);
  }

 private:
  double node_propensity(int j) const {
    return (m_.beta[j] + m_.d[j] + m_.gamma[j] + edges_.row_sum[j]) *
           static_cast<double>(x_[j]);
  }

  void refresh(int j) {
    const double fresh = node_propensity(j);
    total_ += fresh - node_sum_[j];
    node_sum_[j] = fresh;
  }

  const NetworkModel& m_;
  EdgeList edges_;
  CountVector x_;
  Vector node_sum_;
  double total_ = 0;
};

CountVector floor_state(double N, const Vector& x0) {
  CountVector x(x0.size());
  for (int i = 0; i < x0.size(); ++i) {
    x[i] = static_cast<std::int64_t>(std::floor(N * x0[i]));
  }
  return x;
}

}  // namespace

EventTrajectory simulate_population(const NetworkModel& model, double N,
                                    const Vector& x0, double t_end,
                                    RngSpec spec, const SimOptions& opts,
                                    const PopulationObserver& observe) {
  model.validate();
  if (!(t_end > 0)) throw ValidationError("t_end must be positive");
  if (x0.size() != model.n) throw ValidationError("x0 dimension mismatch");

  EventTrajectory out;
  Recorder rec(out, opts, t_end);
  Rng rng(spec);
  PopulationStepper stepper(model, N, floor_state(N, x0));
  auto snapshot = [&] { out.population_grid.push_back(stepper.state()); };

  double t = 0;
  while (true) {
    if (stepper.total() <= 0) {
      // Absorbed: no further events.
      if (observe) observe(t, t_end, stepper.state());
      t = t_end;
      out.stats.end_reason = EndReason::horizon;
      break;
    }
    PopulationStepper::Step step = stepper.next(rng);
    const double t_next = t + step.dt;
    if (t_next > t_end) {
      if (observe) observe(t, t_end, stepper.state());
      rec.advance(t_end, snapshot);
      t = t_end;
      out.stats.end_reason = EndReason::horizon;
      break;
    }
    if (opts.track_propensity) {
      std::array<double, static_cast<std::size_t>(EventKind::kCount)> k{};
      stepper.kind_propensities(k);
      for (std::size_t m = 0; m < k.size(); ++m) {
        out.integrated_propensity[m] += k[m] * step.dt;
      }
    }
    if (observe) observe(t, t_next, stepper.state());
    rec.advance(t_next, snapshot);
    t = t_next;
    rec.event(t, step.kind, step.from, step.to);
    stepper.apply(step);
    if (++out.stats.n_events >= opts.event_cap) {
      out.stats.end_reason = EndReason::cap;
      break;
    }
  }
  rec.finish(snapshot);
  out.stats.end_time = t;
  out.final_population = stepper.state();
  return out;
}

EventTrajectory simulate_sir(const NetworkModel& model,
                             const ScalingConfig& scaling, double t_end,
                             RngSpec spec, const SimOptions& opts) {
  model.validate();
  scaling.validate(model);
  if (!(t_end > 0)) throw ValidationError("t_end must be positive");

  SIRState init;
  init.s = floor_state(scaling.N, scaling.x0);
  init.i = scaling.I0;
  init.r = CountVector::Zero(model.n);
  init.s -= init.i;

  EventTrajectory out;
  Recorder rec(out, opts, t_end);
  Rng rng(spec);
  SirStepper stepper(model, scaling.N, std::move(init));
  auto snapshot = [&] { out.sir_grid.push_back(stepper.state()); };

  std::int64_t infectives = stepper.state().i.sum();
  out.stats.max_infectives = infectives;
  double t = 0;

  if (infectives == 0) {
    out.stats.extinct = true;
    out.stats.extinction_time = 0.0;
    out.stats.end_reason = EndReason::extinct;
    rec.finish(snapshot);
    out.final_sir = stepper.state();
    return out;
  }

  const OutbreakClassifier& cls = opts.classifier;
  while (true) {
    if (stepper.total() <= 0) {
      t = t_end;
      out.stats.end_reason = EndReason::horizon;
      break;
    }
    SirStepper::Step step = stepper.next(rng);
    const double t_next = t + step.dt;
    if (t_next > t_end) {
      rec.advance(t_end, snapshot);
      t = t_end;
      out.stats.end_reason = EndReason::horizon;
      break;
    }
    if (opts.track_propensity) {
      std::array<double, static_cast<std::size_t>(EventKind::kCount)> k{};
      stepper.kind_propensities(k);
      for (std::size_t m = 0; m < k.size(); ++m) {
        out.integrated_propensity[m] += k[m] * step.dt;
      }
    }
    rec.advance(t_next, snapshot);
    t = t_next;
    rec.event(t, step.kind, step.from, step.to);
    stepper.apply(step);
    ++out.stats.n_events;

    if (step.kind == EventKind::infection) {
      ++out.stats.total_size;
      ++infectives;
      out.stats.max_infectives = std::max(out.stats.max_infectives, infectives);
    } else if (step.kind == EventKind::death_i ||
               step.kind == EventKind::recovery) {
      --infectives;
      if (infectives == 0) {
        out.stats.extinct = true;
        out.stats.extinction_time = t;
        out.stats.end_reason = EndReason::extinct;
        break;
      }
    }
    if (opts.stop_when_major &&
        (static_cast<double>(out.stats.total_size) > cls.size_threshold ||
         static_cast<double>(out.stats.max_infectives) >=
             cls.infectives_threshold)) {
      out.stats.end_reason = EndReason::major;
      break;
    }
    if (out.stats.n_events >= opts.event_cap) {
      out.stats.end_reason = EndReason::cap;
      break;
    }
  }
  rec.finish(snapshot);
  out.stats.end_time = t;
  out.final_sir = stepper.state();
  return out;
}

EventTrajectory simulate_branching(const NetworkModel& model,
                                   const CountVector& I0, std::int64_t cap,
                                   RngSpec spec, const SimOptions& opts,
                                   double t_end) {
  model.validate();
  if (I0.size() != model.n) throw ValidationError("I0 dimension mismatch");
  if (I0.sum() <= 0) throw ValidationError("I0 must be nonzero");
  if (cap < 1) throw ValidationError("cap must be positive");

  EventTrajectory out;
  Recorder rec(out, opts, t_end);
  Rng rng(spec);
  BranchingStepper stepper(model, I0);
  auto snapshot = [&] { out.infective_grid.push_back(stepper.state()); };

  std::int64_t alive = I0.sum();
  out.stats.max_infectives = alive;
  double t = 0;
  while (true) {
    if (stepper.total() <= 0) {
      if (std::isfinite(t_end)) {
        t = t_end;
        out.stats.end_reason = EndReason::horizon;
      }
      break;
    }
    BranchingStepper::Step step = stepper.next(rng);
    const double t_next = t + step.dt;
    if (t_next > t_end) {
      rec.advance(t_end, snapshot);
      t = t_end;
      out.stats.end_reason = EndReason::horizon;
      break;
    }
    rec.advance(t_next, snapshot);
    t = t_next;
    rec.event(t, step.kind, step.from, step.to);
    stepper.apply(step);
    ++out.stats.n_events;

    if (step.kind == EventKind::branch_birth) {
      ++out.stats.total_size;
      ++alive;
      out.stats.max_infectives = std::max(out.stats.max_infectives, alive);
      if (alive >= cap) {
        out.stats.end_reason = EndReason::cap;
        break;
      }
    } else if (step.kind == EventKind::branch_death) {
      --alive;
      if (alive == 0) {
        out.stats.extinct = true;
        out.stats.extinction_time = t;
        out.stats.end_reason = EndReason::extinct;
        break;
      }
    }
    if (out.stats.n_events >= opts.event_cap) {
      out.stats.end_reason = EndReason::cap;
      break;
    }
  }
  rec.finish(snapshot);
  out.stats.end_time = t;
  out.final_infectives = stepper.state();
  return out;
}

ExitTimeResult exit_time_ball(const NetworkModel& model, double N, double eps,
                              double t_cap, RngSpec spec) {
  model.validate();
  const DemographyMatrix demo = build_A(model);
  if (!check_subcritical(demo).subcritical) {
    throw ValidationError("exit_time_ball requires a subcritical model");
  }
  const Vector z_star = equilibrium_population(demo, model.B);
  if (!(eps > 0) || !(eps < z_star.cwiseAbs().maxCoeff())) {
    throw ValidationError("eps must lie in (0, ||z*||_inf)");
  }

  Rng rng(spec);
  PopulationStepper stepper(model, N, floor_state(N, z_star));
  auto outside = [&] {
    double dev = 0;
    for (int j = 0; j < model.n; ++j) {
      dev = std::max(dev,
                     std::abs(static_cast<double>(stepper.state()[j]) / N -
                              z_star[j]));
    }
    return dev >= eps;
  };
  if (outside()) return {0.0, false};  // floor effect at tiny N

  double t = 0;
  while (true) {
    if (stepper.total() <= 0) return {t_cap, true};
    PopulationStepper::Step step = stepper.next(rng);
    t += step.dt;
    if (t > t_cap) return {t_cap, true};
    stepper.apply(step);
    if (outside()) return {t, false};
  }
}

AncestorRun simulate_single_ancestor(const NetworkModel& model, int source,
                                     Rng& rng) {
  if (source < 0 || source >= model.n) {
    throw ValidationError("source node out of range");
  }
  const EdgeList edges(model);
  AncestorRun run;
  run.offspring = CountVector::Zero(model.n);
  int node = source;
  while (true) {
    const double total = model.beta[node] + model.d[node] + model.gamma[node] +
                         edges.row_sum[node];
    if (total <= 0) {
      // No exit and no birth: immortal sterile individual.
      run.lifetime = kInf;
      return run;
    }
    run.lifetime += rng.exponential(total);
    double u = rng.uniform01() * total;
    if (u < model.beta[node]) {
      run.offspring[node] += 1;
      continue;
    }
    u -= model.beta[node];
    if (u < model.d[node] + model.gamma[node]) {
      return run;  // dead or removed
    }
    u -= model.d[node] + model.gamma[node];
    int target = edges.out[node].empty() ? node
                                         : edges.out[node].back().first;
    for (const auto& [k, th] : edges.out[node]) {
      if (u < th) {
        target = k;
        break;
      }
      u -= th;
    }
    node = target;
  }
}

}  // namespace epinet
