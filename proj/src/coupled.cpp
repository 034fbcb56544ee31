#include "epinet/ssa.hpp"

#include <cmath>

// Theorem-1 construction: one family of unit-rate Poisson streams drives both
// the SIR process and the approximating branching process. Infective-driven
// channels (contact, infective death, recovery, infective transfer) are
// consumed in lockstep until the first thinning mark rejects a contact; from
// then on each process keeps its own cursor on the shared streams.

namespace epinet {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Stream {
  std::vector<double> epochs;  // cumulative firing times in internal time
  std::vector<double> marks;   // aligned thinning marks (contact channels)
  bool with_marks = false;
  double last = 0;

  double epoch(std::size_t k, Rng& rng) {
    while (epochs.size() <= k) {
      last += rng.exponential(1.0);
      epochs.push_back(last);
      if (with_marks) marks.push_back(rng.uniform01());
    }
    return epochs[k];
  }
};

struct Cursor {
  double internal = 0;
  std::size_t next = 0;
};

enum class Chan : std::uint8_t {
  immigration,
  birth,
  death_s,
  death_r,
  transfer_s,
  transfer_r,
  contact,   // shared, thinned on the SIR side
  death_i,   // shared
  recovery,  // shared
  transfer_i // shared
};

struct Channel {
  Chan kind;
  int from = -1;
  int to = -1;
  bool shared = false;
};

struct SirSide {
  CountVector s, i, r;
  std::int64_t infectives = 0;
};

}  // namespace

CoupledResult simulate_coupled(const NetworkModel& model,
                               const ScalingConfig& scaling, double T,
                               RngSpec spec, const SimOptions& opts) {
  model.validate();
  scaling.validate(model);
  if (!(T > 0) || !std::isfinite(T)) {
    throw ValidationError("coupling horizon T must be positive and finite");
  }

  const int n = model.n;
  std::vector<Channel> channels;
  for (int j = 0; j < n; ++j) {
    channels.push_back({Chan::immigration, j, j, false});
    channels.push_back({Chan::birth, j, j, false});
    channels.push_back({Chan::death_s, j, -1, false});
    channels.push_back({Chan::death_r, j, -1, false});
    channels.push_back({Chan::contact, j, j, true});
    channels.push_back({Chan::death_i, j, -1, true});
    channels.push_back({Chan::recovery, j, -1, true});
    for (int k = 0; k < n; ++k) {
      if (k == j || model.theta(j, k) <= 0) continue;
      channels.push_back({Chan::transfer_s, j, k, false});
      channels.push_back({Chan::transfer_r, j, k, false});
      channels.push_back({Chan::transfer_i, j, k, true});
    }
  }
  const std::size_t nc = channels.size();

  Rng rng(spec);
  std::vector<Stream> streams(nc);
  for (std::size_t c = 0; c < nc; ++c) {
    streams[c].with_marks = channels[c].kind == Chan::contact;
  }
  std::vector<Cursor> cur_sir(nc);
  std::vector<Cursor> cur_bp(nc);  // used only after divergence

  SirSide sir;
  sir.s = CountVector(n);
  for (int j = 0; j < n; ++j) {
    sir.s[j] = static_cast<std::int64_t>(std::floor(scaling.N * scaling.x0[j]));
  }
  sir.i = scaling.I0;
  sir.r = CountVector::Zero(n);
  sir.s -= sir.i;
  sir.infectives = sir.i.sum();
  CountVector bp = scaling.I0;
  std::int64_t bp_alive = bp.sum();

  CoupledResult out;
  out.sir.stats.max_infectives = sir.infectives;
  out.branching.stats.max_infectives = bp_alive;
  bool diverged = false;

  auto rate_sir = [&](const Channel& c) -> double {
    const int j = c.from;
    switch (c.kind) {
      case Chan::immigration: return scaling.N * model.B[j];
      case Chan::birth:
        return model.b[j] *
               static_cast<double>(sir.s[j] + sir.i[j] + sir.r[j]);
      case Chan::death_s: return model.d[j] * static_cast<double>(sir.s[j]);
      case Chan::death_r: return model.d[j] * static_cast<double>(sir.r[j]);
      case Chan::transfer_s:
        return model.theta(j, c.to) * static_cast<double>(sir.s[j]);
      case Chan::transfer_r:
        return model.theta(j, c.to) * static_cast<double>(sir.r[j]);
      case Chan::contact: return model.beta[j] * static_cast<double>(sir.i[j]);
      case Chan::death_i: return model.d[j] * static_cast<double>(sir.i[j]);
      case Chan::recovery:
        return model.gamma[j] * static_cast<double>(sir.i[j]);
      case Chan::transfer_i:
        return model.theta(j, c.to) * static_cast<double>(sir.i[j]);
    }
    return 0;
  };
  auto rate_bp = [&](const Channel& c) -> double {
    const int j = c.from;
    switch (c.kind) {
      case Chan::contact: return model.beta[j] * static_cast<double>(bp[j]);
      case Chan::death_i: return model.d[j] * static_cast<double>(bp[j]);
      case Chan::recovery: return model.gamma[j] * static_cast<double>(bp[j]);
      case Chan::transfer_i:
        return model.theta(j, c.to) * static_cast<double>(bp[j]);
      default: return 0;
    }
  };

  auto record_sir = [&](double t, EventKind k, int from, int to) {
    if (opts.record_events) out.sir.events.push_back({t, k, from, to});
    ++out.sir.stats.n_events;
  };
  auto record_bp = [&](double t, EventKind k, int from, int to) {
    if (opts.record_events) out.branching.events.push_back({t, k, from, to});
    ++out.branching.stats.n_events;
  };

  double t = 0;
  std::int64_t steps = 0;
  while (t < T && steps < opts.event_cap) {
    // Tentative firing times across the union of both processes.
    double best_dt = kInf;
    std::size_t best_c = 0;
    bool best_is_bp = false;
    for (std::size_t c = 0; c < nc; ++c) {
      const double rs = rate_sir(channels[c]);
      if (rs > 0) {
        const double dt = std::max(
            0.0, (streams[c].epoch(cur_sir[c].next, rng) -
                  cur_sir[c].internal) /
                     rs);
        if (dt < best_dt) {
          best_dt = dt;
          best_c = c;
          best_is_bp = false;
        }
      }
      // Pre-divergence a shared channel's branching rate equals its SIR
      // rate and the single candidate above covers both processes.
      if (diverged && channels[c].shared) {
        const double rb = rate_bp(channels[c]);
        if (rb > 0) {
          const double dt = std::max(
              0.0, (streams[c].epoch(cur_bp[c].next, rng) -
                    cur_bp[c].internal) /
                       rb);
          if (dt < best_dt) {
            best_dt = dt;
            best_c = c;
            best_is_bp = true;
          }
        }
      }
    }
    if (best_dt == kInf) break;  // nothing can ever fire again

    const double dt = std::min(best_dt, T - t);
    // Advance every clock at its own current rate.
    for (std::size_t c = 0; c < nc; ++c) {
      cur_sir[c].internal += rate_sir(channels[c]) * dt;
      if (diverged && channels[c].shared) {
        cur_bp[c].internal += rate_bp(channels[c]) * dt;
      }
    }
    if (best_dt > T - t) {
      t = T;
      break;
    }
    t += best_dt;
    ++steps;

    const Channel& ch = channels[best_c];
    Cursor& cur = best_is_bp ? cur_bp[best_c] : cur_sir[best_c];
    cur.internal = streams[best_c].epochs[cur.next];  // land exactly on it
    const std::size_t fired = cur.next++;
    const bool fires_bp = ch.shared && (!diverged || best_is_bp);
    const bool fires_sir = !best_is_bp;
    const int j = ch.from;

    if (fires_sir) {
      switch (ch.kind) {
        case Chan::immigration:
        case Chan::birth:
          sir.s[j] += 1;
          record_sir(t, EventKind::inflow, j, j);
          break;
        case Chan::death_s:
          sir.s[j] -= 1;
          record_sir(t, EventKind::death_s, j, -1);
          break;
        case Chan::death_r:
          sir.r[j] -= 1;
          record_sir(t, EventKind::death_r, j, -1);
          break;
        case Chan::transfer_s:
          sir.s[j] -= 1;
          sir.s[ch.to] += 1;
          record_sir(t, EventKind::transfer_s, j, ch.to);
          break;
        case Chan::transfer_r:
          sir.r[j] -= 1;
          sir.r[ch.to] += 1;
          record_sir(t, EventKind::transfer_r, j, ch.to);
          break;
        case Chan::contact: {
          const std::int64_t s_pre = sir.s[j];
          const std::int64_t x_pre = sir.s[j] + sir.i[j] + sir.r[j];
          const double mark = streams[best_c].marks[fired];
          const bool accept =
              s_pre > 0 && mark * static_cast<double>(x_pre) <=
                               static_cast<double>(s_pre);
          if (accept) {
            sir.s[j] -= 1;
            sir.i[j] += 1;
            ++sir.infectives;
            ++out.sir.stats.total_size;
            out.sir.stats.max_infectives =
                std::max(out.sir.stats.max_infectives, sir.infectives);
            record_sir(t, EventKind::infection, j, j);
          } else if (!diverged) {
            // First rejected contact: the processes part ways here.
            diverged = true;
            out.divergence_time = t;
            for (std::size_t c = 0; c < nc; ++c) {
              if (channels[c].shared) cur_bp[c] = cur_sir[c];
            }
          }
          break;
        }
        case Chan::death_i:
          sir.i[j] -= 1;
          --sir.infectives;
          record_sir(t, EventKind::death_i, j, -1);
          break;
        case Chan::recovery:
          sir.i[j] -= 1;
          sir.r[j] += 1;
          --sir.infectives;
          record_sir(t, EventKind::recovery, j, -1);
          break;
        case Chan::transfer_i:
          sir.i[j] -= 1;
          sir.i[ch.to] += 1;
          record_sir(t, EventKind::transfer_i, j, ch.to);
          break;
      }
      if (sir.infectives == 0 && !out.sir.stats.extinct) {
        out.sir.stats.extinct = true;
        out.sir.stats.extinction_time = t;
      }
    }

    if (fires_bp) {
      switch (ch.kind) {
        case Chan::contact:
          bp[j] += 1;
          ++bp_alive;
          ++out.branching.stats.total_size;
          out.branching.stats.max_infectives =
              std::max(out.branching.stats.max_infectives, bp_alive);
          record_bp(t, EventKind::branch_birth, j, j);
          break;
        case Chan::death_i:
        case Chan::recovery:
          bp[j] -= 1;
          --bp_alive;
          record_bp(t, EventKind::branch_death, j, -1);
          if (bp_alive == 0 && !out.branching.stats.extinct) {
            out.branching.stats.extinct = true;
            out.branching.stats.extinction_time = t;
          }
          break;
        case Chan::transfer_i:
          bp[j] -= 1;
          bp[ch.to] += 1;
          record_bp(t, EventKind::branch_move, j, ch.to);
          break;
        default: break;
      }
    }
  }

  const EndReason end =
      steps >= opts.event_cap ? EndReason::cap : EndReason::horizon;
  out.sir.stats.end_time = t;
  out.sir.stats.end_reason = out.sir.stats.extinct && sir.infectives == 0
                                 ? EndReason::extinct
                                 : end;
  out.branching.stats.end_time = t;
  out.branching.stats.end_reason =
      out.branching.stats.extinct ? EndReason::extinct : end;
  out.sir.final_sir = SIRState{sir.s, sir.i, sir.r};
  out.branching.final_infectives = bp;
  return out;
}

}  // namespace epinet
