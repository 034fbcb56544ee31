#pragma once

#include "epinet/model.hpp"
#include "epinet/rng.hpp"

#include <array>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

namespace epinet {

enum class EventKind : std::uint8_t {
  inflow,       // +1 individual (population) / +1 susceptible (sir)
  death,        // population process death
  transfer,     // population process move
  death_s,
  death_i,
  death_r,
  transfer_s,
  transfer_i,
  transfer_r,
  infection,
  recovery,
  branch_birth,
  branch_death,  // death or removal of a branching individual
  branch_move,
  kCount
};
const char* to_string(EventKind kind);

enum class EndReason : std::uint8_t {
  extinct,  // infectives hit zero (tau recorded)
  horizon,  // t_end reached
  cap,      // event cap or branching population cap hit
  exited,   // ball-exit experiments
  major,    // stopped early once classified as a major outbreak
};
const char* to_string(EndReason reason);

struct Event {
  double time;
  EventKind kind;
  std::int32_t node_from;  // -1 when not applicable
  std::int32_t node_to;
};

struct SIRState {
  CountVector s, i, r;
};

struct TrajectoryStats {
  double end_time = 0.0;
  EndReason end_reason = EndReason::horizon;
  bool extinct = false;
  double extinction_time = std::numeric_limits<double>::quiet_NaN();
  std::int64_t total_size = 0;  // upward jumps of ||I||_1
  std::int64_t max_infectives = 0;
  std::int64_t n_events = 0;
};

struct EventTrajectory {
  std::vector<Event> events;  // only with SimOptions::record_events
  std::vector<double> grid_times;
  std::vector<CountVector> population_grid;
  std::vector<SIRState> sir_grid;
  std::vector<CountVector> infective_grid;
  TrajectoryStats stats;
  CountVector final_population;
  SIRState final_sir;
  CountVector final_infectives;
  // Integrated propensity per event kind, filled when track_propensity is
  // set; the empirical count over integrated propensity tends to 1 for an
  // exact sampler.
  std::array<double, static_cast<std::size_t>(EventKind::kCount)>
      integrated_propensity{};
};

/// Finite-N major-outbreak rule: total_size > size_threshold, or
/// max_infectives >= infectives_threshold. Any fixed fraction of N separates
/// the minor O(1) mode from the major O(N) mode.
struct OutbreakClassifier {
  double size_threshold = 100.0;
  double infectives_threshold = std::numeric_limits<double>::infinity();
};

/// Default thresholds max(100, frac*N*||z*||_1) and frac*N*||z*||_1 with
/// frac = 0.05; pass z_star_l1 = 0 when no equilibrium exists (closed model)
/// to keep only the absolute size rule.
OutbreakClassifier default_classifier(double N, double z_star_l1,
                                      double frac = 0.05);

struct SimOptions {
  std::int64_t event_cap = 1000000000;
  bool record_events = false;
  int snapshot_points = 0;  // uniform grid over [0, t_end]; needs finite t_end
  bool stop_when_major = false;
  OutbreakClassifier classifier{};
  bool track_propensity = false;
};

/// Piecewise-constant path observer: called once per constant piece
/// [t0, t1) with the state held on it, and once for the final piece.
using PopulationObserver =
    std::function<void(double t0, double t1, const CountVector& x)>;

/// Exact direct-method sample path of the population jump process:
/// inflow N*B_i + b_i x_i, death d_i x_i, transfer theta(i,j) x_i.
/// Initial state floor(N * x0).
EventTrajectory simulate_population(const NetworkModel& model, double N,
                                    const Vector& x0, double t_end,
                                    RngSpec rng, const SimOptions& opts = {},
                                    const PopulationObserver& observe = {});

/// Exact sample path of the nine-transition SIR process. Stops at extinction
/// of I (records tau and Z), at t_end, at the event cap, or (when
/// stop_when_major) at classification.
EventTrajectory simulate_sir(const NetworkModel& model,
                             const ScalingConfig& scaling, double t_end,
                             RngSpec rng, const SimOptions& opts = {});

/// Multitype branching approximation: per-capita birth beta_i, death
/// d_i + gamma_i, move theta(i,j). Stops at extinction or when the total
/// population reaches `cap` (end_reason = cap, read as survival).
EventTrajectory simulate_branching(
    const NetworkModel& model, const CountVector& I0, std::int64_t cap,
    RngSpec rng, const SimOptions& opts = {},
    double t_end = std::numeric_limits<double>::infinity());

struct CoupledResult {
  EventTrajectory sir;
  EventTrajectory branching;
  std::optional<double> divergence_time;  // first rejected contact
};

/// Theorem-1 coupling: both processes are driven by one shared family of
/// unit-rate Poisson streams and uniform marks; a contact-clock firing
/// infects in the SIR process only when its mark falls below the susceptible
/// fraction, and always births in the branching process. The infective
/// components coincide event-for-event until the first rejected mark.
CoupledResult simulate_coupled(const NetworkModel& model,
                               const ScalingConfig& scaling, double T,
                               RngSpec rng, const SimOptions& opts = {});

struct ExitTimeResult {
  double time = 0.0;
  bool censored = false;
};

/// First time ||X/N - z*||_inf >= eps starting from floor(N z*), censored at
/// t_cap. Requires a subcritical model and eps in (0, ||z*||_inf).
ExitTimeResult exit_time_ball(const NetworkModel& model, double N, double eps,
                              double t_cap, RngSpec rng);

/// One ancestor born in `source`: its node path until death/removal and the
/// offspring it leaves per node (the W row of the offspring matrix).
struct AncestorRun {
  CountVector offspring;
  double lifetime = 0.0;
};
AncestorRun simulate_single_ancestor(const NetworkModel& model, int source,
                                     Rng& rng);

}  // namespace epinet
