#pragma once

#include "epinet/ssa.hpp"

#include <string>

namespace epinet {

/// Runs fn(0..n_runs-1) over a small thread pool. Replicas write to
/// disjoint slots indexed by r, so results do not depend on scheduling;
/// workers <= 0 means hardware concurrency.
void parallel_replicates(int n_runs, int workers,
                         const std::function<void(int)>& fn);

enum class Outcome : std::uint8_t { major, minor, censored };
const char* to_string(Outcome o);

struct ReplicateSummary {
  double tau = std::numeric_limits<double>::quiet_NaN();  // NaN when censored
  std::int64_t total_size = 0;
  std::int64_t max_infectives = 0;
  Outcome outcome = Outcome::censored;
  double end_time = 0.0;
};

struct EnsembleResult {
  double estimate = 0.0;
  double std_error = 0.0;
  int n_runs = 0;
  int n_major = 0;
  int n_minor = 0;
  int n_censored = 0;
  bool excessive_censoring = false;  // > 1% unclassifiable
  std::vector<ReplicateSummary> replicates;
};

/// Empirical major-outbreak frequency over simulate_sir replicas; major
/// replicates stop early at classification. estimate = major / classified.
EnsembleResult estimate_outbreak_prob(const NetworkModel& model,
                                      const ScalingConfig& scaling,
                                      const OutbreakClassifier& classifier,
                                      double t_end, int n_runs,
                                      std::uint64_t seed, int workers = 0);

struct StationaryMeanResult {
  Vector mean;       // time-and-ensemble average of X over [burn_in, horizon]
  Vector std_error;  // replicate-to-replicate, per node
  Vector target;     // -N A^{-1} B
  int n_runs = 0;
  std::vector<Vector> replicate_means;
};

/// Starts every replicate at floor(N z*). Requires a subcritical model and
/// burn_in >= 10 / |spectral abscissa|.
StationaryMeanResult stationary_mean_population(const NetworkModel& model,
                                                double N, double burn_in,
                                                double horizon, int n_runs,
                                                std::uint64_t seed,
                                                int workers = 0);

struct LlnResult {
  std::vector<double> Ns;
  std::vector<double> deviation_q90;  // 90th percentile sup-norm deviation
  int n_runs = 0;
};

/// Per-N 90th percentile of sup_{t in [0,T]} ||X^N(t)/N - z(t)||_inf against
/// the closed-form flow, sampled on a uniform grid.
LlnResult lln_deviation(const NetworkModel& model, const Vector& x0,
                        const std::vector<double>& Ns, double T, int n_runs,
                        std::uint64_t seed, int workers = 0,
                        int grid_points = 201);

struct OffspringProbe {
  Vector s;
  double empirical = 0.0;
  double std_error = 0.0;
  double analytic = 0.0;  // eval_G(s)[source]
};

struct OffspringResult {
  Vector mean_row;   // empirical E[W_{source, j}]
  Vector std_error;
  Matrix expected;   // offspring matrix C for comparison
  std::vector<OffspringProbe> probes;
  int n_runs = 0;
};

/// Single-ancestor branching runs from `source`: offspring counts per node
/// and the empirical PGF E[prod_j s_j^{W_j}] at the probe points.
OffspringResult offspring_empirical(const NetworkModel& model, int source,
                                    int n_runs, std::uint64_t seed,
                                    const std::vector<Vector>& probes = {},
                                    int workers = 0);

struct ScalingPoint {
  double N = 0;
  int n_runs = 0;
  int n_major = 0;
  int n_minor = 0;
  int n_censored_major = 0;  // majors still alive at t_cap (right-censored)
  int n_unclassified = 0;
  double median_log_tau = 0.0;
  bool tau_lower_bound = false;
  double median_log_total_size = 0.0;
  bool total_size_lower_bound = false;
  double median_max_infectives_fraction = 0.0;  // max_I / (N ||z*||_1)
  double bimodality_gap = 0.0;  // largest log10 gap in the Z histogram
};

struct ScalingResult {
  std::vector<ScalingPoint> points;
  double slope_log_tau = 0.0;
  double slope_log_total_size = 0.0;
  // 95% bootstrap percentile intervals for the two slopes.
  double slope_tau_lo = 0.0, slope_tau_hi = 0.0;
  double slope_size_lo = 0.0, slope_size_hi = 0.0;
  bool inconclusive = false;
  std::string note;
};

/// Extinction-time / total-size growth in N for a model with a verified
/// endemic equilibrium. Medians are major-outbreak-conditioned; replicates
/// alive at t_cap enter as right-censored lower bounds, never dropped.
ScalingResult endemic_scaling(const NetworkModel& model,
                              const std::vector<double>& Ns, double t_cap,
                              int n_runs_per_N, std::uint64_t seed,
                              int workers = 0, int min_major = 30,
                              int bootstrap = 1000);

}  // namespace epinet
