#include "epinet/montecarlo.hpp"

#include "epinet/ode.hpp"
#include "epinet/outbreak.hpp"
#include "epinet/spectral.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <thread>

namespace epinet {

const char* to_string(Outcome o) {
  switch (o) {
    case Outcome::major: return "major";
    case Outcome::minor: return "minor";
    case Outcome::censored: return "censored";
    default: return "unknown";
  }
}

void parallel_replicates(int n_runs, int workers,
                         const std::function<void(int)>& fn) {
  if (workers <= 0) {
    workers = static_cast<int>(std::thread::hardware_concurrency());
    if (workers <= 0) workers = 1;
  }
  workers = std::min(workers, n_runs);
  if (workers <= 1) {
    for (int r = 0; r < n_runs; ++r) fn(r);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      try {
        for (int r = next.fetch_add(1); r < n_runs; r = next.fetch_add(1)) {
          fn(r);
        }
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

namespace {

Outcome classify(const TrajectoryStats& stats, const OutbreakClassifier& cls) {
  const bool over =
      static_cast<double>(stats.total_size) > cls.size_threshold ||
      static_cast<double>(stats.max_infectives) >= cls.infectives_threshold;
  if (over) return Outcome::major;
  if (stats.extinct) return Outcome::minor;
  return Outcome::censored;
}

double binomial_se(double p, int n) {
  return n > 0 ? std::sqrt(p * (1.0 - p) / n) : 0.0;
}

}  // namespace

EnsembleResult estimate_outbreak_prob(const NetworkModel& model,
                                      const ScalingConfig& scaling,
                                      const OutbreakClassifier& classifier,
                                      double t_end, int n_runs,
                                      std::uint64_t seed, int workers) {
  if (n_runs < 100) throw ValidationError("n_runs must be at least 100");
  model.validate();
  scaling.validate(model);

  EnsembleResult out;
  out.n_runs = n_runs;
  out.replicates.resize(n_runs);
  SimOptions opts;
  opts.stop_when_major = true;
  opts.classifier = classifier;

  parallel_replicates(n_runs, workers, [&](int r) {
    const EventTrajectory traj = simulate_sir(
        model, scaling, t_end, RngSpec{seed, static_cast<std::uint64_t>(r)},
        opts);
    ReplicateSummary& s = out.replicates[r];
    s.tau = traj.stats.extinction_time;
    s.total_size = traj.stats.total_size;
    s.max_infectives = traj.stats.max_infectives;
    s.end_time = traj.stats.end_time;
    s.outcome = classify(traj.stats, classifier);
  });

  for (const auto& s : out.replicates) {
    switch (s.outcome) {
      case Outcome::major: ++out.n_major; break;
      case Outcome::minor: ++out.n_minor; break;
      case Outcome::censored: ++out.n_censored; break;
    }
  }
  const int classified = out.n_major + out.n_minor;
  out.excessive_censoring = out.n_censored > n_runs / 100;
  out.estimate = classified > 0
                     ? static_cast<double>(out.n_major) / classified
                     : 0.0;
  out.std_error = binomial_se(out.estimate, classified);
  return out;
}

StationaryMeanResult stationary_mean_population(const NetworkModel& model,
                                                double N, double burn_in,
                                                double horizon, int n_runs,
                                                std::uint64_t seed,
                                                int workers) {
  model.validate();
  if (!(horizon > burn_in) || !(burn_in >= 0)) {
    throw ValidationError("need 0 <= burn_in < horizon");
  }
  const DemographyMatrix demo = build_A(model);
  const SubcriticalityReport sub = check_subcritical(demo);
  if (!sub.subcritical) {
    throw ValidationError("stationary mean requires a subcritical model");
  }
  if (burn_in < 10.0 / std::abs(sub.spectral_abscissa)) {
    throw ValidationError("burn_in shorter than 10 relaxation times");
  }
  const Vector z_star = equilibrium_population(demo, model.B);

  const int n = model.n;
  std::vector<Vector> averages(n_runs);
  parallel_replicates(n_runs, workers, [&](int r) {
    Vector integral = Vector::Zero(n);
    auto observe = [&](double t0, double t1, const CountVector& x) {
      const double lo = std::max(t0, burn_in);
      const double hi = std::min(t1, horizon);
      if (hi > lo) {
        for (int j = 0; j < n; ++j) {
          integral[j] += (hi - lo) * static_cast<double>(x[j]);
        }
      }
    };
    simulate_population(model, N, z_star, horizon,
                        RngSpec{seed, static_cast<std::uint64_t>(r)}, {},
                        observe);
    averages[r] = integral / (horizon - burn_in);
  });

  StationaryMeanResult res;
  res.n_runs = n_runs;
  res.mean = Vector::Zero(n);
  for (const auto& a : averages) res.mean += a;
  res.mean /= n_runs;
  Vector var = Vector::Zero(n);
  for (const auto& a : averages) {
    var += (a - res.mean).cwiseAbs2();
  }
  var /= std::max(1, n_runs - 1);
  res.std_error = (var / n_runs).cwiseSqrt();
  res.target = N * z_star;
  return res;
}

LlnResult lln_deviation(const NetworkModel& model, const Vector& x0,
                        const std::vector<double>& Ns, double T, int n_runs,
                        std::uint64_t seed, int workers, int grid_points) {
  model.validate();
  for (std::size_t k = 1; k < Ns.size(); ++k) {
    if (!(Ns[k] > Ns[k - 1])) throw ValidationError("Ns must be increasing");
  }
  if (grid_points < 1) throw ValidationError("grid_points must be positive");

  LlnResult res;
  res.Ns = Ns;
  res.n_runs = n_runs;
  const int n = model.n;
  const DemographyMatrix demo = build_A(model);

  std::vector<double> grid(grid_points);
  for (int k = 0; k < grid_points; ++k) {
    grid[k] = grid_points == 1 ? 0.0 : T * k / (grid_points - 1);
  }
  const std::vector<Vector> flow = linear_flow_grid(demo.A, model.B, x0, grid);

  for (double N : Ns) {
    std::vector<double> sup_dev(n_runs, 0.0);
    parallel_replicates(n_runs, workers, [&](int r) {
      std::size_t gi = 0;
      double dev = 0;
      auto measure = [&](const CountVector& x) {
        double local = 0;
        for (int j = 0; j < n; ++j) {
          local = std::max(local, std::abs(static_cast<double>(x[j]) / N -
                                           flow[gi][j]));
        }
        dev = std::max(dev, local);
      };
      if (T <= 0) {
        CountVector x(n);
        for (int j = 0; j < n; ++j) {
          x[j] = static_cast<std::int64_t>(std::floor(N * x0[j]));
        }
        measure(x);
        sup_dev[r] = dev;
        return;
      }
      CountVector last_state;
      auto observe = [&](double t0, double t1, const CountVector& x) {
        while (gi < grid.size() && grid[gi] >= t0 && grid[gi] < t1) {
          measure(x);
          ++gi;
        }
        last_state = x;
      };
      simulate_population(model, N, x0, T,
                          RngSpec{seed, static_cast<std::uint64_t>(r)}, {},
                          observe);
      while (gi < grid.size()) {  // the t = T grid point
        measure(last_state);
        ++gi;
      }
      sup_dev[r] = dev;
    });
    std::sort(sup_dev.begin(), sup_dev.end());
    const int idx = std::min<int>(
        n_runs - 1, static_cast<int>(std::ceil(0.9 * n_runs)) - 1);
    res.deviation_q90.push_back(sup_dev[std::max(0, idx)]);
  }
  return res;
}

OffspringResult offspring_empirical(const NetworkModel& model, int source,
                                    int n_runs, std::uint64_t seed,
                                    const std::vector<Vector>& probes,
                                    int workers) {
  model.validate();
  if (n_runs < 1) throw ValidationError("n_runs must be positive");
  if (source < 0 || source >= model.n) {
    throw ValidationError("source node out of range");
  }
  const int n = model.n;
  std::vector<CountVector> offspring(n_runs);
  parallel_replicates(n_runs, workers, [&](int r) {
    Rng rng(RngSpec{seed, static_cast<std::uint64_t>(r)});
    offspring[r] = simulate_single_ancestor(model, source, rng).offspring;
  });

  OffspringResult res;
  res.n_runs = n_runs;
  res.mean_row = Vector::Zero(n);
  for (const auto& w : offspring) {
    for (int j = 0; j < n; ++j) res.mean_row[j] += static_cast<double>(w[j]);
  }
  res.mean_row /= n_runs;
  Vector var = Vector::Zero(n);
  for (const auto& w : offspring) {
    for (int j = 0; j < n; ++j) {
      const double dlt = static_cast<double>(w[j]) - res.mean_row[j];
      var[j] += dlt * dlt;
    }
  }
  var /= std::max(1, n_runs - 1);
  res.std_error = (var / n_runs).cwiseSqrt();
  res.expected = offspring_matrix(model);

  PgfSolver solver(model);
  for (const auto& s : probes) {
    OffspringProbe probe;
    probe.s = s;
    double sum = 0, sum2 = 0;
    for (const auto& w : offspring) {
      double val = 1.0;
      for (int j = 0; j < n; ++j) {
        if (w[j] > 0) val *= std::pow(s[j], static_cast<double>(w[j]));
      }
      sum += val;
      sum2 += val * val;
    }
    probe.empirical = sum / n_runs;
    const double var_p =
        (sum2 - sum * sum / n_runs) / std::max(1, n_runs - 1);
    probe.std_error = std::sqrt(var_p / n_runs);
    probe.analytic = solver.eval(s)[source];
    res.probes.push_back(std::move(probe));
  }
  return res;
}

namespace {

struct CensoredValue {
  double value;
  bool censored;  // value is a lower bound
};

// Lower median by order statistic; exact while the median index lands on an
// uncensored entry.
std::pair<double, bool> censored_median(std::vector<CensoredValue> v) {
  std::sort(v.begin(), v.end(), [](const CensoredValue& a,
                                   const CensoredValue& b) {
    if (a.value != b.value) return a.value < b.value;
    return a.censored < b.censored;
  });
  const std::size_t k = (v.size() - 1) / 2;
  // Any censored entry at or below the median position makes the median a
  // lower bound only.
  bool bound = false;
  for (std::size_t j = 0; j <= k; ++j) bound = bound || v[j].censored;
  return {v[k].value, bound};
}

double ls_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  double mx = 0, my = 0;
  for (std::size_t k = 0; k < n; ++k) {
    mx += x[k];
    my += y[k];
  }
  mx /= n;
  my /= n;
  double num = 0, den = 0;
  for (std::size_t k = 0; k < n; ++k) {
    num += (x[k] - mx) * (y[k] - my);
    den += (x[k] - mx) * (x[k] - mx);
  }
  return num / den;
}

double largest_log10_gap(std::vector<double> values) {
  if (values.size() < 2) return 0.0;
  for (double& v : values) v = std::log10(v + 1.0);
  std::sort(values.begin(), values.end());
  double gap = 0;
  for (std::size_t k = 1; k < values.size(); ++k) {
    gap = std::max(gap, values[k] - values[k - 1]);
  }
  return gap;
}

}  // namespace

ScalingResult endemic_scaling(const NetworkModel& model,
                              const std::vector<double>& Ns, double t_cap,
                              int n_runs_per_N, std::uint64_t seed,
                              int workers, int min_major, int bootstrap) {
  model.validate();
  const DemographyMatrix demo = build_A(model);
  if (!check_subcritical(demo).subcritical) {
    throw ValidationError("endemic scaling requires a subcritical model");
  }
  const Vector z_star = equilibrium_population(demo, model.B);
  const EquilibriumReport eq = find_endemic_equilibrium(model, z_star);
  if (eq.classification != EquilibriumReport::Class::stable_endemic) {
    ScalingResult res;
    res.inconclusive = true;
    res.note = "no stable endemic equilibrium found";
    return res;
  }
  const double z_l1 = z_star.lpNorm<1>();

  ScalingResult res;
  // Per-N major-replicate samples kept for the bootstrap.
  std::vector<std::vector<CensoredValue>> tau_samples, size_samples;

  std::uint64_t stream_base = 0;
  for (double N : Ns) {
    ScalingPoint pt;
    pt.N = N;
    pt.n_runs = n_runs_per_N;
    const OutbreakClassifier cls = default_classifier(N, z_l1);
    ScalingConfig scaling;
    scaling.N = N;
    scaling.x0 = z_star;
    scaling.I0 = CountVector::Zero(model.n);
    scaling.I0[0] = 1;

    std::vector<ReplicateSummary> reps(n_runs_per_N);
    const std::uint64_t base = stream_base;
    parallel_replicates(n_runs_per_N, workers, [&](int r) {
      const EventTrajectory traj = simulate_sir(
          model, scaling, t_cap, RngSpec{seed, base + r}, {});
      ReplicateSummary& s = reps[r];
      s.tau = traj.stats.extinction_time;
      s.total_size = traj.stats.total_size;
      s.max_infectives = traj.stats.max_infectives;
      s.end_time = traj.stats.end_time;
      s.outcome = classify(traj.stats, cls);
      if (s.outcome == Outcome::major && !traj.stats.extinct) {
        s.tau = std::numeric_limits<double>::quiet_NaN();  // right-censored
      }
    });
    stream_base += static_cast<std::uint64_t>(n_runs_per_N);

    std::vector<CensoredValue> taus, sizes;
    std::vector<double> fractions, all_sizes;
    for (const auto& s : reps) {
      all_sizes.push_back(static_cast<double>(s.total_size));
      switch (s.outcome) {
        case Outcome::major: {
          ++pt.n_major;
          const bool cens = std::isnan(s.tau);
          if (cens) ++pt.n_censored_major;
          taus.push_back({cens ? t_cap : s.tau, cens});
          sizes.push_back({static_cast<double>(s.total_size), cens});
          fractions.push_back(static_cast<double>(s.max_infectives) /
                              (N * z_l1));
          break;
        }
          case Outcome::minor: ++pt.n_minor; break;
          case Outcome::censored: ++pt.n_unclassified; break;
      }
    }
    pt.bimodality_gap = largest_log10_gap(all_sizes);
    if (pt.n_major < min_major) {
      res.inconclusive = true;
      res.note = "fewer than " + std::to_string(min_major) +
                 " major outbreaks at N = " + std::to_string(N);
    }
    if (pt.n_major > 0) {
      const auto [tau_med, tau_bound] = censored_median(taus);
      pt.median_log_tau = std::log(tau_med);
      pt.tau_lower_bound = tau_bound;
      const auto [size_med, size_bound] = censored_median(sizes);
      pt.median_log_total_size = std::log(std::max(1.0, size_med));
      pt.total_size_lower_bound = size_bound;
      std::sort(fractions.begin(), fractions.end());
      pt.median_max_infectives_fraction =
          fractions[(fractions.size() - 1) / 2];
    }
    res.points.push_back(pt);
    tau_samples.push_back(std::move(taus));
    size_samples.push_back(std::move(sizes));
  }

  if (res.inconclusive) return res;

  std::vector<double> xs(Ns.begin(), Ns.end());
  std::vector<double> tau_med(Ns.size()), size_med(Ns.size());
  for (std::size_t k = 0; k < Ns.size(); ++k) {
    tau_med[k] = res.points[k].median_log_tau;
    size_med[k] = res.points[k].median_log_total_size;
  }
  res.slope_log_tau = ls_slope(xs, tau_med);
  res.slope_log_total_size = ls_slope(xs, size_med);

  // Percentile bootstrap over major replicates within each N.
  std::vector<double> boot_tau(bootstrap), boot_size(bootstrap);
  parallel_replicates(bootstrap, workers, [&](int bidx) {
    Rng rng(RngSpec{seed ^ 0xb005ca1eULL,
                    static_cast<std::uint64_t>(bidx)});
    std::vector<double> t_med(Ns.size()), s_med(Ns.size());
    for (std::size_t k = 0; k < Ns.size(); ++k) {
      const auto& taus = tau_samples[k];
      const auto& sizes = size_samples[k];
      std::vector<CensoredValue> t_res, s_res;
      for (std::size_t j = 0; j < taus.size(); ++j) {
        const std::size_t pick = static_cast<std::size_t>(
            rng.uniform01() * static_cast<double>(taus.size()));
        const std::size_t idx = std::min(pick, taus.size() - 1);
        t_res.push_back(taus[idx]);
        s_res.push_back(sizes[idx]);
      }
      t_med[k] = std::log(censored_median(t_res).first);
      s_med[k] = std::log(std::max(1.0, censored_median(s_res).first));
    }
    boot_tau[bidx] = ls_slope(xs, t_med);
    boot_size[bidx] = ls_slope(xs, s_med);
  });
  std::sort(boot_tau.begin(), boot_tau.end());
  std::sort(boot_size.begin(), boot_size.end());
  const int lo = static_cast<int>(std::floor(0.025 * (bootstrap - 1)));
  const int hi = static_cast<int>(std::ceil(0.975 * (bootstrap - 1)));
  res.slope_tau_lo = boot_tau[lo];
  res.slope_tau_hi = boot_tau[hi];
  res.slope_size_lo = boot_size[lo];
  res.slope_size_hi = boot_size[hi];
  return res;
}

}  // namespace epinet
