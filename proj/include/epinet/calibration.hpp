#pragma once

#include "epinet/model.hpp"

namespace epinet {

/// One node's census over the observation period. `deaths` includes exits
/// to slaughter or outside the study region.
struct NodeRecord {
  std::string node_id;
  double avg_population = 0.0;
  double births = 0.0;
  double deaths = 0.0;
  double external_in = 0.0;
};

/// Observed flow between two nodes over the period.
struct MovementRecord {
  std::string src_id;
  std::string dst_id;
  double count = 0.0;
};

struct CalibrationOptions {
  /// Zero off-diagonal transfer estimates are replaced by this rate to make
  /// the graph strongly connected. Stated per year; convert when the config
  /// time unit differs.
  double theta_floor = 1e-6;
  /// Uniform epidemiological rates (the records carry none).
  double beta = 0.0;
  double gamma = 0.0;
  std::string time_unit = "years";
};

struct CalibratedModel {
  NetworkModel model;
  ScalingConfig scaling;  // N = 1 at data scale, x0 = average populations
  std::vector<std::string> node_ids;  // index order of the model nodes
};

/// Ratio calibration: b_i = births_i / avg_pop_i, d_i = deaths_i / avg_pop_i,
/// B_i = external_in_i (per period, N = 1 at data scale),
/// theta(i,j) = flow(i->j) / avg_pop_i, zeros floored to opts.theta_floor.
CalibratedModel calibrate(const std::vector<NodeRecord>& nodes,
                          const std::vector<MovementRecord>& moves,
                          const CalibrationOptions& opts = {});

/// CSV ingestion. Nodes: header node_id,avg_population,births,deaths,
/// external_in. Movements: header src_id,dst_id,count. UTF-8, comma
/// separated, '.' decimal point.
std::vector<NodeRecord> read_nodes_csv(const std::string& path);
std::vector<MovementRecord> read_movements_csv(const std::string& path);

/// Rate ranges for the synthetic generator. Death rates are drawn as
/// b + gap so every node satisfies d > b, which makes A subcritical.
struct SynthRanges {
  std::pair<double, double> B{0.5, 2.0};
  std::pair<double, double> b{0.0, 0.3};
  std::pair<double, double> d_gap{0.1, 0.7};
  std::pair<double, double> theta{0.05, 0.5};
  std::pair<double, double> beta{0.1, 1.0};
  std::pair<double, double> gamma{0.1, 1.0};
};

/// Random strongly connected model: a directed ring plus each remaining
/// ordered pair with probability `density`. Deterministic given the seed;
/// x0 defaults to the equilibrium population.
ModelConfig synth_network(int n, double density, std::uint64_t seed,
                          const SynthRanges& ranges = {});

}  // namespace epinet
