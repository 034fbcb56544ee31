#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace epinet {

/// Thrown on malformed configs, invalid rates, dimension mismatches.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Thrown when a numerical routine fails (non-convergence, singular system).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using CountVector = Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1>;

/// Rates of the open multitype population / SIR model on a directed graph.
///
/// Node i receives immigrants at constant rate N*B[i], individuals in node i
/// give birth at rate b[i], die at rate d[i] and move to node j at rate
/// theta(i,j), each per capita. Infectives in node i make contacts at rate
/// beta[i] and recover at rate gamma[i]. All rates are per unit of
/// `time_unit`, which is metadata only.
struct NetworkModel {
  int n = 0;
  Vector B;
  Vector b;
  Vector d;
  Matrix theta;  // theta(i,j): per-capita transfer rate i -> j, zero diagonal
  Vector beta;
  Vector gamma;
  std::string time_unit = "days";

  /// Total per-capita outflow rate of an infective in node i:
  /// sigma[i] = gamma[i] + d[i] + sum_{j != i} theta(i,j).
  Vector sigma() const;

  /// Row sums of theta (per-capita total transfer rate out of each node).
  Vector theta_out() const;

  /// Structural checks: dimensions, nonnegativity, finiteness, zero diagonal.
  /// Throws ValidationError. Does not check connectivity or subcriticality.
  void validate() const;
};

/// Scaling parameter and initial condition for simulation runs.
struct ScalingConfig {
  double N = 1.0;
  Vector x0;       // scaled initial population per node
  CountVector I0;  // initial infectives per node (not scaled by N)

  /// Checks floor(N*x0) - I0 >= 0 entrywise. Throws ValidationError.
  void validate(const NetworkModel& model) const;
};

struct ModelConfig {
  NetworkModel model;
  ScalingConfig scaling;
};

struct ConnectivityReport {
  bool strongly_connected = false;
  /// Witness pairs (from, to) with no directed theta-path, 0-based.
  std::vector<std::pair<int, int>> unreachable;
};

/// Strong connectivity of the graph {(i,j): theta(i,j) > 0} by forward and
/// backward reachability search from node 0. n = 1 is always connected.
ConnectivityReport validate_connectivity(const NetworkModel& model);

/// Parses a JSON config document with keys n, B, b, d, theta (row-major n x n,
/// nested rows also accepted), beta, gamma, N, x0, I0, time_unit.
/// Missing N defaults to 1, x0 to zeros, I0 to a single infective in node 0.
ModelConfig load_model(const std::string& config_text);
ModelConfig load_model_file(const std::string& path);

/// Inverse of load_model on valid configs (round-trip identity).
std::string serialize(const ModelConfig& config);

}  // namespace epinet
