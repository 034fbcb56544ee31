#include "epinet/model.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

namespace epinet {

using nlohmann::json;

Vector NetworkModel::sigma() const {
  return gamma + d + theta_out();
}

Vector NetworkModel::theta_out() const {
  // Diagonal is zero by invariant, so plain row sums.
  return theta.rowwise().sum();
}

namespace {

void check_rate_vector(const Vector& v, int n, const char* name) {
  if (v.size() != n) {
    throw ValidationError(std::string("dimension mismatch: ") + name + " has " +
                          std::to_string(v.size()) + " entries, expected " +
                          std::to_string(n));
  }
  for (int i = 0; i < n; ++i) {
    if (!std::isfinite(v[i])) {
      throw ValidationError(std::string("non-finite rate in ") + name);
    }
    if (v[i] < 0) {
      throw ValidationError(std::string("negative rate in ") + name + "[" +
                            std::to_string(i) + "]");
    }
  }
}

}  // namespace

void NetworkModel::validate() const {
  if (n < 1) throw ValidationError("n must be a positive integer");
  check_rate_vector(B, n, "B");
  check_rate_vector(b, n, "b");
  check_rate_vector(d, n, "d");
  check_rate_vector(beta, n, "beta");
  check_rate_vector(gamma, n, "gamma");
  if (theta.rows() != n || theta.cols() != n) {
    throw ValidationError("dimension mismatch: theta must be " +
                          std::to_string(n) + "x" + std::to_string(n));
  }
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double t = theta(i, j);
      if (!std::isfinite(t) || t < 0) {
        throw ValidationError("negative or non-finite rate in theta(" +
                              std::to_string(i) + "," + std::to_string(j) + ")");
      }
    }
    if (theta(i, i) != 0.0) {
      throw ValidationError("diagonal transfer: theta(" + std::to_string(i) +
                            "," + std::to_string(i) + ") must be 0");
    }
  }
  // Epidemic absorption needs at least one exit channel from the infective
  // class somewhere in the graph.
  if ((d.array() + gamma.array()).maxCoeff() <= 0.0 && beta.maxCoeff() > 0.0) {
    throw ValidationError("all d[i] + gamma[i] are zero: infectives never die "
                          "or recover");
  }
}

void ScalingConfig::validate(const NetworkModel& model) const {
  if (!(N > 0) || !std::isfinite(N)) {
    throw ValidationError("scaling parameter N must be positive and finite");
  }
  if (x0.size() != model.n) {
    throw ValidationError("dimension mismatch: x0 has " +
                          std::to_string(x0.size()) + " entries, expected " +
                          std::to_string(model.n));
  }
  if (I0.size() != model.n) {
    throw ValidationError("dimension mismatch: I0 has " +
                          std::to_string(I0.size()) + " entries, expected " +
                          std::to_string(model.n));
  }
  for (int i = 0; i < model.n; ++i) {
    if (!(x0[i] >= 0) || !std::isfinite(x0[i])) {
      throw ValidationError("x0 entries must be nonnegative and finite");
    }
    if (I0[i] < 0) throw ValidationError("I0 entries must be nonnegative");
    if (static_cast<std::int64_t>(std::floor(N * x0[i])) < I0[i]) {
      throw ValidationError("floor(N*x0) - I0 is negative in node " +
                            std::to_string(i) +
                            ": susceptibles cannot be negative");
    }
  }
}

ConnectivityReport validate_connectivity(const NetworkModel& model) {
  const int n = model.n;
  ConnectivityReport report;
  if (n == 1) {
    report.strongly_connected = true;
    return report;
  }

  auto reach = [&](bool forward) {
    std::vector<char> seen(n, 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      for (int v = 0; v < n; ++v) {
        const double w = forward ? model.theta(u, v) : model.theta(v, u);
        if (w > 0 && !seen[v]) {
          seen[v] = 1;
          stack.push_back(v);
        }
      }
    }
    return seen;
  };

  const auto from0 = reach(true);
  const auto to0 = reach(false);
  for (int v = 1; v < n; ++v) {
    if (!from0[v]) report.unreachable.emplace_back(0, v);
    if (!to0[v]) report.unreachable.emplace_back(v, 0);
  }
  report.strongly_connected = report.unreachable.empty();
  return report;
}

namespace {

Vector parse_vector(const json& j, const char* key, int n) {
  if (!j.contains(key)) {
    throw ValidationError(std::string("missing field ") + key);
  }
  const auto& arr = j.at(key);
  if (!arr.is_array()) {
    throw ValidationError(std::string("field ") + key + " must be an array");
  }
  if (static_cast<int>(arr.size()) != n) {
    throw ValidationError(std::string("dimension mismatch: ") + key + " has " +
                          std::to_string(arr.size()) + " entries, expected " +
                          std::to_string(n));
  }
  Vector v(n);
  for (int i = 0; i < n; ++i) v[i] = arr[i].get<double>();
  return v;
}

Matrix parse_theta(const json& j, int n) {
  if (!j.contains("theta")) throw ValidationError("missing field theta");
  const auto& arr = j.at("theta");
  Matrix m(n, n);
  if (arr.is_array() && !arr.empty() && arr[0].is_array()) {
    if (static_cast<int>(arr.size()) != n) {
      throw ValidationError("dimension mismatch: theta must have n rows");
    }
    for (int i = 0; i < n; ++i) {
      if (static_cast<int>(arr[i].size()) != n) {
        throw ValidationError("dimension mismatch: theta row " +
                              std::to_string(i) + " must have n entries");
      }
      for (int k = 0; k < n; ++k) m(i, k) = arr[i][k].get<double>();
    }
  } else if (arr.is_array()) {
    // Flat row-major layout.
    if (static_cast<int>(arr.size()) != n * n) {
      throw ValidationError("dimension mismatch: flat theta must have n*n "
                            "entries");
    }
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < n; ++k) m(i, k) = arr[i * n + k].get<double>();
  } else {
    throw ValidationError("field theta must be an array");
  }
  return m;
}

}  // namespace

ModelConfig load_model(const std::string& config_text) {
  json j;
  try {
    j = json::parse(config_text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("parse failure: ") + e.what());
  }

  if (!j.contains("n")) throw ValidationError("missing field n");
  const int n = j.at("n").get<int>();
  if (n < 1) throw ValidationError("n must be a positive integer");

  ModelConfig cfg;
  NetworkModel& m = cfg.model;
  m.n = n;
  m.B = parse_vector(j, "B", n);
  m.b = parse_vector(j, "b", n);
  m.d = parse_vector(j, "d", n);
  m.theta = parse_theta(j, n);
  m.beta = parse_vector(j, "beta", n);
  m.gamma = parse_vector(j, "gamma", n);
  if (j.contains("time_unit")) m.time_unit = j.at("time_unit").get<std::string>();
  m.validate();

  ScalingConfig& sc = cfg.scaling;
  sc.N = j.contains("N") ? j.at("N").get<double>() : 1.0;
  sc.x0 = j.contains("x0") ? parse_vector(j, "x0", n) : Vector::Zero(n);
  if (j.contains("I0")) {
    const Vector raw = parse_vector(j, "I0", n);
    sc.I0 = CountVector(n);
    for (int i = 0; i < n; ++i) {
      const double v = raw[i];
      if (v != std::floor(v)) {
        throw ValidationError("I0 entries must be integers");
      }
      sc.I0[i] = static_cast<std::int64_t>(v);
    }
  } else {
    sc.I0 = CountVector::Zero(n);
    sc.I0[0] = 1;
  }
  // x0 omitted means stats-only analytic use; skip the floor check then.
  if (j.contains("x0")) sc.validate(m);
  return cfg;
}

ModelConfig load_model_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return load_model(buf.str());
}

std::string serialize(const ModelConfig& config) {
  const NetworkModel& m = config.model;
  json j;
  j["n"] = m.n;
  auto to_array = [](const Vector& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
  };
  j["B"] = to_array(m.B);
  j["b"] = to_array(m.b);
  j["d"] = to_array(m.d);
  std::vector<std::vector<double>> theta(m.n, std::vector<double>(m.n));
  for (int i = 0; i < m.n; ++i)
    for (int k = 0; k < m.n; ++k) theta[i][k] = m.theta(i, k);
  j["theta"] = theta;
  j["beta"] = to_array(m.beta);
  j["gamma"] = to_array(m.gamma);
  j["time_unit"] = m.time_unit;
  j["N"] = config.scaling.N;
  j["x0"] = to_array(config.scaling.x0);
  std::vector<std::int64_t> i0(config.scaling.I0.data(),
                               config.scaling.I0.data() + config.scaling.I0.size());
  j["I0"] = i0;
  return j.dump(2) + "\n";
}

}  // namespace epinet
