#include "epinet/calibration.hpp"

#include "epinet/rng.hpp"
#include "epinet/spectral.hpp"

#include <fstream>
#include <sstream>
#include <unordered_map>

namespace epinet {

CalibratedModel calibrate(const std::vector<NodeRecord>& nodes,
                          const std::vector<MovementRecord>& moves,
                          const CalibrationOptions& opts) {
  if (nodes.empty()) throw ValidationError("no node records");
  if (opts.theta_floor < 0) throw ValidationError("theta floor must be >= 0");

  const int n = static_cast<int>(nodes.size());
  std::unordered_map<std::string, int> index;
  for (int i = 0; i < n; ++i) {
    if (!index.emplace(nodes[i].node_id, i).second) {
      throw ValidationError("duplicate node id: " + nodes[i].node_id);
    }
    if (!(nodes[i].avg_population > 0)) {
      throw ValidationError("avg_population must be positive for node " +
                            nodes[i].node_id);
    }
  }

  CalibratedModel out;
  NetworkModel& m = out.model;
  m.n = n;
  m.B = Vector::Zero(n);
  m.b = Vector::Zero(n);
  m.d = Vector::Zero(n);
  m.theta = Matrix::Zero(n, n);
  m.beta = Vector::Constant(n, opts.beta);
  m.gamma = Vector::Constant(n, opts.gamma);
  m.time_unit = opts.time_unit;

  for (int i = 0; i < n; ++i) {
    m.b[i] = nodes[i].births / nodes[i].avg_population;
    m.d[i] = nodes[i].deaths / nodes[i].avg_population;
    m.B[i] = nodes[i].external_in;
    out.node_ids.push_back(nodes[i].node_id);
  }
  for (const auto& mv : moves) {
    const auto src = index.find(mv.src_id);
    const auto dst = index.find(mv.dst_id);
    if (src == index.end()) {
      throw ValidationError("unknown node id in movement: " + mv.src_id);
    }
    if (dst == index.end()) {
      throw ValidationError("unknown node id in movement: " + mv.dst_id);
    }
    if (src->second == dst->second) {
      throw ValidationError("self-movement for node " + mv.src_id);
    }
    if (mv.count < 0) throw ValidationError("negative movement count");
    m.theta(src->second, dst->second) +=
        mv.count / nodes[src->second].avg_population;
  }
  if (opts.theta_floor > 0) {
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (i != j && m.theta(i, j) == 0.0) m.theta(i, j) = opts.theta_floor;
      }
    }
  }
  m.validate();

  out.scaling.N = 1.0;
  out.scaling.x0 = Vector(n);
  for (int i = 0; i < n; ++i) out.scaling.x0[i] = nodes[i].avg_population;
  out.scaling.I0 = CountVector::Zero(n);
  out.scaling.I0[0] = 1;
  return out;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

std::string strip(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.pop_back();
  std::size_t k = 0;
  while (k < s.size() && s[k] == ' ') ++k;
  return s.substr(k);
}

double parse_number(const std::string& s, const std::string& context) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ValidationError("cannot parse number '" + s + "' in " + context);
  }
}

std::ifstream open_or_throw(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open file: " + path);
  return in;
}

}  // namespace

std::vector<NodeRecord> read_nodes_csv(const std::string& path) {
  std::ifstream in = open_or_throw(path);
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("empty nodes file");
  if (strip(line) != "node_id,avg_population,births,deaths,external_in") {
    throw ValidationError("unexpected nodes CSV header: " + line);
  }
  std::vector<NodeRecord> rows;
  while (std::getline(in, line)) {
    if (strip(line).empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 5) throw ValidationError("bad nodes row: " + line);
    NodeRecord rec;
    rec.node_id = strip(f[0]);
    rec.avg_population = parse_number(strip(f[1]), "avg_population");
    rec.births = parse_number(strip(f[2]), "births");
    rec.deaths = parse_number(strip(f[3]), "deaths");
    rec.external_in = parse_number(strip(f[4]), "external_in");
    rows.push_back(std::move(rec));
  }
  return rows;
}

std::vector<MovementRecord> read_movements_csv(const std::string& path) {
  std::ifstream in = open_or_throw(path);
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("empty movements file");
  if (strip(line) != "src_id,dst_id,count") {
    throw ValidationError("unexpected movements CSV header: " + line);
  }
  std::vector<MovementRecord> rows;
  while (std::getline(in, line)) {
    if (strip(line).empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 3) throw ValidationError("bad movements row: " + line);
    MovementRecord rec;
    rec.src_id = strip(f[0]);
    rec.dst_id = strip(f[1]);
    rec.count = parse_number(strip(f[2]), "count");
    rows.push_back(std::move(rec));
  }
  return rows;
}

ModelConfig synth_network(int n, double density, std::uint64_t seed,
                          const SynthRanges& ranges) {
  if (n < 1) throw ValidationError("n must be positive");
  if (!(density > 0) || density > 1) {
    throw ValidationError("density must lie in (0, 1]");
  }
  Rng rng(RngSpec{seed, 0});
  auto draw = [&rng](const std::pair<double, double>& range) {
    return range.first + (range.second - range.first) * rng.uniform01();
  };

  ModelConfig cfg;
  NetworkModel& m = cfg.model;
  m.n = n;
  m.B = Vector(n);
  m.b = Vector(n);
  m.d = Vector(n);
  m.beta = Vector(n);
  m.gamma = Vector(n);
  m.theta = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    m.B[i] = draw(ranges.B);
    m.b[i] = draw(ranges.b);
    m.d[i] = m.b[i] + draw(ranges.d_gap);
    m.beta[i] = draw(ranges.beta);
    m.gamma[i] = draw(ranges.gamma);
  }
  if (n > 1) {
    for (int i = 0; i < n; ++i) {
      const int next = (i + 1) % n;
      m.theta(i, next) = draw(ranges.theta);  // ring keeps it connected
    }
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (i == j || m.theta(i, j) > 0) continue;
        if (rng.uniform01() < density) m.theta(i, j) = draw(ranges.theta);
      }
    }
  }
  m.validate();

  cfg.scaling.N = 1.0;
  cfg.scaling.I0 = CountVector::Zero(n);
  cfg.scaling.I0[0] = 1;
  const DemographyMatrix demo = build_A(m);
  cfg.scaling.x0 = check_subcritical(demo).subcritical
                       ? equilibrium_population(demo, m.B)
                       : Vector::Ones(n);
  return cfg;
}

}  // namespace epinet
