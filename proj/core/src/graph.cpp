#include "qgraph/graph.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "qgraph/io.hpp"

namespace qgraph {

namespace {

constexpr int kGraphSchemaVersion = 1;
constexpr double kRationalGuard = 1e-6;
constexpr int kRationalMax = 10;

bool near_small_rational(double ratio) {
  for (int q = 1; q <= kRationalMax; ++q) {
    for (int p = 1; p <= kRationalMax; ++p) {
      if (std::abs(ratio - static_cast<double>(p) / q) <= kRationalGuard) return true;
    }
  }
  return false;
}

std::vector<double> sample_lengths(int bonds, double lo, double hi, Rng& rng) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> lengths(bonds);
  for (auto& l : lengths) l = dist(rng);
  // Resample any bond whose length is a small-integer rational multiple of
  // an earlier one.
  for (int attempt = 0; attempt < 1000; ++attempt) {
    bool clean = true;
    for (int b = 1; b < bonds; ++b) {
      for (int c = 0; c < b; ++c) {
        if (near_small_rational(lengths[b] / lengths[c])) {
          lengths[b] = dist(rng);
          clean = false;
          break;
        }
      }
    }
    if (clean) return lengths;
  }
  throw NumericalError("could not draw incommensurate bond lengths");
}

}  // namespace

std::string_view to_string(VertexCondition kind) {
  switch (kind) {
    case VertexCondition::neumann: return "neumann";
    case VertexCondition::random_symmetric_unitary: return "random_symmetric_unitary";
    case VertexCondition::custom: return "custom";
  }
  return "unknown";
}

VertexCondition vertex_condition_from_string(std::string_view name) {
  if (name == "neumann") return VertexCondition::neumann;
  if (name == "random_symmetric_unitary") return VertexCondition::random_symmetric_unitary;
  if (name == "custom") return VertexCondition::custom;
  throw ConfigError("unknown vertex condition '" + std::string(name) + "'");
}

RMatrix neumann_vertex_matrix(int valency) {
  if (valency < 1) throw ConfigError("vertex valency must be >= 1");
  RMatrix m = RMatrix::Constant(valency, valency, 2.0 / valency);
  m.diagonal().array() -= 1.0;
  return m;
}

CMatrix random_symmetric_unitary(int valency, std::uint64_t seed) {
  if (valency < 1) throw ConfigError("vertex valency must be >= 1");
  Rng rng(seed);
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> phase(0.0, two_pi);
  RMatrix a(valency, valency);
  for (int j = 0; j < valency; ++j)
    for (int i = 0; i < valency; ++i) a(i, j) = gauss(rng);
  Eigen::HouseholderQR<RMatrix> qr(a);
  RMatrix o = qr.householderQ();
  // Fix column signs by sign(diag R) so O is Haar distributed.
  const RMatrix& r = qr.matrixQR();
  for (int j = 0; j < valency; ++j)
    if (r(j, j) < 0) o.col(j) *= -1.0;
  CVector phases(valency);
  for (int j = 0; j < valency; ++j) phases(j) = std::polar(1.0, phase(rng));
  const CMatrix oc = o.cast<cplx>();
  CMatrix m = oc * phases.asDiagonal() * oc.transpose();
  // Exact symmetry; O diag O^T is symmetric up to rounding only.
  return 0.5 * (m + m.transpose()).eval();
}

Graph Graph::complete(const GraphParams& params) {
  if (params.vertices < 2) throw ConfigError("graph needs at least 2 vertices");
  if (!(params.length_min > 0.0) || !(params.length_min < params.length_max))
    throw ConfigError("bond lengths need 0 < length_min < length_max");
  Graph g;
  g.vertices_ = params.vertices;
  g.condition_ = params.condition;
  g.seed_ = params.seed;
  const int bonds = params.vertices * (params.vertices - 1) / 2;
  Rng rng(derive_seed(params.seed, 0));
  g.lengths_ = sample_lengths(bonds, params.length_min, params.length_max, rng);
  const int valency = params.vertices - 1;
  g.vertex_matrices_.reserve(params.vertices);
  for (int v = 0; v < params.vertices; ++v) {
    switch (params.condition) {
      case VertexCondition::neumann:
        g.vertex_matrices_.push_back(neumann_vertex_matrix(valency).cast<cplx>());
        break;
      case VertexCondition::random_symmetric_unitary:
        g.vertex_matrices_.push_back(
            random_symmetric_unitary(valency, derive_seed(params.seed, 1000 + v)));
        break;
      case VertexCondition::custom:
        throw ConfigError("custom vertex conditions need Graph::from_parts");
    }
  }
  g.build_topology();
  g.validate();
  return g;
}

Graph Graph::from_parts(int vertices, std::vector<double> lengths,
                        std::vector<CMatrix> vertex_matrices, VertexCondition kind,
                        std::uint64_t seed) {
  if (vertices < 2) throw ConfigError("graph needs at least 2 vertices");
  if (static_cast<int>(lengths.size()) != vertices * (vertices - 1) / 2)
    throw ConfigError("complete graph needs V(V-1)/2 bond lengths");
  if (static_cast<int>(vertex_matrices.size()) != vertices)
    throw ConfigError("need one vertex matrix per vertex");
  Graph g;
  g.vertices_ = vertices;
  g.lengths_ = std::move(lengths);
  g.vertex_matrices_ = std::move(vertex_matrices);
  g.condition_ = kind;
  g.seed_ = seed;
  g.build_topology();
  g.validate();
  return g;
}

void Graph::build_topology() {
  bond_ends_.clear();
  incident_.assign(vertices_, {});
  for (int a = 0; a < vertices_; ++a)
    for (int b = a + 1; b < vertices_; ++b) bond_ends_.emplace_back(a, b);
  // Lexicographic bond order means each incidence list comes out sorted by
  // neighbour id.
  for (int v = 0; v < vertices_; ++v) {
    for (int b = 0; b < static_cast<int>(bond_ends_.size()); ++b) {
      if (bond_ends_[b].first == v || bond_ends_[b].second == v) incident_[v].push_back(b);
    }
  }
}

void Graph::validate() const {
  for (double l : lengths_) {
    if (!(l > 0.0) || !std::isfinite(l)) throw ConfigError("bond lengths must be positive");
  }
  const int valency = vertices_ - 1;
  for (int v = 0; v < vertices_; ++v) {
    const CMatrix& m = vertex_matrices_[v];
    if (m.rows() != valency || m.cols() != valency)
      throw ConfigError("vertex matrix " + std::to_string(v) + " has wrong dimension");
    if (symmetry_residual(m) > 1e-13)
      throw NumericalError("vertex matrix " + std::to_string(v) + " is not symmetric");
    if (unitarity_residual(m) > 1e-12)
      throw NumericalError("vertex matrix " + std::to_string(v) + " is not unitary");
  }
}

double Graph::length_min() const { return *std::min_element(lengths_.begin(), lengths_.end()); }
double Graph::length_max() const { return *std::max_element(lengths_.begin(), lengths_.end()); }
double Graph::total_length() const {
  return std::accumulate(lengths_.begin(), lengths_.end(), 0.0);
}

int Graph::bond_index(int a, int b) const {
  if (a == b || a < 0 || b < 0 || a >= vertices_ || b >= vertices_)
    throw ConfigError("no bond between the given vertices");
  if (a > b) std::swap(a, b);
  // Bonds (0,1..V-1), (1,2..V-1), ... in lexicographic order.
  return a * vertices_ - a * (a + 1) / 2 + (b - a - 1);
}

int Graph::origin(int directed) const {
  const auto& [a, b] = bond_ends_[bond_of(directed)];
  return direction_of(directed) == Direction::forward ? a : b;
}

int Graph::terminus(int directed) const {
  const auto& [a, b] = bond_ends_[bond_of(directed)];
  return direction_of(directed) == Direction::forward ? b : a;
}

int Graph::slot(int vertex, int bond) const {
  const auto& list = incident_.at(vertex);
  const auto it = std::lower_bound(list.begin(), list.end(), bond);
  if (it == list.end() || *it != bond) throw ConfigError("bond not incident on vertex");
  return static_cast<int>(it - list.begin());
}

std::string Graph::hash() const {
  std::ostringstream os;
  write_graph(os, *this);
  return sha256_hex(os.str()).substr(0, 16);
}

bool Graph::operator==(const Graph& other) const {
  if (vertices_ != other.vertices_ || lengths_ != other.lengths_ ||
      condition_ != other.condition_ || seed_ != other.seed_)
    return false;
  for (int v = 0; v < vertices_; ++v) {
    if (vertex_matrices_[v] != other.vertex_matrices_[v]) return false;
  }
  return true;
}

CMatrix bond_scattering_matrix(const Graph& g) {
  const int n = g.directed_count();
  CMatrix sigma = CMatrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    const int v = g.terminus(i);
    const int si = g.slot(v, g.bond_of(i));
    for (int j = 0; j < n; ++j) {
      if (g.terminus(j) != v) continue;
      sigma(i, j) = g.vertex_matrix(v)(si, g.slot(v, g.bond_of(j)));
    }
  }
  return sigma;
}

CMatrix scattering_factor(const Graph& g) {
  const CMatrix sigma = bond_scattering_matrix(g);
  const int n = g.directed_count();
  CMatrix factor(n, n);
  for (int i = 0; i < n; ++i) factor.row(i) = sigma.row(g.flip(i));
  return factor;
}

void assemble_evolution_map(const Graph& g, const CMatrix& factor, double k, CMatrix& out) {
  const int n = g.directed_count();
  const int bonds = g.bond_count();
  out.resize(n, n);
  for (int b = 0; b < bonds; ++b) {
    const cplx phase = std::polar(1.0, k * g.lengths()[b]);
    out.row(b) = phase * factor.row(b);
    out.row(b + bonds) = phase * factor.row(b + bonds);
  }
}

EvolutionMap assemble_evolution_map(const Graph& g, double k) {
  EvolutionMap map;
  map.k = k;
  assemble_evolution_map(g, scattering_factor(g), k, map.matrix);
  return map;
}

void write_graph(std::ostream& os, const Graph& g) {
  nlohmann::ordered_json j;
  j["schema"] = "qgraph.graph";
  j["version"] = kGraphSchemaVersion;
  j["vertices"] = g.vertex_count();
  j["seed"] = g.seed();
  j["condition"] = to_string(g.condition());
  j["lengths"] = g.lengths();
  auto& mats = j["vertex_matrices"] = nlohmann::ordered_json::array();
  for (const auto& m : g.vertex_matrices()) {
    auto rows = nlohmann::ordered_json::array();
    for (int r = 0; r < m.rows(); ++r) {
      auto row = nlohmann::ordered_json::array();
      for (int c = 0; c < m.cols(); ++c) row.push_back({m(r, c).real(), m(r, c).imag()});
      rows.push_back(std::move(row));
    }
    mats.push_back(std::move(rows));
  }
  os << j.dump(1) << '\n';
}

Graph read_graph(std::istream& is) {
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed graph file: ") + e.what());
  }
  if (j.value("schema", "") != "qgraph.graph") throw ConfigError("not a graph file");
  if (j.value("version", 0) != kGraphSchemaVersion)
    throw ConfigError("unsupported graph schema version");
  try {
    const int vertices = j.at("vertices").get<int>();
    auto lengths = j.at("lengths").get<std::vector<double>>();
    std::vector<CMatrix> mats;
    for (const auto& rows : j.at("vertex_matrices")) {
      const auto n = static_cast<Eigen::Index>(rows.size());
      CMatrix m(n, n);
      for (Eigen::Index r = 0; r < n; ++r) {
        if (static_cast<Eigen::Index>(rows[r].size()) != n)
          throw ConfigError("vertex matrix is not square");
        for (Eigen::Index c = 0; c < n; ++c)
          m(r, c) = cplx(rows[r][c][0].get<double>(), rows[r][c][1].get<double>());
      }
      mats.push_back(std::move(m));
    }
    return Graph::from_parts(vertices, std::move(lengths), std::move(mats),
                             vertex_condition_from_string(j.at("condition").get<std::string>()),
                             j.at("seed").get<std::uint64_t>());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed graph file: ") + e.what());
  }
}

}  // namespace qgraph
