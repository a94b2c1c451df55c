#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "qgraph/common.hpp"

namespace qgraph {

enum class VertexCondition { neumann, random_symmetric_unitary, custom };

std::string_view to_string(VertexCondition kind);
VertexCondition vertex_condition_from_string(std::string_view name);

enum class Direction : int { forward = 0, backward = 1 };

struct GraphParams {
  int vertices = 2;
  double length_min = 1.0;
  double length_max = 2.0;
  VertexCondition condition = VertexCondition::neumann;
  std::uint64_t seed = 0;
};

/// Complete simple metric graph with per-vertex scattering matrices.
///
/// Bonds are the vertex pairs (a, b), a < b, in lexicographic order. The
/// directed bond (b, forward) runs a -> b and (b, backward) runs b -> a; its
/// linear index is b for forward and B + b for backward, so the direction
/// flip is the Pauli matrix in direction space.
///
/// At vertex v the incident bonds are ordered by the id of the neighbouring
/// vertex; vertex_matrix(v)(i, j) is the amplitude from incident bond slot j
/// into slot i.
class Graph {
 public:
  static Graph complete(const GraphParams& params);

  /// Assembles a graph from explicit lengths and vertex matrices (used by
  /// deserialization and analytic fixtures). Invariants are checked.
  static Graph from_parts(int vertices, std::vector<double> lengths,
                          std::vector<CMatrix> vertex_matrices,
                          VertexCondition kind, std::uint64_t seed);

  int vertex_count() const { return vertices_; }
  int bond_count() const { return static_cast<int>(lengths_.size()); }
  int directed_count() const { return 2 * bond_count(); }

  const std::vector<double>& lengths() const { return lengths_; }
  double length_min() const;
  double length_max() const;
  double total_length() const;
  /// Mean level density (1/pi) * sum of bond lengths.
  double mean_density() const { return total_length() / pi; }

  const CMatrix& vertex_matrix(int v) const { return vertex_matrices_.at(v); }
  const std::vector<CMatrix>& vertex_matrices() const { return vertex_matrices_; }
  VertexCondition condition() const { return condition_; }
  std::uint64_t seed() const { return seed_; }

  std::pair<int, int> bond_vertices(int bond) const { return bond_ends_.at(bond); }
  int bond_index(int a, int b) const;

  int directed_index(int bond, Direction d) const {
    return d == Direction::forward ? bond : bond + bond_count();
  }
  int bond_of(int directed) const { return directed % bond_count(); }
  Direction direction_of(int directed) const {
    return directed < bond_count() ? Direction::forward : Direction::backward;
  }
  int flip(int directed) const {
    return directed < bond_count() ? directed + bond_count() : directed - bond_count();
  }
  int origin(int directed) const;
  int terminus(int directed) const;

  /// Position of `bond` among the bonds incident on `vertex`.
  int slot(int vertex, int bond) const;
  const std::vector<int>& incident_bonds(int vertex) const { return incident_.at(vertex); }

  /// Content hash over everything that determines the physics.
  std::string hash() const;

  bool operator==(const Graph& other) const;

 private:
  Graph() = default;
  void build_topology();
  void validate() const;

  int vertices_ = 0;
  std::vector<double> lengths_;
  std::vector<CMatrix> vertex_matrices_;
  VertexCondition condition_ = VertexCondition::neumann;
  std::uint64_t seed_ = 0;
  std::vector<std::pair<int, int>> bond_ends_;
  std::vector<std::vector<int>> incident_;
};

/// Kirchhoff (Neumann) vertex matrix 2/v - delta.
RMatrix neumann_vertex_matrix(int valency);

/// O diag(exp(i phi)) O^T with O Haar-distributed orthogonal.
CMatrix random_symmetric_unitary(int valency, std::uint64_t seed);

/// Bond scattering matrix indexed by the terminus of both directed bonds:
/// entry (i, j) is sigma^(v)(slot(i), slot(j)) when terminus(i) == terminus(j)
/// == v, else zero. Symmetric whenever every vertex matrix is.
CMatrix bond_scattering_matrix(const Graph& g);

/// Propagation-free factor of the evolution map: the flip of
/// bond_scattering_matrix. Entry (i, j) is nonzero only when
/// origin(i) == terminus(j); it scatters the wave arriving on j into i.
CMatrix scattering_factor(const Graph& g);

/// The 2B x 2B map U(k) = diag(exp(i k L)) * scattering_factor.
struct EvolutionMap {
  double k = 0.0;
  CMatrix matrix;
};

EvolutionMap assemble_evolution_map(const Graph& g, double k);

/// Same as assemble_evolution_map but reuses a precomputed factor.
void assemble_evolution_map(const Graph& g, const CMatrix& factor, double k, CMatrix& out);

// Structured text (JSON) serialization; lossless and versioned.
void write_graph(std::ostream& os, const Graph& g);
Graph read_graph(std::istream& is);

}  // namespace qgraph
