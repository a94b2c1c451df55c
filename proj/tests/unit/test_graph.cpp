#include <sstream>

#include "doctest.h"
#include "qgraph/graph.hpp"

using namespace qgraph;

namespace {

Graph random_graph(int v, std::uint64_t seed) {
  GraphParams p;
  p.vertices = v;
  p.seed = seed;
  p.condition = VertexCondition::random_symmetric_unitary;
  return Graph::complete(p);
}

}  // namespace

TEST_CASE("neumann vertex matrix entries") {
  for (int v : {1, 2, 3, 7}) {
    const RMatrix m = neumann_vertex_matrix(v);
    for (int i = 0; i < v; ++i) {
      for (int j = 0; j < v; ++j) {
        CHECK(m(i, j) == doctest::Approx(2.0 / v - (i == j ? 1.0 : 0.0)));
      }
    }
    CHECK(unitarity_residual(m.cast<cplx>()) < 1e-14);
  }
}

TEST_CASE("random symmetric unitary is symmetric, unitary and seeded") {
  for (int v : {2, 5, 11}) {
    const CMatrix a = random_symmetric_unitary(v, 42);
    CHECK(unitarity_residual(a) < 1e-12);
    CHECK(symmetry_residual(a) < 1e-13);
    CHECK((a - random_symmetric_unitary(v, 42)).norm() == 0.0);
    CHECK((a - random_symmetric_unitary(v, 43)).norm() > 1e-3);
  }
}

TEST_CASE("complete graph topology") {
  const Graph g = random_graph(6, 3);
  CHECK(g.bond_count() == 15);
  CHECK(g.directed_count() == 30);
  for (double l : g.lengths()) {
    CHECK(l >= 1.0);
    CHECK(l <= 2.0);
  }
  for (int i = 0; i < g.directed_count(); ++i) {
    CHECK(g.flip(g.flip(i)) == i);
    CHECK(g.origin(i) == g.terminus(g.flip(i)));
    CHECK(g.bond_of(i) == g.bond_of(g.flip(i)));
  }
  for (int b = 0; b < g.bond_count(); ++b) {
    const auto [a, c] = g.bond_vertices(b);
    CHECK(a < c);
    CHECK(g.bond_index(a, c) == b);
    CHECK(g.bond_index(c, a) == b);
    CHECK(g.origin(g.directed_index(b, Direction::forward)) == a);
    CHECK(g.terminus(g.directed_index(b, Direction::forward)) == c);
  }
  for (int v = 0; v < g.vertex_count(); ++v) CHECK(g.incident_bonds(v).size() == 5);
}

TEST_CASE("bond lengths avoid small rational ratios") {
  const Graph g = random_graph(8, 9);
  const auto& l = g.lengths();
  for (std::size_t i = 0; i < l.size(); ++i) {
    for (std::size_t j = 0; j < l.size(); ++j) {
      if (i == j) continue;
      const double r = l[i] / l[j];
      for (int q = 1; q <= 10; ++q) {
        for (int p = 1; p <= 10 * q; ++p) {
          CHECK(std::abs(r - static_cast<double>(p) / q) > 1e-6);
        }
      }
    }
  }
}

TEST_CASE("bond scattering matrix is symmetric and the evolution map unitary") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    for (int v : {3, 5, 9}) {
      const Graph g = random_graph(v, seed);
      const CMatrix sigma = bond_scattering_matrix(g);
      CHECK(symmetry_residual(sigma) < 1e-13);
      const CMatrix f = scattering_factor(g);
      for (int i = 0; i < g.directed_count(); ++i) {
        for (int j = 0; j < g.directed_count(); ++j) {
          if (g.origin(i) != g.terminus(j)) CHECK(f(i, j) == cplx(0.0, 0.0));
        }
      }
      for (double k : {0.3, 7.1, 123.456}) {
        CHECK(unitarity_residual(assemble_evolution_map(g, k).matrix) < 1e-12);
      }
    }
  }
}

TEST_CASE("two-vertex graph scatters forward into backward") {
  GraphParams p;
  p.vertices = 2;
  const Graph g = Graph::complete(p);
  const CMatrix f = scattering_factor(g);
  CHECK(std::abs(f(0, 1) - 1.0) < 1e-15);
  CHECK(std::abs(f(1, 0) - 1.0) < 1e-15);
  CHECK(std::abs(f(0, 0)) == 0.0);
}

TEST_CASE("generation is deterministic in the seed") {
  CHECK(random_graph(7, 11) == random_graph(7, 11));
  CHECK(random_graph(7, 11).hash() == random_graph(7, 11).hash());
  CHECK(random_graph(7, 11).hash() != random_graph(7, 12).hash());
}

TEST_CASE("graph serialization round-trips losslessly") {
  for (auto cond : {VertexCondition::neumann, VertexCondition::random_symmetric_unitary}) {
    GraphParams p;
    p.vertices = 5;
    p.seed = 77;
    p.condition = cond;
    const Graph g = Graph::complete(p);
    std::stringstream ss;
    write_graph(ss, g);
    const Graph h = read_graph(ss);
    CHECK(g == h);
    CHECK(g.hash() == h.hash());
  }
}

TEST_CASE("invalid graphs are rejected") {
  GraphParams p;
  p.vertices = 1;
  CHECK_THROWS_AS(Graph::complete(p), ConfigError);
  p.vertices = 3;
  p.length_min = 2.0;
  p.length_max = 1.0;
  CHECK_THROWS_AS(Graph::complete(p), ConfigError);
  std::vector<CMatrix> mats(3, CMatrix::Identity(2, 2));
  mats[1](0, 1) = 0.5;
  CHECK_THROWS_AS(Graph::from_parts(3, {1.0, 1.5, 1.7}, mats, VertexCondition::custom, 0),
                  NumericalError);
  std::stringstream bad("{\"schema\": \"qgraph.graph\", \"version\": 99}");
  CHECK_THROWS_AS(read_graph(bad), ConfigError);
}
