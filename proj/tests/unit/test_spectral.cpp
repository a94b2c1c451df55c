#include <cmath>
#include <sstream>

#include "doctest.h"
#include "fem_oracle.hpp"
#include "qgraph/spectral.hpp"

using namespace qgraph;

namespace {

Graph two_vertex(double length) {
  std::vector<CMatrix> m(2, CMatrix::Ones(1, 1));
  return Graph::from_parts(2, {length}, m, VertexCondition::neumann, 0);
}

}  // namespace

TEST_CASE("eigenphases of a unitary are sorted in [0, 2pi)") {
  GraphParams p;
  p.vertices = 5;
  p.condition = VertexCondition::random_symmetric_unitary;
  const Graph g = Graph::complete(p);
  const auto ph = eigenphases(assemble_evolution_map(g, 3.3));
  CHECK(ph.size() == 20);
  for (std::size_t i = 0; i < ph.size(); ++i) {
    CHECK(ph[i] >= 0.0);
    CHECK(ph[i] < two_pi);
    if (i) CHECK(ph[i] >= ph[i - 1]);
  }
  CMatrix bad = CMatrix::Identity(3, 3) * 1.1;
  CHECK_THROWS_AS(eigenphases(bad), NumericalError);
}

TEST_CASE("eigenphases agree with a general complex eigensolver") {
  auto reference = [](const CMatrix& u) {
    Eigen::ComplexEigenSolver<CMatrix> es(u, false);
    std::vector<double> ph;
    for (Eigen::Index i = 0; i < u.rows(); ++i) {
      double th = std::arg(es.eigenvalues()(i));
      ph.push_back(th < 0.0 ? th + two_pi : th);
    }
    std::sort(ph.begin(), ph.end());
    return ph;
  };
  GraphParams p;
  p.vertices = 7;
  p.condition = VertexCondition::random_symmetric_unitary;
  p.seed = 4;
  const Graph g = Graph::complete(p);
  for (double k : {0.7, 12.1, 55.5}) {
    const CMatrix u = assemble_evolution_map(g, k).matrix;
    const auto a = eigenphases(u);
    const auto b = reference(u);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) < 1e-11);
  }
  // A phase at pi exactly, where the transform starts.
  CMatrix d = CMatrix::Zero(4, 4);
  d.diagonal() << std::polar(1.0, pi), std::polar(1.0, 0.3), std::polar(1.0, 2.0), std::polar(1.0, 5.0);
  const auto q = eigenphases(d);
  CHECK(q[2] == doctest::Approx(pi).epsilon(1e-12));
  CHECK(q[0] == doctest::Approx(0.3).epsilon(1e-12));
}

TEST_CASE("single bond levels are n pi / L") {
  const Graph g = two_vertex(pi);
  const auto s = find_levels(g, 0.5, 5.5);
  REQUIRE(s.levels.size() == 5);
  CHECK(s.winding_count == 5);
  for (int n = 1; n <= 5; ++n) CHECK(std::abs(s.levels[n - 1] - n) < 1e-9);

  const double l = 1.37;
  const auto t = find_levels(two_vertex(l), 0.1, 40.0);
  REQUIRE(t.levels.size() == static_cast<std::size_t>(std::floor(40.0 * l / pi)));
  for (std::size_t n = 0; n < t.levels.size(); ++n) {
    CHECK(std::abs(t.levels[n] - (n + 1) * pi / l) < 1e-9);
  }
}

TEST_CASE("triangle levels match a finite-element oracle") {
  GraphParams p;
  p.vertices = 3;
  p.seed = 5;
  const Graph g = Graph::complete(p);
  const double k_lo = 0.5, k_hi = 9.0;
  const auto s = find_levels(g, k_lo, k_hi);
  const auto oracle = qgraph::testing::fem_levels(g, k_lo, k_hi, 2e-3);
  REQUIRE(oracle.size() == s.levels.size());
  for (std::size_t n = 0; n < s.levels.size(); ++n) {
    CHECK(std::abs(s.levels[n] - oracle[n]) / s.levels[n] < 1e-6);
  }
}

TEST_CASE("level count equals winding count and follows Weyl") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    GraphParams p;
    p.vertices = 5;
    p.seed = seed;
    p.condition = seed % 2 ? VertexCondition::random_symmetric_unitary : VertexCondition::neumann;
    const Graph g = Graph::complete(p);
    const double k_lo = 10.0 + 7.0 * seed;
    const auto s = find_levels(g, k_lo, k_lo + 30.0);
    CHECK(static_cast<long>(s.levels.size()) == s.winding_count);
    const double expected = 30.0 * g.mean_density();
    CHECK(std::abs(static_cast<double>(s.levels.size()) - expected) <
          3.0 * std::sqrt(static_cast<double>(s.levels.size())));
    for (std::size_t i = 1; i < s.levels.size(); ++i) CHECK(s.levels[i] > s.levels[i - 1]);
    for (double k : s.levels) {
      // det(1 - U(k)) vanishes: smallest |1 - e^{i theta}|.
      double best = 10.0;
      for (double th : eigenphases(assemble_evolution_map(g, k))) {
        best = std::min(best, std::abs(1.0 - std::polar(1.0, th)));
      }
      CHECK(best < 1e-8);
    }
  }
}

TEST_CASE("levels do not depend on the worker count") {
  GraphParams p;
  p.vertices = 6;
  p.seed = 2;
  const Graph g = Graph::complete(p);
  SolverOptions one, three;
  three.workers = 3;
  const auto a = find_levels(g, 5.0, 45.0, one);
  const auto b = find_levels(g, 5.0, 45.0, three);
  REQUIRE(a.levels.size() == b.levels.size());
  for (std::size_t i = 0; i < a.levels.size(); ++i) CHECK(std::abs(a.levels[i] - b.levels[i]) < 1e-12);
}

TEST_CASE("unfolding and spectrum files") {
  GraphParams p;
  p.vertices = 4;
  const Graph g = Graph::complete(p);
  const auto s = find_levels(g, 1.0, 20.0);
  const auto u = unfold(s);
  REQUIRE(u.x.size() == s.levels.size());
  for (std::size_t i = 0; i < u.x.size(); ++i) CHECK(u.x[i] == doctest::Approx(s.levels[i] * g.mean_density()));
  std::stringstream ss;
  write_spectrum(ss, s, Metadata{});
  const auto r = read_spectrum(ss);
  CHECK(r.levels == s.levels);
  CHECK(r.winding_count == s.winding_count);
  CHECK(r.graph_hash == s.graph_hash);
}

TEST_CASE("invalid windows are rejected") {
  const Graph g = two_vertex(1.0);
  CHECK_THROWS_AS(find_levels(g, 2.0, 1.0), ConfigError);
  CHECK_THROWS_AS(find_levels(g, -1.0, 1.0), ConfigError);
}
