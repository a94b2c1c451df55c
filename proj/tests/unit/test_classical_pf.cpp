#include <cmath>
#include <sstream>

#include "doctest.h"
#include "qgraph/classical_pf.hpp"

using namespace qgraph;

namespace {

Graph complete(int v, VertexCondition c = VertexCondition::neumann, std::uint64_t seed = 0) {
  GraphParams p;
  p.vertices = v;
  p.condition = c;
  p.seed = seed;
  return Graph::complete(p);
}

}  // namespace

TEST_CASE("two-vertex operator is the swap") {
  const auto f = pf_operator(complete(2));
  CHECK(f.matrix(0, 1) == 1.0);
  CHECK(f.matrix(1, 0) == 1.0);
  CHECK(f.matrix(0, 0) == 0.0);
  const auto s = pf_spectrum(f);
  CHECK(std::abs(s.eigenvalues[0] - 1.0) < 1e-14);
  CHECK(std::abs(s.eigenvalues[1] + 1.0) < 1e-14);
  CHECK(s.gap == doctest::Approx(0.0));
  CHECK_FALSE(s.mixing);
  std::vector<double> r0{1.0, 0.0};
  const auto d = mixing_decay(f, r0, 10);
  CHECK_FALSE(d.fitted);
  CHECK_FALSE(d.warning.empty());
  for (double x : d.distance) CHECK(x == doctest::Approx(1.0));
}

TEST_CASE("four-vertex Neumann transition probabilities") {
  const Graph g = complete(4);
  const auto f = pf_operator(g);
  for (int j = 0; j < g.directed_count(); ++j) {
    for (int i = 0; i < g.directed_count(); ++i) {
      const double x = f.matrix(i, j);
      if (g.origin(i) != g.terminus(j)) {
        CHECK(x == 0.0);
      } else if (i == g.flip(j)) {
        CHECK(x == doctest::Approx(1.0 / 9.0));
      } else {
        CHECK(x == doctest::Approx(4.0 / 9.0));
      }
    }
  }
}

TEST_CASE("closed operators are doubly stochastic with a uniform Perron vector") {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    for (int v : {3, 6, 10}) {
      const auto f = pf_operator(complete(v, VertexCondition::random_symmetric_unitary, seed));
      CHECK(stochasticity_residual(f.matrix) < 1e-12);
      CHECK((f.matrix.array() >= 0.0).all());
      const auto s = pf_spectrum(f);
      CHECK(s.perron_residual < 1e-10);
      CHECK(s.perron_vector_deviation < 1e-8);
      CHECK(std::abs(s.eigenvalues[1]) <= 1.0 + 1e-10);
      CHECK(s.gap >= -1e-10);
      CHECK(s.gap <= 1.0);
      if (s.mixing) {
        for (std::size_t j = 1; j < s.masses.size(); ++j) CHECK(s.masses[j].real() > 0.0);
      }
    }
  }
}

TEST_CASE("open operators are substochastic") {
  const Graph g = complete(5);
  const OpenGraph og(g, 2, {1.0, 0.5});
  const auto f = pf_operator(og);
  CHECK_FALSE(f.closed);
  const RVector cols = f.matrix.colwise().sum();
  CHECK(cols.maxCoeff() <= 1.0 + 1e-12);
  CHECK(cols.minCoeff() < 1.0 - 1e-3);
  CHECK_THROWS_AS(pf_spectrum(f), ConfigError);
}

TEST_CASE("Neumann graphs mix and relax at the eigenvalue rate") {
  const auto f = pf_operator(complete(6));
  const auto s = pf_spectrum(f);
  CHECK(s.mixing);
  CHECK(s.gap > 0.0);
  std::vector<double> r0(f.matrix.rows(), 0.0);
  r0[3] = 1.0;
  const auto d = mixing_decay(f, r0, 200);
  REQUIRE(d.fitted);
  CHECK(std::abs(d.fitted_rate - d.eigen_rate) < 0.1 * d.eigen_rate);
  std::vector<double> eq(f.matrix.rows(), 1.0 / f.matrix.rows());
  for (double x : mixing_decay(f, eq, 20).distance) CHECK(x < 1e-14);
  CHECK_THROWS_AS(mixing_decay(f, {1.0}, 5), ConfigError);
  std::vector<double> neg(f.matrix.rows(), 0.0);
  neg[0] = 1.5;
  neg[1] = -0.5;
  CHECK_THROWS_AS(mixing_decay(f, neg, 5), ConfigError);
}

TEST_CASE("gap scan") {
  const auto scan = gap_scan({2, 4, 8, 12}, VertexCondition::neumann, {0, 1});
  REQUIRE(scan.rows.size() == 8);
  CHECK(scan.rows[0].gap == doctest::Approx(0.0));
  CHECK_FALSE(scan.rows[0].mixing);
  for (std::size_t i = 2; i < scan.rows.size(); ++i) CHECK(scan.rows[i].gap > 0.0);
  CHECK_FALSE(scan.all_positive);
  std::stringstream ss;
  write_gap_scan(ss, scan, Metadata{});
  const Table t = read_table(ss);
  CHECK(t.rows.size() == 8);
  CHECK(t.numeric("bonds")[7] == 66.0);
}

TEST_CASE("spectrum file") {
  const auto s = pf_spectrum(pf_operator(complete(4)));
  std::stringstream ss;
  write_pf_spectrum(ss, s, Metadata{});
  const Table t = read_table(ss);
  CHECK(t.rows.size() == 12);
  CHECK(t.numeric("re")[0] == doctest::Approx(1.0));
  CHECK(t.meta.get("mixing") == "true");
}
