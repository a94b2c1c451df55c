#include <sstream>

#include "doctest.h"
#include "qgraph/rmt.hpp"
#include "qgraph/scattering.hpp"
#include "qgraph/spectral.hpp"

using namespace qgraph;

namespace {

Graph neumann_graph(int v, std::uint64_t seed) {
  GraphParams p;
  p.vertices = v;
  p.seed = seed;
  return Graph::complete(p);
}

}  // namespace

TEST_CASE("householder boundary matrix") {
  for (int dim : {3, 6, 12}) {
    for (double w : {0.3, 1.0, 2.5}) {
      const RMatrix g = householder_boundary_matrix(dim, w);
      CHECK((g * g.transpose() - RMatrix::Identity(dim, dim)).cwiseAbs().maxCoeff() < 1e-14);
      CHECK((g - g.transpose()).cwiseAbs().maxCoeff() == 0.0);
      const double v1 = dim - 1.0;
      CHECK(g(0, 0) == doctest::Approx((v1 - w * w) / (w * w + v1)));
    }
  }
  for (double t : {0.1, 0.5, 1.0}) {
    const double w = householder_weight_for_transmission(12, t);
    const double rho = householder_boundary_matrix(12, w)(0, 0);
    CHECK(1.0 - rho * rho == doctest::Approx(t).epsilon(1e-12));
    CHECK(rho >= -1e-12);
  }
}

TEST_CASE("open graph pieces") {
  const Graph g = neumann_graph(6, 1);
  const OpenGraph og(g, 2, {householder_weight_for_transmission(6, 1.0), 0.7});
  CHECK(og.channels() == 2);
  CHECK(og.nominal_transmission()[0] == doctest::Approx(1.0));
  CHECK(og.bond_scattering().rows() == g.directed_count());
  for (int v = 0; v < 2; ++v) {
    Eigen::JacobiSVD<CMatrix> svd(og.inner_vertex_matrices()[v]);
    CHECK(svd.singularValues().maxCoeff() <= 1.0 + 1e-12);
    CHECK(svd.singularValues().minCoeff() < 1.0 - 1e-6);
  }
  CHECK_THROWS_AS(OpenGraph(g, 7, std::vector<double>(7, 1.0)), ConfigError);
  CHECK_THROWS_AS(OpenGraph(g, 2, {1.0}), ConfigError);
}

TEST_CASE("S is unitary and symmetric") {
  GraphParams p;
  p.vertices = 7;
  p.seed = 4;
  p.condition = VertexCondition::random_symmetric_unitary;
  const Graph g = Graph::complete(p);
  const OpenGraph og(g, 3, {0.5, 1.0, 2.0});
  for (double k : {0.7, 5.2, 31.9, 100.01}) {
    const SMatrix s = smatrix(og, k);
    CHECK(unitarity_residual(s.matrix) < 1e-10);
    CHECK(symmetry_residual(s.matrix) < 1e-10);
  }
}

TEST_CASE("strong-weight channels decouple onto the closed graph") {
  const int v = 5;
  const Graph g = neumann_graph(v, 8);
  const double w = 1e3;
  const OpenGraph og(g, 1, {w});
  // Closed reference: identity vertex matrix at the attached vertex.
  std::vector<CMatrix> mats = g.vertex_matrices();
  mats[0] = CMatrix::Identity(v - 1, v - 1);
  const Graph ref = Graph::from_parts(v, g.lengths(), mats, VertexCondition::custom, 0);
  CHECK((og.bond_scattering() - bond_scattering_matrix(ref)).cwiseAbs().maxCoeff() < 1e-5);
  CHECK(og.backscattering()[0] == doctest::Approx(-1.0).epsilon(1e-5));
  // W(k) turns singular at the reference levels and stays regular between them.
  const auto levels = find_levels(ref, 3.0, 9.0).levels;
  REQUIRE(levels.size() > 3);
  for (double k : levels) CHECK(smatrix(og, k).rcond < 1e-4);
  std::size_t widest = 1;
  for (std::size_t i = 1; i < levels.size(); ++i) {
    if (levels[i] - levels[i - 1] > levels[widest] - levels[widest - 1]) widest = i;
  }
  CHECK(smatrix(og, 0.5 * (levels[widest] + levels[widest - 1])).rcond > 1e-3);
}

TEST_CASE("k grid resolves the level spacing") {
  const Graph g = neumann_graph(6, 2);
  const OpenGraph og(g, 1, {1.0});
  const KGrid kg = make_k_grid(og, 10.0, 20.0);
  CHECK(kg.step <= 1.0 / (8.0 * g.mean_density()) + 1e-15);
  CHECK(kg.k_hi() == doctest::Approx(20.0));
  CHECK(kg.at(0) > 10.0);
  CHECK(snap_offset(0.26, 0.1) == 3);
  CHECK(snap_offset(-0.26, 0.1) == -3);
}

TEST_CASE("average S approaches diag(rho)") {
  const Graph g = neumann_graph(6, 3);
  const OpenGraph og(g, 2, {householder_weight_for_transmission(6, 0.5), 1.0});
  const auto avg = average_smatrix(og, 50.0, 50.0 + 600.0 / g.mean_density(), 9);
  CHECK_FALSE(avg.window_too_small);
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      const double expect = a == b ? og.backscattering()[a] : 0.0;
      CHECK(std::abs(avg.mean(a, b) - expect) < 4.0 * avg.std_error(a, b) + 1e-3);
    }
  }
  const auto t = transmission_coefficients(avg);
  CHECK(t.size() == 2);
}

TEST_CASE("zero-offset autocorrelator is a variance") {
  const Graph g = neumann_graph(5, 6);
  const OpenGraph og(g, 2, {1.0, 1.0});
  const auto series = sample_smatrix(og, make_k_grid(og, 20.0, 120.0));
  CorrelatorSpec spec{{{0, 1}}, {{0, 1}}, {0}, {0}};
  const auto c = correlate({&series}, spec, CorrelatorOptions{});
  CHECK(c.value.real() > 0.0);
  CHECK(std::abs(c.value.imag()) < 1e-14);
  CHECK(c.P == 1);
  CHECK(c.Q == 1);
  CorrelatorSpec far{{{0, 0}}, {{0, 0}}, {static_cast<long>(series.grid.samples / 3)}, {0}};
  const auto d = correlate({&series}, far, CorrelatorOptions{});
  CHECK(std::abs(d.value) < 3.0 * d.std_error + 0.02);
  CorrelatorSpec bad{{{0, 5}}, {{0, 0}}, {0}, {0}};
  CHECK_THROWS_AS(correlate({&series}, bad, CorrelatorOptions{}), ConfigError);

  std::stringstream ss;
  write_correlators(ss, {c, d}, {"0,1|0,1", "0,0|0,0"}, Metadata{});
  const Table t = read_table(ss);
  CHECK(t.rows.size() == 2);
  CHECK(t.numeric("P")[0] == 1.0);
}

TEST_CASE("ideally coupled generic graph has circular orthogonal ensemble moments") {
  GraphParams p;
  p.vertices = 10;
  p.seed = 31;
  p.condition = VertexCondition::random_symmetric_unitary;
  const double w = householder_weight_for_transmission(10, 1.0);
  const OpenGraph og(Graph::complete(p), 3, {w, w, w});
  const double k_lo = 40.0;
  const auto series = sample_smatrix(og, make_k_grid(og, k_lo, k_lo + 1500.0 / og.base().mean_density()));
  double diag = 0.0, off = 0.0;
  for (const auto& x : series.values) {
    diag += std::norm(x(0, 0)) + std::norm(x(1, 1)) + std::norm(x(2, 2));
    off += std::norm(x(0, 1)) + std::norm(x(0, 2)) + std::norm(x(1, 2));
  }
  const double n = 3.0 * static_cast<double>(series.values.size());
  CHECK(diag / n == doctest::Approx(0.5).epsilon(0.08));
  CHECK(off / n == doctest::Approx(0.25).epsilon(0.08));
}
