#include <cmath>

#include "doctest.h"
#include "qgraph/rmt.hpp"

using namespace qgraph;

TEST_CASE("GOE element variances") {
  GoeConfig cfg;
  cfg.dimension = 60;
  cfg.mean_spacing = 0.5;
  cfg.realizations = 300;
  const double lambda = cfg.scale();
  const double n = cfg.dimension;
  double off = 0.0, diag = 0.0, mean = 0.0;
  std::size_t n_off = 0, n_diag = 0;
  for (int r = 0; r < cfg.realizations; ++r) {
    const RMatrix h = sample_goe(cfg, r);
    CHECK((h - h.transpose()).cwiseAbs().maxCoeff() == 0.0);
    for (int i = 0; i < h.rows(); ++i) {
      diag += h(i, i) * h(i, i);
      mean += h(i, i);
      ++n_diag;
      for (int j = i + 1; j < h.cols(); ++j) {
        off += h(i, j) * h(i, j);
        ++n_off;
      }
    }
  }
  CHECK(off / n_off / (lambda * lambda / n) == doctest::Approx(1.0).epsilon(0.02));
  CHECK(diag / n_diag / (2.0 * lambda * lambda / n) == doctest::Approx(1.0).epsilon(0.05));
  CHECK(std::abs(mean / n_diag) < 4.0 * std::sqrt(2.0 / n) * lambda / std::sqrt(double(n_diag)));
}

TEST_CASE("semicircle counting and unfolding") {
  CHECK(semicircle_count(0.0, 100, 3.0) == doctest::Approx(50.0));
  CHECK(semicircle_count(6.0, 100, 3.0) == doctest::Approx(100.0));
  CHECK(semicircle_count(-6.0, 100, 3.0) == doctest::Approx(0.0));
  GoeConfig cfg;
  cfg.dimension = 200;
  cfg.realizations = 40;
  cfg.mean_spacing = 2.0;
  const auto seqs = goe_levels_unfolded(cfg, 2);
  REQUIRE(seqs.size() == 40);
  double spacing = 0.0;
  std::size_t count = 0;
  for (const auto& s : seqs) {
    CHECK(s.size() == 100);
    spacing += s.back() - s.front();
    count += s.size() - 1;
  }
  CHECK(spacing / count == doctest::Approx(1.0).epsilon(0.02));
  CHECK(goe_levels_unfolded(cfg, 1) == seqs);
}

TEST_CASE("channel couplings are orthogonal with the requested norms") {
  const auto c = build_channel_couplings(3, 50, {0.1, 0.2, 0.3}, 5);
  const RMatrix gram = c.W * c.W.transpose();
  for (int a = 0; a < 3; ++a) {
    CHECK(gram(a, a) == doctest::Approx(50.0 * c.strengths[a] * c.strengths[a]));
    for (int b = 0; b < 3; ++b) {
      if (a != b) CHECK(std::abs(gram(a, b)) < 1e-12);
    }
  }
}

TEST_CASE("K-matrix route equals the direct S formula") {
  GoeConfig cfg;
  cfg.dimension = 80;
  cfg.realizations = 2;
  const GoeScatteringEnsemble ens(cfg, 2, 3);
  const std::vector<double> v{0.3, 0.15};
  const RMatrix h = sample_goe(cfg, 1);
  for (double e : {-3.0, 0.1, 7.7}) {
    const CMatrix a = ens.smatrix(1, e, v);
    const CMatrix b = goe_smatrix(h, ens.coupling(v), e);
    CHECK((a - b).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(unitarity_residual(a) < 1e-10);
    CHECK(symmetry_residual(a) < 1e-10);
  }
}

TEST_CASE("transmission matching") {
  GoeConfig cfg;
  cfg.dimension = 100;
  cfg.realizations = 40;
  const GoeScatteringEnsemble ens(cfg, 2, 7);
  const auto m = match_transmission(ens, {0.5, 0.0}, 0.01);
  CHECK(std::abs(m.achieved[0] - 0.5) < 0.01);
  CHECK(m.strengths[1] == 0.0);
  CHECK(m.achieved[1] < 1e-12);
  CHECK_THROWS_AS(match_transmission(ens, {0.5}, 0.01), ConfigError);
  CHECK_THROWS_AS(match_transmission(ens, {0.5, 1.5}, 0.01), ConfigError);
}

TEST_CASE("ideal coupling gives circular orthogonal ensemble moments") {
  // COE(M): <|S_aa|^2> = 2/(M+1), <|S_ab|^2> = 1/(M+1).
  GoeConfig cfg;
  cfg.dimension = 200;
  cfg.realizations = 60;
  const GoeScatteringEnsemble ens(cfg, 3, 5);
  const auto m = match_transmission(ens, {1.0, 1.0, 1.0}, 0.01);
  const auto series = ens.sample(m.strengths, 0.0, 0.25 * cfg.scale());
  double diag = 0.0, off = 0.0;
  std::size_t n = 0;
  for (const auto& s : series) {
    for (const auto& x : s.values) {
      diag += std::norm(x(0, 0)) + std::norm(x(1, 1)) + std::norm(x(2, 2));
      off += std::norm(x(0, 1)) + std::norm(x(0, 2)) + std::norm(x(1, 2));
      ++n;
    }
  }
  CHECK(diag / (3.0 * n) == doctest::Approx(0.5).epsilon(0.06));
  CHECK(off / (3.0 * n) == doctest::Approx(0.25).epsilon(0.06));
}

TEST_CASE("GOE S series use the measured centre") {
  GoeConfig cfg;
  cfg.dimension = 60;
  cfg.realizations = 3;
  const GoeScatteringEnsemble ens(cfg, 1, 1);
  const auto series = ens.sample({0.2});
  REQUIRE(series.size() == 3);
  CHECK(series[0].grid.step == doctest::Approx(1.0 / 8.0));
  CHECK(series[0].source == "goe");
  CHECK((series[0].center - series[2].center).norm() == 0.0);
}

TEST_CASE("invalid GOE configurations") {
  GoeConfig cfg;
  cfg.dimension = 1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.dimension = 10;
  cfg.mean_spacing = -1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
