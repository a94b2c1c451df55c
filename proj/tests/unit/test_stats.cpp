#include <cmath>
#include <sstream>

#include "doctest.h"
#include "qgraph/rmt.hpp"
#include "qgraph/stats.hpp"

using namespace qgraph;

namespace {

LevelSequences poisson(std::size_t sequences, std::size_t n, std::uint64_t seed) {
  LevelSequences out;
  Rng rng(seed);
  for (std::size_t s = 0; s < sequences; ++s) {
    std::uniform_real_distribution<double> u(0.0, static_cast<double>(n));
    std::vector<double> x(n);
    for (auto& v : x) v = u(rng);
    std::sort(x.begin(), x.end());
    out.push_back(std::move(x));
  }
  return out;
}

LevelSequences picket(std::size_t n) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = static_cast<double>(i);
  return {x};
}

const LevelSequences& goe() {
  static const LevelSequences seqs = [] {
    GoeConfig cfg;
    cfg.dimension = 400;
    cfg.realizations = 120;
    cfg.seed = 17;
    return goe_levels_unfolded(cfg);
  }();
  return seqs;
}

double integral(const MeasureResult& m, double width) {
  double s = 0.0;
  for (double v : m.values) s += v * width;
  return s;
}

std::vector<double> goe_form_factor(const std::vector<double>& tau) {
  std::vector<double> out;
  for (double t : tau) {
    out.push_back(t <= 1.0 ? 2.0 * t - t * std::log1p(2.0 * t)
                           : 2.0 - t * std::log((2.0 * t + 1.0) / (2.0 * t - 1.0)));
  }
  return out;
}

}  // namespace

TEST_CASE("picket fence spacings sit in one bin") {
  const auto m = nns(picket(2000));
  CHECK(integral(m, 0.05) == doctest::Approx(1.0).epsilon(0.01));
  const auto bin = static_cast<std::size_t>(1.0 / 0.05);
  CHECK(m.values[bin] * 0.05 == doctest::Approx(1.0));
  CHECK_THROWS_AS(nns(picket(500)), ConfigError);
}

TEST_CASE("poisson spacings are exponential") {
  const auto seqs = poisson(1, 100000, 3);
  const auto m = nns(seqs);
  CHECK(integral(m, 0.05) == doctest::Approx(1.0).epsilon(0.01));
  double mean = 0.0;
  for (double s : m.samples) mean += s;
  mean /= m.samples.size();
  CHECK(std::abs(mean - 1.0) < 2.0 / std::sqrt(static_cast<double>(m.count)));
  CHECK(ks_one_sample(m.samples, [](double s) { return 1.0 - std::exp(-s); }) < 0.02);
  for (double e : m.errors) CHECK(std::isfinite(e));
}

TEST_CASE("GOE spacing variance") {
  // Wigner surmise p(s) = (pi s / 2) exp(-pi s^2 / 4): <s^2> - 1 = 4/pi - 1.
  double m2 = 0.0;
  const double ds = 1e-4;
  for (double s = ds / 2; s < 12.0; s += ds) m2 += s * s * (pi * s / 2) * std::exp(-pi * s * s / 4) * ds;
  CHECK(m2 - 1.0 == doctest::Approx(4.0 / pi - 1.0).epsilon(1e-6));
  CHECK(4.0 / pi - 1.0 == doctest::Approx(0.273).epsilon(0.001));

  const auto m = nns(goe());
  double mean = 0.0, var = 0.0;
  for (double s : m.samples) mean += s;
  mean /= m.samples.size();
  for (double s : m.samples) var += (s - mean) * (s - mean);
  var /= m.samples.size();
  CHECK(std::abs(mean - 1.0) < 2.0 / std::sqrt(static_cast<double>(m.count)));
  // Exact large-N GOE value; the surmise sits 0.013 lower.
  CHECK(std::abs(var - 0.286) < 0.01);
  CHECK(integral(m, 0.05) == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("form factor limits") {
  std::vector<double> tau;
  for (int i = 1; i <= 30; ++i) tau.push_back(0.1 * i);
  const auto p = form_factor(poisson(200, 400, 5), tau, 0.02);
  for (std::size_t i = 0; i < tau.size(); ++i) {
    CHECK(p.errors[i] < 0.03);
    CHECK(std::abs(p.values[i] - 1.0) < 4.0 * p.errors[i]);
  }

  const std::vector<double> around{0.9, 0.96, 1.0, 1.04, 1.1};
  const auto f = form_factor(picket(400), around, 0.005);
  CHECK(f.values[2] > 20.0 * f.values[0]);
  CHECK(f.values[2] > 20.0 * f.values[4]);

  const auto g = form_factor(goe(), {0.5, 2.5}, 0.02);
  CHECK(g.values[0] == doctest::Approx(2 * 0.5 - 0.5 * std::log(2.0)).epsilon(0.05 / 0.653));
  CHECK(std::abs(g.values[1] - 1.0) < 0.05);
  const auto th = goe_form_factor({0.5});
  CHECK(std::abs(g.values[0] - th[0]) < 0.05);
  CHECK_THROWS_AS(form_factor(goe(), {0.0}, 0.02), ConfigError);
  CHECK_THROWS_AS(form_factor(goe(), {3.5}, 0.02), ConfigError);
}

TEST_CASE("number variance oracles") {
  const std::vector<double> lengths{0.05, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0};
  const auto p = number_variance(poisson(20, 2000, 9), lengths, 1, 4000);
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    CHECK(p.values[i] == doctest::Approx(lengths[i]).epsilon(0.05));
  }
  const auto f = number_variance(picket(1000), lengths, 2, 4000);
  for (double v : f.values) CHECK(v <= 0.25 + 1e-12);
  const auto g = number_variance(goe(), {0.05}, 3, 4000);
  CHECK(g.values[0] == doctest::Approx(0.05).epsilon(0.1));
}

TEST_CASE("smoothed density correlator") {
  SmoothedDensityOptions o;
  o.epsilon = 0.5;
  const auto dc = density_correlator(goe(), {0.0, 0.5, 1.0, 3.0}, o);
  CHECK(std::abs(dc.mean_fluctuation) < 3.0 * dc.mean_error);
  CHECK(dc.curve.values[0] > 0.0);
  CHECK(dc.curve.values[0] > dc.curve.values[1]);
  CHECK_FALSE(dc.epsilon_warning);
  for (double e : dc.curve.errors) CHECK(std::isfinite(e));
  // The Lorentzian of one level integrates to 1; poisson variance (1/(2 pi eps)).
  const auto pc = density_correlator(poisson(30, 2000, 2), {0.0}, o);
  CHECK(pc.curve.values[0] == doctest::Approx(1.0 / (2.0 * pi * 0.5)).epsilon(0.05));
  o.epsilon = 0.02;
  CHECK(density_correlator(goe(), {0.0}, o).epsilon_warning);
  // Products with a single offset reduce to the mean fluctuation.
  o.epsilon = 0.5;
  const auto prod = density_product(goe(), {0.0}, o);
  CHECK(prod.value == doctest::Approx(dc.mean_fluctuation));
  const auto three = density_product(goe(), {0.0, 0.0, 0.0}, o);
  CHECK(std::isfinite(three.value));
  CHECK(three.samples > 0);
}

TEST_CASE("graph density correlator uses unfolded units") {
  GraphParams p;
  p.vertices = 6;
  p.seed = 4;
  const Graph g = Graph::complete(p);
  const double d = g.mean_density();
  SmoothedDensityOptions o;
  o.block = 40.0;
  o.margin = 20.0;
  const auto dc = density_correlator(g, 10.0, 10.0 + 1500.0 / d, 0.5 / d, {0.0, 1.0 / d}, o);
  CHECK(dc.curve.source == "graph");
  CHECK(dc.curve.abscissa[1] == doctest::Approx(1.0).epsilon(0.05));
  CHECK(dc.curve.values[0] > 0.0);
  CHECK(std::abs(dc.mean_fluctuation) < 3.0 * dc.mean_error);
}

TEST_CASE("comparison reports") {
  const auto a = nns(goe());
  const auto self = compare(a, a, 0.03);
  CHECK(self.statistic == 0.0);
  CHECK(self.pass);

  LevelSequences first(goe().begin(), goe().begin() + 60), second(goe().begin() + 60, goe().end());
  const auto h1 = nns(first), h2 = nns(second);
  const double ks = compare(h1, h2, 1.0).statistic;
  CHECK(ks < ks_permutation_threshold(h1.samples, h2.samples, 0.99, 200, 4));

  const auto pois = nns(poisson(1, 30000, 8));
  const auto bad = compare(pois, a, 0.03);
  CHECK(bad.statistic > 0.1);
  CHECK_FALSE(bad.pass);

  const auto ff = form_factor(goe(), {0.3, 0.6}, 0.02);
  const auto nv = number_variance(goe(), {1.0, 2.0}, 1, 100);
  CHECK_THROWS_AS(compare(ff, nv, 0.1), ConfigError);
  const auto ff2 = form_factor(goe(), {0.3, 0.7}, 0.02);
  CHECK_THROWS_AS(compare(ff, ff2, 0.1), ConfigError);
  const auto c = compare(ff, ff, 0.0, CompareMode::sigma);
  CHECK(c.pass);
  CHECK(c.method == "max_sigma_deviation");
}

TEST_CASE("doubling the sample shrinks errors") {
  LevelSequences half(goe().begin(), goe().begin() + 60);
  const auto small = form_factor(half, {0.5, 1.5}, 0.02);
  const auto large = form_factor(goe(), {0.5, 1.5}, 0.02);
  for (std::size_t i = 0; i < 2; ++i) {
    const double r = small.errors[i] / large.errors[i];
    CHECK(r >= 1.2);
    CHECK(r <= 1.7);
  }
}

TEST_CASE("measure files round-trip") {
  const auto m = number_variance(goe(), {0.5, 1.0}, 1, 200);
  std::stringstream ss;
  Metadata meta;
  meta.set("note", std::string("x"));
  write_measure(ss, m, meta);
  const auto r = read_measure(ss);
  CHECK(r.kind == MeasureKind::number_variance);
  CHECK(r.count == m.count);
  CHECK(r.abscissa == m.abscissa);
  CHECK(r.values == m.values);
  CHECK(r.errors == m.errors);
}

TEST_CASE("segmenting") {
  std::vector<double> x(1003);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<double>(i);
  const auto s = segment(x, 250);
  CHECK(s.size() == 4);
  CHECK(s[3].back() == 999.0);
  CHECK_THROWS_AS(segment(x, 1), ConfigError);
  CHECK(measure_kind_from_string("form_factor") == MeasureKind::form_factor);
  CHECK_THROWS_AS(measure_kind_from_string("bogus"), ConfigError);
}
