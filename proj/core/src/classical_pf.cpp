#include "qgraph/classical_pf.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <Eigen/Eigenvalues>

#include "qgraph/parallel.hpp"

namespace qgraph {

namespace {

RMatrix squared_modulus_of_flip(const Graph& g, const CMatrix& sigma) {
  const int n = g.directed_count();
  RMatrix f(n, n);
  for (int i = 0; i < n; ++i) {
    const int r = g.flip(i);
    for (int j = 0; j < n; ++j) f(i, j) = std::norm(sigma(r, j));
  }
  return f;
}

}  // namespace

PfOperator pf_operator(const Graph& g) {
  return {squared_modulus_of_flip(g, bond_scattering_matrix(g)), g.hash(), true};
}

PfOperator pf_operator(const OpenGraph& og) {
  return {squared_modulus_of_flip(og.base(), og.bond_scattering()), og.hash(), false};
}

double stochasticity_residual(const RMatrix& f) {
  const double rows = (f.rowwise().sum().array() - 1.0).abs().maxCoeff();
  const double cols = (f.colwise().sum().array() - 1.0).abs().maxCoeff();
  return std::max(rows, cols);
}

PfSpectrum pf_spectrum(const PfOperator& f) {
  if (!f.closed) throw ConfigError("PF spectrum analysis needs a closed-graph operator");
  const Eigen::Index n = f.matrix.rows();
  Eigen::EigenSolver<RMatrix> es(f.matrix, true);
  if (es.info() != Eigen::Success) throw NumericalError("PF eigen-decomposition failed");
  const auto values = es.eigenvalues();

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  // The eigenvalue closest to 1 goes first, the rest by decreasing modulus.
  const auto perron = *std::min_element(order.begin(), order.end(), [&](auto a, auto b) {
    return std::abs(values(a) - 1.0) < std::abs(values(b) - 1.0);
  });
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) {
    if (a == perron || b == perron) return a == perron && b != perron;
    return std::abs(values(a)) > std::abs(values(b));
  });

  PfSpectrum s;
  for (auto i : order) {
    s.eigenvalues.push_back(values(i));
    s.masses.push_back(1.0 - values(i));
  }
  s.perron_residual = std::abs(s.eigenvalues.front() - 1.0);
  double second = 0.0;
  for (std::size_t j = 1; j < s.eigenvalues.size(); ++j) {
    second = std::max(second, std::abs(s.eigenvalues[j]));
  }
  s.gap = 1.0 - second;
  s.mixing = s.perron_residual <= 1e-10 && s.gap > kMixingGapThreshold;

  CVector v = es.eigenvectors().col(perron);
  v /= v.norm();
  const Eigen::Index big = [&] {
    Eigen::Index idx = 0;
    v.cwiseAbs().maxCoeff(&idx);
    return idx;
  }();
  v *= std::polar(1.0, -std::arg(v(big)));
  const double u = 1.0 / std::sqrt(static_cast<double>(n));
  s.perron_vector_deviation = (v.array() - cplx(u, 0.0)).abs().maxCoeff();
  return s;
}

DecayCurve mixing_decay(const PfOperator& f, const std::vector<double>& r0, int m_max) {
  const auto n = static_cast<std::size_t>(f.matrix.rows());
  if (r0.size() != n) throw ConfigError("initial state has the wrong dimension");
  if (m_max < 1) throw ConfigError("m_max must be positive");
  double mass = 0.0;
  for (double x : r0) {
    if (x < 0.0) throw ConfigError("initial state must be non-negative");
    mass += x;
  }
  if (std::abs(mass - 1.0) > 1e-9) throw ConfigError("initial state must have total mass 1");

  DecayCurve c;
  RVector r = Eigen::Map<const RVector>(r0.data(), static_cast<Eigen::Index>(n));
  const double eq = mass / static_cast<double>(n);
  for (int m = 0; m <= m_max; ++m) {
    c.distance.push_back((r.array() - eq).abs().sum());
    r = f.matrix * r;
  }

  const PfSpectrum s = pf_spectrum(f);
  const double lambda2 = 1.0 - s.gap;
  c.eigen_rate = lambda2 > 0.0 ? -std::log(lambda2) : std::numeric_limits<double>::infinity();
  if (!s.mixing) {
    c.warning = "operator is not mixing; no exponential fit";
    return c;
  }
  // Late part of the curve that is still well above roundoff.
  const double floor = 1e-11 * std::max(c.distance.front(), 1e-300);
  std::size_t usable = 0;
  while (usable < c.distance.size() && c.distance[usable] > floor) ++usable;
  if (usable < 6) {
    c.warning = "curve reaches roundoff too quickly for a fit";
    return c;
  }
  c.fit_begin = usable / 3;
  c.fit_end = usable;
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  const double cnt = static_cast<double>(c.fit_end - c.fit_begin);
  for (std::size_t m = c.fit_begin; m < c.fit_end; ++m) {
    const double x = static_cast<double>(m);
    const double y = std::log(c.distance[m]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  c.fitted_rate = -(cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
  c.fitted = true;
  return c;
}

GapScan gap_scan(const std::vector<int>& vertex_counts, VertexCondition kind,
                 const std::vector<std::uint64_t>& seeds, double length_min, double length_max,
                 unsigned workers) {
  if (vertex_counts.empty() || seeds.empty()) throw ConfigError("empty gap scan");
  GapScan scan;
  scan.rows.resize(vertex_counts.size() * seeds.size());
  parallel_for(scan.rows.size(), workers, [&](std::size_t i) {
    GraphParams p;
    p.vertices = vertex_counts[i / seeds.size()];
    p.seed = seeds[i % seeds.size()];
    p.condition = kind;
    p.length_min = length_min;
    p.length_max = length_max;
    const Graph g = Graph::complete(p);
    const PfSpectrum s = pf_spectrum(pf_operator(g));
    scan.rows[i] = {p.vertices, g.bond_count(), p.seed, s.gap, s.mixing};
  });
  scan.min_gap = scan.rows.front().gap;
  scan.all_positive = true;
  for (const auto& r : scan.rows) {
    scan.min_gap = std::min(scan.min_gap, r.gap);
    scan.all_positive = scan.all_positive && r.mixing;
  }
  return scan;
}

void write_pf_spectrum(std::ostream& os, const PfSpectrum& s, Metadata meta) {
  meta.set("gap", s.gap);
  meta.set("mixing", std::string(s.mixing ? "true" : "false"));
  meta.set("perron_residual", s.perron_residual);
  meta.set("perron_vector_deviation", s.perron_vector_deviation);
  TableWriter w(os, meta, {"index", "re", "im", "abs", "mass_re", "mass_im"});
  for (std::size_t j = 0; j < s.eigenvalues.size(); ++j) {
    const cplx l = s.eigenvalues[j];
    w.row(std::vector<double>{static_cast<double>(j), l.real(), l.imag(), std::abs(l),
                              s.masses[j].real(), s.masses[j].imag()});
  }
}

void write_decay(std::ostream& os, const DecayCurve& c, Metadata meta) {
  meta.set("fitted", std::string(c.fitted ? "true" : "false"));
  meta.set("fitted_rate", c.fitted_rate);
  meta.set("eigen_rate", c.eigen_rate);
  if (!c.warning.empty()) meta.set("warning", c.warning);
  TableWriter w(os, meta, {"m", "distance"});
  for (std::size_t m = 0; m < c.distance.size(); ++m) {
    w.row(std::vector<double>{static_cast<double>(m), c.distance[m]});
  }
}

void write_gap_scan(std::ostream& os, const GapScan& scan, Metadata meta) {
  meta.set("min_gap", scan.min_gap);
  meta.set("all_positive", std::string(scan.all_positive ? "true" : "false"));
  TableWriter w(os, meta, {"vertices", "bonds", "seed", "gap", "mixing"});
  for (const auto& r : scan.rows) {
    w.row(std::vector<std::string>{std::to_string(r.vertices), std::to_string(r.bonds),
                                   std::to_string(r.seed), format_double(r.gap),
                                   r.mixing ? "1" : "0"});
  }
}

}  // namespace qgraph
