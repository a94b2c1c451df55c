#include "qgraph/scattering.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include "qgraph/parallel.hpp"
#include "qgraph/bootstrap.hpp"

namespace qgraph {

RMatrix householder_boundary_matrix(int dimension, double weight) {
  if (dimension < 2) throw ConfigError("boundary matrix needs dimension >= 2");
  if (!(weight > 0.0) || !std::isfinite(weight)) throw ConfigError("channel weight must be > 0");
  RVector n = RVector::Ones(dimension);
  n(0) = weight;
  return RMatrix::Identity(dimension, dimension) - 2.0 * n * n.transpose() / n.squaredNorm();
}

double householder_weight_for_transmission(int vertices, double transmission) {
  if (!(transmission > 0.0) || transmission > 1.0)
    throw ConfigError("transmission target must lie in (0, 1]");
  const double rho = std::sqrt(1.0 - transmission);
  return std::sqrt((vertices - 1) * (1.0 - rho) / (1.0 + rho));
}

OpenGraph::OpenGraph(Graph base, int channels, std::vector<double> weights)
    : base_(std::move(base)), channels_(channels), weights_(std::move(weights)) {
  const int vertices = base_.vertex_count();
  if (channels_ < 0 || channels_ > vertices)
    throw ConfigError("channel count must satisfy 0 <= channels <= V");
  if (static_cast<int>(weights_.size()) != channels_)
    throw ConfigError("need one weight per channel");
  inner_ = base_.vertex_matrices();
  for (int c = 0; c < channels_; ++c) {
    gamma_.push_back(householder_boundary_matrix(vertices, weights_[c]));
    const RMatrix& g = gamma_.back();
    rho_.push_back(g(0, 0));
    inner_[c] = g.bottomRightCorner(vertices - 1, vertices - 1).cast<cplx>();
  }
  const int n = base_.directed_count();
  sigma_ = CMatrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    const int v = base_.terminus(i);
    const int si = base_.slot(v, base_.bond_of(i));
    for (int j = 0; j < n; ++j) {
      if (base_.terminus(j) != v) continue;
      sigma_(i, j) = inner_[v](si, base_.slot(v, base_.bond_of(j)));
    }
  }
  coupling_ = RMatrix::Zero(channels_, n);
  for (int c = 0; c < channels_; ++c) {
    for (int j = 0; j < n; ++j) {
      if (base_.terminus(j) != c) continue;
      coupling_(c, j) = gamma_[c](0, 1 + base_.slot(c, base_.bond_of(j)));
    }
  }
}

std::vector<double> OpenGraph::nominal_transmission() const {
  std::vector<double> t;
  for (double r : rho_) t.push_back(1.0 - r * r);
  return t;
}

std::string OpenGraph::hash() const {
  std::ostringstream os;
  os << base_.hash() << ':' << channels_;
  for (double w : weights_) os << ':' << format_double(w);
  return sha256_hex(os.str()).substr(0, 16);
}

ScatteringSolver::ScatteringSolver(const OpenGraph& og) : og_(og) {
  coupling_t_ = og.coupling().transpose().cast<cplx>();
}

SMatrix ScatteringSolver::evaluate(double k) const {
  const Graph& g = og_.base();
  const int n = g.directed_count();
  CMatrix w = -og_.bond_scattering();
  for (int i = 0; i < n; ++i) w(i, g.flip(i)) += std::polar(1.0, -k * g.lengths()[g.bond_of(i)]);
  Eigen::PartialPivLU<CMatrix> lu(w);
  SMatrix s;
  s.k = k;
  s.rcond = lu.rcond();
  s.singular = !(s.rcond > 1e-12);
  const int channels = og_.channels();
  s.matrix = og_.coupling().cast<cplx>() * lu.solve(coupling_t_);
  for (int c = 0; c < channels; ++c) s.matrix(c, c) += og_.backscattering()[c];
  if (!s.matrix.allFinite()) s.singular = true;
  return s;
}

CMatrix ScatteringSolver::fluctuating(const SMatrix& s) const {
  CMatrix f = s.matrix;
  for (int c = 0; c < og_.channels(); ++c) f(c, c) -= og_.backscattering()[c];
  return f;
}

SMatrix smatrix(const OpenGraph& og, double k) { return ScatteringSolver(og).evaluate(k); }

KGrid make_k_grid(const OpenGraph& og, double k_lo, double k_hi, double step) {
  if (!(k_lo < k_hi)) throw ConfigError("k window needs k_lo < k_hi");
  const double max_step = 1.0 / (8.0 * og.base().mean_density());
  if (!(step > 0.0) || step > max_step) step = max_step;
  KGrid grid;
  grid.k_lo = k_lo;
  grid.samples = static_cast<std::size_t>(std::ceil((k_hi - k_lo) / step));
  grid.step = (k_hi - k_lo) / static_cast<double>(grid.samples);
  return grid;
}

SMatrixSeries sample_smatrix(const OpenGraph& og, const KGrid& grid, unsigned workers) {
  const ScatteringSolver solver(og);
  SMatrixSeries series;
  series.grid = grid;
  series.channels = og.channels();
  series.values.resize(grid.samples);
  series.accepted.assign(grid.samples, 1);
  series.source = "graph:" + og.hash();
  series.mean_density = og.base().mean_density();
  series.center = CMatrix::Zero(og.channels(), og.channels());
  for (int c = 0; c < og.channels(); ++c) series.center(c, c) = og.backscattering()[c];
  std::vector<double> unitarity(grid.samples, 0.0), symmetry(grid.samples, 0.0);
  parallel_for(grid.samples, workers, [&](std::size_t j) {
    SMatrix s = solver.evaluate(grid.at(j));
    if (s.singular) {
      series.accepted[j] = 0;
    } else {
      unitarity[j] = unitarity_residual(s.matrix);
      symmetry[j] = symmetry_residual(s.matrix);
    }
    series.values[j] = std::move(s.matrix);
  });
  for (std::size_t j = 0; j < grid.samples; ++j) {
    if (!series.accepted[j]) {
      ++series.excluded;
      continue;
    }
    series.max_unitarity_residual = std::max(series.max_unitarity_residual, unitarity[j]);
    series.max_symmetry_residual = std::max(series.max_symmetry_residual, symmetry[j]);
  }
  return series;
}

namespace {

std::size_t default_block(const SMatrixSeries& s) {
  const double spacing_in_samples = 1.0 / (s.mean_density * s.grid.step);
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(40.0 * spacing_in_samples)));
}

}  // namespace

SMatrixAverage average_smatrix(const SMatrixSeries& series, std::uint64_t seed,
                               double min_spacings) {
  const int channels = series.channels;
  SMatrixAverage avg;
  avg.mean = CMatrix::Zero(channels, channels);
  avg.std_error = RMatrix::Zero(channels, channels);
  avg.excluded = series.excluded;
  const double spacings =
      series.grid.step * static_cast<double>(series.grid.samples) * series.mean_density;
  avg.window_too_small = spacings < min_spacings;
  const std::size_t block = default_block(series);
  for (int a = 0; a < channels; ++a) {
    for (int b = 0; b < channels; ++b) {
      std::vector<cplx> values;
      std::vector<std::size_t> block_ids;
      for (std::size_t j = 0; j < series.values.size(); ++j) {
        if (!series.accepted[j]) continue;
        values.push_back(series.values[j](a, b));
        block_ids.push_back(j / block);
      }
      const auto est = block_bootstrap_mean(values, block_ids, 400, derive_seed(seed, a * 64 + b));
      avg.mean(a, b) = est.mean;
      avg.std_error(a, b) = est.std_error;
      avg.samples = values.size();
    }
  }
  return avg;
}

SMatrixAverage average_smatrix(const OpenGraph& og, double k_lo, double k_hi, std::uint64_t seed,
                               unsigned workers) {
  return average_smatrix(sample_smatrix(og, make_k_grid(og, k_lo, k_hi), workers), seed);
}

std::vector<double> transmission_coefficients(const SMatrixAverage& avg) {
  std::vector<double> t;
  for (Eigen::Index c = 0; c < avg.mean.rows(); ++c)
    t.push_back(std::clamp(1.0 - std::norm(avg.mean(c, c)), 0.0, 1.0));
  return t;
}

long snap_offset(double offset, double step) { return std::lround(offset / step); }

CorrelatorEstimate correlate(const std::vector<const SMatrixSeries*>& series,
                             const CorrelatorSpec& spec, const CorrelatorOptions& options) {
  if (spec.retarded.empty() || spec.advanced.empty())
    throw ConfigError("correlator needs P >= 1 and Q >= 1");
  if (spec.retarded.size() != spec.retarded_offsets.size() ||
      spec.advanced.size() != spec.advanced_offsets.size())
    throw ConfigError("one offset per correlator factor");
  if (series.empty()) throw ConfigError("correlator needs at least one series");
  long reach_up = 0, reach_down = 0;
  for (long r : spec.retarded_offsets) {
    reach_up = std::max(reach_up, r);
    reach_down = std::max(reach_down, -r);
  }
  for (long q : spec.advanced_offsets) {
    reach_up = std::max(reach_up, -q);
    reach_down = std::max(reach_down, q);
  }
  const int channels = series.front()->channels;
  auto check_pair = [&](const ChannelPair& p) {
    if (p.a < 0 || p.b < 0 || p.a >= channels || p.b >= channels)
      throw ConfigError("correlator channel out of range");
  };
  std::for_each(spec.retarded.begin(), spec.retarded.end(), check_pair);
  std::for_each(spec.advanced.begin(), spec.advanced.end(), check_pair);

  std::vector<cplx> values;
  std::vector<std::size_t> block_ids;
  std::size_t block_base = 0;
  for (const SMatrixSeries* s : series) {
    const std::size_t block = options.block ? options.block : default_block(*s);
    const long n = static_cast<long>(s->values.size());
    auto fluct = [&](long j, const ChannelPair& p) {
      return s->values[j](p.a, p.b) - s->center(p.a, p.b);
    };
    for (long j = reach_down; j + reach_up < n; ++j) {
      cplx product(1.0, 0.0);
      bool ok = true;
      for (std::size_t p = 0; p < spec.retarded.size() && ok; ++p) {
        const long idx = j + spec.retarded_offsets[p];
        ok = s->accepted[idx];
        product *= fluct(idx, spec.retarded[p]);
      }
      for (std::size_t q = 0; q < spec.advanced.size() && ok; ++q) {
        const long idx = j - spec.advanced_offsets[q];
        ok = s->accepted[idx];
        product *= std::conj(fluct(idx, spec.advanced[q]));
      }
      if (!ok) continue;
      values.push_back(product);
      block_ids.push_back(block_base + static_cast<std::size_t>(j) / block);
    }
    block_base += static_cast<std::size_t>(n) / block + 1;
  }
  CorrelatorEstimate est;
  est.P = static_cast<int>(spec.retarded.size());
  est.Q = static_cast<int>(spec.advanced.size());
  const double step = series.front()->grid.step;
  for (long r : spec.retarded_offsets) est.retarded_offsets.push_back(r * step);
  for (long q : spec.advanced_offsets) est.advanced_offsets.push_back(q * step);
  est.source = series.front()->source;
  if (values.empty()) {
    est.error_flag = true;
    return est;
  }
  const auto boot =
      block_bootstrap_mean(values, block_ids, options.bootstrap_resamples, options.seed);
  est.value = boot.mean;
  est.std_error = boot.std_error;
  est.samples = values.size();
  est.error_flag = boot.blocks < 10 ||
                   est.std_error > options.max_relative_error * std::max(std::abs(est.value), 1e-300);
  return est;
}

CorrelatorEstimate s_correlator(const OpenGraph& og, const std::vector<ChannelPair>& retarded,
                                const std::vector<ChannelPair>& advanced,
                                const std::vector<double>& retarded_offsets,
                                const std::vector<double>& advanced_offsets, double k_lo,
                                double k_hi, const CorrelatorOptions& options, unsigned workers) {
  const SMatrixSeries series = sample_smatrix(og, make_k_grid(og, k_lo, k_hi), workers);
  CorrelatorSpec spec{retarded, advanced, {}, {}};
  for (double o : retarded_offsets) spec.retarded_offsets.push_back(snap_offset(o, series.grid.step));
  for (double o : advanced_offsets) spec.advanced_offsets.push_back(snap_offset(o, series.grid.step));
  return correlate({&series}, spec, options);
}

void write_correlators(std::ostream& os, const std::vector<CorrelatorEstimate>& rows,
                       const std::vector<std::string>& channel_labels, Metadata meta) {
  meta.set("kind", std::string("s_correlator"));
  TableWriter w(os, meta,
                {"P", "Q", "channels", "retarded_offsets", "advanced_offsets", "value_re",
                 "value_im", "std_error", "samples", "error_flag"});
  auto join = [](const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_double(v[i]);
    return s;
  };
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    w.row(std::vector<std::string>{std::to_string(r.P), std::to_string(r.Q),
                                   i < channel_labels.size() ? channel_labels[i] : "",
                                   join(r.retarded_offsets), join(r.advanced_offsets),
                                   format_double(r.value.real()), format_double(r.value.imag()),
                                   format_double(r.std_error), std::to_string(r.samples),
                                   r.error_flag ? "1" : "0"});
  }
}

}  // namespace qgraph
