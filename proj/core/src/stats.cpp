#include "qgraph/stats.hpp"

#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>

#include "qgraph/bootstrap.hpp"

namespace qgraph {

std::string_view to_string(MeasureKind kind) {
  switch (kind) {
    case MeasureKind::nns: return "nns";
    case MeasureKind::form_factor: return "form_factor";
    case MeasureKind::number_variance: return "number_variance";
    case MeasureKind::r2: return "r2";
    case MeasureKind::density_correlator: return "density_correlator";
  }
  return "nns";
}

MeasureKind measure_kind_from_string(std::string_view name) {
  for (auto k : {MeasureKind::nns, MeasureKind::form_factor, MeasureKind::number_variance,
                 MeasureKind::r2, MeasureKind::density_correlator}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown measure kind: " + std::string(name));
}

LevelSequences segment(const std::vector<double>& x, std::size_t length) {
  if (length < 2) throw ConfigError("segment length must be at least 2");
  LevelSequences out;
  for (std::size_t start = 0; start + length <= x.size(); start += length) {
    out.emplace_back(x.begin() + static_cast<std::ptrdiff_t>(start),
                     x.begin() + static_cast<std::ptrdiff_t>(start + length));
  }
  return out;
}

namespace {

std::size_t total_levels(const LevelSequences& seqs) {
  std::size_t n = 0;
  for (const auto& s : seqs) n += s.size();
  return n;
}

void check_sorted(const LevelSequences& seqs) {
  for (const auto& s : seqs) {
    if (!std::is_sorted(s.begin(), s.end())) throw ConfigError("levels must be sorted");
  }
}

// Mean and standard error over per-sequence estimates.
void reduce_over_sequences(const std::vector<std::vector<double>>& per_seq,
                           std::vector<double>& values, std::vector<double>& errors) {
  const std::size_t m = per_seq.size();
  const std::size_t n = m ? per_seq.front().size() : 0;
  values.assign(n, 0.0);
  errors.assign(n, 0.0);
  if (m == 0) return;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> column(m);
    for (std::size_t s = 0; s < m; ++s) column[s] = per_seq[s][i];
    const auto est = batch_mean(column);
    values[i] = est.mean;
    errors[i] = m > 1 ? est.std_error : 0.0;
  }
}

}  // namespace

MeasureResult nns(const LevelSequences& sequences, double bin_width, double s_max,
                  std::size_t min_levels) {
  if (bin_width <= 0.0 || s_max <= bin_width) throw ConfigError("invalid spacing histogram");
  check_sorted(sequences);
  if (total_levels(sequences) < min_levels) {
    throw ConfigError("nearest-neighbour spacings need at least " + std::to_string(min_levels) +
                      " levels");
  }
  MeasureResult m;
  m.kind = MeasureKind::nns;
  for (const auto& s : sequences) {
    for (std::size_t i = 1; i < s.size(); ++i) m.samples.push_back(s[i] - s[i - 1]);
  }
  const auto bins = static_cast<std::size_t>(std::ceil(s_max / bin_width - 1e-9));
  std::vector<double> counts(bins, 0.0);
  for (double s : m.samples) {
    const auto b = static_cast<std::size_t>(std::floor(s / bin_width));
    if (b < bins) counts[b] += 1.0;
  }
  const double norm = static_cast<double>(m.samples.size()) * bin_width;
  for (std::size_t b = 0; b < bins; ++b) {
    m.abscissa.push_back((static_cast<double>(b) + 0.5) * bin_width);
    m.values.push_back(counts[b] / norm);
    m.errors.push_back(std::sqrt(counts[b]) / norm);
  }
  m.count = m.samples.size();
  return m;
}

MeasureResult form_factor(const LevelSequences& sequences, const std::vector<double>& tau_grid,
                          double smoothing) {
  if (tau_grid.empty()) throw ConfigError("empty tau grid");
  for (double t : tau_grid) {
    if (!(t > 0.0 && t <= 3.0)) throw ConfigError("tau grid must lie in (0, 3]");
  }
  if (!(smoothing > 0.0)) throw ConfigError("form factor smoothing must be positive");
  check_sorted(sequences);

  const auto [tmin_it, tmax_it] = std::minmax_element(tau_grid.begin(), tau_grid.end());
  const double lo = std::max(0.0, *tmin_it - 5.0 * smoothing);
  const double hi = *tmax_it + 5.0 * smoothing;

  std::vector<std::vector<double>> per_seq;
  for (const auto& seq : sequences) {
    const std::size_t n = seq.size();
    if (n < 2) continue;
    // Raw K oscillates on the scale 1/n; the fine grid resolves it.
    const double fine = std::min(smoothing / 5.0, 0.25 / static_cast<double>(n));
    const auto points = static_cast<std::size_t>(std::ceil((hi - lo) / fine)) + 1;
    const double centre = 0.5 * (seq.front() + seq.back());
    std::vector<cplx> sums(points, cplx(0.0, 0.0));
    for (double x : seq) {
      const double y = x - centre;
      cplx z = std::polar(1.0, two_pi * y * lo);
      const cplx w = std::polar(1.0, two_pi * y * fine);
      for (std::size_t j = 0; j < points; ++j) {
        sums[j] += z;
        z *= w;
      }
    }
    // Remove the transform of a uniform unit density over the sequence span,
    // which otherwise leaks the tau = 0 peak into small tau.
    const double span = seq.back() - seq.front() + 1.0;
    std::vector<double> raw(points);
    for (std::size_t j = 0; j < points; ++j) {
      const double tau = lo + fine * static_cast<double>(j);
      const double mean = tau > 0.0 ? std::sin(pi * tau * span) / (pi * tau) : span;
      raw[j] = std::norm(sums[j] - mean) / static_cast<double>(n);
    }

    std::vector<double> smooth(tau_grid.size());
    for (std::size_t t = 0; t < tau_grid.size(); ++t) {
      double acc = 0.0, wsum = 0.0;
      for (std::size_t j = 0; j < points; ++j) {
        const double u = (lo + fine * static_cast<double>(j) - tau_grid[t]) / smoothing;
        if (std::abs(u) > 5.0) continue;
        const double w = std::exp(-0.5 * u * u);
        acc += w * raw[j];
        wsum += w;
      }
      smooth[t] = acc / wsum;
    }
    per_seq.push_back(std::move(smooth));
  }
  if (per_seq.empty()) throw ConfigError("form factor needs sequences with at least 2 levels");
  MeasureResult m;
  m.kind = MeasureKind::form_factor;
  m.abscissa = tau_grid;
  reduce_over_sequences(per_seq, m.values, m.errors);
  m.count = total_levels(sequences);
  return m;
}

MeasureResult number_variance(const LevelSequences& sequences, const std::vector<double>& lengths,
                              std::uint64_t seed, std::size_t windows) {
  if (lengths.empty()) throw ConfigError("empty L grid");
  for (double l : lengths) {
    if (!(l > 0.0)) throw ConfigError("window lengths must be positive");
  }
  if (windows == 0) throw ConfigError("need at least one window");
  check_sorted(sequences);
  std::vector<std::vector<double>> per_seq;
  for (std::size_t s = 0; s < sequences.size(); ++s) {
    const auto& seq = sequences[s];
    if (seq.size() < 2) continue;
    const double span = seq.back() - seq.front();
    Rng rng(derive_seed(seed, s));
    std::vector<double> row(lengths.size());
    for (std::size_t i = 0; i < lengths.size(); ++i) {
      const double l = lengths[i];
      if (l >= span) throw ConfigError("window length exceeds sequence span");
      std::uniform_real_distribution<double> start(seq.front(), seq.back() - l);
      double acc = 0.0;
      for (std::size_t w = 0; w < windows; ++w) {
        const double a = start(rng);
        const auto first = std::lower_bound(seq.begin(), seq.end(), a);
        const auto last = std::lower_bound(first, seq.end(), a + l);
        const double c = static_cast<double>(last - first) - l;
        acc += c * c;
      }
      row[i] = acc / static_cast<double>(windows);
    }
    per_seq.push_back(std::move(row));
  }
  if (per_seq.empty()) throw ConfigError("number variance needs non-empty sequences");
  MeasureResult m;
  m.kind = MeasureKind::number_variance;
  m.abscissa = lengths;
  reduce_over_sequences(per_seq, m.values, m.errors);
  m.count = total_levels(sequences);
  return m;
}

// --- smoothed density ---------------------------------------------------

namespace {

struct SampledDensity {
  double x0 = 0.0;
  std::vector<double> d;
};

void check_density_options(const SmoothedDensityOptions& o) {
  if (!(o.epsilon > 0.0)) throw ConfigError("epsilon must be positive");
  if (!(o.step > 0.0)) throw ConfigError("sampling step must be positive");
  if (!(o.margin > 0.0)) throw ConfigError("margin must be positive");
  if (o.block < 0.0) throw ConfigError("block length must be non-negative");
}

std::vector<SampledDensity> sample_densities(const LevelSequences& seqs,
                                             const SmoothedDensityOptions& o) {
  check_density_options(o);
  check_sorted(seqs);
  const double eps = o.epsilon;
  const double tail = 1.0 - (2.0 / pi) * std::atan(o.margin / eps);
  std::vector<SampledDensity> out;
  for (const auto& seq : seqs) {
    SampledDensity sd;
    if (seq.size() < 2) {
      out.push_back(sd);
      continue;
    }
    const double a = seq.front() + o.margin;
    const double b = seq.back() - o.margin;
    sd.x0 = a;
    if (b > a) {
      const auto points = static_cast<std::size_t>(std::floor((b - a) / o.step)) + 1;
      sd.d.resize(points);
      std::size_t lo = 0, hi = 0;
      for (std::size_t j = 0; j < points; ++j) {
        const double x = a + o.step * static_cast<double>(j);
        while (lo < seq.size() && seq[lo] <= x - o.margin) ++lo;
        if (hi < lo) hi = lo;
        while (hi < seq.size() && seq[hi] < x + o.margin) ++hi;
        double acc = tail;
        for (std::size_t n = lo; n < hi; ++n) {
          const double u = x - seq[n];
          acc += eps / (pi * (u * u + eps * eps));
        }
        sd.d[j] = acc - 1.0;
      }
    }
    out.push_back(std::move(sd));
  }
  return out;
}

ProductEstimate product_estimate(const std::vector<SampledDensity>& dens,
                                 const std::vector<long>& offs, const SmoothedDensityOptions& o) {
  const long omin = std::min(0L, *std::min_element(offs.begin(), offs.end()));
  const long omax = std::max(0L, *std::max_element(offs.begin(), offs.end()));
  std::vector<double> values;
  std::vector<std::size_t> ids;
  std::size_t block_base = 0;
  for (const auto& sd : dens) {
    const long n = static_cast<long>(sd.d.size());
    std::size_t last_block = 0;
    for (long j = -omin; j + omax < n; ++j) {
      double p = 1.0;
      for (long off : offs) p *= sd.d[static_cast<std::size_t>(j + off)];
      values.push_back(p);
      std::size_t blk = 0;
      if (o.block > 0.0) {
        blk = static_cast<std::size_t>(std::floor(static_cast<double>(j) * o.step / o.block));
      }
      ids.push_back(block_base + blk);
      last_block = blk;
    }
    block_base += last_block + 1;
  }
  ProductEstimate est;
  if (values.empty()) throw ConfigError("no samples: sequences too short for margin and offsets");
  const auto b = block_bootstrap_mean(values, ids, o.resamples, o.seed);
  est.value = b.mean.real();
  est.std_error = b.std_error;
  est.samples = values.size();
  return est;
}

std::vector<long> snap(const std::vector<double>& offsets, double step) {
  std::vector<long> out;
  out.reserve(offsets.size());
  for (double v : offsets) out.push_back(std::lround(v / step));
  return out;
}

}  // namespace

DensityCorrelator density_correlator(const LevelSequences& sequences,
                                     const std::vector<double>& offsets,
                                     const SmoothedDensityOptions& options) {
  if (offsets.empty()) throw ConfigError("empty offset grid");
  const auto dens = sample_densities(sequences, options);
  DensityCorrelator out;
  out.epsilon_warning = options.epsilon < 0.1 || options.epsilon > 1.0;
  out.curve.kind = MeasureKind::density_correlator;
  for (long off : snap(offsets, options.step)) {
    const auto est = product_estimate(dens, {0L, off}, options);
    out.curve.abscissa.push_back(static_cast<double>(off) * options.step);
    out.curve.values.push_back(est.value);
    out.curve.errors.push_back(est.std_error);
  }
  const auto mean = product_estimate(dens, {0L}, options);
  out.mean_fluctuation = mean.value;
  out.mean_error = mean.std_error;
  out.curve.count = total_levels(sequences);
  return out;
}

DensityCorrelator density_correlator(const Graph& g, double k_lo, double k_hi, double epsilon_k,
                                     const std::vector<double>& offsets_k,
                                     SmoothedDensityOptions options, const SolverOptions& solver) {
  const auto spectrum = find_levels(g, k_lo, k_hi, solver);
  const auto unfolded = unfold(spectrum);
  const double d = unfolded.mean_density;
  options.epsilon = epsilon_k * d;
  std::vector<double> offsets;
  offsets.reserve(offsets_k.size());
  for (double o : offsets_k) offsets.push_back(o * d);
  auto out = density_correlator(LevelSequences{unfolded.x}, offsets, options);
  out.curve.source = "graph";
  return out;
}

ProductEstimate density_product(const LevelSequences& sequences, const std::vector<double>& offsets,
                                const SmoothedDensityOptions& options) {
  if (offsets.empty()) throw ConfigError("empty offset list");
  const auto dens = sample_densities(sequences, options);
  return product_estimate(dens, snap(offsets, options.step), options);
}

// --- comparison ---------------------------------------------------------

double ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw ConfigError("KS test needs non-empty samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

double ks_permutation_threshold(const std::vector<double>& a, const std::vector<double>& b,
                                double quantile, std::size_t resamples, std::uint64_t seed) {
  if (!(quantile > 0.0 && quantile < 1.0)) throw ConfigError("quantile must be in (0, 1)");
  if (resamples == 0) throw ConfigError("need at least one resample");
  std::vector<double> pooled(a);
  pooled.insert(pooled.end(), b.begin(), b.end());
  Rng rng(seed);
  std::vector<double> stats(resamples);
  const auto split = static_cast<std::ptrdiff_t>(a.size());
  for (auto& s : stats) {
    std::shuffle(pooled.begin(), pooled.end(), rng);
    s = ks_two_sample(std::vector<double>(pooled.begin(), pooled.begin() + split),
                      std::vector<double>(pooled.begin() + split, pooled.end()));
  }
  std::sort(stats.begin(), stats.end());
  const auto idx = std::min(stats.size() - 1, static_cast<std::size_t>(std::ceil(
                                                  quantile * static_cast<double>(stats.size()))) -
                                                  1);
  return stats[idx];
}

Comparison compare(const MeasureResult& a, const MeasureResult& b, double tolerance,
                   CompareMode mode, double lo, double hi) {
  if (a.kind != b.kind) throw ConfigError("cannot compare different measure kinds");
  Comparison c;
  c.tolerance = tolerance;
  if (a.kind == MeasureKind::nns && !a.samples.empty() && !b.samples.empty()) {
    c.method = "ks_two_sample";
    c.statistic = ks_two_sample(a.samples, b.samples);
    c.pass = c.statistic <= tolerance;
    return c;
  }
  if (a.abscissa.size() != b.abscissa.size()) throw ConfigError("incompatible abscissa grids");
  bool any = false;
  for (std::size_t i = 0; i < a.abscissa.size(); ++i) {
    if (std::abs(a.abscissa[i] - b.abscissa[i]) > 1e-9 * std::max(1.0, std::abs(a.abscissa[i]))) {
      throw ConfigError("incompatible abscissa grids");
    }
    const double x = a.abscissa[i];
    if (x < lo || x > hi) continue;
    any = true;
    const double dev = std::abs(a.values[i] - b.values[i]);
    const double ea = i < a.errors.size() ? a.errors[i] : 0.0;
    const double eb = i < b.errors.size() ? b.errors[i] : 0.0;
    const double sigma = std::sqrt(ea * ea + eb * eb);
    c.statistic = std::max(c.statistic, dev);
    const double z = sigma > 0.0 ? dev / sigma : (dev > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
    c.max_sigma = std::max(c.max_sigma, z);
  }
  if (!any) throw ConfigError("comparison range contains no grid points");
  if (mode == CompareMode::distance) {
    c.method = "max_abs_deviation";
    c.pass = c.statistic <= tolerance;
  } else {
    c.method = "max_sigma_deviation";
    c.pass = c.max_sigma <= tolerance;
  }
  return c;
}

void write_measure(std::ostream& os, const MeasureResult& m, Metadata meta) {
  meta.set("kind", std::string(to_string(m.kind)));
  meta.set("count", m.count);
  if (!m.source.empty()) meta.set("source", m.source);
  TableWriter w(os, meta, {"abscissa", "value", "error"});
  for (std::size_t i = 0; i < m.abscissa.size(); ++i) {
    w.row(std::vector<double>{m.abscissa[i], m.values[i], m.errors[i]});
  }
}

MeasureResult read_measure(std::istream& is) {
  const Table t = read_table(is);
  MeasureResult m;
  m.kind = measure_kind_from_string(t.meta.get("kind"));
  m.count = static_cast<std::size_t>(std::stoull(t.meta.get("count")));
  if (t.meta.contains("source")) m.source = t.meta.get("source");
  m.abscissa = t.numeric("abscissa");
  m.values = t.numeric("value");
  m.errors = t.numeric("error");
  return m;
}

}  // namespace qgraph
