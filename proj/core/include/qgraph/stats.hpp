#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "qgraph/io.hpp"
#include "qgraph/spectral.hpp"

namespace qgraph {

enum class MeasureKind { nns, form_factor, number_variance, r2, density_correlator };

std::string_view to_string(MeasureKind kind);
MeasureKind measure_kind_from_string(std::string_view name);

/// A fluctuation measure on an abscissa grid. Distribution measures (nns)
/// also keep the raw samples for two-sample tests.
struct MeasureResult {
  MeasureKind kind = MeasureKind::nns;
  std::vector<double> abscissa;
  std::vector<double> values;
  std::vector<double> errors;
  std::vector<double> samples;
  std::size_t count = 0;
  std::string source;
};

/// Unfolded level sequences; a single long spectrum is usually cut into
/// equal segments so that graph and GOE inputs share one schema.
using LevelSequences = std::vector<std::vector<double>>;

LevelSequences segment(const std::vector<double>& x, std::size_t length);

/// Nearest-neighbour spacing histogram (normalized density). Needs at least
/// `min_levels` levels in total.
MeasureResult nns(const LevelSequences& sequences, double bin_width = 0.05, double s_max = 6.0,
                  std::size_t min_levels = 1000);

/// K(tau) = <|sum_n exp(2 pi i x_n tau)|^2 / n>, averaged over sequences and
/// smoothed with a Gaussian of width `smoothing` in tau. The transform of a
/// uniform density over each sequence is subtracted first.
MeasureResult form_factor(const LevelSequences& sequences, const std::vector<double>& tau_grid,
                          double smoothing = 0.02);

/// Sigma^2(L): variance of the level count in `windows` randomly placed
/// windows of length L per sequence (unit density assumed).
MeasureResult number_variance(const LevelSequences& sequences, const std::vector<double>& lengths,
                              std::uint64_t seed, std::size_t windows = 2000);

/// Lorentzian-smoothed fluctuating density
/// d(x) = sum_n (eps/pi) / ((x - x_n)^2 + eps^2) - 1 on unfolded levels.
struct SmoothedDensityOptions {
  double epsilon = 0.5;
  /// Sampling step of x.
  double step = 0.05;
  /// Distance kept from the ends of each sequence; levels beyond it are
  /// replaced by their mean contribution.
  double margin = 30.0;
  /// Length of a bootstrap block in unfolded units; 0 means whole sequences.
  double block = 0.0;
  std::size_t resamples = 400;
  std::uint64_t seed = 0;
};

struct DensityCorrelator {
  MeasureResult curve;
  /// <d(x)> over the sample and its error.
  double mean_fluctuation = 0.0;
  double mean_error = 0.0;
  bool epsilon_warning = false;
};

/// C(kappa) = <d(x + kappa) d(x)> on the unfolded offsets.
DensityCorrelator density_correlator(const LevelSequences& sequences,
                                     const std::vector<double>& offsets,
                                     const SmoothedDensityOptions& options);

/// Graph version: finds the levels in [k_lo, k_hi], unfolds them and returns
/// the correlator on unfolded offsets (kappa <d_R>) with epsilon given in
/// wave-number units.
DensityCorrelator density_correlator(const Graph& g, double k_lo, double k_hi, double epsilon_k,
                                     const std::vector<double>& offsets_k,
                                     SmoothedDensityOptions options,
                                     const SolverOptions& solver = {});

/// General product <prod_p d(x + o_p)> of smoothed fluctuating densities.
struct ProductEstimate {
  double value = 0.0;
  double std_error = 0.0;
  std::size_t samples = 0;
};
ProductEstimate density_product(const LevelSequences& sequences, const std::vector<double>& offsets,
                                const SmoothedDensityOptions& options);

double ks_two_sample(std::vector<double> a, std::vector<double> b);

template <class Cdf>
double ks_one_sample(std::vector<double> sample, Cdf cdf);

/// (1 - alpha) quantile of the two-sample KS statistic under the null of a
/// common distribution, from random relabelings of the pooled sample.
double ks_permutation_threshold(const std::vector<double>& a, const std::vector<double>& b,
                                double quantile, std::size_t resamples, std::uint64_t seed);

enum class CompareMode { distance, sigma };

struct Comparison {
  std::string method;
  double statistic = 0.0;
  double max_sigma = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

/// Distributions: two-sample KS. Curves: maximum absolute deviation
/// (mode distance) or maximum deviation in combined standard errors (mode
/// sigma), optionally restricted to [lo, hi].
Comparison compare(const MeasureResult& a, const MeasureResult& b, double tolerance,
                   CompareMode mode = CompareMode::distance,
                   double lo = -std::numeric_limits<double>::infinity(),
                   double hi = std::numeric_limits<double>::infinity());

void write_measure(std::ostream& os, const MeasureResult& m, Metadata meta);
MeasureResult read_measure(std::istream& is);

// ---------------------------------------------------------------------------

template <class Cdf>
double ks_one_sample(std::vector<double> sample, Cdf cdf) {
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double f = cdf(sample[i]);
    d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
  }
  return d;
}

}  // namespace qgraph
