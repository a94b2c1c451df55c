#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "qgraph/graph.hpp"
#include "qgraph/io.hpp"

namespace qgraph {

/// Householder boundary matrix Gamma = I - 2 n n^T / (n^T n) with
/// n = (w, 1, ..., 1). Row/column 0 is the channel, the rest are the
/// incident bonds in slot order.
RMatrix householder_boundary_matrix(int dimension, double weight);

/// Closed graph with channels attached to vertices 0 .. channels-1.
class OpenGraph {
 public:
  OpenGraph(Graph base, int channels, std::vector<double> weights);

  const Graph& base() const { return base_; }
  int channels() const { return channels_; }
  const std::vector<double>& weights() const { return weights_; }
  const RMatrix& boundary_matrix(int channel) const { return gamma_.at(channel); }

  /// Backscattering amplitude rho of each channel.
  const std::vector<double>& backscattering() const { return rho_; }
  /// Analytic 1 - rho^2 of each channel.
  std::vector<double> nominal_transmission() const;

  /// Channels x 2B coupling matrix; entry (c, j) is tau^(c) of the bond
  /// that terminates on vertex c.
  const RMatrix& coupling() const { return coupling_; }
  /// Bond scattering matrix with the subunitary inner blocks at the
  /// attached vertices.
  const CMatrix& bond_scattering() const { return sigma_; }
  /// Vertex matrices actually seen by the bonds (inner blocks at attached
  /// vertices), in slot order.
  const std::vector<CMatrix>& inner_vertex_matrices() const { return inner_; }

  std::string hash() const;

 private:
  Graph base_;
  int channels_;
  std::vector<double> weights_;
  std::vector<RMatrix> gamma_;
  std::vector<double> rho_;
  std::vector<CMatrix> inner_;
  RMatrix coupling_;
  CMatrix sigma_;
};

/// Weight that gives backscattering amplitude rho >= 0 at valency V - 1,
/// i.e. transmission 1 - rho^2.
double householder_weight_for_transmission(int vertices, double transmission);

struct SMatrix {
  double k = 0.0;
  CMatrix matrix;
  /// Reciprocal condition estimate of W(k).
  double rcond = 1.0;
  bool singular = false;
};

/// Evaluates S(k) = diag(rho) + T W(k)^-1 T^T with
/// W(k) = exp(-ikL) sigma_1 - Sigma^(B). Samples with cond(W) > 1e12 are
/// returned with singular = true.
class ScatteringSolver {
 public:
  explicit ScatteringSolver(const OpenGraph& og);
  SMatrix evaluate(double k) const;
  /// Fluctuating part T W^-1 T^T only.
  CMatrix fluctuating(const SMatrix& s) const;
  const OpenGraph& graph() const { return og_; }

 private:
  const OpenGraph& og_;
  CMatrix coupling_t_;
};

SMatrix smatrix(const OpenGraph& og, double k);

/// Uniform k grid for averaging: `samples` points k_lo + (j + 1/2) step.
struct KGrid {
  double k_lo = 0.0;
  double step = 0.0;
  std::size_t samples = 0;
  double at(std::size_t j) const { return k_lo + (static_cast<double>(j) + 0.5) * step; }
  double k_hi() const { return k_lo + step * static_cast<double>(samples); }
};

/// Grid over [k_lo, k_hi] with spacing at most 1/(8 <d_R>) (or `step` if
/// smaller and positive).
KGrid make_k_grid(const OpenGraph& og, double k_lo, double k_hi, double step = 0.0);

/// S(k) on a grid. Singular samples are kept but flagged.
struct SMatrixSeries {
  KGrid grid;
  int channels = 0;
  std::vector<CMatrix> values;
  std::vector<char> accepted;
  std::size_t excluded = 0;
  double max_unitarity_residual = 0.0;
  double max_symmetry_residual = 0.0;
  /// Center subtracted to form the fluctuating part.
  CMatrix center;
  std::string source;
  double mean_density = 1.0;
};

SMatrixSeries sample_smatrix(const OpenGraph& og, const KGrid& grid, unsigned workers = 1);

struct SMatrixAverage {
  CMatrix mean;
  RMatrix std_error;
  std::size_t samples = 0;
  std::size_t excluded = 0;
  bool window_too_small = false;
};

/// Grid average of S with block-bootstrap errors. `min_spacings` is the
/// window length (in mean level spacings) below which the result is
/// flagged.
SMatrixAverage average_smatrix(const SMatrixSeries& series, std::uint64_t seed,
                               double min_spacings = 500.0);
SMatrixAverage average_smatrix(const OpenGraph& og, double k_lo, double k_hi, std::uint64_t seed,
                               unsigned workers = 1);

/// T = 1 - |<S_cc>|^2 from a measured average.
std::vector<double> transmission_coefficients(const SMatrixAverage& avg);

// --- correlators --------------------------------------------------------

struct ChannelPair {
  int a = 0;
  int b = 0;
};

/// Product of P retarded factors S^fl_{a_p b_p}(k + kappa_p) and Q advanced
/// factors conj(S^fl_{c_q d_q}(k - kappa~_q)), averaged over the grid.
/// Offsets are in grid units of the series they are applied to.
struct CorrelatorSpec {
  std::vector<ChannelPair> retarded;
  std::vector<ChannelPair> advanced;
  std::vector<long> retarded_offsets;
  std::vector<long> advanced_offsets;
};

struct CorrelatorEstimate {
  cplx value{0.0, 0.0};
  double std_error = 0.0;
  std::size_t samples = 0;
  int P = 0;
  int Q = 0;
  std::vector<double> retarded_offsets;  // physical units
  std::vector<double> advanced_offsets;
  bool error_flag = false;
  std::string source;
};

struct CorrelatorOptions {
  /// Block length in samples; 0 picks about 40 mean spacings.
  std::size_t block = 0;
  std::size_t bootstrap_resamples = 400;
  std::uint64_t seed = 0;
  /// Relative error target; estimates above it carry error_flag.
  double max_relative_error = 1.0;
};

/// Correlator over one or more independent series (GOE realizations or a
/// single graph window). Blocks never straddle series.
CorrelatorEstimate correlate(const std::vector<const SMatrixSeries*>& series,
                             const CorrelatorSpec& spec, const CorrelatorOptions& options);

/// Convenience: snaps physical offsets to the grid of og sampled on the
/// window and evaluates the correlator.
CorrelatorEstimate s_correlator(const OpenGraph& og, const std::vector<ChannelPair>& retarded,
                                const std::vector<ChannelPair>& advanced,
                                const std::vector<double>& retarded_offsets,
                                const std::vector<double>& advanced_offsets, double k_lo,
                                double k_hi, const CorrelatorOptions& options,
                                unsigned workers = 1);

/// Offset in grid units nearest to a physical offset.
long snap_offset(double offset, double step);

void write_correlators(std::ostream& os, const std::vector<CorrelatorEstimate>& rows,
                       const std::vector<std::string>& channel_labels, Metadata meta);

}  // namespace qgraph
