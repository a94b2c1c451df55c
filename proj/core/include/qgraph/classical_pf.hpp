#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "qgraph/graph.hpp"
#include "qgraph/io.hpp"
#include "qgraph/scattering.hpp"

namespace qgraph {

/// Classical transition matrix on directed bonds: entrywise squared modulus
/// of the k-independent factor of the evolution map. F(i, j) is the
/// probability to go from directed bond j to directed bond i.
struct PfOperator {
  RMatrix matrix;
  std::string graph_hash;
  bool closed = true;
};

PfOperator pf_operator(const Graph& g);
/// Open graphs use the subunitary inner blocks; the result is substochastic.
PfOperator pf_operator(const OpenGraph& og);

/// Largest deviation of any row or column sum from 1.
double stochasticity_residual(const RMatrix& f);

inline constexpr double kMixingGapThreshold = 1e-8;

struct PfSpectrum {
  /// Sorted by decreasing modulus.
  std::vector<cplx> eigenvalues;
  /// 1 - max_{j >= 2} |lambda_j|.
  double gap = 0.0;
  bool mixing = false;
  /// |lambda_1 - 1|.
  double perron_residual = 0.0;
  /// Max deviation of the normalized right Perron vector from the uniform one.
  double perron_vector_deviation = 0.0;
  /// m_j = 1 - lambda_j.
  std::vector<cplx> masses;
};

PfSpectrum pf_spectrum(const PfOperator& f);

struct DecayCurve {
  std::vector<double> distance;  // index m = 0 .. m_max
  bool fitted = false;
  double fitted_rate = 0.0;
  double eigen_rate = 0.0;  // -ln max_{j>=2} |lambda_j|
  std::size_t fit_begin = 0;
  std::size_t fit_end = 0;
  std::string warning;
};

/// L1 distance of F^m r0 from the uniform state of equal mass, with an
/// exponential fit over the late, above-roundoff part of the curve.
DecayCurve mixing_decay(const PfOperator& f, const std::vector<double>& r0, int m_max);

struct GapRow {
  int vertices = 0;
  int bonds = 0;
  std::uint64_t seed = 0;
  double gap = 0.0;
  bool mixing = false;
};

struct GapScan {
  std::vector<GapRow> rows;
  double min_gap = 0.0;
  bool all_positive = false;
};

GapScan gap_scan(const std::vector<int>& vertex_counts, VertexCondition kind,
                 const std::vector<std::uint64_t>& seeds, double length_min = 1.0,
                 double length_max = 2.0, unsigned workers = 1);

void write_pf_spectrum(std::ostream& os, const PfSpectrum& s, Metadata meta);
void write_decay(std::ostream& os, const DecayCurve& c, Metadata meta);
void write_gap_scan(std::ostream& os, const GapScan& scan, Metadata meta);

}  // namespace qgraph
