#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "qgraph/graph.hpp"
#include "qgraph/io.hpp"

namespace qgraph {

/// Eigenphases of a unitary map, ascending in [0, 2 pi). Throws
/// NumericalError when the input is not unitary to 1e-8.
std::vector<double> eigenphases(const EvolutionMap& u);
std::vector<double> eigenphases(const CMatrix& u);

struct SolverOptions {
  /// Absolute accuracy of each reported level.
  double tolerance = 1e-10;
  /// Grid step in k; 0 picks levels_per_step / mean_density, capped so
  /// that no eigenphase moves more than pi/4 per step.
  double grid_step = 0.0;
  double levels_per_step = 4.0;
  /// Maximum bisection depth of one grid step before giving up.
  int max_refinements = 12;
  unsigned workers = 1;
};

struct SpectrumResult {
  std::vector<double> levels;
  double k_lo = 0.0;
  double k_hi = 0.0;
  long winding_count = 0;
  double mean_density = 0.0;
  double grid_step = 0.0;
  long grid_points = 0;
  long refinements = 0;
  /// Indices i with levels[i+1] - levels[i] < 1e-10.
  std::vector<std::size_t> near_degenerate;
  std::string graph_hash;
};

/// All k in (k_lo, k_hi] with det(1 - U(k)) = 0.
///
/// Eigenphases of U(k) rotate counter-clockwise with velocities in
/// [L_min, L_max] and never cross each other, so between two grid points
/// the sorted phases are related by a cyclic shift equal to the number of
/// levels passed. That number follows exactly from det U(k) =
/// exp(2ik sum L) det U(0) and gives the completeness certificate; the
/// levels themselves are located by Newton iteration on the eigenphase
/// closest to zero, seeded by Hermite interpolation of the matched phases.
/// Steps whose roots cannot be certified are bisected.
SpectrumResult find_levels(const Graph& g, double k_lo, double k_hi,
                           const SolverOptions& options = {});

struct UnfoldedSpectrum {
  std::vector<double> x;
  double k_lo = 0.0;
  double k_hi = 0.0;
  double mean_density = 1.0;
  std::string source;
};

UnfoldedSpectrum unfold(const SpectrumResult& spectrum);

void write_spectrum(std::ostream& os, const SpectrumResult& spectrum, Metadata meta);
SpectrumResult read_spectrum(std::istream& is);

}  // namespace qgraph
