#pragma once

#include <cstdint>
#include <vector>

#include "qgraph/common.hpp"
#include "qgraph/scattering.hpp"

namespace qgraph {

struct GoeConfig {
  int dimension = 500;
  /// Target mean level spacing d at the band centre.
  double mean_spacing = 1.0;
  int realizations = 200;
  std::uint64_t seed = 0;

  /// lambda = N d / pi; the semicircle has radius 2 lambda.
  double scale() const { return dimension * mean_spacing / pi; }
  void validate() const;
};

/// Real symmetric H with <H_ij H_kl> = (lambda^2/N)(d_ik d_jl + d_il d_jk).
/// Realization r draws from its own child seed.
RMatrix sample_goe(const GoeConfig& cfg, int realization);

/// Semicircle counting function: expected number of levels below E.
double semicircle_count(double energy, int dimension, double scale);

/// Central half of each realization's spectrum, unfolded with the
/// semicircle counting function (unit mean spacing).
std::vector<std::vector<double>> goe_levels_unfolded(const GoeConfig& cfg, unsigned workers = 1);

struct ChannelCoupling {
  /// Channels x N; rows are orthogonal with squared norm N v_a^2.
  RMatrix W;
  std::vector<double> strengths;
};

ChannelCoupling build_channel_couplings(int channels, int dimension,
                                        const std::vector<double>& strengths, std::uint64_t seed);

/// S(E) = 1 - 2 pi i W (E - H + i pi W^T W)^-1 W^T, evaluated directly.
CMatrix goe_smatrix(const RMatrix& hamiltonian, const ChannelCoupling& coupling, double energy);

/// GOE scattering ensemble in diagonal form: per realization the
/// eigenvalues of H and the projections of the unit-norm channel vectors
/// onto its eigenvectors. S(E) is then evaluated through the K matrix
/// K = W (E - H)^-1 W^T, S = (1 - i pi K)(1 + i pi K)^-1.
class GoeScatteringEnsemble {
 public:
  GoeScatteringEnsemble(const GoeConfig& cfg, int channels, std::uint64_t coupling_seed,
                        unsigned workers = 1);

  const GoeConfig& config() const { return cfg_; }
  int channels() const { return channels_; }

  ChannelCoupling coupling(const std::vector<double>& strengths) const;
  CMatrix smatrix(int realization, double energy, const std::vector<double>& strengths) const;

  /// Energies sampled: |E| <= half_width with the given step.
  double default_half_width() const { return 0.5 * cfg_.scale(); }

  /// T_c = 1 - |<S_cc>|^2 averaged over realizations and energies.
  std::vector<double> transmission(const std::vector<double>& strengths, double energy_step,
                                   unsigned workers = 1) const;

  /// One S series per realization on the energy grid (default step d/8).
  /// The fluctuating part is taken relative to the measured ensemble mean.
  std::vector<SMatrixSeries> sample(const std::vector<double>& strengths, double energy_step = 0.0,
                                    double half_width = 0.0, unsigned workers = 1) const;

 private:
  GoeConfig cfg_;
  int channels_;
  RMatrix unit_coupling_;
  std::vector<RVector> eigenvalues_;
  std::vector<RMatrix> projections_;
};

struct MatchResult {
  std::vector<double> strengths;
  std::vector<double> achieved;
};

/// Finds per-channel strengths v_a so that the measured ensemble T matches
/// each target within `tolerance`, by bracketed root search on the rising
/// branch of T(v). Throws ConfigError when a target is out of reach.
MatchResult match_transmission(const GoeScatteringEnsemble& ensemble,
                               const std::vector<double>& targets, double tolerance = 0.01,
                               unsigned workers = 1);

}  // namespace qgraph
