#include "qgraph/rmt.hpp"

#include <algorithm>
#include <cmath>

#include "qgraph/parallel.hpp"

namespace qgraph {

void GoeConfig::validate() const {
  if (dimension < 2) throw ConfigError("GOE dimension must be >= 2");
  if (!(mean_spacing > 0.0)) throw ConfigError("GOE mean spacing must be > 0");
  if (realizations < 1) throw ConfigError("GOE needs at least one realization");
}

RMatrix sample_goe(const GoeConfig& cfg, int realization) {
  cfg.validate();
  const int n = cfg.dimension;
  const double lambda = cfg.scale();
  Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(realization)));
  std::normal_distribution<double> off(0.0, lambda / std::sqrt(static_cast<double>(n)));
  std::normal_distribution<double> diag(0.0, lambda * std::sqrt(2.0 / n));
  RMatrix h(n, n);
  for (int j = 0; j < n; ++j) {
    h(j, j) = diag(rng);
    for (int i = j + 1; i < n; ++i) h(i, j) = h(j, i) = off(rng);
  }
  return h;
}

double semicircle_count(double energy, int dimension, double scale) {
  const double x = std::clamp(energy / (2.0 * scale), -1.0, 1.0);
  return dimension * (0.5 + (x * std::sqrt(1.0 - x * x) + std::asin(x)) / pi);
}

std::vector<std::vector<double>> goe_levels_unfolded(const GoeConfig& cfg, unsigned workers) {
  cfg.validate();
  std::vector<std::vector<double>> out(cfg.realizations);
  const int n = cfg.dimension;
  parallel_for(out.size(), workers, [&](std::size_t r) {
    Eigen::SelfAdjointEigenSolver<RMatrix> es(sample_goe(cfg, static_cast<int>(r)),
                                              Eigen::EigenvaluesOnly);
    const RVector& e = es.eigenvalues();
    auto& x = out[r];
    for (int i = n / 4; i < n - n / 4; ++i) x.push_back(semicircle_count(e(i), n, cfg.scale()));
  });
  return out;
}

ChannelCoupling build_channel_couplings(int channels, int dimension,
                                        const std::vector<double>& strengths, std::uint64_t seed) {
  if (channels < 1 || channels > dimension) throw ConfigError("need 1 <= channels <= N");
  if (static_cast<int>(strengths.size()) != channels)
    throw ConfigError("need one coupling strength per channel");
  Rng rng(seed);
  std::normal_distribution<double> gauss;
  RMatrix a(dimension, channels);
  for (int c = 0; c < channels; ++c)
    for (int i = 0; i < dimension; ++i) a(i, c) = gauss(rng);
  Eigen::HouseholderQR<RMatrix> qr(a);
  const RMatrix q = qr.householderQ() * RMatrix::Identity(dimension, channels);
  ChannelCoupling cc;
  cc.strengths = strengths;
  cc.W = q.transpose();
  for (int c = 0; c < channels; ++c) {
    if (strengths[c] < 0.0) throw ConfigError("coupling strengths must be >= 0");
    cc.W.row(c) *= std::sqrt(static_cast<double>(dimension)) * strengths[c];
  }
  return cc;
}

CMatrix goe_smatrix(const RMatrix& hamiltonian, const ChannelCoupling& coupling, double energy) {
  const auto n = hamiltonian.rows();
  const RMatrix& w = coupling.W;
  CMatrix a = (energy * RMatrix::Identity(n, n) - hamiltonian).cast<cplx>();
  a += cplx(0.0, pi) * (w.transpose() * w).cast<cplx>();
  Eigen::PartialPivLU<CMatrix> lu(a);
  const CMatrix wt = w.transpose().cast<cplx>();
  const CMatrix inner = w.cast<cplx>() * lu.solve(wt);
  CMatrix s = CMatrix::Identity(w.rows(), w.rows()) - cplx(0.0, two_pi) * inner;
  if (!s.allFinite()) throw NumericalError("singular GOE resolvent");
  return s;
}

GoeScatteringEnsemble::GoeScatteringEnsemble(const GoeConfig& cfg, int channels,
                                             std::uint64_t coupling_seed, unsigned workers)
    : cfg_(cfg), channels_(channels) {
  cfg_.validate();
  unit_coupling_ = build_channel_couplings(channels, cfg.dimension,
                                           std::vector<double>(channels, 1.0), coupling_seed)
                       .W /
                   std::sqrt(static_cast<double>(cfg.dimension));
  eigenvalues_.resize(cfg.realizations);
  projections_.resize(cfg.realizations);
  parallel_for(static_cast<std::size_t>(cfg.realizations), workers, [&](std::size_t r) {
    Eigen::SelfAdjointEigenSolver<RMatrix> es(sample_goe(cfg_, static_cast<int>(r)));
    eigenvalues_[r] = es.eigenvalues();
    projections_[r] = unit_coupling_ * es.eigenvectors();
  });
}

ChannelCoupling GoeScatteringEnsemble::coupling(const std::vector<double>& strengths) const {
  ChannelCoupling cc;
  cc.strengths = strengths;
  cc.W = unit_coupling_;
  for (int c = 0; c < channels_; ++c)
    cc.W.row(c) *= std::sqrt(static_cast<double>(cfg_.dimension)) * strengths.at(c);
  return cc;
}

CMatrix GoeScatteringEnsemble::smatrix(int realization, double energy,
                                       const std::vector<double>& strengths) const {
  const RVector& e = eigenvalues_.at(realization);
  const RMatrix& p = projections_.at(realization);
  RVector scale(channels_);
  for (int c = 0; c < channels_; ++c)
    scale(c) = std::sqrt(static_cast<double>(cfg_.dimension)) * strengths.at(c);
  const RVector resolvent = (energy - e.array()).inverse().matrix();
  RMatrix k = p * resolvent.asDiagonal() * p.transpose();
  k = scale.asDiagonal() * k * scale.asDiagonal();
  const CMatrix ipk = cplx(0.0, pi) * k.cast<cplx>();
  const CMatrix id = CMatrix::Identity(channels_, channels_);
  // S = (1 - i pi K)(1 + i pi K)^-1; the two factors commute.
  CMatrix s = (id + ipk).partialPivLu().solve(id - ipk);
  if (!s.allFinite()) throw NumericalError("singular GOE K matrix");
  return s;
}

std::vector<double> GoeScatteringEnsemble::transmission(const std::vector<double>& strengths,
                                                        double energy_step,
                                                        unsigned workers) const {
  const double half_width = default_half_width();
  const auto points = static_cast<std::size_t>(std::floor(2.0 * half_width / energy_step));
  std::vector<CVector> sums(cfg_.realizations, CVector::Zero(channels_));
  parallel_for(sums.size(), workers, [&](std::size_t r) {
    for (std::size_t j = 0; j < points; ++j) {
      const double e = -half_width + (static_cast<double>(j) + 0.5) * energy_step;
      sums[r] += smatrix(static_cast<int>(r), e, strengths).diagonal();
    }
  });
  CVector total = CVector::Zero(channels_);
  for (const auto& s : sums) total += s;
  total /= static_cast<double>(points * sums.size());
  std::vector<double> t(channels_);
  for (int c = 0; c < channels_; ++c) t[c] = 1.0 - std::norm(total(c));
  return t;
}

std::vector<SMatrixSeries> GoeScatteringEnsemble::sample(const std::vector<double>& strengths,
                                                         double energy_step, double half_width,
                                                         unsigned workers) const {
  if (!(energy_step > 0.0)) energy_step = cfg_.mean_spacing / 8.0;
  if (!(half_width > 0.0)) half_width = default_half_width();
  KGrid grid;
  grid.k_lo = -half_width;
  grid.step = energy_step;
  grid.samples = static_cast<std::size_t>(std::floor(2.0 * half_width / energy_step));
  std::vector<SMatrixSeries> out(cfg_.realizations);
  parallel_for(out.size(), workers, [&](std::size_t r) {
    SMatrixSeries& s = out[r];
    s.grid = grid;
    s.channels = channels_;
    s.values.resize(grid.samples);
    s.accepted.assign(grid.samples, 1);
    s.mean_density = 1.0 / cfg_.mean_spacing;
    s.source = "goe";
    for (std::size_t j = 0; j < grid.samples; ++j) {
      s.values[j] = smatrix(static_cast<int>(r), grid.at(j), strengths);
      s.max_unitarity_residual = std::max(s.max_unitarity_residual, unitarity_residual(s.values[j]));
      s.max_symmetry_residual = std::max(s.max_symmetry_residual, symmetry_residual(s.values[j]));
    }
  });
  CMatrix center = CMatrix::Zero(channels_, channels_);
  std::size_t count = 0;
  for (const auto& s : out) {
    for (const auto& v : s.values) center += v;
    count += s.values.size();
  }
  center /= static_cast<double>(std::max<std::size_t>(count, 1));
  for (auto& s : out) s.center = center;
  return out;
}

MatchResult match_transmission(const GoeScatteringEnsemble& ensemble,
                               const std::vector<double>& targets, double tolerance,
                               unsigned workers) {
  const int channels = ensemble.channels();
  if (static_cast<int>(targets.size()) != channels)
    throw ConfigError("need one transmission target per channel");
  for (double t : targets)
    if (t < 0.0 || t > 1.0) throw ConfigError("transmission targets must lie in [0, 1]");
  const double d = ensemble.config().mean_spacing;
  const double step = 0.5 * d;
  // Natural coupling scale: T = 1 near pi^2 v^2 N / (pi lambda) = 1, i.e.
  // v ~ sqrt(d) / pi. Only used to place the search grid.
  const double v_unit = std::sqrt(d) / pi;

  std::vector<double> v(channels, v_unit);
  for (int c = 0; c < channels; ++c)
    if (targets[c] == 0.0) v[c] = 0.0;

  auto t_of = [&](int c, double value) {
    std::vector<double> trial = v;
    trial[c] = value;
    return ensemble.transmission(trial, step, workers)[c];
  };

  std::vector<double> peak_v(channels, 0.0), peak_t(channels, -1.0);
  for (int c = 0; c < channels; ++c) {
    if (targets[c] == 0.0) continue;
    // Maximum of T(v): coarse log-grid scan, then golden section in log v.
    constexpr int kScan = 17;
    int best = 0;
    std::vector<double> grid(kScan), values(kScan);
    for (int i = 0; i < kScan; ++i) {
      grid[i] = v_unit * std::pow(10.0, -2.0 + 4.0 * i / (kScan - 1));
      values[i] = t_of(c, grid[i]);
      if (values[i] > values[best]) best = i;
    }
    double lo = std::log(grid[std::max(0, best - 1)]);
    double hi = std::log(grid[std::min(kScan - 1, best + 1)]);
    const double golden = 0.5 * (std::sqrt(5.0) - 1.0);
    double m1 = hi - golden * (hi - lo), m2 = lo + golden * (hi - lo);
    double f1 = t_of(c, std::exp(m1)), f2 = t_of(c, std::exp(m2));
    for (int it = 0; it < 25; ++it) {
      if (f1 > f2) {
        hi = m2, m2 = m1, f2 = f1;
        m1 = hi - golden * (hi - lo);
        f1 = t_of(c, std::exp(m1));
      } else {
        lo = m1, m1 = m2, f1 = f2;
        m2 = lo + golden * (hi - lo);
        f2 = t_of(c, std::exp(m2));
      }
    }
    peak_v[c] = f1 > f2 ? std::exp(m1) : std::exp(m2);
    peak_t[c] = std::max(f1, f2);
    if (values[best] > peak_t[c]) peak_v[c] = grid[best], peak_t[c] = values[best];
  }

  // Bisection in log v on the rising branch. The second sweep re-solves
  // with the other channels at their matched strengths.
  for (int sweep = 0; sweep < 2; ++sweep) {
    for (int c = 0; c < channels; ++c) {
      if (targets[c] == 0.0) continue;
      if (targets[c] >= peak_t[c]) {
        if (targets[c] - peak_t[c] > tolerance)
          throw ConfigError("transmission target " + std::to_string(targets[c]) +
                            " exceeds the reachable maximum " + std::to_string(peak_t[c]));
        v[c] = peak_v[c];
        continue;
      }
      double a = std::log(v_unit * 1e-4), b = std::log(peak_v[c]);
      for (int it = 0; it < 60 && b - a > 1e-9; ++it) {
        const double mid = 0.5 * (a + b);
        const double t = t_of(c, std::exp(mid));
        if (std::abs(t - targets[c]) < 0.05 * tolerance) {
          a = b = mid;
          break;
        }
        (t < targets[c] ? a : b) = mid;
      }
      v[c] = std::exp(0.5 * (a + b));
    }
  }
  MatchResult result;
  result.strengths = v;
  result.achieved = ensemble.transmission(v, step, workers);
  for (int c = 0; c < channels; ++c) {
    if (std::abs(result.achieved[c] - targets[c]) > tolerance)
      throw ConfigError("could not match transmission of channel " + std::to_string(c));
  }
  return result;
}

}  // namespace qgraph
