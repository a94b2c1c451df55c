#include "qgraph/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <optional>
#include <ostream>

#include "qgraph/parallel.hpp"

namespace qgraph {

namespace {

double wrap_phase(double theta) {
  theta = std::fmod(theta, two_pi);
  if (theta < 0.0) theta += two_pi;
  if (theta >= two_pi) theta -= two_pi;
  return theta;
}

// Sorted eigenphases of a unitary u via the Hermitian Cayley transform
// H = -i (1 + v)(1 - v)^-1, v = exp(-i alpha) u, whose eigenvalues are
// cot(phi / 2) with phi = theta - alpha. Alpha is kept away from all phases.
std::vector<double> unitary_phases(const CMatrix& u) {
  const Eigen::Index n = u.rows();
  const CMatrix identity = CMatrix::Identity(n, n);
  double alpha = pi;
  std::vector<double> phases(n);
  for (int attempt = 0; attempt < 4; ++attempt) {
    const CMatrix v = std::polar(1.0, -alpha) * u;
    const CMatrix minus = identity - v;
    const CMatrix plus = identity + v;
    const CMatrix h = cplx(0.0, -1.0) * minus.transpose().partialPivLu().solve(plus.transpose()).transpose();
    if (!h.allFinite()) {
      alpha += 0.5;
      continue;
    }
    Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (h + h.adjoint()), Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw NumericalError("eigen-decomposition failed");
    double closest = two_pi;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double phi = 2.0 * std::atan2(1.0, es.eigenvalues()(i));
      closest = std::min({closest, phi, two_pi - phi});
      phases[i] = wrap_phase(phi + alpha);
    }
    std::sort(phases.begin(), phases.end());
    if (closest > 1e-3 || n < 2) return phases;
    // Retry in the middle of the widest gap.
    double widest = two_pi - phases.back() + phases.front();
    double centre = phases.back() + 0.5 * widest;
    for (Eigen::Index i = 0; i + 1 < n; ++i) {
      if (phases[i + 1] - phases[i] > widest) {
        widest = phases[i + 1] - phases[i];
        centre = phases[i] + 0.5 * widest;
      }
    }
    alpha = wrap_phase(centre);
  }
  throw NumericalError("no regular point for the Cayley transform");
}

// Sorted eigenphases of U(k).
struct PhaseSample {
  double k = 0.0;
  std::vector<double> phases;
  double phase_sum = 0.0;
};

class LevelSolver {
 public:
  LevelSolver(const Graph& g, const SolverOptions& options)
      : graph_(g),
        options_(options),
        factor_(scattering_factor(g)),
        n_(g.directed_count()),
        lengths_(n_),
        length_min_(g.length_min()),
        length_max_(g.length_max()),
        flux_rate_(2.0 * g.total_length()) {
    for (int i = 0; i < n_; ++i) lengths_(i) = g.lengths()[g.bond_of(i)];
  }

  double length_max() const { return length_max_; }

  // Interior grid points are nudged away from levels so that no phase sits
  // on the branch cut.
  PhaseSample sample(double k, bool may_shift, double step) const {
    for (int attempt = 0;; ++attempt) {
      PhaseSample s = sample_exact(k);
      if (!may_shift || attempt >= 8) return s;
      const double closest = std::min(s.phases.front(), two_pi - s.phases.back());
      if (closest > 1e-7) return s;
      k += 1e-3 * step;
    }
  }

  PhaseSample sample_exact(double k) const {
    CMatrix u;
    assemble_evolution_map(graph_, factor_, k, u);
    PhaseSample s;
    s.k = k;
    s.phases = unitary_phases(u);
    s.phase_sum = std::accumulate(s.phases.begin(), s.phases.end(), 0.0);
    return s;
  }

  struct StepResult {
    std::vector<double> roots;
    long refinements = 0;
  };

  StepResult solve_step(const PhaseSample& a, const PhaseSample& b, int depth) const {
    StepResult out;
    const long count = crossing_count(a, b);
    if (count == 0) return out;
    if (auto roots = locate(a, b, count)) {
      out.roots = std::move(*roots);
      return out;
    }
    if (depth >= options_.max_refinements)
      throw SolverError("level search did not converge", a.k, b.k);
    const PhaseSample mid = sample(0.5 * (a.k + b.k), true, b.k - a.k);
    StepResult left = solve_step(a, mid, depth + 1);
    StepResult right = solve_step(mid, b, depth + 1);
    out.roots = std::move(left.roots);
    out.roots.insert(out.roots.end(), right.roots.begin(), right.roots.end());
    out.refinements = 1 + left.refinements + right.refinements;
    return out;
  }

  // Number of phases that pass 2 pi in (a.k, b.k], from the exact total flux.
  long crossing_count(const PhaseSample& a, const PhaseSample& b) const {
    const double flux = flux_rate_ * (b.k - a.k);
    const double raw = (flux - (b.phase_sum - a.phase_sum)) / two_pi;
    const long count = std::lround(raw);
    if (std::abs(raw - static_cast<double>(count)) > 1e-6 || count < 0 || count > n_)
      throw SolverError("non-integer eigenphase winding " + std::to_string(raw), a.k, b.k);
    return count;
  }

 private:
  // Returns the `count` levels in (a.k, b.k] or nothing if they could not
  // be certified on this step.
  std::optional<std::vector<double>> locate(const PhaseSample& a, const PhaseSample& b,
                                            long count) const {
    const double dk = b.k - a.k;
    const int n = n_;
    // Phase motion of every sorted mode must respect the velocity bounds.
    const double slack = 1e-9;
    for (int i = 0; i < n; ++i) {
      const int j = static_cast<int>((i + count) % n);
      const double moved = b.phases[j] + (i >= n - count ? two_pi : 0.0) - a.phases[i];
      if (moved < length_min_ * dk * (1 - 1e-6) - slack ||
          moved > length_max_ * dk * (1 + 1e-6) + slack)
        return std::nullopt;
    }
    std::vector<double> roots;
    roots.reserve(count);
    double previous = a.k;
    int cluster = 1;
    for (long m = 0; m < count; ++m) {
      const int i = n - 1 - static_cast<int>(m);
      const int j = static_cast<int>(i + count - n);
      const double theta_a = a.phases[i];
      const double theta_b = b.phases[j] + two_pi;
      // Bracket from the velocity bounds, seeded by linear interpolation of
      // the matched phase.
      double lo = std::max(a.k + (two_pi - theta_a) / length_max_,
                           b.k - (theta_b - two_pi) / length_min_);
      double hi = std::min(a.k + (two_pi - theta_a) / length_min_,
                           b.k - (theta_b - two_pi) / length_max_);
      lo = std::max(lo, a.k);
      hi = std::min(hi, b.k);
      const double guess =
          std::clamp(a.k + dk * (two_pi - theta_a) / (theta_b - theta_a), lo, hi);
      const auto root = newton(guess, dk);
      if (!root) return std::nullopt;
      const double slack_k = 10 * options_.tolerance;
      if (*root < lo - slack_k || *root > hi + slack_k) return std::nullopt;
      if (m > 0 && *root <= previous + 0.5 * options_.tolerance) {
        // Same root again: accept only a certified degenerate level.
        if (std::abs(*root - previous) > 10 * options_.tolerance) return std::nullopt;
        if (multiplicity(previous) < ++cluster) return std::nullopt;
        roots.push_back(roots.back());
        continue;
      }
      cluster = 1;
      previous = *root;
      roots.push_back(std::clamp(*root, a.k, b.k));
    }
    return roots;
  }

  // Number of eigenvalues of U(k) at 1.
  int multiplicity(double k) const {
    const PhaseSample s = sample_exact(k);
    int m = 0;
    for (double th : s.phases) m += std::abs(std::polar(1.0, th) - 1.0) < 1e-6;
    return m;
  }

  // Newton iteration on the eigenphase nearest zero; the eigenvector is
  // refined by one shifted inverse-iteration step per Newton step.
  std::optional<double> newton(double k, double max_move) const {
    CMatrix u;
    const CMatrix identity = CMatrix::Identity(n_, n_);
    const double origin = k;
    CVector x = CVector::Constant(n_, cplx(1.0 / std::sqrt(double(n_)), 0.0));
    for (int it = 0; it < 40; ++it) {
      assemble_evolution_map(graph_, factor_, k, u);
      Eigen::PartialPivLU<CMatrix> lu(u - identity);
      CVector y = x;
      for (int sweep = 0; sweep < (it == 0 ? 3 : 1); ++sweep) {
        y = lu.solve(y);
        if (!y.allFinite() || y.norm() == 0.0) return k;
        y.normalize();
      }
      const cplx lambda = y.dot(u * y);
      const double theta = std::arg(lambda);
      const double velocity = y.cwiseAbs2().dot(lengths_);
      const double step = -theta / velocity;
      k += step;
      x = std::move(y);
      if (std::abs(k - origin) > max_move) return std::nullopt;
      if (std::abs(step) < 0.25 * options_.tolerance) {
        if (std::abs(theta) >= options_.tolerance * length_max_) return std::nullopt;
        return k;
      }
    }
    return std::nullopt;
  }

  const Graph& graph_;
  SolverOptions options_;
  CMatrix factor_;
  int n_;
  RVector lengths_;
  double length_min_;
  double length_max_;
  double flux_rate_;
};

}  // namespace

std::vector<double> eigenphases(const CMatrix& u) {
  if (u.rows() != u.cols()) throw NumericalError("evolution map is not square");
  if (unitarity_residual(u) > 1e-8) throw NumericalError("evolution map is not unitary");
  return unitary_phases(u);
}

std::vector<double> eigenphases(const EvolutionMap& u) { return eigenphases(u.matrix); }

SpectrumResult find_levels(const Graph& g, double k_lo, double k_hi, const SolverOptions& options) {
  if (!(k_lo >= 0.0) || !(k_lo < k_hi)) throw ConfigError("level window needs 0 <= k_lo < k_hi");
  if (!(options.tolerance > 0.0)) throw ConfigError("solver tolerance must be positive");
  LevelSolver solver(g, options);

  const double density = g.mean_density();
  double step = options.grid_step > 0.0 ? options.grid_step
                                        : options.levels_per_step / density;
  step = std::min(step, pi / (4.0 * solver.length_max()));
  const long steps = std::max(1L, static_cast<long>(std::ceil((k_hi - k_lo) / step)));
  step = (k_hi - k_lo) / static_cast<double>(steps);

  SpectrumResult result;
  result.k_lo = k_lo;
  result.k_hi = k_hi;
  result.mean_density = density;
  result.grid_step = step;
  result.grid_points = steps + 1;
  result.graph_hash = g.hash();

  const unsigned workers = std::max(1u, options.workers);
  const long chunk = 16L * workers;
  PhaseSample left = solver.sample(k_lo, false, step);
  for (long first = 0; first < steps; first += chunk) {
    const long last = std::min(steps, first + chunk);
    std::vector<PhaseSample> samples(last - first);
    parallel_for(samples.size(), workers, [&](std::size_t i) {
      const long index = first + 1 + static_cast<long>(i);
      const bool interior = index < steps;
      const double k = interior ? k_lo + step * static_cast<double>(index) : k_hi;
      samples[i] = solver.sample(k, interior, step);
    });
    std::vector<LevelSolver::StepResult> found(samples.size());
    parallel_for(samples.size(), workers, [&](std::size_t i) {
      const PhaseSample& a = i == 0 ? left : samples[i - 1];
      found[i] = solver.solve_step(a, samples[i], 0);
    });
    for (std::size_t i = 0; i < found.size(); ++i) {
      result.winding_count += solver.crossing_count(i == 0 ? left : samples[i - 1], samples[i]);
      result.refinements += found[i].refinements;
      result.levels.insert(result.levels.end(), found[i].roots.begin(), found[i].roots.end());
    }
    left = std::move(samples.back());
  }

  if (static_cast<long>(result.levels.size()) != result.winding_count)
    throw SolverError("level count does not match winding count", k_lo, k_hi);
  for (std::size_t i = 0; i + 1 < result.levels.size(); ++i) {
    if (result.levels[i + 1] < result.levels[i])
      throw SolverError("levels out of order", result.levels[i + 1], result.levels[i]);
    if (result.levels[i + 1] - result.levels[i] < 1e-10) result.near_degenerate.push_back(i);
  }
  return result;
}

UnfoldedSpectrum unfold(const SpectrumResult& spectrum) {
  UnfoldedSpectrum u;
  u.k_lo = spectrum.k_lo;
  u.k_hi = spectrum.k_hi;
  u.mean_density = spectrum.mean_density;
  u.source = spectrum.graph_hash;
  u.x.reserve(spectrum.levels.size());
  for (double k : spectrum.levels) u.x.push_back(k * spectrum.mean_density);
  return u;
}

void write_spectrum(std::ostream& os, const SpectrumResult& spectrum, Metadata meta) {
  meta.set("kind", std::string("spectrum"))
      .set("graph_hash", spectrum.graph_hash)
      .set("k_lo", spectrum.k_lo)
      .set("k_hi", spectrum.k_hi)
      .set("winding_count", static_cast<long long>(spectrum.winding_count))
      .set("mean_density", spectrum.mean_density)
      .set("grid_step", spectrum.grid_step)
      .set("refinements", static_cast<long long>(spectrum.refinements))
      .set("near_degenerate", spectrum.near_degenerate.size());
  TableWriter w(os, meta, {"k", "x"});
  for (double k : spectrum.levels) w.row(std::vector<double>{k, k * spectrum.mean_density});
}

SpectrumResult read_spectrum(std::istream& is) {
  const Table t = read_table(is);
  SpectrumResult s;
  s.levels = t.numeric("k");
  s.k_lo = std::stod(t.meta.get("k_lo"));
  s.k_hi = std::stod(t.meta.get("k_hi"));
  s.winding_count = std::stol(t.meta.get("winding_count"));
  s.mean_density = std::stod(t.meta.get("mean_density"));
  s.grid_step = std::stod(t.meta.get("grid_step"));
  s.graph_hash = t.meta.get("graph_hash");
  return s;
}

}  // namespace qgraph
