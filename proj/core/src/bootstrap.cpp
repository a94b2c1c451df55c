#include "qgraph/bootstrap.hpp"

#include <cmath>
#include <limits>

namespace qgraph {

BootstrapEstimate block_bootstrap_mean(const std::vector<cplx>& values,
                                       const std::vector<std::size_t>& block_ids,
                                       std::size_t resamples, std::uint64_t seed) {
  if (values.size() != block_ids.size()) throw Error("one block id per value");
  BootstrapEstimate est;
  if (values.empty()) return est;
  std::vector<cplx> sums;
  std::vector<double> counts;
  std::size_t current = block_ids.front();
  sums.emplace_back(0.0, 0.0);
  counts.push_back(0.0);
  cplx total(0.0, 0.0);
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (block_ids[i] != current) {
      current = block_ids[i];
      sums.emplace_back(0.0, 0.0);
      counts.push_back(0.0);
    }
    sums.back() += values[i];
    counts.back() += 1.0;
    total += values[i];
  }
  est.mean = total / static_cast<double>(values.size());
  est.blocks = sums.size();
  if (sums.size() < 2 || resamples < 2) {
    est.std_error = std::numeric_limits<double>::infinity();
    return est;
  }
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, sums.size() - 1);
  double sum_re = 0.0, sum_im = 0.0, sq_re = 0.0, sq_im = 0.0;
  for (std::size_t r = 0; r < resamples; ++r) {
    cplx s(0.0, 0.0);
    double c = 0.0;
    for (std::size_t b = 0; b < sums.size(); ++b) {
      const std::size_t idx = pick(rng);
      s += sums[idx];
      c += counts[idx];
    }
    const cplx m = s / c;
    sum_re += m.real();
    sum_im += m.imag();
    sq_re += m.real() * m.real();
    sq_im += m.imag() * m.imag();
  }
  const double n = static_cast<double>(resamples);
  const double var_re = std::max(0.0, sq_re / n - (sum_re / n) * (sum_re / n));
  const double var_im = std::max(0.0, sq_im / n - (sum_im / n) * (sum_im / n));
  est.std_error = std::sqrt((var_re + var_im) * n / (n - 1.0));
  return est;
}

BootstrapEstimate block_bootstrap_mean(const std::vector<double>& values,
                                       const std::vector<std::size_t>& block_ids,
                                       std::size_t resamples, std::uint64_t seed) {
  std::vector<cplx> c(values.begin(), values.end());
  return block_bootstrap_mean(c, block_ids, resamples, seed);
}

BatchEstimate batch_mean(const std::vector<double>& batch_values) {
  BatchEstimate est;
  const double n = static_cast<double>(batch_values.size());
  if (batch_values.empty()) return est;
  double sum = 0.0;
  for (double v : batch_values) sum += v;
  est.mean = sum / n;
  if (batch_values.size() < 2) {
    est.std_error = std::numeric_limits<double>::infinity();
    return est;
  }
  double sq = 0.0;
  for (double v : batch_values) sq += (v - est.mean) * (v - est.mean);
  est.std_error = std::sqrt(sq / (n - 1.0) / n);
  return est;
}

}  // namespace qgraph
