#pragma once

#include <cstdint>
#include <vector>

#include "qgraph/common.hpp"

namespace qgraph {

struct BootstrapEstimate {
  cplx mean{0.0, 0.0};
  double std_error = 0.0;
  std::size_t blocks = 0;
};

/// Mean of `values` with a block-bootstrap standard error. Samples sharing
/// a block id are resampled together; ids need not be contiguous. For
/// complex data the error is sqrt(var Re + var Im) of the resampled means.
BootstrapEstimate block_bootstrap_mean(const std::vector<cplx>& values,
                                       const std::vector<std::size_t>& block_ids,
                                       std::size_t resamples, std::uint64_t seed);

BootstrapEstimate block_bootstrap_mean(const std::vector<double>& values,
                                       const std::vector<std::size_t>& block_ids,
                                       std::size_t resamples, std::uint64_t seed);

/// Mean and standard error from independent batch means (one value per
/// batch, equal weight).
struct BatchEstimate {
  double mean = 0.0;
  double std_error = 0.0;
};
BatchEstimate batch_mean(const std::vector<double>& batch_values);

}  // namespace qgraph
