#pragma once

#include <cmath>
#include <cstddef>
#include <span>

namespace meher::diff {

inline constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 * log(2 pi)

/// Log density of `x` under a diagonal Gaussian with the given mean and
/// per-dimension log standard deviation. Shared by the tape op and the
/// tape-free action sampler so both produce bit-identical values.
inline double gaussian_log_density(std::span<const double> mean, std::span<const double> log_std,
                                   std::span<const double> x) {
  double lp = 0.0;
  for (std::size_t j = 0; j < mean.size(); ++j) {
    const double z = (x[j] - mean[j]) * std::exp(-log_std[j]);
    lp += -0.5 * z * z - log_std[j] - kHalfLog2Pi;
  }
  return lp;
}

}  // namespace meher::diff
