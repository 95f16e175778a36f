#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "meher/diffcore/tensor.hpp"

namespace meher::diff {

struct AdamConfig {
  double step_size = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  friend bool operator==(const AdamConfig&, const AdamConfig&) = default;
};

struct AdamState {
  AdamConfig config;
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
  std::uint64_t step = 0;

  /// Zeroed accumulators shaped like `params`.
  static AdamState for_parameters(std::span<const Tensor* const> params, AdamConfig config);

  friend bool operator==(const AdamState&, const AdamState&) = default;
};

/// One bias-corrected Adam update of `params` in place.
void adam_step(AdamState& state, std::span<Tensor* const> params, std::span<const Tensor> grads);

/// Scales `grads` so their joint L2 norm is at most `max_norm`. Returns the
/// norm before clipping.
double clip_global_norm(std::span<Tensor> grads, double max_norm);

}  // namespace meher::diff
