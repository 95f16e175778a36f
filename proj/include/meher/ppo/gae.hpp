#pragma once

#include <span>
#include <vector>

#include "meher/her/transition.hpp"

namespace meher::ppo {

/// Fills advantage and ret over one contiguous stretch of an episode.
/// `bootstrap_value` is the critic's estimate after the last step; it is
/// ignored when the last step is done.
void compute_gae(std::span<her::Transition> steps, double gamma, double lambda, double bootstrap_value = 0.0);

}  // namespace meher::ppo
