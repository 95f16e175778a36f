#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "meher/diffcore/checkpoint.hpp"
#include "meher/diffcore/mlp.hpp"
#include "meher/env/predator_prey.hpp"
#include "meher/her/transition.hpp"

namespace meher::ppo {

/// Gaussian actor with a state-independent log-std, plus a critic.
struct PolicyNet {
  diff::MlpParams actor;   // obs -> action mean
  diff::MlpParams critic;  // obs -> value
  diff::Tensor log_std;    // [1, action_dim]

  static PolicyNet create(std::mt19937_64& rng, std::span<const std::size_t> hidden = kDefaultHidden);

  /// Parameter order used by the optimizer and the checkpoint.
  std::vector<diff::Tensor*> parameters();
  std::vector<const diff::Tensor*> parameters() const;

  diff::NamedTensors to_named() const;
  static PolicyNet from_named(const diff::NamedTensors& named);

  friend bool operator==(const PolicyNet&, const PolicyNet&) = default;

  static constexpr std::size_t kDefaultHidden[2] = {64, 64};
};

struct ActionSample {
  env::Action raw{};
  env::Action clipped{};
  double log_prob = 0.0;
  double value = 0.0;
};

/// raw ~ N(mean(obs), exp(log_std)^2) per axis; log_prob is the density of
/// the raw action. Throws NumericalError if the nets produce non-finite output.
ActionSample sample_action(const PolicyNet& policy, const env::Observation& obs, std::mt19937_64& rng);

/// Mean action clipped to [-1, 1].
env::Action deterministic_action(const PolicyNet& policy, const env::Observation& obs);

/// Stacks observations (or actions) into a [n, width] tensor.
diff::Tensor stack_observations(std::span<const her::Transition* const> ts);
diff::Tensor stack_actions(std::span<const her::Transition* const> ts);

struct BatchEvaluation {
  std::vector<double> log_probs;
  std::vector<double> values;
};

/// Log-densities of the stored raw actions and critic values at the stored
/// observations, in one batched pass.
BatchEvaluation evaluate_batch(const PolicyNet& policy, std::span<const her::Transition* const> ts);

/// Rewrites log_prob and value of every relabeled transition using the
/// snapshot policy and stamps `version`. Real transitions are left alone.
void recompute_for_relabeled(const PolicyNet& snapshot, std::span<her::Transition> transitions,
                             std::uint64_t version);

/// Same, for every transition whose annotations predate `version` (episodes
/// that straddled an update).
void refresh_stale(const PolicyNet& snapshot, std::span<her::Transition> transitions,
                   std::uint64_t version);

}  // namespace meher::ppo
