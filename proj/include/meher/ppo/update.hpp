#pragma once

#include <cstddef>
#include <random>
#include <span>

#include <nlohmann/json.hpp>

#include "meher/diffcore/adam.hpp"
#include "meher/her/transition.hpp"
#include "meher/ppo/policy.hpp"

namespace meher::ppo {

struct PPOConfig {
  double gamma = 0.99;
  double lambda = 0.95;
  double clip = 0.2;
  double learning_rate = 3e-4;
  std::size_t n_steps = 2048;
  std::size_t minibatch_size = 64;
  int epochs = 10;
  double value_coef = 0.5;
  double entropy_coef = 0.0;
  double max_grad_norm = 0.5;
  double adam_epsilon = 1e-5;

  void validate() const;
  diff::AdamConfig adam() const;
};

nlohmann::json to_json(const PPOConfig& c);
PPOConfig ppo_config_from_json(const nlohmann::json& j);

struct UpdateDiagnostics {
  double policy_loss = 0.0;  // averages over all minibatches
  double value_loss = 0.0;
  double entropy = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
  double grad_norm = 0.0;  // pre-clip, averaged
  double first_minibatch_max_ratio_deviation = 0.0;  // max |ratio - 1|, epoch 0 minibatch 0
  double first_surrogate = 0.0;  // mean unclipped surrogate of that minibatch
  std::size_t minibatches = 0;
  std::size_t transitions = 0;
};

nlohmann::json to_json(const UpdateDiagnostics& d);

/// Clipped-surrogate PPO over `buffer` (advantages and returns filled in).
/// A non-finite loss or gradient throws NumericalError before that
/// minibatch's step is applied.
UpdateDiagnostics ppo_update(PolicyNet& policy, diff::AdamState& optimizer,
                             std::span<const her::Transition> buffer, const PPOConfig& config,
                             std::mt19937_64& rng);

/// Entropy of the diagonal Gaussian in nats.
double gaussian_entropy(const diff::Tensor& log_std);

}  // namespace meher::ppo
