#pragma once

#include <optional>
#include <random>
#include <string>

#include <nlohmann/json.hpp>

#include "meher/env/predator_prey.hpp"
#include "meher/her/transition.hpp"

namespace meher::her {

enum class FailureMode { kUniform, kTargeted };

std::string_view to_string(FailureMode m);

struct SRatioConfig {
  double target = 0.5;
  FailureMode failure_mode = FailureMode::kUniform;
  double targeted_multiplier = 1.1;
  int max_rejection_attempts = 1000;

  void validate() const;
};

/// One line of the optional relabel audit log.
struct RelabelAudit {
  std::uint64_t episode_id = 0;
  std::string mode;
  env::Vec3 original_goal;
  env::Vec3 new_goal;
  int truncation_step = -1;  // index of the last kept step
  int attempts = 0;
  bool accepted = true;
};

nlohmann::json to_json(const RelabelAudit& audit);

struct RelabelResult {
  std::optional<Episode> episode;  // empty when the rejection budget ran out
  RelabelAudit audit;
};

/// Final-HER: the goal becomes the predator's final position, held for the
/// whole episode, and the episode is cut at the first step that reaches it.
Episode relabel_final(const Episode& episode, const env::EnvConfig& env_config,
                      RelabelAudit* audit = nullptr);

/// Failure goal drawn uniformly over the arena, rejected while any achieved
/// goal of the trajectory lies within the interception radius of it.
RelabelResult relabel_failure_uniform(const Episode& episode, const env::EnvConfig& env_config,
                                      const SRatioConfig& config, std::mt19937_64& rng);

/// Failure goal placed at `targeted_multiplier` interception radii from the
/// prey's terminal position in a random direction, rejected while it leaves
/// the arena or lies within the interception radius of any achieved goal.
RelabelResult relabel_failure_targeted(const Episode& episode, const env::EnvConfig& env_config,
                                       const SRatioConfig& config, std::mt19937_64& rng);

/// Dispatches on config.failure_mode.
RelabelResult relabel_failure(const Episode& episode, const env::EnvConfig& env_config,
                              const SRatioConfig& config, std::mt19937_64& rng);

}  // namespace meher::her
