#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "meher/env/predator_prey.hpp"

namespace meher::her {

enum class Provenance { kReal, kRelabeledSuccess, kRelabeledFailure };
enum class Outcome { kSuccess, kFailure };

std::string_view to_string(Provenance p);
std::string_view to_string(Outcome o);

struct Transition {
  env::Observation observation;
  env::Action action{};  // raw policy sample, before clipping
  double reward = 0.0;
  env::Observation next_observation;
  bool done = false;
  env::Vec3 achieved_goal;
  std::uint64_t episode_id = 0;
  int step_index = 0;
  Provenance provenance = Provenance::kReal;
  Outcome outcome = Outcome::kFailure;  // parent episode's outcome

  // Learner annotations. log_prob and value belong to the policy snapshot
  // `policy_version`; relabeling leaves them stale until recomputed.
  double log_prob = 0.0;
  double value = 0.0;
  double advantage = 0.0;
  double ret = 0.0;
  std::uint64_t policy_version = 0;
};

/// A complete episode: contiguous steps, done only on the last one.
struct Episode {
  std::vector<Transition> transitions;
  Outcome outcome = Outcome::kFailure;

  /// Builds an episode from finished transitions, labelling the outcome from
  /// the last reward and stamping it on every transition.
  static Episode from_transitions(std::vector<Transition> transitions);

  std::uint64_t id() const { return transitions.front().episode_id; }
  Provenance provenance() const { return transitions.front().provenance; }
  std::size_t size() const { return transitions.size(); }
  env::Vec3 terminal_achieved_goal() const { return transitions.back().achieved_goal; }
  env::Vec3 terminal_prey_position() const { return transitions.back().next_observation.prey_pos(); }
  env::Vec3 goal() const { return transitions.front().observation.goal(); }
  double episode_return() const;

  /// Throws UsageError unless non-empty, contiguous, done exactly at the end,
  /// and labelled consistently with the last reward.
  void validate() const;
};

std::vector<Transition> flatten(std::span<const Episode> episodes);

// Exact round trip, used by trainer checkpoints.
nlohmann::json to_json(const Transition& t);
Transition transition_from_json(const nlohmann::json& j);

}  // namespace meher::her
