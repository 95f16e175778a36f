#include "meher/her/relabel.hpp"

#include <cmath>

#include "meher/errors.hpp"

namespace meher::her {

namespace {

void require_complete(const Episode& episode) {
  if (episode.transitions.empty()) throw UsageError("cannot relabel an empty episode");
  if (!episode.transitions.back().done) throw UsageError("cannot relabel an unfinished episode");
}

bool clear_of_trajectory(const Episode& episode, const env::Vec3& goal, double radius) {
  for (const Transition& t : episode.transitions) {
    if (!(env::distance(t.achieved_goal, goal) > radius)) return false;
  }
  return true;
}

bool inside_arena(const env::Vec3& p, double half_extent) {
  return std::abs(p.x) <= half_extent && std::abs(p.y) <= half_extent && std::abs(p.z) <= half_extent;
}

Episode with_failure_goal(const Episode& episode, const env::EnvConfig& env_config,
                          const env::Vec3& goal) {
  Episode out = episode;
  const std::size_t last = out.transitions.size() - 1;
  for (std::size_t i = 0; i <= last; ++i) {
    Transition& t = out.transitions[i];
    t.observation.set_goal(goal);
    t.next_observation.set_goal(goal);
    t.reward = env::compute_reward(env_config, t.achieved_goal, goal, i == last);
    t.done = i == last;
    t.provenance = Provenance::kRelabeledFailure;
    t.outcome = Outcome::kFailure;
  }
  out.outcome = Outcome::kFailure;
  return out;
}

RelabelAudit start_audit(const Episode& episode, std::string mode) {
  RelabelAudit a;
  a.episode_id = episode.id();
  a.mode = std::move(mode);
  a.original_goal = episode.goal();
  return a;
}

}  // namespace

std::string_view to_string(FailureMode m) {
  return m == FailureMode::kUniform ? "Uniform" : "Targeted";
}

void SRatioConfig::validate() const {
  if (!(target >= 0.0 && target <= 1.0)) throw ConfigError("s_ratio must lie in [0, 1]");
  if (!(targeted_multiplier > 1.0)) throw ConfigError("targeted_multiplier must exceed 1");
  if (max_rejection_attempts < 0) throw ConfigError("max_rejection_attempts must be non-negative");
}

nlohmann::json to_json(const RelabelAudit& a) {
  return {{"episode_id", a.episode_id},
          {"mode", a.mode},
          {"original_goal", env::to_json(a.original_goal)},
          {"new_goal", env::to_json(a.new_goal)},
          {"truncation_step", a.truncation_step},
          {"attempts", a.attempts},
          {"accepted", a.accepted}};
}

Episode relabel_final(const Episode& episode, const env::EnvConfig& env_config, RelabelAudit* audit) {
  require_complete(episode);
  const env::Vec3 goal = episode.terminal_achieved_goal();
  const std::size_t last = episode.transitions.size() - 1;

  Episode out;
  out.outcome = Outcome::kSuccess;
  for (std::size_t i = 0; i <= last; ++i) {
    Transition t = episode.transitions[i];
    t.observation.set_goal(goal);
    t.next_observation.set_goal(goal);
    t.reward = env::compute_reward(env_config, t.achieved_goal, goal, i == last);
    t.done = t.reward == 1.0;
    t.provenance = Provenance::kRelabeledSuccess;
    t.outcome = Outcome::kSuccess;
    out.transitions.push_back(t);
    if (t.done) break;
  }

  if (audit != nullptr) {
    *audit = start_audit(episode, "final");
    audit->new_goal = goal;
    audit->truncation_step = out.transitions.back().step_index;
  }
  return out;
}

RelabelResult relabel_failure_uniform(const Episode& episode, const env::EnvConfig& env_config,
                                      const SRatioConfig& config, std::mt19937_64& rng) {
  require_complete(episode);
  RelabelResult result;
  result.audit = start_audit(episode, "uniform");
  for (int attempt = 1; attempt <= config.max_rejection_attempts; ++attempt) {
    const env::Vec3 goal = env::random_point_in_cube(rng, env_config.arena_half_extent);
    result.audit.attempts = attempt;
    if (clear_of_trajectory(episode, goal, env_config.interception_radius)) {
      result.episode = with_failure_goal(episode, env_config, goal);
      result.audit.new_goal = goal;
      result.audit.truncation_step = episode.transitions.back().step_index;
      return result;
    }
  }
  result.audit.accepted = false;
  return result;
}

RelabelResult relabel_failure_targeted(const Episode& episode, const env::EnvConfig& env_config,
                                       const SRatioConfig& config, std::mt19937_64& rng) {
  require_complete(episode);
  RelabelResult result;
  result.audit = start_audit(episode, "targeted");
  const env::Vec3 anchor = episode.terminal_prey_position();
  const double offset = config.targeted_multiplier * env_config.interception_radius;
  for (int attempt = 1; attempt <= config.max_rejection_attempts; ++attempt) {
    const env::Vec3 goal = anchor + offset * env::random_unit_vector(rng);
    result.audit.attempts = attempt;
    if (inside_arena(goal, env_config.arena_half_extent) &&
        clear_of_trajectory(episode, goal, env_config.interception_radius)) {
      result.episode = with_failure_goal(episode, env_config, goal);
      result.audit.new_goal = goal;
      result.audit.truncation_step = episode.transitions.back().step_index;
      return result;
    }
  }
  result.audit.accepted = false;
  return result;
}

RelabelResult relabel_failure(const Episode& episode, const env::EnvConfig& env_config,
                              const SRatioConfig& config, std::mt19937_64& rng) {
  if (config.failure_mode == FailureMode::kTargeted) {
    return relabel_failure_targeted(episode, env_config, config, rng);
  }
  return relabel_failure_uniform(episode, env_config, config, rng);
}

}  // namespace meher::her
