#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include <nlohmann/json.hpp>

#include "meher/control/mode.hpp"
#include "meher/diffcore/adam.hpp"
#include "meher/env/predator_prey.hpp"
#include "meher/ppo/policy.hpp"
#include "meher/ppo/update.hpp"

namespace meher::ppo {

struct TrainerConfig {
  env::EnvConfig env;
  PPOConfig ppo;
  control::AlgorithmMode mode;
  std::uint64_t seed = 0;
  std::size_t success_window = 100;
  bool keep_audits = false;
};

struct IterationStats {
  std::uint64_t iteration = 0;
  std::uint64_t step = 0;  // environment steps after this iteration
  std::size_t episodes_completed = 0;
  std::size_t episode_successes = 0;
  double rolling_success_rate = 0.0;
  std::string mode;
  bool relabeled = false;
  std::size_t buffer_size = 0;
  double achieved_s_ratio = 0.0;
  bool infeasible = false;
  std::size_t skipped_failure_relabels = 0;
  double env_seconds = 0.0;
  double relabel_seconds = 0.0;
  double annotate_seconds = 0.0;
  double update_seconds = 0.0;
  bool updated = false;
  UpdateDiagnostics update;
  std::optional<control::SwitchEvent> switch_event;
  std::vector<her::RelabelAudit> audits;
};

nlohmann::json to_json(const IterationStats& s);

/// Independent random stream `tag` derived from a run seed.
std::mt19937_64 derive_stream(std::uint64_t seed, std::uint64_t tag);

/// Fraction of `n_episodes` intercepted under the deterministic (mean,
/// clipped) policy. The first episode reseeds the environment with `seed`.
double evaluate_policy(const PolicyNet& policy, env::EnvConfig env_config, int n_episodes, std::uint64_t seed);

class Trainer {
 public:
  explicit Trainer(TrainerConfig config);
  /// Resumes from checkpoint(); the result continues bit-identically.
  Trainer(TrainerConfig config, const nlohmann::json& checkpoint);

  /// Gathers exactly n_steps live transitions and returns the episodes that
  /// finished. Unfinished steps carry over to the next call.
  std::vector<her::Episode> collect_rollout(std::size_t n_steps);

  /// Rollout, buffer planning, annotation and one PPO update.
  IterationStats train_iteration();

  double evaluate(int n_episodes, std::uint64_t seed) const {
    return evaluate_policy(policy_, config_.env, n_episodes, seed);
  }

  const TrainerConfig& config() const { return config_; }
  const PolicyNet& policy() const { return policy_; }
  PolicyNet& mutable_policy() { return policy_; }
  const control::RollingSuccessTracker& tracker() const { return tracker_; }
  const control::ModeController& controller() const { return controller_; }
  std::uint64_t step() const { return step_; }
  std::uint64_t iteration() const { return iteration_; }
  std::uint64_t policy_version() const { return policy_version_; }
  const std::vector<her::Transition>& partial_episode() const { return partial_; }

  /// Fills log-probs, values, advantages and returns on whole episodes using
  /// the current policy as the collection-time snapshot.
  void annotate(std::vector<her::Episode>& episodes) const;

  nlohmann::json checkpoint() const;

 private:
  void verify_old_log_probs(const std::vector<her::Transition>& buffer) const;

  TrainerConfig config_;
  PolicyNet policy_;
  diff::AdamState optimizer_;
  env::PredatorPreyEnv env_;
  env::Observation obs_;
  std::mt19937_64 policy_rng_;
  std::mt19937_64 shuffle_rng_;
  control::RollingSuccessTracker tracker_;
  control::ModeController controller_;
  std::vector<her::Transition> partial_;
  std::uint64_t step_ = 0;
  std::uint64_t iteration_ = 0;
  std::uint64_t policy_version_ = 0;
  std::uint64_t next_episode_id_ = 0;
};

}  // namespace meher::ppo
