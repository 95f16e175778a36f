#include "meher/control/mode.hpp"

#include <chrono>

#include "meher/errors.hpp"

namespace meher::control {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

}  // namespace

std::string_view to_string(AlgorithmKind k) {
  switch (k) {
    case AlgorithmKind::kPPO: return "PPO";
    case AlgorithmKind::kPPOHer: return "PPO_HER";
    case AlgorithmKind::kMeherUniform: return "MEHER_Uniform";
    case AlgorithmKind::kMeherTargeted: return "MEHER_Targeted";
    case AlgorithmKind::kPPOHer2PPO: return "PPO_HER_2_PPO";
  }
  return "?";
}

AlgorithmKind parse_algorithm(std::string_view tag) {
  for (AlgorithmKind k : {AlgorithmKind::kPPO, AlgorithmKind::kPPOHer, AlgorithmKind::kMeherUniform,
                          AlgorithmKind::kMeherTargeted, AlgorithmKind::kPPOHer2PPO}) {
    if (to_string(k) == tag) return k;
  }
  throw ConfigError("unknown algorithm '" + std::string(tag) + "'");
}

her::SRatioConfig AlgorithmMode::s_ratio_config() const {
  her::SRatioConfig c;
  c.target = s_ratio;
  c.failure_mode = kind == AlgorithmKind::kMeherTargeted ? her::FailureMode::kTargeted
                                                         : her::FailureMode::kUniform;
  c.targeted_multiplier = targeted_multiplier;
  c.max_rejection_attempts = max_rejection_attempts;
  return c;
}

void AlgorithmMode::validate() const {
  s_ratio_config().validate();
  if (!(switch_threshold > 0.0 && switch_threshold < 1.0)) {
    throw ConfigError("switch_threshold must lie in (0, 1)");
  }
}

RollingSuccessTracker::RollingSuccessTracker(std::size_t window) : window_(window) {
  if (window == 0) throw ConfigError("success window must be positive");
}

void RollingSuccessTracker::record(const her::Episode& episode) {
  record(episode.outcome, episode.provenance());
}

void RollingSuccessTracker::record(her::Outcome outcome, her::Provenance provenance) {
  if (provenance != her::Provenance::kReal) {
    throw UsageError("the success tracker only counts real episodes");
  }
  const bool success = outcome == her::Outcome::kSuccess;
  ring_.push_back(success);
  successes_ += success;
  if (ring_.size() > window_) {
    successes_ -= ring_.front();
    ring_.pop_front();
  }
  ++total_;
}

double RollingSuccessTracker::rate() const {
  if (ring_.empty()) return 0.0;
  return static_cast<double>(successes_) / static_cast<double>(ring_.size());
}

nlohmann::json RollingSuccessTracker::to_json() const {
  return {{"window", window_}, {"ring", std::vector<bool>(ring_.begin(), ring_.end())}, {"total", total_}};
}

RollingSuccessTracker RollingSuccessTracker::from_json(const nlohmann::json& j) {
  RollingSuccessTracker t(j.at("window").get<std::size_t>());
  for (bool b : j.at("ring").get<std::vector<bool>>()) t.record(b ? her::Outcome::kSuccess : her::Outcome::kFailure);
  t.total_ = j.at("total").get<std::uint64_t>();
  return t;
}

nlohmann::json to_json(const SwitchEvent& e) {
  return {{"event", "mode_switch"},
          {"step", e.step},
          {"old_mode", e.old_mode},
          {"new_mode", e.new_mode},
          {"tracker_rate", e.tracker_rate}};
}

ModeController::ModeController(AlgorithmMode mode) : mode_(mode) { mode_.validate(); }

bool ModeController::her_active() const {
  switch (mode_.kind) {
    case AlgorithmKind::kPPO: return false;
    case AlgorithmKind::kPPOHer2PPO: return !switched_;
    default: return true;
  }
}

std::string ModeController::effective_mode() const {
  if (mode_.kind == AlgorithmKind::kPPOHer2PPO) return switched_ ? "PPO" : "PPO_HER";
  return std::string(to_string(mode_.kind));
}

BufferPlan ModeController::plan_buffer(const RollingSuccessTracker& tracker,
                                       std::span<const her::Episode> episodes,
                                       const env::EnvConfig& env_config, std::mt19937_64& rng,
                                       const her::PoolHook& hook, std::uint64_t step) {
  BufferPlan plan;
  if (mode_.kind == AlgorithmKind::kPPOHer2PPO && !switched_ && tracker.rate() >= mode_.switch_threshold) {
    switched_ = true;
    plan.switch_event = SwitchEvent{step, "PPO_HER", "PPO", tracker.rate()};
  }
  plan.mode = effective_mode();
  if (episodes.empty()) return plan;

  if (mode_.is_meher()) {
    // The hook's own time is annotation work, not relabeling; take it back out.
    double hook_seconds = 0.0;
    const her::PoolHook timed_hook = [&](std::vector<her::Episode>& pool) {
      if (!hook) return;
      const auto hook_start = Clock::now();
      hook(pool);
      hook_seconds = seconds_since(hook_start);
    };
    const auto start = Clock::now();
    her::RebalanceResult r =
        her::rebalance_buffer(episodes, mode_.s_ratio_config(), env_config, rng, timed_hook);
    plan.relabel_seconds = seconds_since(start) - hook_seconds;
    plan.annotate_seconds = hook_seconds;
    plan.transitions = std::move(r.transitions);
    plan.relabeled = true;
    plan.rebalanced = true;
    plan.achieved_ratio = r.achieved_ratio;
    plan.infeasible = r.infeasible;
    plan.skipped_failure_relabels = r.skipped_failure_relabels;
    plan.audits = std::move(r.audits);
    return plan;
  }

  std::vector<her::Episode> pool(episodes.begin(), episodes.end());
  if (her_active()) {
    const auto start = Clock::now();
    for (const her::Episode& e : episodes) {
      her::RelabelAudit audit;
      pool.push_back(her::relabel_final(e, env_config, &audit));
      plan.audits.push_back(std::move(audit));
    }
    plan.relabel_seconds = seconds_since(start);
    plan.relabeled = true;
  }
  if (hook) {
    const auto hook_start = Clock::now();
    hook(pool);
    plan.annotate_seconds = seconds_since(hook_start);
  }
  plan.transitions = her::flatten(pool);
  std::size_t successes = 0;
  for (const her::Transition& t : plan.transitions) successes += t.outcome == her::Outcome::kSuccess;
  plan.achieved_ratio = static_cast<double>(successes) / static_cast<double>(plan.transitions.size());
  return plan;
}

nlohmann::json ModeController::to_json() const { return {{"switched", switched_}}; }

void ModeController::restore(const nlohmann::json& j) { switched_ = j.at("switched").get<bool>(); }

}  // namespace meher::control
