#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "meher/her/rebalance.hpp"

namespace meher::control {

enum class AlgorithmKind { kPPO, kPPOHer, kMeherUniform, kMeherTargeted, kPPOHer2PPO };

std::string_view to_string(AlgorithmKind k);
AlgorithmKind parse_algorithm(std::string_view tag);

struct AlgorithmMode {
  AlgorithmKind kind = AlgorithmKind::kPPO;
  double s_ratio = 0.5;            // MEHER modes only
  double switch_threshold = 0.5;   // PPO_HER_2_PPO only
  double targeted_multiplier = 1.1;
  int max_rejection_attempts = 1000;

  bool is_meher() const {
    return kind == AlgorithmKind::kMeherUniform || kind == AlgorithmKind::kMeherTargeted;
  }
  her::SRatioConfig s_ratio_config() const;
  void validate() const;
};

/// Success rate over the last `window` real episodes.
class RollingSuccessTracker {
 public:
  explicit RollingSuccessTracker(std::size_t window = 100);

  /// Throws UsageError for relabeled episodes.
  void record(const her::Episode& episode);
  void record(her::Outcome outcome, her::Provenance provenance = her::Provenance::kReal);

  double rate() const;
  std::size_t window() const { return window_; }
  std::size_t filled() const { return ring_.size(); }
  std::size_t successes() const { return successes_; }
  std::uint64_t total_recorded() const { return total_; }

  nlohmann::json to_json() const;
  static RollingSuccessTracker from_json(const nlohmann::json& j);

 private:
  std::size_t window_;
  std::deque<bool> ring_;
  std::size_t successes_ = 0;
  std::uint64_t total_ = 0;
};

struct SwitchEvent {
  std::uint64_t step = 0;
  std::string old_mode;
  std::string new_mode;
  double tracker_rate = 0.0;
};

nlohmann::json to_json(const SwitchEvent& e);

struct BufferPlan {
  std::vector<her::Transition> transitions;
  std::string mode;  // effective mode tag for this update
  bool relabeled = false;
  bool rebalanced = false;
  double achieved_ratio = 0.0;  // success fraction of the planned buffer
  bool infeasible = false;
  std::size_t skipped_failure_relabels = 0;
  std::vector<her::RelabelAudit> audits;
  double relabel_seconds = 0.0;  // exactly zero when nothing was relabeled
  double annotate_seconds = 0.0;  // time spent in the pool hook
  std::optional<SwitchEvent> switch_event;
};

class ModeController {
 public:
  explicit ModeController(AlgorithmMode mode);

  const AlgorithmMode& mode() const { return mode_; }
  bool her_active() const;
  bool switched() const { return switched_; }
  std::string effective_mode() const;

  /// Builds the next update's transitions from the latest complete episodes.
  /// PPO_HER_2_PPO checks the tracker first and, once the rate reaches the
  /// threshold, drops to plain PPO for good. `hook` sees whole episodes
  /// (real and relabeled) before any filtering.
  BufferPlan plan_buffer(const RollingSuccessTracker& tracker, std::span<const her::Episode> episodes,
                         const env::EnvConfig& env_config, std::mt19937_64& rng,
                         const her::PoolHook& hook = {}, std::uint64_t step = 0);

  nlohmann::json to_json() const;
  void restore(const nlohmann::json& j);

 private:
  AlgorithmMode mode_;
  bool switched_ = false;
};

}  // namespace meher::control
