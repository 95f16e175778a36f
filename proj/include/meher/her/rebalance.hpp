#pragma once

#include <functional>
#include <random>
#include <span>
#include <vector>

#include "meher/her/relabel.hpp"
#include "meher/her/transition.hpp"

namespace meher::her {

struct RebalanceResult {
  std::vector<Transition> transitions;  // shuffled
  std::size_t successes = 0;
  std::size_t failures = 0;
  double achieved_ratio = 0.0;
  bool infeasible = false;
  std::size_t skipped_failure_relabels = 0;
  std::vector<RelabelAudit> audits;

  std::size_t size() const { return transitions.size(); }
};

/// Called on the pooled episodes before any transition is removed. The
/// trainer uses it to refresh log-probs and values and run GAE on whole
/// episodes.
using PoolHook = std::function<void(std::vector<Episode>&)>;

/// Real episodes, plus a final-HER copy of each, plus a failure copy of each
/// (skipped when the rejection budget runs out).
std::vector<Episode> build_relabel_pool(std::span<const Episode> real_episodes,
                                        const SRatioConfig& config,
                                        const env::EnvConfig& env_config, std::mt19937_64& rng,
                                        RebalanceResult& report);

/// Randomly drops transitions from the over-represented class until the
/// success fraction is within 1/N of `target`, then shuffles. Infeasible
/// targets keep everything and set the flag.
RebalanceResult filter_to_ratio(std::vector<Transition> pool, double target, std::mt19937_64& rng);

/// build_relabel_pool -> hook -> filter_to_ratio.
RebalanceResult rebalance_buffer(std::span<const Episode> real_episodes, const SRatioConfig& config,
                                 const env::EnvConfig& env_config, std::mt19937_64& rng,
                                 const PoolHook& hook = {});

}  // namespace meher::her
