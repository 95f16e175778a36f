#include "meher/her/rebalance.hpp"

#include <algorithm>
#include <cmath>

#include "meher/errors.hpp"

namespace meher::her {

namespace {

// Keeps a uniformly random subset of `count` indices.
void keep_random(std::vector<std::size_t>& indices, std::size_t count, std::mt19937_64& rng) {
  std::shuffle(indices.begin(), indices.end(), rng);
  indices.resize(std::min(count, indices.size()));
}

std::size_t rounded(double x) { return static_cast<std::size_t>(std::llround(x)); }

}  // namespace

std::vector<Episode> build_relabel_pool(std::span<const Episode> real_episodes,
                                        const SRatioConfig& config,
                                        const env::EnvConfig& env_config, std::mt19937_64& rng,
                                        RebalanceResult& report) {
  std::vector<Episode> pool(real_episodes.begin(), real_episodes.end());
  pool.reserve(3 * real_episodes.size());
  for (const Episode& e : real_episodes) {
    RelabelAudit audit;
    pool.push_back(relabel_final(e, env_config, &audit));
    report.audits.push_back(std::move(audit));
  }
  for (const Episode& e : real_episodes) {
    RelabelResult r = relabel_failure(e, env_config, config, rng);
    if (r.episode) {
      pool.push_back(std::move(*r.episode));
    } else {
      ++report.skipped_failure_relabels;
    }
    report.audits.push_back(std::move(r.audit));
  }
  return pool;
}

RebalanceResult filter_to_ratio(std::vector<Transition> pool, double target, std::mt19937_64& rng) {
  if (!(target >= 0.0 && target <= 1.0)) throw ConfigError("s_ratio must lie in [0, 1]");
  std::vector<std::size_t> successes;
  std::vector<std::size_t> failures;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    (pool[i].outcome == Outcome::kSuccess ? successes : failures).push_back(i);
  }
  const double s = static_cast<double>(successes.size());
  const double f = static_cast<double>(failures.size());

  if (target >= 1.0) {
    if (!successes.empty()) failures.clear();
  } else if (target <= 0.0) {
    if (!failures.empty()) successes.clear();
  } else if (successes.empty() || failures.empty()) {
    // Nothing to trade against; keep the whole pool and let the flag report it.
  } else if (s > target * (s + f)) {
    // Too many successes: keep every failure, trim successes to t/(1-t) of them.
    keep_random(successes, rounded(target * f / (1.0 - target)), rng);
  } else {
    keep_random(failures, rounded((1.0 - target) * s / target), rng);
  }

  RebalanceResult result;
  result.successes = successes.size();
  result.failures = failures.size();
  std::vector<std::size_t> kept;
  kept.reserve(successes.size() + failures.size());
  kept.insert(kept.end(), successes.begin(), successes.end());
  kept.insert(kept.end(), failures.begin(), failures.end());
  std::shuffle(kept.begin(), kept.end(), rng);
  result.transitions.reserve(kept.size());
  for (std::size_t i : kept) result.transitions.push_back(std::move(pool[i]));

  const double n = static_cast<double>(kept.size());
  result.achieved_ratio = n > 0.0 ? static_cast<double>(result.successes) / n : 0.0;
  result.infeasible = n == 0.0 || std::abs(result.achieved_ratio - target) > 1.0 / n;
  return result;
}

RebalanceResult rebalance_buffer(std::span<const Episode> real_episodes, const SRatioConfig& config,
                                 const env::EnvConfig& env_config, std::mt19937_64& rng,
                                 const PoolHook& hook) {
  if (real_episodes.empty()) throw UsageError("rebalance_buffer needs at least one episode");
  config.validate();
  RebalanceResult report;
  std::vector<Episode> pool = build_relabel_pool(real_episodes, config, env_config, rng, report);
  if (hook) hook(pool);
  RebalanceResult result = filter_to_ratio(flatten(pool), config.target, rng);
  result.skipped_failure_relabels = report.skipped_failure_relabels;
  result.audits = std::move(report.audits);
  return result;
}

}  // namespace meher::her
