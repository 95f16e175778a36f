#include "meher/ppo/trainer.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

#include "meher/diffcore/checkpoint.hpp"
#include "meher/errors.hpp"
#include "meher/ppo/gae.hpp"

namespace meher::ppo {

namespace {

using Clock = std::chrono::steady_clock;

constexpr std::uint64_t kInitStream = 0;
constexpr std::uint64_t kEnvStream = 1;
constexpr std::uint64_t kPolicyStream = 2;
constexpr std::uint64_t kShuffleStream = 3;
constexpr int kCheckpointVersion = 1;
constexpr std::size_t kSpotChecks = 8;
constexpr double kSpotCheckTolerance = 1e-9;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string rng_text(const std::mt19937_64& rng) {
  std::ostringstream out;
  out << rng;
  return out.str();
}

void rng_from_text(std::mt19937_64& rng, const std::string& text) {
  std::istringstream in(text);
  in >> rng;
  if (!in) throw ConfigError("corrupt random stream in checkpoint");
}

PolicyNet initial_policy(std::uint64_t seed) {
  std::mt19937_64 rng = derive_stream(seed, kInitStream);
  return PolicyNet::create(rng);
}

diff::AdamState fresh_optimizer(const PolicyNet& policy, const PPOConfig& config) {
  const std::vector<const diff::Tensor*> params = policy.parameters();
  return diff::AdamState::for_parameters(params, config.adam());
}

}  // namespace

nlohmann::json to_json(const IterationStats& s) {
  nlohmann::json j = {{"iteration", s.iteration},
                      {"step", s.step},
                      {"episodes_completed", s.episodes_completed},
                      {"episode_successes", s.episode_successes},
                      {"rolling_success_rate", s.rolling_success_rate},
                      {"mode", s.mode},
                      {"relabeled", s.relabeled},
                      {"buffer_size", s.buffer_size},
                      {"achieved_s_ratio", s.achieved_s_ratio},
                      {"infeasible", s.infeasible},
                      {"skipped_failure_relabels", s.skipped_failure_relabels},
                      {"env_seconds", s.env_seconds},
                      {"relabel_seconds", s.relabel_seconds},
                      {"annotate_seconds", s.annotate_seconds},
                      {"update_seconds", s.update_seconds},
                      {"updated", s.updated},
                      {"update", to_json(s.update)}};
  if (s.switch_event) j["switch_event"] = control::to_json(*s.switch_event);
  return j;
}

std::mt19937_64 derive_stream(std::uint64_t seed, std::uint64_t tag) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(tag), 0x6d656865u};
  return std::mt19937_64(seq);
}

double evaluate_policy(const PolicyNet& policy, env::EnvConfig env_config, int n_episodes, std::uint64_t seed) {
  if (n_episodes < 1) throw ConfigError("evaluation needs at least one episode");
  env::PredatorPreyEnv environment(env_config);
  int hits = 0;
  for (int i = 0; i < n_episodes; ++i) {
    env::Observation obs = i == 0 ? environment.reset(seed) : environment.reset();
    while (!environment.done()) obs = environment.step(deterministic_action(policy, obs)).observation;
    hits += environment.intercepted();
  }
  return static_cast<double>(hits) / n_episodes;
}

Trainer::Trainer(TrainerConfig config)
    : config_(config),
      policy_(initial_policy(config.seed)),
      optimizer_(fresh_optimizer(policy_, config.ppo)),
      env_(config.env),
      policy_rng_(derive_stream(config.seed, kPolicyStream)),
      shuffle_rng_(derive_stream(config.seed, kShuffleStream)),
      tracker_(config.success_window),
      controller_(config.mode) {
  config_.ppo.validate();
  std::mt19937_64 env_seed = derive_stream(config.seed, kEnvStream);
  obs_ = env_.reset(env_seed());
}

Trainer::Trainer(TrainerConfig config, const nlohmann::json& cp) : Trainer(config) {
  if (cp.value("format", "") != "meher.trainer" || cp.value("version", 0) != kCheckpointVersion) {
    throw ConfigError("not a trainer checkpoint");
  }
  policy_ = PolicyNet::from_named(diff::tensors_from_json(cp.at("policy")));
  optimizer_ = diff::adam_from_json(cp.at("optimizer"));
  env_.restore(cp.at("env"));
  obs_.values = cp.at("obs").get<std::array<double, env::kObsDim>>();
  rng_from_text(policy_rng_, cp.at("policy_rng").get<std::string>());
  rng_from_text(shuffle_rng_, cp.at("shuffle_rng").get<std::string>());
  tracker_ = control::RollingSuccessTracker::from_json(cp.at("tracker"));
  controller_.restore(cp.at("controller"));
  partial_.clear();
  for (const auto& t : cp.at("partial")) partial_.push_back(her::transition_from_json(t));
  step_ = cp.at("step").get<std::uint64_t>();
  iteration_ = cp.at("iteration").get<std::uint64_t>();
  policy_version_ = cp.at("policy_version").get<std::uint64_t>();
  next_episode_id_ = cp.at("next_episode_id").get<std::uint64_t>();
}

nlohmann::json Trainer::checkpoint() const {
  nlohmann::json partial = nlohmann::json::array();
  for (const her::Transition& t : partial_) partial.push_back(her::to_json(t));
  return {{"format", "meher.trainer"},
          {"version", kCheckpointVersion},
          {"policy", diff::tensors_to_json(policy_.to_named())},
          {"optimizer", diff::adam_to_json(optimizer_)},
          {"env", env_.snapshot()},
          {"obs", obs_.values},
          {"policy_rng", rng_text(policy_rng_)},
          {"shuffle_rng", rng_text(shuffle_rng_)},
          {"tracker", tracker_.to_json()},
          {"controller", controller_.to_json()},
          {"partial", std::move(partial)},
          {"step", step_},
          {"iteration", iteration_},
          {"policy_version", policy_version_},
          {"next_episode_id", next_episode_id_}};
}

std::vector<her::Episode> Trainer::collect_rollout(std::size_t n_steps) {
  std::vector<her::Episode> finished;
  for (std::size_t n = 0; n < n_steps; ++n) {
    const ActionSample a = sample_action(policy_, obs_, policy_rng_);
    const env::StepResult r = env_.step(a.clipped);
    her::Transition t;
    t.observation = obs_;
    t.action = a.raw;
    t.reward = r.reward;
    t.next_observation = r.observation;
    t.done = r.done;
    t.achieved_goal = r.achieved_goal;
    t.episode_id = next_episode_id_;
    t.step_index = static_cast<int>(partial_.size());
    t.log_prob = a.log_prob;
    t.value = a.value;
    t.policy_version = policy_version_;
    partial_.push_back(t);
    ++step_;
    if (r.done) {
      finished.push_back(her::Episode::from_transitions(std::move(partial_)));
      partial_.clear();
      tracker_.record(finished.back());
      ++next_episode_id_;
      obs_ = env_.reset();
    } else {
      obs_ = r.observation;
    }
  }
  return finished;
}

void Trainer::annotate(std::vector<her::Episode>& episodes) const {
  for (her::Episode& e : episodes) {
    recompute_for_relabeled(policy_, e.transitions, policy_version_);
    refresh_stale(policy_, e.transitions, policy_version_);
    compute_gae(e.transitions, config_.ppo.gamma, config_.ppo.lambda);
  }
}

void Trainer::verify_old_log_probs(const std::vector<her::Transition>& buffer) const {
  if (buffer.empty()) return;
  std::vector<const her::Transition*> picks;
  const std::size_t stride = std::max<std::size_t>(1, buffer.size() / kSpotChecks);
  for (std::size_t i = 0; i < buffer.size() && picks.size() < kSpotChecks; i += stride) picks.push_back(&buffer[i]);
  const BatchEvaluation e = evaluate_batch(policy_, picks);
  for (std::size_t i = 0; i < picks.size(); ++i) {
    if (!(std::abs(e.log_probs[i] - picks[i]->log_prob) <= kSpotCheckTolerance)) {
      throw UsageError("stored log-prob does not match the snapshot policy at its observation");
    }
  }
}

IterationStats Trainer::train_iteration() {
  IterationStats stats;
  stats.iteration = iteration_;

  const auto env_start = Clock::now();
  const std::vector<her::Episode> episodes = collect_rollout(config_.ppo.n_steps);
  stats.env_seconds = seconds_since(env_start);
  stats.episodes_completed = episodes.size();
  for (const her::Episode& e : episodes) stats.episode_successes += e.outcome == her::Outcome::kSuccess;
  stats.rolling_success_rate = tracker_.rate();

  control::BufferPlan plan = controller_.plan_buffer(
      tracker_, episodes, config_.env, shuffle_rng_,
      [this](std::vector<her::Episode>& pool) { annotate(pool); }, step_);
  stats.mode = plan.mode;
  stats.relabeled = plan.relabeled;
  stats.buffer_size = plan.transitions.size();
  stats.achieved_s_ratio = plan.achieved_ratio;
  stats.infeasible = plan.infeasible;
  stats.skipped_failure_relabels = plan.skipped_failure_relabels;
  stats.relabel_seconds = plan.relabel_seconds;
  stats.annotate_seconds = plan.annotate_seconds;
  stats.switch_event = plan.switch_event;
  if (config_.keep_audits) stats.audits = std::move(plan.audits);

  if (!plan.transitions.empty()) {
    const auto update_start = Clock::now();
    verify_old_log_probs(plan.transitions);
    stats.update = ppo_update(policy_, optimizer_, plan.transitions, config_.ppo, shuffle_rng_);
    stats.update_seconds = seconds_since(update_start);
    stats.updated = true;
    ++policy_version_;
  }
  stats.step = step_;
  ++iteration_;
  return stats;
}

}  // namespace meher::ppo
