#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "episode_fixtures.hpp"
#include "meher/errors.hpp"
#include "meher/ppo/gae.hpp"
#include "meher/ppo/policy.hpp"
#include "meher/ppo/trainer.hpp"
#include "meher/ppo/update.hpp"

namespace meher::ppo {
namespace {

using diff::Tensor;

// Closed-form diagonal Gaussian log density, written independently of the
// library helper.
double oracle_log_density(const std::array<double, 3>& mean, const Tensor& log_std,
                          const std::array<double, 3>& x) {
  double lp = 0.0;
  for (int j = 0; j < 3; ++j) {
    const double sigma = std::exp(log_std[j]);
    const double d = x[j] - mean[j];
    lp += -d * d / (2.0 * sigma * sigma) - std::log(sigma * std::sqrt(2.0 * std::numbers::pi));
  }
  return lp;
}

std::array<double, 3> mean_at(const PolicyNet& p, const env::Observation& obs) {
  const Tensor m = diff::mlp_forward(p.actor, Tensor::row(obs.span()));
  return {m[0], m[1], m[2]};
}

PolicyNet random_policy(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  PolicyNet p = PolicyNet::create(rng);
  // Make the actor head large enough that goals matter.
  for (double& w : p.actor.layers.back().weight.data()) w *= 100.0;
  std::normal_distribution<double> n(0.0, 0.3);
  for (double& s : p.log_std.data()) s = n(rng);
  return p;
}

PolicyNet zero_actor_policy() {
  std::mt19937_64 rng(1);
  PolicyNet p = PolicyNet::create(rng);
  for (auto& l : p.actor.layers) {
    l.weight.fill(0.0);
    l.bias.fill(0.0);
  }
  return p;
}

env::Observation random_observation(std::mt19937_64& rng) {
  env::Observation o;
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (double& v : o.values) v = u(rng);
  return o;
}

// Linear pursuit controller: mean = gain * (prey - predator).
PolicyNet pursuit_policy(double gain) {
  PolicyNet p = zero_actor_policy();
  diff::DenseLayer layer{Tensor({env::kObsDim, env::kActionDim}, 0.0), Tensor({1, env::kActionDim}, 0.0)};
  for (std::size_t j = 0; j < 3; ++j) {
    layer.weight[j * 3 + j] = -gain;
    layer.weight[(6 + j) * 3 + j] = gain;
  }
  p.actor.layers = {layer};
  return p;
}

PPOConfig small_config() {
  PPOConfig c;
  c.n_steps = 256;
  c.minibatch_size = 64;
  c.epochs = 2;
  return c;
}

TEST(PolicyNet, ShapesAndInitialStd) {
  std::mt19937_64 rng(2);
  const PolicyNet p = PolicyNet::create(rng);
  EXPECT_EQ(p.actor.input_width(), env::kObsDim);
  EXPECT_EQ(p.actor.output_width(), env::kActionDim);
  EXPECT_EQ(p.critic.output_width(), 1u);
  EXPECT_EQ(p.actor.layers.size(), 3u);
  for (double s : p.log_std.data()) EXPECT_EQ(s, 0.0);
  EXPECT_EQ(p.parameters().size(), 13u);
}

TEST(PolicyNet, NamedRoundTrip) {
  const PolicyNet p = random_policy(3);
  EXPECT_EQ(PolicyNet::from_named(p.to_named()), p);
  EXPECT_EQ(PolicyNet::from_named(diff::tensors_from_json(diff::tensors_to_json(p.to_named()))), p);
}

TEST(SampleAction, StandardNormalAtZeroHasClosedFormDensity) {
  const PolicyNet p = zero_actor_policy();
  her::Transition t;
  t.action = {0.0, 0.0, 0.0};
  const her::Transition* view[] = {&t};
  const BatchEvaluation e = evaluate_batch(p, view);
  EXPECT_NEAR(e.log_probs[0], -2.7568155996140185, 1e-12);
  EXPECT_NEAR(e.log_probs[0], 3.0 * -0.5 * std::log(2.0 * std::numbers::pi), 1e-12);
}

TEST(SampleAction, TinySigmaCollapsesToMean) {
  PolicyNet p = zero_actor_policy();
  p.log_std.fill(-12.0);
  std::mt19937_64 rng(4);
  const ActionSample s = sample_action(p, env::Observation{}, rng);
  const double sigma = std::exp(-12.0);
  double z2 = 0.0;
  for (int j = 0; j < 3; ++j) {
    EXPECT_LT(std::abs(s.raw[j]), 1e-3);
    z2 += (s.raw[j] / sigma) * (s.raw[j] / sigma);
  }
  const double constant = 3.0 * -0.5 * std::log(2.0 * std::numbers::pi * sigma * sigma);
  EXPECT_NEAR(s.log_prob, constant - 0.5 * z2, 1e-9);
  EXPECT_LE(s.log_prob, constant);
}

TEST(SampleAction, UnitVarianceMonteCarlo) {
  const PolicyNet p = zero_actor_policy();
  std::mt19937_64 rng(5);
  const int n = 10000;
  std::array<double, 3> s1{}, s2{};
  for (int i = 0; i < n; ++i) {
    const ActionSample a = sample_action(p, env::Observation{}, rng);
    for (int j = 0; j < 3; ++j) {
      s1[j] += a.raw[j];
      s2[j] += a.raw[j] * a.raw[j];
      EXPECT_EQ(a.clipped[j], std::clamp(a.raw[j], -1.0, 1.0));
    }
  }
  for (int j = 0; j < 3; ++j) {
    const double mean = s1[j] / n;
    const double var = (s2[j] - n * mean * mean) / (n - 1);
    EXPECT_GE(var, 0.94);
    EXPECT_LE(var, 1.06);
  }
}

TEST(SampleAction, LogProbMatchesOracleAndBatch) {
  const PolicyNet p = random_policy(6);
  std::mt19937_64 rng(6);
  for (int i = 0; i < 50; ++i) {
    her::Transition t;
    t.observation = random_observation(rng);
    const ActionSample a = sample_action(p, t.observation, rng);
    t.action = a.raw;
    EXPECT_NEAR(a.log_prob, oracle_log_density(mean_at(p, t.observation), p.log_std, a.raw), 1e-10);
    const her::Transition* view[] = {&t};
    const BatchEvaluation e = evaluate_batch(p, view);
    EXPECT_EQ(e.log_probs[0], a.log_prob);
    EXPECT_EQ(e.values[0], a.value);
  }
}

TEST(SampleAction, NonFiniteOutputIsFatal) {
  PolicyNet p = random_policy(7);
  p.actor.layers[0].weight[0] = std::nan("");
  std::mt19937_64 rng(7);
  env::Observation o;
  o.values[0] = 1.0;
  EXPECT_THROW(sample_action(p, o, rng), NumericalError);
}

TEST(Recompute, MatchesDensityOracleOnRelabeledOnly) {
  const PolicyNet p = random_policy(8);
  std::mt19937_64 rng(8);
  std::vector<her::Transition> ts(100);
  std::normal_distribution<double> n(0.0, 1.0);
  for (std::size_t i = 0; i < ts.size(); ++i) {
    ts[i].observation = random_observation(rng);
    ts[i].action = {n(rng), n(rng), n(rng)};
    ts[i].log_prob = -99.0;
    ts[i].value = -99.0;
    ts[i].provenance = i % 3 == 0 ? her::Provenance::kReal
                                  : (i % 3 == 1 ? her::Provenance::kRelabeledSuccess
                                                : her::Provenance::kRelabeledFailure);
  }
  recompute_for_relabeled(p, ts, 7);
  for (const her::Transition& t : ts) {
    if (t.provenance == her::Provenance::kReal) {
      EXPECT_EQ(t.log_prob, -99.0);
      EXPECT_EQ(t.value, -99.0);
      EXPECT_EQ(t.policy_version, 0u);
    } else {
      EXPECT_NEAR(t.log_prob, oracle_log_density(mean_at(p, t.observation), p.log_std, t.action), 1e-10);
      EXPECT_EQ(t.value, diff::mlp_forward(p.critic, Tensor::row(t.observation.span()))[0]);
      EXPECT_EQ(t.policy_version, 7u);
    }
  }
}

TEST(Recompute, ZeroActorIgnoresObservation) {
  const PolicyNet p = zero_actor_policy();
  std::mt19937_64 rng(9);
  std::vector<her::Transition> ts(20);
  for (auto& t : ts) {
    t.observation = random_observation(rng);
    t.action = {0.3, -0.2, 0.9};
    t.provenance = her::Provenance::kRelabeledFailure;
  }
  recompute_for_relabeled(p, ts, 1);
  for (const auto& t : ts) EXPECT_EQ(t.log_prob, ts[0].log_prob);
}

TEST(Recompute, NearbyGoalMovesLogProbWithinLipschitzBound) {
  const PolicyNet p = random_policy(10);
  // tanh is 1-Lipschitz, so the product of Frobenius norms bounds the actor.
  double lipschitz = 1.0;
  for (const auto& l : p.actor.layers) {
    double f = 0.0;
    for (double w : l.weight.data()) f += w * w;
    lipschitz *= std::sqrt(f);
  }
  double inv_var = 0.0;
  for (double s : p.log_std.data()) inv_var = std::max(inv_var, std::exp(-2.0 * s));

  std::mt19937_64 rng(10);
  std::mt19937_64 gen(11);
  for (int i = 0; i < 30; ++i) {
    const her::Episode e = testing::random_episode(env::EnvConfig{}, i, gen, true);
    if (e.outcome != her::Outcome::kSuccess) continue;
    const her::Episode r = her::relabel_final(e, env::EnvConfig{});
    std::vector<her::Transition> ts = r.transitions;
    recompute_for_relabeled(p, ts, 1);
    for (std::size_t k = 0; k < ts.size(); ++k) {
      const her::Transition& orig = e.transitions[k];
      const double goal_shift = env::distance(orig.observation.goal(), ts[k].observation.goal());
      const double dmu = lipschitz * goal_shift;
      const auto mu = mean_at(p, orig.observation);
      double dist = 0.0;
      for (int j = 0; j < 3; ++j) dist += (orig.action[j] - mu[j]) * (orig.action[j] - mu[j]);
      const double bound = inv_var * (std::sqrt(dist) * dmu + 0.5 * dmu * dmu);
      const double original_lp = oracle_log_density(mu, p.log_std, orig.action);
      EXPECT_LE(std::abs(ts[k].log_prob - original_lp), bound + 1e-12);
    }
  }
}

std::vector<her::Transition> random_steps(std::mt19937_64& rng, std::size_t n, bool done) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<her::Transition> ts(n);
  for (auto& t : ts) {
    t.reward = g(rng);
    t.value = g(rng);
  }
  if (done && n > 0) ts.back().done = true;
  return ts;
}

TEST(Gae, MatchesBruteForceDoubleSum) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng() % 20;
    const bool done = trial % 2 == 0;
    std::vector<her::Transition> ts = random_steps(rng, n, done);
    const double gamma = 0.5 + 0.5 * u(rng);
    const double lambda = u(rng);
    const double bootstrap = u(rng) * 4.0 - 2.0;
    compute_gae(ts, gamma, lambda, bootstrap);
    std::vector<double> delta(n);
    for (std::size_t t = 0; t < n; ++t) {
      const double next = t + 1 < n ? ts[t + 1].value : (done ? 0.0 : bootstrap);
      delta[t] = ts[t].reward + gamma * next - ts[t].value;
    }
    for (std::size_t t = 0; t < n; ++t) {
      double a = 0.0;
      for (std::size_t k = 0; t + k < n; ++k) a += std::pow(gamma * lambda, static_cast<double>(k)) * delta[t + k];
      EXPECT_NEAR(ts[t].advantage, a, 1e-10);
      EXPECT_NEAR(ts[t].ret, a + ts[t].value, 1e-10);
    }
  }
}

TEST(Gae, LambdaOneZeroValuesIsDiscountedRewardToGo) {
  std::mt19937_64 rng(13);
  std::vector<her::Transition> ts = random_steps(rng, 9, true);
  for (auto& t : ts) t.value = 0.0;
  compute_gae(ts, 0.9, 1.0);
  for (std::size_t t = 0; t < ts.size(); ++t) {
    double g = 0.0;
    for (std::size_t k = t; k < ts.size(); ++k) g += std::pow(0.9, static_cast<double>(k - t)) * ts[k].reward;
    EXPECT_NEAR(ts[t].advantage, g, 1e-12);
  }
}

TEST(Gae, LambdaZeroIsOneStepTd) {
  std::mt19937_64 rng(14);
  std::vector<her::Transition> ts = random_steps(rng, 7, false);
  compute_gae(ts, 0.95, 0.0, 0.7);
  for (std::size_t t = 0; t < ts.size(); ++t) {
    const double next = t + 1 < ts.size() ? ts[t + 1].value : 0.7;
    EXPECT_EQ(ts[t].advantage, ts[t].reward + 0.95 * next - ts[t].value);
  }
}

TEST(Gae, TwoStepSuccessDiscountsToOnePointNine) {
  std::vector<her::Transition> ts(2);
  ts[1].reward = 1.0;
  ts[1].done = true;
  compute_gae(ts, 0.9, 1.0);
  EXPECT_DOUBLE_EQ(ts[1].ret, 1.0);
  EXPECT_DOUBLE_EQ(ts[0].ret, 0.9);
}

std::vector<her::Transition> annotated_buffer(const PolicyNet& p, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<her::Transition> ts(n);
  for (auto& t : ts) {
    t.observation = random_observation(rng);
    const ActionSample a = sample_action(p, t.observation, rng);
    t.action = a.raw;
    t.log_prob = a.log_prob;
    t.value = a.value;
    t.advantage = g(rng);
    t.ret = g(rng);
  }
  return ts;
}

TEST(PpoUpdate, ZeroAdvantageLeavesActorAlone) {
  PolicyNet p = random_policy(15);
  const PolicyNet before = p;
  std::vector<her::Transition> ts = annotated_buffer(p, 100, 15);
  for (auto& t : ts) t.advantage = 0.0;
  PPOConfig c = small_config();
  diff::AdamState opt = diff::AdamState::for_parameters(std::as_const(p).parameters(), c.adam());
  std::mt19937_64 rng(1);
  ppo_update(p, opt, ts, c, rng);
  EXPECT_EQ(p.actor, before.actor);
  EXPECT_EQ(p.log_std, before.log_std);
  EXPECT_NE(p.critic, before.critic);
}

TEST(PpoUpdate, FreshBufferHasUnitRatioAndPlainSurrogate) {
  PolicyNet p = random_policy(16);
  std::vector<her::Transition> ts = annotated_buffer(p, 64, 16);
  PPOConfig c = small_config();
  c.epochs = 1;
  diff::AdamState opt = diff::AdamState::for_parameters(std::as_const(p).parameters(), c.adam());
  std::mt19937_64 rng(2);
  const UpdateDiagnostics d = ppo_update(p, opt, ts, c, rng);
  EXPECT_LE(d.first_minibatch_max_ratio_deviation, 1e-8);
  // Normalized advantages of a full minibatch average to zero.
  EXPECT_NEAR(d.first_surrogate, 0.0, 1e-12);
  EXPECT_EQ(d.minibatches, 1u);
}

TEST(PpoUpdate, PositiveAdvantageRaisesDensity) {
  PolicyNet p = random_policy(17);
  std::vector<her::Transition> ts = annotated_buffer(p, 1, 17);
  ts[0].advantage = 1.0;
  const her::Transition* view[] = {&ts[0]};
  const double before = evaluate_batch(p, view).log_probs[0];
  PPOConfig c = small_config();
  c.epochs = 1;
  c.minibatch_size = 1;
  c.learning_rate = 1e-3;
  diff::AdamState opt = diff::AdamState::for_parameters(std::as_const(p).parameters(), c.adam());
  std::mt19937_64 rng(3);
  ppo_update(p, opt, ts, c, rng);
  EXPECT_GT(evaluate_batch(p, view).log_probs[0], before);
}

TEST(PpoUpdate, DeterministicGivenSeed) {
  const PolicyNet start = random_policy(18);
  const std::vector<her::Transition> ts = annotated_buffer(start, 150, 18);
  PolicyNet a = start;
  PolicyNet b = start;
  const PPOConfig c = small_config();
  diff::AdamState oa = diff::AdamState::for_parameters(std::as_const(a).parameters(), c.adam());
  diff::AdamState ob = oa;
  std::mt19937_64 ra(4);
  std::mt19937_64 rb(4);
  ppo_update(a, oa, ts, c, ra);
  ppo_update(b, ob, ts, c, rb);
  EXPECT_EQ(a, b);
  EXPECT_EQ(oa, ob);
}

TEST(PpoUpdate, NonFiniteReturnAbortsBeforeStep) {
  PolicyNet p = random_policy(19);
  const PolicyNet before = p;
  std::vector<her::Transition> ts = annotated_buffer(p, 10, 19);
  ts[3].ret = std::nan("");
  PPOConfig c = small_config();
  diff::AdamState opt = diff::AdamState::for_parameters(std::as_const(p).parameters(), c.adam());
  std::mt19937_64 rng(5);
  EXPECT_THROW(ppo_update(p, opt, ts, c, rng), NumericalError);
  EXPECT_EQ(p, before);
}

TEST(PpoConfig, ValidationAndJson) {
  PPOConfig c;
  c.gamma = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.lambda = 1.5;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.clip = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.n_steps = 512;
  c.gamma = 0.9;
  const PPOConfig back = ppo_config_from_json(to_json(c));
  EXPECT_EQ(back.n_steps, 512u);
  EXPECT_EQ(back.gamma, 0.9);
  EXPECT_THROW(ppo_config_from_json({{"gama", 0.9}}), ConfigError);
}

TEST(Evaluate, ScriptedPursuitCatchesAttractingPrey) {
  env::EnvConfig cfg;
  cfg.prey_policy = env::PreyPolicy::kAttract;
  EXPECT_EQ(evaluate_policy(pursuit_policy(20.0), cfg, 10, 1), 1.0);
  cfg.prey_policy = env::PreyPolicy::kStraightAway;
  EXPECT_EQ(evaluate_policy(pursuit_policy(20.0), cfg, 3, 1), 1.0);
}

TEST(Evaluate, RandomPolicyRarelyCatchesFleeingPrey) {
  env::EnvConfig cfg;
  cfg.prey_policy = env::PreyPolicy::kStraightAway;
  cfg.spawner = env::Spawner::kSpawnRandom;
  std::mt19937_64 rng(20);
  const PolicyNet p = PolicyNet::create(rng);
  EXPECT_LE(evaluate_policy(p, cfg, 100, 2), 0.1);
}

TEST(Evaluate, MotionlessPredatorNeverCatchesFleeingPrey) {
  env::EnvConfig cfg;
  cfg.prey_policy = env::PreyPolicy::kStraightAway;
  PolicyNet p = zero_actor_policy();
  p.log_std.fill(-50.0);
  EXPECT_EQ(evaluate_policy(p, cfg, 5, 3), 0.0);
  EXPECT_THROW(evaluate_policy(p, cfg, 0, 3), ConfigError);
}

TrainerConfig small_trainer(control::AlgorithmKind kind, std::uint64_t seed = 1) {
  TrainerConfig c;
  c.ppo = small_config();
  c.mode.kind = kind;
  c.mode.s_ratio = 0.5;
  c.seed = seed;
  return c;
}

TEST(Trainer, ShortRolloutAccounting) {
  TrainerConfig c = small_trainer(control::AlgorithmKind::kPPO);
  c.env.timeout = 4;
  Trainer t(c);
  const std::vector<her::Episode> es = t.collect_rollout(8);
  EXPECT_GE(es.size(), 1u);
  EXPECT_EQ(t.step(), 8u);
  EXPECT_EQ(t.tracker().total_recorded(), es.size());
  std::size_t steps = t.partial_episode().size();
  for (const auto& e : es) {
    e.validate();
    steps += e.size();
    for (const auto& tr : e.transitions) {
      EXPECT_EQ(tr.observation.goal(), tr.observation.prey_pos());
      EXPECT_EQ(tr.next_observation.goal(), tr.next_observation.prey_pos());
      EXPECT_EQ(tr.provenance, her::Provenance::kReal);
    }
  }
  EXPECT_EQ(steps, 8u);
}

TEST(Trainer, RatiosStartAtOneInEveryMode) {
  for (control::AlgorithmKind k : {control::AlgorithmKind::kPPO, control::AlgorithmKind::kPPOHer,
                                   control::AlgorithmKind::kMeherUniform,
                                   control::AlgorithmKind::kMeherTargeted}) {
    Trainer t(small_trainer(k));
    for (int i = 0; i < 4; ++i) {
      const IterationStats s = t.train_iteration();
      ASSERT_TRUE(s.updated);
      EXPECT_LE(s.update.first_minibatch_max_ratio_deviation, 1e-8) << control::to_string(k);
    }
    EXPECT_EQ(t.step(), 4u * 256u);
  }
}

TEST(Trainer, TimingSplitsByMode) {
  Trainer ppo(small_trainer(control::AlgorithmKind::kPPO));
  Trainer meher(small_trainer(control::AlgorithmKind::kMeherUniform));
  for (int i = 0; i < 2; ++i) {
    const IterationStats a = ppo.train_iteration();
    EXPECT_EQ(a.relabel_seconds, 0.0);
    EXPECT_GT(a.update_seconds, 0.0);
    const IterationStats b = meher.train_iteration();
    EXPECT_GT(b.relabel_seconds, 0.0);
    EXPECT_LE(std::abs(b.achieved_s_ratio - 0.5), 1.0 / static_cast<double>(b.buffer_size));
  }
}

TEST(Trainer, SameSeedSameParameters) {
  Trainer a(small_trainer(control::AlgorithmKind::kMeherUniform, 7));
  Trainer b(small_trainer(control::AlgorithmKind::kMeherUniform, 7));
  for (int i = 0; i < 3; ++i) {
    a.train_iteration();
    b.train_iteration();
    ASSERT_EQ(a.policy(), b.policy());
  }
  Trainer c(small_trainer(control::AlgorithmKind::kMeherUniform, 8));
  c.train_iteration();
  EXPECT_NE(a.policy(), c.policy());
}

TEST(Trainer, CheckpointResumesBitExactly) {
  const TrainerConfig cfg = small_trainer(control::AlgorithmKind::kMeherTargeted, 9);
  Trainer a(cfg);
  a.train_iteration();
  a.train_iteration();
  const std::string saved = a.checkpoint().dump();
  Trainer b(cfg, nlohmann::json::parse(saved));
  EXPECT_EQ(b.policy(), a.policy());
  EXPECT_EQ(b.step(), a.step());
  for (int i = 0; i < 2; ++i) {
    const IterationStats sa = a.train_iteration();
    const IterationStats sb = b.train_iteration();
    EXPECT_EQ(sa.buffer_size, sb.buffer_size);
    EXPECT_EQ(sa.episodes_completed, sb.episodes_completed);
  }
  EXPECT_EQ(a.policy(), b.policy());
  EXPECT_EQ(a.checkpoint().dump(), b.checkpoint().dump());
  EXPECT_THROW(Trainer(cfg, nlohmann::json{{"format", "other"}}), ConfigError);
}

}  // namespace
}  // namespace meher::ppo
