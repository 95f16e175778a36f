#include "meher/ppo/update.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

#include "meher/diffcore/tape.hpp"
#include "meher/errors.hpp"

namespace meher::ppo {

namespace {

constexpr double kAdvantageStdFloor = 1e-8;

// Per-minibatch normalization; a single advantage is left as is.
std::vector<double> normalized_advantages(std::span<const her::Transition* const> batch) {
  std::vector<double> a(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) a[i] = batch[i]->advantage;
  if (a.size() < 2) return a;
  const double n = static_cast<double>(a.size());
  const double mu = std::accumulate(a.begin(), a.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : a) ss += (x - mu) * (x - mu);
  const double sd = std::max(std::sqrt(ss / (n - 1.0)), kAdvantageStdFloor);
  for (double& x : a) x = (x - mu) / sd;
  return a;
}

diff::Tensor column(std::span<const double> values) {
  return diff::Tensor({values.size(), 1}, std::vector<double>(values.begin(), values.end()));
}

[[noreturn]] void fail(const char* what, std::size_t epoch, std::size_t minibatch, double policy_loss,
                       double value_loss) {
  std::ostringstream msg;
  msg << "non-finite " << what << " in PPO update (epoch " << epoch << ", minibatch " << minibatch
      << ", policy_loss " << policy_loss << ", value_loss " << value_loss << ")";
  throw NumericalError(msg.str());
}

}  // namespace

void PPOConfig::validate() const {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("gamma must lie in (0, 1]");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("lambda must lie in [0, 1]");
  if (!(clip > 0.0)) throw ConfigError("clip must be positive");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (n_steps == 0) throw ConfigError("n_steps must be positive");
  if (minibatch_size == 0) throw ConfigError("minibatch_size must be positive");
  if (epochs < 1) throw ConfigError("epochs must be at least 1");
  if (value_coef < 0.0 || entropy_coef < 0.0) throw ConfigError("loss coefficients must be non-negative");
  if (!(max_grad_norm > 0.0)) throw ConfigError("max_grad_norm must be positive");
  if (!(adam_epsilon > 0.0)) throw ConfigError("adam_epsilon must be positive");
}

diff::AdamConfig PPOConfig::adam() const {
  diff::AdamConfig c;
  c.step_size = learning_rate;
  c.epsilon = adam_epsilon;
  return c;
}

nlohmann::json to_json(const PPOConfig& c) {
  return {{"gamma", c.gamma},
          {"lambda", c.lambda},
          {"clip", c.clip},
          {"learning_rate", c.learning_rate},
          {"n_steps", c.n_steps},
          {"minibatch_size", c.minibatch_size},
          {"epochs", c.epochs},
          {"value_coef", c.value_coef},
          {"entropy_coef", c.entropy_coef},
          {"max_grad_norm", c.max_grad_norm},
          {"adam_epsilon", c.adam_epsilon}};
}

PPOConfig ppo_config_from_json(const nlohmann::json& j) {
  PPOConfig c;
  static const char* const kKeys[] = {"gamma",      "lambda",     "clip",         "learning_rate",
                                      "n_steps",    "minibatch_size", "epochs",  "value_coef",
                                      "entropy_coef", "max_grad_norm", "adam_epsilon"};
  for (const auto& [key, _] : j.items()) {
    if (std::find(std::begin(kKeys), std::end(kKeys), key) == std::end(kKeys)) {
      throw ConfigError("unknown ppo key '" + key + "'");
    }
  }
  c.gamma = j.value("gamma", c.gamma);
  c.lambda = j.value("lambda", c.lambda);
  c.clip = j.value("clip", c.clip);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.n_steps = j.value("n_steps", c.n_steps);
  c.minibatch_size = j.value("minibatch_size", c.minibatch_size);
  c.epochs = j.value("epochs", c.epochs);
  c.value_coef = j.value("value_coef", c.value_coef);
  c.entropy_coef = j.value("entropy_coef", c.entropy_coef);
  c.max_grad_norm = j.value("max_grad_norm", c.max_grad_norm);
  c.adam_epsilon = j.value("adam_epsilon", c.adam_epsilon);
  c.validate();
  return c;
}

nlohmann::json to_json(const UpdateDiagnostics& d) {
  return {{"policy_loss", d.policy_loss},
          {"value_loss", d.value_loss},
          {"entropy", d.entropy},
          {"approx_kl", d.approx_kl},
          {"clip_fraction", d.clip_fraction},
          {"grad_norm", d.grad_norm},
          {"first_minibatch_max_ratio_deviation", d.first_minibatch_max_ratio_deviation},
          {"minibatches", d.minibatches},
          {"transitions", d.transitions}};
}

double gaussian_entropy(const diff::Tensor& log_std) {
  const double per_dim = 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e);
  double h = 0.0;
  for (double s : log_std.data()) h += s + per_dim;
  return h;
}

UpdateDiagnostics ppo_update(PolicyNet& policy, diff::AdamState& optimizer,
                             std::span<const her::Transition> buffer, const PPOConfig& config,
                             std::mt19937_64& rng) {
  UpdateDiagnostics diag;
  diag.transitions = buffer.size();
  if (buffer.empty()) return diag;

  std::vector<std::size_t> order(buffer.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t mb = config.minibatch_size;
  std::size_t clipped = 0;
  std::size_t seen = 0;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += mb) {
      const std::size_t end = std::min(start + mb, order.size());
      std::vector<const her::Transition*> batch;
      batch.reserve(end - start);
      for (std::size_t i = start; i < end; ++i) batch.push_back(&buffer[order[i]]);
      const std::size_t b = batch.size();

      std::vector<double> old_lp(b);
      std::vector<double> returns(b);
      for (std::size_t i = 0; i < b; ++i) {
        old_lp[i] = batch[i]->log_prob;
        returns[i] = batch[i]->ret;
      }
      const std::vector<double> adv = normalized_advantages(batch);

      diff::Tape tape;
      const diff::Var obs = tape.constant(stack_observations(batch));
      const diff::Var actions = tape.constant(stack_actions(batch));
      const diff::MlpVars actor = diff::bind_parameters(tape, policy.actor);
      const diff::Var log_std = tape.parameter(policy.log_std);
      const diff::MlpVars critic = diff::bind_parameters(tape, policy.critic);

      const diff::Var mean_action = diff::mlp_forward(actor, obs);
      const diff::Var log_prob = diff::gaussian_log_prob(mean_action, log_std, actions);
      const diff::Var ratio = diff::exp(log_prob - tape.constant(column(old_lp)));
      const diff::Var advantages = tape.constant(column(adv));
      const diff::Var surrogate = ratio * advantages;
      const diff::Var clipped_surrogate =
          diff::clamp(ratio, 1.0 - config.clip, 1.0 + config.clip) * advantages;
      const diff::Var policy_loss = diff::scale(diff::mean(diff::minimum(surrogate, clipped_surrogate)), -1.0);
      const diff::Var values = diff::mlp_forward(critic, obs);
      const diff::Var value_loss = diff::mean(diff::square(values - tape.constant(column(returns))));
      // Entropy of a diagonal Gaussian is sum(log_std) plus a constant.
      const diff::Var entropy_term = diff::sum(log_std);
      const diff::Var total = policy_loss + diff::scale(value_loss, config.value_coef) -
                              diff::scale(entropy_term, config.entropy_coef);

      const double pl = policy_loss.value().item();
      const double vl = value_loss.value().item();
      if (!std::isfinite(total.value().item())) fail("loss", epoch, start / mb, pl, vl);

      const diff::Tensor& r = ratio.value();
      const diff::Tensor& lp = log_prob.value();
      for (std::size_t i = 0; i < b; ++i) {
        if (std::abs(r[i] - 1.0) > config.clip) ++clipped;
        diag.approx_kl += old_lp[i] - lp[i];
      }
      seen += b;
      if (epoch == 0 && start == 0) {
        for (std::size_t i = 0; i < b; ++i) {
          diag.first_minibatch_max_ratio_deviation =
              std::max(diag.first_minibatch_max_ratio_deviation, std::abs(r[i] - 1.0));
        }
        diag.first_surrogate = diff::mean(surrogate).value().item();
      }

      const diff::Gradients grads = tape.backward(total);
      std::vector<diff::Tensor> g;
      for (std::size_t i = 0; i < actor.weights.size(); ++i) {
        g.push_back(grads.of(actor.weights[i]));
        g.push_back(grads.of(actor.biases[i]));
      }
      g.push_back(grads.of(log_std));
      for (std::size_t i = 0; i < critic.weights.size(); ++i) {
        g.push_back(grads.of(critic.weights[i]));
        g.push_back(grads.of(critic.biases[i]));
      }
      for (const diff::Tensor& t : g) {
        if (!t.all_finite()) fail("gradient", epoch, start / mb, pl, vl);
      }
      diag.grad_norm += diff::clip_global_norm(g, config.max_grad_norm);
      const std::vector<diff::Tensor*> params = policy.parameters();
      diff::adam_step(optimizer, params, g);

      diag.policy_loss += pl;
      diag.value_loss += vl;
      ++diag.minibatches;
    }
  }

  const double m = static_cast<double>(diag.minibatches);
  diag.policy_loss /= m;
  diag.value_loss /= m;
  diag.grad_norm /= m;
  diag.approx_kl /= static_cast<double>(seen);
  diag.clip_fraction = static_cast<double>(clipped) / static_cast<double>(seen);
  diag.entropy = gaussian_entropy(policy.log_std);
  return diag;
}

}  // namespace meher::ppo
