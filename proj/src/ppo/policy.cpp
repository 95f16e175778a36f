#include "meher/ppo/policy.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "meher/diffcore/gaussian.hpp"
#include "meher/errors.hpp"

namespace meher::ppo {

namespace {

constexpr double kHiddenGain = 1.4142135623730951;  // sqrt(2)
constexpr double kActionGain = 0.01;
constexpr double kValueGain = 1.0;

void require_finite(const diff::Tensor& t, const char* what) {
  if (!t.all_finite()) {
    throw NumericalError(std::string("non-finite ") + what + " output, shape " + t.shape_string());
  }
}

void append_net(diff::NamedTensors& out, const std::string& prefix, const diff::MlpParams& net) {
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    out.emplace_back(prefix + ".layer" + std::to_string(i) + ".weight", net.layers[i].weight);
    out.emplace_back(prefix + ".layer" + std::to_string(i) + ".bias", net.layers[i].bias);
  }
}

diff::MlpParams read_net(const diff::NamedTensors& named, const std::string& prefix) {
  diff::MlpParams net;
  for (std::size_t i = 0;; ++i) {
    const std::string w = prefix + ".layer" + std::to_string(i) + ".weight";
    const std::string b = prefix + ".layer" + std::to_string(i) + ".bias";
    auto wi = std::find_if(named.begin(), named.end(), [&](const auto& p) { return p.first == w; });
    auto bi = std::find_if(named.begin(), named.end(), [&](const auto& p) { return p.first == b; });
    if (wi == named.end() || bi == named.end()) break;
    net.layers.push_back({wi->second, bi->second});
  }
  if (net.layers.empty()) throw ConfigError("checkpoint has no " + prefix + " layers");
  net.validate();
  return net;
}

}  // namespace

PolicyNet PolicyNet::create(std::mt19937_64& rng, std::span<const std::size_t> hidden) {
  std::vector<std::size_t> widths{env::kObsDim};
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  PolicyNet p;
  widths.push_back(env::kActionDim);
  p.actor = diff::make_mlp(widths, kHiddenGain, kActionGain, rng);
  widths.back() = 1;
  p.critic = diff::make_mlp(widths, kHiddenGain, kValueGain, rng);
  p.log_std = diff::Tensor({1, env::kActionDim}, 0.0);
  return p;
}

std::vector<diff::Tensor*> PolicyNet::parameters() {
  std::vector<diff::Tensor*> out;
  for (auto& l : actor.layers) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  out.push_back(&log_std);
  for (auto& l : critic.layers) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  return out;
}

std::vector<const diff::Tensor*> PolicyNet::parameters() const {
  std::vector<const diff::Tensor*> out;
  for (diff::Tensor* t : const_cast<PolicyNet*>(this)->parameters()) out.push_back(t);
  return out;
}

diff::NamedTensors PolicyNet::to_named() const {
  diff::NamedTensors out;
  append_net(out, "actor", actor);
  out.emplace_back("log_std", log_std);
  append_net(out, "critic", critic);
  return out;
}

PolicyNet PolicyNet::from_named(const diff::NamedTensors& named) {
  PolicyNet p;
  p.actor = read_net(named, "actor");
  p.critic = read_net(named, "critic");
  auto it = std::find_if(named.begin(), named.end(), [](const auto& e) { return e.first == "log_std"; });
  if (it == named.end()) throw ConfigError("checkpoint has no log_std");
  p.log_std = it->second;
  if (p.log_std.size() != p.actor.output_width()) throw ConfigError("log_std width does not match actor");
  return p;
}

ActionSample sample_action(const PolicyNet& policy, const env::Observation& obs, std::mt19937_64& rng) {
  const diff::Tensor input = diff::Tensor::row(obs.span());
  const diff::Tensor mean = diff::mlp_forward(policy.actor, input);
  const diff::Tensor value = diff::mlp_forward(policy.critic, input);
  require_finite(mean, "actor");
  require_finite(value, "critic");

  std::normal_distribution<double> normal(0.0, 1.0);
  ActionSample s;
  for (std::size_t j = 0; j < env::kActionDim; ++j) {
    s.raw[j] = mean[j] + std::exp(policy.log_std[j]) * normal(rng);
    s.clipped[j] = std::clamp(s.raw[j], -1.0, 1.0);
  }
  s.log_prob = diff::gaussian_log_density(mean.data(), policy.log_std.data(), s.raw);
  s.value = value[0];
  return s;
}

env::Action deterministic_action(const PolicyNet& policy, const env::Observation& obs) {
  const diff::Tensor mean = diff::mlp_forward(policy.actor, diff::Tensor::row(obs.span()));
  require_finite(mean, "actor");
  env::Action a{};
  for (std::size_t j = 0; j < env::kActionDim; ++j) a[j] = std::clamp(mean[j], -1.0, 1.0);
  return a;
}

diff::Tensor stack_observations(std::span<const her::Transition* const> ts) {
  diff::Tensor out({ts.size(), env::kObsDim});
  auto d = out.data();
  for (std::size_t i = 0; i < ts.size(); ++i) {
    std::copy(ts[i]->observation.values.begin(), ts[i]->observation.values.end(), d.begin() + i * env::kObsDim);
  }
  return out;
}

diff::Tensor stack_actions(std::span<const her::Transition* const> ts) {
  diff::Tensor out({ts.size(), env::kActionDim});
  auto d = out.data();
  for (std::size_t i = 0; i < ts.size(); ++i) {
    std::copy(ts[i]->action.begin(), ts[i]->action.end(), d.begin() + i * env::kActionDim);
  }
  return out;
}

BatchEvaluation evaluate_batch(const PolicyNet& policy, std::span<const her::Transition* const> ts) {
  BatchEvaluation out;
  if (ts.empty()) return out;
  const diff::Tensor obs = stack_observations(ts);
  const diff::Tensor mean = diff::mlp_forward(policy.actor, obs);
  const diff::Tensor values = diff::mlp_forward(policy.critic, obs);
  require_finite(mean, "actor");
  require_finite(values, "critic");
  const std::size_t d = env::kActionDim;
  out.log_probs.resize(ts.size());
  out.values.resize(ts.size());
  for (std::size_t i = 0; i < ts.size(); ++i) {
    out.log_probs[i] = diff::gaussian_log_density(mean.data().subspan(i * d, d), policy.log_std.data(),
                                                  ts[i]->action);
    out.values[i] = values[i];
  }
  return out;
}

namespace {

template <typename Pred>
void refresh_where(const PolicyNet& snapshot, std::span<her::Transition> transitions,
                   std::uint64_t version, Pred pred) {
  std::vector<her::Transition*> picked;
  for (her::Transition& t : transitions) {
    if (pred(t)) picked.push_back(&t);
  }
  std::vector<const her::Transition*> view(picked.begin(), picked.end());
  const BatchEvaluation e = evaluate_batch(snapshot, view);
  for (std::size_t i = 0; i < picked.size(); ++i) {
    picked[i]->log_prob = e.log_probs[i];
    picked[i]->value = e.values[i];
    picked[i]->policy_version = version;
  }
}

}  // namespace

void recompute_for_relabeled(const PolicyNet& snapshot, std::span<her::Transition> transitions,
                             std::uint64_t version) {
  refresh_where(snapshot, transitions, version,
                [](const her::Transition& t) { return t.provenance != her::Provenance::kReal; });
}

void refresh_stale(const PolicyNet& snapshot, std::span<her::Transition> transitions,
                   std::uint64_t version) {
  refresh_where(snapshot, transitions, version,
                [version](const her::Transition& t) { return t.policy_version != version; });
}

}  // namespace meher::ppo
