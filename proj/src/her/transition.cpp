#include "meher/her/transition.hpp"

#include "meher/errors.hpp"

namespace meher::her {

std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::kReal: return "Real";
    case Provenance::kRelabeledSuccess: return "RelabeledSuccess";
    case Provenance::kRelabeledFailure: return "RelabeledFailure";
  }
  return "?";
}

std::string_view to_string(Outcome o) { return o == Outcome::kSuccess ? "Success" : "Failure"; }

Episode Episode::from_transitions(std::vector<Transition> transitions) {
  if (transitions.empty()) throw UsageError("episode has no transitions");
  Episode e;
  e.outcome = transitions.back().reward == 1.0 ? Outcome::kSuccess : Outcome::kFailure;
  for (Transition& t : transitions) t.outcome = e.outcome;
  e.transitions = std::move(transitions);
  return e;
}

double Episode::episode_return() const {
  double total = 0.0;
  for (const Transition& t : transitions) total += t.reward;
  return total;
}

void Episode::validate() const {
  if (transitions.empty()) throw UsageError("episode has no transitions");
  const int first = transitions.front().step_index;
  for (std::size_t i = 0; i < transitions.size(); ++i) {
    const Transition& t = transitions[i];
    if (t.step_index != first + static_cast<int>(i)) throw UsageError("episode steps are not contiguous");
    if (t.done != (i + 1 == transitions.size())) throw UsageError("done must be set on the last step only");
    if (t.episode_id != transitions.front().episode_id) throw UsageError("mixed episode ids");
  }
  const bool success = transitions.back().reward == 1.0;
  if (success != (outcome == Outcome::kSuccess)) throw UsageError("outcome does not match last reward");
}

std::vector<Transition> flatten(std::span<const Episode> episodes) {
  std::size_t n = 0;
  for (const Episode& e : episodes) n += e.size();
  std::vector<Transition> out;
  out.reserve(n);
  for (const Episode& e : episodes) out.insert(out.end(), e.transitions.begin(), e.transitions.end());
  return out;
}

namespace {

Provenance parse_provenance(std::string_view tag) {
  for (Provenance p : {Provenance::kReal, Provenance::kRelabeledSuccess, Provenance::kRelabeledFailure}) {
    if (to_string(p) == tag) return p;
  }
  throw ConfigError("unknown provenance '" + std::string(tag) + "'");
}

}  // namespace

nlohmann::json to_json(const Transition& t) {
  return {{"obs", t.observation.values},
          {"action", t.action},
          {"reward", t.reward},
          {"next_obs", t.next_observation.values},
          {"done", t.done},
          {"achieved", env::to_json(t.achieved_goal)},
          {"episode_id", t.episode_id},
          {"step_index", t.step_index},
          {"provenance", to_string(t.provenance)},
          {"outcome", to_string(t.outcome)},
          {"log_prob", t.log_prob},
          {"value", t.value},
          {"advantage", t.advantage},
          {"ret", t.ret},
          {"policy_version", t.policy_version}};
}

Transition transition_from_json(const nlohmann::json& j) {
  Transition t;
  t.observation.values = j.at("obs").get<std::array<double, env::kObsDim>>();
  t.action = j.at("action").get<env::Action>();
  t.reward = j.at("reward").get<double>();
  t.next_observation.values = j.at("next_obs").get<std::array<double, env::kObsDim>>();
  t.done = j.at("done").get<bool>();
  t.achieved_goal = env::vec3_from_json(j.at("achieved"));
  t.episode_id = j.at("episode_id").get<std::uint64_t>();
  t.step_index = j.at("step_index").get<int>();
  t.provenance = parse_provenance(j.at("provenance").get<std::string>());
  t.outcome = j.at("outcome").get<std::string>() == "Success" ? Outcome::kSuccess : Outcome::kFailure;
  t.log_prob = j.at("log_prob").get<double>();
  t.value = j.at("value").get<double>();
  t.advantage = j.at("advantage").get<double>();
  t.ret = j.at("ret").get<double>();
  t.policy_version = j.at("policy_version").get<std::uint64_t>();
  return t;
}

}  // namespace meher::her
