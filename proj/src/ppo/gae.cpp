#include "meher/ppo/gae.hpp"

namespace meher::ppo {

void compute_gae(std::span<her::Transition> steps, double gamma, double lambda, double bootstrap_value) {
  double next_value = bootstrap_value;
  double running = 0.0;
  for (std::size_t i = steps.size(); i-- > 0;) {
    her::Transition& t = steps[i];
    const double nv = t.done ? 0.0 : next_value;
    const double delta = t.reward + gamma * nv - t.value;
    running = delta + gamma * lambda * (t.done ? 0.0 : running);
    t.advantage = running;
    t.ret = running + t.value;
    next_value = t.value;
  }
}

}  // namespace meher::ppo
