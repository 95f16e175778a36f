#pragma once

#include <random>

#include "meher/env/predator_prey.hpp"
#include "meher/her/transition.hpp"

namespace meher::testing {

// Plays one episode of the real environment. Actions are uniform noise, or
// noise plus a pull toward the prey when `chase` is set.
inline her::Episode random_episode(env::EnvConfig config, std::uint64_t id, std::mt19937_64& rng,
                                   bool chase = false) {
  env::PredatorPreyEnv environment(config);
  env::Observation obs = environment.reset(rng());
  std::uniform_real_distribution<double> u(-1.2, 1.2);
  std::vector<her::Transition> steps;
  for (int t = 0; !environment.done(); ++t) {
    her::Transition tr;
    tr.observation = obs;
    tr.action = {u(rng), u(rng), u(rng)};
    if (chase) {
      const env::Vec3 to_prey = obs.prey_pos() - obs.predator_pos();
      tr.action[0] = 0.3 * tr.action[0] + 20.0 * to_prey.x;
      tr.action[1] = 0.3 * tr.action[1] + 20.0 * to_prey.y;
      tr.action[2] = 0.3 * tr.action[2] + 20.0 * to_prey.z;
    }
    const env::StepResult r = environment.step(tr.action);
    tr.reward = r.reward;
    tr.next_observation = r.observation;
    tr.done = r.done;
    tr.achieved_goal = r.achieved_goal;
    tr.episode_id = id;
    tr.step_index = t;
    steps.push_back(tr);
    obs = r.observation;
  }
  return her::Episode::from_transitions(std::move(steps));
}

// Random spawner, prey policy, chasing or not, and timeout in [1, max_length].
inline her::Episode random_short_episode(std::uint64_t id, std::mt19937_64& rng, int max_length = 30) {
  env::EnvConfig config;
  config.spawner = rng() % 2 == 0 ? env::Spawner::kSpawnRandom : env::Spawner::kSpawnApart;
  config.prey_policy = static_cast<env::PreyPolicy>(rng() % 6);
  config.timeout = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(max_length));
  const bool chase = rng() % 2 == 0;
  return random_episode(config, id, rng, chase);
}

}  // namespace meher::testing
