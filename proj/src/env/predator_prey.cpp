#include "meher/env/predator_prey.hpp"

#include <algorithm>
#include <sstream>

#include "meher/errors.hpp"

namespace meher::env {

namespace {

constexpr double kCoincidentEps = 1e-12;
// Per-axis half-width of the Repel policy's uniform perturbation, applied to
// the unit flee direction before renormalizing.
constexpr double kRepelNoise = 0.3;

Vec3 unit_or_random(const Vec3& v, std::mt19937_64& rng) {
  const double n = v.norm();
  if (n <= kCoincidentEps) return random_unit_vector(rng);
  return (1.0 / n) * v;
}

}  // namespace

std::string_view to_string(Spawner s) {
  switch (s) {
    case Spawner::kSpawnRandom: return "SpawnRandom";
    case Spawner::kSpawnApart: return "SpawnApart";
  }
  return "?";
}

std::string_view to_string(PreyPolicy p) {
  switch (p) {
    case PreyPolicy::kAttract: return "Attract";
    case PreyPolicy::kStraightAway: return "StraightAway";
    case PreyPolicy::kRandomPrey: return "RandomPrey";
    case PreyPolicy::kStationary: return "Stationary";
    case PreyPolicy::kRepel: return "Repel";
    case PreyPolicy::kOrbit: return "Orbit";
  }
  return "?";
}

Spawner parse_spawner(std::string_view tag) {
  for (Spawner s : {Spawner::kSpawnRandom, Spawner::kSpawnApart}) {
    if (to_string(s) == tag) return s;
  }
  throw ConfigError("unknown spawner '" + std::string(tag) + "'");
}

PreyPolicy parse_prey_policy(std::string_view tag) {
  for (PreyPolicy p : {PreyPolicy::kAttract, PreyPolicy::kStraightAway, PreyPolicy::kRandomPrey,
                       PreyPolicy::kStationary, PreyPolicy::kRepel, PreyPolicy::kOrbit}) {
    if (to_string(p) == tag) return p;
  }
  throw ConfigError("unknown prey policy '" + std::string(tag) + "'");
}

void EnvConfig::validate() const {
  if (!(arena_half_extent > 0.0)) throw ConfigError("arena_half_extent must be positive");
  if (!(prey_max_speed > 0.0)) throw ConfigError("prey_max_speed must be positive");
  if (std::abs(predator_max_speed - 2.0 * prey_max_speed) > 1e-12 * predator_max_speed) {
    throw ConfigError("predator_max_speed must be exactly twice prey_max_speed");
  }
  if (!(interception_radius > 0.0)) throw ConfigError("interception_radius must be positive");
  if (timeout < 1) throw ConfigError("timeout must be at least 1 step");
}

Observation Observation::from(const KinematicState& s, const Vec3& goal) {
  Observation o;
  const Vec3 parts[5] = {s.predator_pos, s.predator_vel, s.prey_pos, s.prey_vel, goal};
  for (std::size_t i = 0; i < 5; ++i) {
    o.values[3 * i] = parts[i].x;
    o.values[3 * i + 1] = parts[i].y;
    o.values[3 * i + 2] = parts[i].z;
  }
  return o;
}

void Observation::set_goal(const Vec3& g) {
  values[12] = g.x;
  values[13] = g.y;
  values[14] = g.z;
}

double compute_reward(const EnvConfig& config, const Vec3& achieved, const Vec3& desired,
                      bool is_terminal_step) {
  if (distance(achieved, desired) <= config.interception_radius) return 1.0;
  return is_terminal_step ? -1.0 : 0.0;
}

Vec3 prey_action(PreyPolicy policy, const KinematicState& state, const EnvConfig& config,
                 std::mt19937_64& rng) {
  const double speed = config.prey_max_speed;
  const Vec3 away = state.prey_pos - state.predator_pos;
  switch (policy) {
    case PreyPolicy::kAttract:
      return speed * unit_or_random(-1.0 * away, rng);
    case PreyPolicy::kStraightAway:
      return speed * unit_or_random(away, rng);
    case PreyPolicy::kRandomPrey: {
      const Vec3 dir = random_unit_vector(rng);
      std::uniform_real_distribution<double> magnitude(0.0, speed);
      return magnitude(rng) * dir;
    }
    case PreyPolicy::kStationary:
      return {};
    case PreyPolicy::kRepel: {
      const Vec3 dir = unit_or_random(away, rng);
      std::uniform_real_distribution<double> noise(-kRepelNoise, kRepelNoise);
      const double nx = noise(rng);
      const double ny = noise(rng);
      const double nz = noise(rng);
      return speed * unit_or_random(dir + Vec3{nx, ny, nz}, rng);
    }
    case PreyPolicy::kOrbit: {
      const Vec3 axis = unit_or_random(away, rng);
      const Vec3 ref = std::abs(axis.z) < 0.9 ? Vec3{0.0, 0.0, 1.0} : Vec3{1.0, 0.0, 0.0};
      return speed * unit_or_random(cross(axis, ref), rng);
    }
  }
  return {};
}

PredatorPreyEnv::PredatorPreyEnv(EnvConfig config) : config_(config), rng_(config.seed) {
  config_.validate();
}

Observation PredatorPreyEnv::reset(std::uint64_t seed) {
  rng_.seed(seed);
  return start_episode();
}

Observation PredatorPreyEnv::reset() { return start_episode(); }

Observation PredatorPreyEnv::start_episode() {
  state_ = {};
  if (config_.spawner == Spawner::kSpawnRandom) {
    state_.predator_pos = random_point_in_cube(rng_, config_.arena_half_extent);
    state_.prey_pos = random_point_in_cube(rng_, config_.arena_half_extent);
  } else {
    const double o = kSpawnApartOffset * config_.arena_half_extent;
    state_.predator_pos = {-o, -o, -o};
    state_.prey_pos = {o, o, o};
  }
  elapsed_ = 0;
  done_ = false;
  intercepted_ = false;
  return observe();
}

StepResult PredatorPreyEnv::step(const Action& action) {
  if (done_) throw UsageError("step() called on a finished episode; call reset() first");

  Vec3 command{std::clamp(action[0], -1.0, 1.0), std::clamp(action[1], -1.0, 1.0),
               std::clamp(action[2], -1.0, 1.0)};
  Vec3 predator_vel = config_.predator_max_speed * command;
  const double speed = predator_vel.norm();
  if (speed > config_.predator_max_speed) predator_vel = (config_.predator_max_speed / speed) * predator_vel;

  const Vec3 prey_vel = prey_action(config_.prey_policy, state_, config_, rng_);

  state_.predator_vel = predator_vel;
  state_.prey_vel = prey_vel;
  state_.predator_pos = clamp_to_cube(state_.predator_pos + predator_vel, config_.arena_half_extent);
  state_.prey_pos = clamp_to_cube(state_.prey_pos + prey_vel, config_.arena_half_extent);
  ++elapsed_;

  const bool timeout = elapsed_ >= config_.timeout;
  StepResult result;
  result.achieved_goal = state_.predator_pos;
  result.reward = compute_reward(config_, state_.predator_pos, state_.prey_pos, timeout);
  intercepted_ = result.reward == 1.0;
  done_ = intercepted_ || timeout;
  result.done = done_;
  result.observation = observe();
  return result;
}

nlohmann::json to_json(const Vec3& v) { return nlohmann::json::array({v.x, v.y, v.z}); }

Vec3 vec3_from_json(const nlohmann::json& j) {
  return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

nlohmann::json PredatorPreyEnv::snapshot() const {
  std::ostringstream rng_text;
  rng_text << rng_;
  return {{"predator_pos", to_json(state_.predator_pos)},
          {"predator_vel", to_json(state_.predator_vel)},
          {"prey_pos", to_json(state_.prey_pos)},
          {"prey_vel", to_json(state_.prey_vel)},
          {"elapsed", elapsed_},
          {"done", done_},
          {"intercepted", intercepted_},
          {"rng", rng_text.str()}};
}

void PredatorPreyEnv::restore(const nlohmann::json& snap) {
  state_.predator_pos = vec3_from_json(snap.at("predator_pos"));
  state_.predator_vel = vec3_from_json(snap.at("predator_vel"));
  state_.prey_pos = vec3_from_json(snap.at("prey_pos"));
  state_.prey_vel = vec3_from_json(snap.at("prey_vel"));
  elapsed_ = snap.at("elapsed").get<int>();
  done_ = snap.at("done").get<bool>();
  intercepted_ = snap.at("intercepted").get<bool>();
  std::istringstream rng_text(snap.at("rng").get<std::string>());
  rng_text >> rng_;
}

nlohmann::json trajectory_record(int t, const KinematicState& state, const Action& action,
                                 double reward, bool done) {
  return {{"t", t},
          {"predator_pos", to_json(state.predator_pos)},
          {"predator_vel", to_json(state.predator_vel)},
          {"prey_pos", to_json(state.prey_pos)},
          {"prey_vel", to_json(state.prey_vel)},
          {"action", action},
          {"reward", reward},
          {"done", done}};
}

}  // namespace meher::env
