#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "meher/env/vec3.hpp"

namespace meher::env {

enum class Spawner { kSpawnRandom, kSpawnApart };

// Attract, StraightAway and RandomPrey are the three named prey behaviours.
// Stationary, Repel and Orbit are reconstructions filling out the six-policy
// roster; see README.
enum class PreyPolicy { kAttract, kStraightAway, kRandomPrey, kStationary, kRepel, kOrbit };

std::string_view to_string(Spawner s);
std::string_view to_string(PreyPolicy p);
Spawner parse_spawner(std::string_view tag);
PreyPolicy parse_prey_policy(std::string_view tag);

inline constexpr std::size_t kStateDim = 12;
inline constexpr std::size_t kGoalDim = 3;
inline constexpr std::size_t kObsDim = kStateDim + kGoalDim;
inline constexpr std::size_t kActionDim = 3;

using Action = std::array<double, kActionDim>;

struct EnvConfig {
  double arena_half_extent = 1.0;
  double predator_max_speed = 0.05;
  double prey_max_speed = 0.025;
  double interception_radius = 0.1;
  int timeout = 200;
  Spawner spawner = Spawner::kSpawnApart;
  PreyPolicy prey_policy = PreyPolicy::kAttract;
  std::uint64_t seed = 0;

  /// Throws ConfigError on a bad arena, non-positive radius/timeout, or a
  /// predator that is not exactly twice as fast as the prey.
  void validate() const;

  friend bool operator==(const EnvConfig&, const EnvConfig&) = default;
};

// Fixed spawn points for SpawnApart, as a fraction of the arena half-extent.
inline constexpr double kSpawnApartOffset = 0.5;

struct KinematicState {
  Vec3 predator_pos;
  Vec3 predator_vel;
  Vec3 prey_pos;
  Vec3 prey_vel;

  friend bool operator==(const KinematicState&, const KinematicState&) = default;
};

/// o = [s, g]: predator pos, predator vel, prey pos, prey vel, then goal.
struct Observation {
  std::array<double, kObsDim> values{};

  static Observation from(const KinematicState& s, const Vec3& goal);

  std::span<const double, kObsDim> span() const { return values; }
  Vec3 predator_pos() const { return {values[0], values[1], values[2]}; }
  Vec3 prey_pos() const { return {values[6], values[7], values[8]}; }
  Vec3 goal() const { return {values[12], values[13], values[14]}; }
  void set_goal(const Vec3& g);

  friend bool operator==(const Observation&, const Observation&) = default;
};

struct StepResult {
  Observation observation;
  double reward = 0.0;
  bool done = false;
  Vec3 achieved_goal;  // predator position after the step
};

/// 1 inside the interception radius (inclusive); otherwise -1 on the
/// terminal step and 0 before it. Shared by live stepping and relabeling.
double compute_reward(const EnvConfig& config, const Vec3& achieved, const Vec3& desired,
                      bool is_terminal_step);

/// Prey velocity for the coming step, computed from the current positions.
Vec3 prey_action(PreyPolicy policy, const KinematicState& state, const EnvConfig& config,
                 std::mt19937_64& rng);

class PredatorPreyEnv {
 public:
  explicit PredatorPreyEnv(EnvConfig config);

  /// Reseeds the environment stream and starts a new episode.
  Observation reset(std::uint64_t seed);
  /// Starts a new episode continuing the current random stream.
  Observation reset();

  /// Applies a predator velocity command. Components are clipped to [-1, 1]
  /// and the resulting velocity is capped at the predator's max speed.
  StepResult step(const Action& action);

  const EnvConfig& config() const { return config_; }
  const KinematicState& state() const { return state_; }
  int elapsed_steps() const { return elapsed_; }
  bool done() const { return done_; }
  bool intercepted() const { return intercepted_; }
  Observation observe() const { return Observation::from(state_, state_.prey_pos); }

  /// Complete state including the random stream, for checkpoints.
  nlohmann::json snapshot() const;
  void restore(const nlohmann::json& snap);

 private:
  Observation start_episode();

  EnvConfig config_;
  KinematicState state_;
  std::mt19937_64 rng_;
  int elapsed_ = 0;
  bool done_ = true;
  bool intercepted_ = false;
};

/// One JSONL trajectory record: t, predator/prey pos and vel, action,
/// reward, done.
nlohmann::json trajectory_record(int t, const KinematicState& state, const Action& action,
                                 double reward, bool done);

nlohmann::json to_json(const Vec3& v);
Vec3 vec3_from_json(const nlohmann::json& j);

}  // namespace meher::env
