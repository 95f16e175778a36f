#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "meher/ppo/trainer.hpp"

namespace meher::lab {

// Run configs are JSON files (// and /* */ comments allowed):
//
//   {
//     "name": "easy",
//     "environment": {"spawner": ["SpawnApart"], "prey_policy": ["Attract"], "timeout": 200},
//     "algorithm": {"modes": ["MEHER_Uniform", "PPO"], "s_ratios": [0.6],
//                   "switch_threshold": 0.5, "ppo": {"n_steps": 2048}},
//     "experiment": {"seeds": [1, 2, 3], "total_steps": 300000, "eval_interval": 10240,
//                    "eval_episodes": 20, "output_dir": "results/easy", "workers": 1,
//                    "early_stop_threshold": 0.95}
//   }
//
// spawner and prey_policy take a tag or a list of tags; every combination is a
// condition. s_ratios apply to the MEHER modes only. Unknown keys are errors.

struct ExperimentConfig {
  std::vector<std::uint64_t> seeds;
  std::uint64_t total_steps = 0;
  std::uint64_t eval_interval = 10240;
  int eval_episodes = 20;
  std::string output_dir = "results";
  int workers = 1;
  std::optional<double> early_stop_threshold;
  int early_stop_patience = 3;
  std::size_t success_window = 100;
  bool audit_log = false;
  bool record_trajectories = false;
};

struct RunConfig {
  std::string name = "experiment";
  env::EnvConfig env;  // base values; spawner and prey policy come from the lists
  std::vector<env::Spawner> spawners;
  std::vector<env::PreyPolicy> prey_policies;
  std::vector<control::AlgorithmKind> modes;
  std::vector<double> s_ratios{0.5};
  control::AlgorithmMode mode_template;  // thresholds and rejection settings
  ppo::PPOConfig ppo;
  ExperimentConfig experiment;

  void validate() const;
};

RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& c);

/// One (condition, algorithm, S-ratio, seed) run.
struct Cell {
  std::string condition;  // "<spawner>/<prey_policy>"
  std::string group;      // condition plus algorithm and, for MEHER, S-ratio
  std::uint64_t seed = 0;
  ppo::TrainerConfig trainer;
  ExperimentConfig experiment;

  std::optional<double> s_ratio() const;
  /// Path below the output directory: "<group>/seed_<n>".
  std::filesystem::path relative_dir() const;
};

std::vector<Cell> expand_cells(const RunConfig& config);

/// Everything that determines a cell's learning curve, seed included.
nlohmann::json cell_json(const Cell& cell);

/// git-style SHA-1 ("blob <size>\0" + canonical JSON) as 40 hex digits.
/// Objects serialize with sorted keys, so field order never matters.
std::string content_hash(const nlohmann::json& j);

/// Applies the MEHER_OUTPUT_ROOT override to a relative output directory.
std::filesystem::path resolve_output_dir(const std::string& output_dir);

inline constexpr const char* kOutputRootEnv = "MEHER_OUTPUT_ROOT";

}  // namespace meher::lab
