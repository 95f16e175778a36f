#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "meher/lab/config.hpp"

namespace meher::lab {

enum class CellStatus { kCompleted, kEarlyStopped, kFailed, kInfeasible };

std::string_view to_string(CellStatus s);
CellStatus parse_cell_status(std::string_view tag);
inline bool succeeded(CellStatus s) { return s == CellStatus::kCompleted || s == CellStatus::kEarlyStopped; }

struct WallClock {
  double env_s = 0.0;
  double relabel_s = 0.0;  // relabeling and S-ratio filtering
  double annotate_s = 0.0;  // log-prob/value refresh and GAE on the pool
  double update_s = 0.0;
  double eval_s = 0.0;
  double total_s = 0.0;
};

struct RunRecord {
  std::string condition;
  std::string group;
  std::string spawner;
  std::string prey_policy;
  std::string algorithm;
  std::optional<double> s_ratio;
  std::uint64_t seed = 0;
  std::string config_hash;
  nlohmann::json config;  // cell_json snapshot
  CellStatus status = CellStatus::kFailed;
  std::string error;
  // Paths relative to the results directory.
  std::string curve_path;
  std::string timing_path;
  std::string events_path;
  std::string checkpoint_path;
  std::uint64_t steps = 0;
  std::uint64_t iterations = 0;
  std::uint64_t updates = 0;
  WallClock wallclock;
  double max_s_ratio_deviation = 0.0;  // MEHER updates only
  bool s_ratio_within_bound = true;    // every MEHER update within 1/N
  nlohmann::json switch_events = nlohmann::json::array();
  bool skipped = false;  // reused from an earlier run; not serialized
};

nlohmann::json to_json(const RunRecord& r);
RunRecord record_from_json(const nlohmann::json& j);

inline constexpr const char* kRecordFile = "record.json";

/// Trains one cell into `results_dir / cell.relative_dir()`. A directory
/// already holding a completed or early-stopped record with the same config
/// hash is reused untouched. Exceptions inside training become a failed
/// record; an unwritable directory throws.
RunRecord run_cell(const Cell& cell, const std::filesystem::path& results_dir);

/// Runs every cell on `workers` threads. Records come back in cell order.
std::vector<RunRecord> run_experiment(const RunConfig& config, const std::filesystem::path& results_dir,
                                      int workers, std::ostream* log = nullptr);

/// Every record.json below `results_dir`, sorted by group then seed.
std::vector<RunRecord> load_records(const std::filesystem::path& results_dir);

}  // namespace meher::lab
