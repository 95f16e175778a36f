#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "meher/lab/runner.hpp"
#include "meher/metrics/metrics.hpp"

namespace meher::lab {

/// The seeds of one (condition, algorithm, S-ratio) combination.
struct Group {
  std::string group;
  std::string condition;
  std::string spawner;
  std::string prey_policy;
  std::string algorithm;
  std::optional<double> s_ratio;
  std::vector<metrics::LearningCurve> curves;  // completed and early-stopped seeds only
};

/// Groups records and loads their curves and timing. Groups without a usable
/// record are skipped with a warning on `warn`.
std::vector<Group> collect_groups(const std::vector<RunRecord>& records, const std::filesystem::path& results_dir,
                                  std::ostream* warn = nullptr);

/// R_c and T_c from each group's median step curve, with M_c scored against
/// every group sharing the same environment condition.
std::vector<metrics::ConditionMetrics> group_metrics(const std::vector<Group>& groups);

}  // namespace meher::lab
