#include "meher/lab/report.hpp"

#include <fstream>
#include <map>
#include <ostream>

#include "meher/errors.hpp"

namespace meher::lab {

namespace fs = std::filesystem;

std::vector<Group> collect_groups(const std::vector<RunRecord>& records, const fs::path& results_dir,
                                  std::ostream* warn) {
  std::vector<Group> groups;
  std::map<std::string, std::size_t> index;
  for (const RunRecord& r : records) {
    auto [it, fresh] = index.try_emplace(r.group, groups.size());
    if (fresh) groups.push_back({r.group, r.condition, r.spawner, r.prey_policy, r.algorithm, r.s_ratio, {}});
    if (!succeeded(r.status)) continue;
    std::ifstream curve_in(results_dir / r.curve_path);
    std::ifstream timing_in(results_dir / r.timing_path);
    if (!curve_in || !timing_in) throw ConfigError("missing curve files for " + r.group + " seed " + std::to_string(r.seed));
    metrics::LearningCurve curve = metrics::read_curve_csv(curve_in);
    metrics::merge_timing_csv(timing_in, curve);
    groups[it->second].curves.push_back(std::move(curve));
  }
  std::vector<Group> usable;
  for (Group& g : groups) {
    if (g.curves.empty()) {
      if (warn) *warn << "warning: no completed runs in " << g.group << ", skipped\n";
      continue;
    }
    usable.push_back(std::move(g));
  }
  return usable;
}

std::vector<metrics::ConditionMetrics> group_metrics(const std::vector<Group>& groups) {
  std::vector<metrics::ConditionMetrics> rows;
  for (const Group& g : groups) {
    const metrics::CurveSummary s = metrics::summarize(metrics::median_curve(g.curves));
    rows.push_back({g.group, g.spawner, g.prey_policy, g.algorithm, g.s_ratio, s.r_c, s.t_c, std::nullopt,
                    g.curves.size()});
  }
  std::map<std::string, std::vector<std::size_t>> by_condition;
  for (std::size_t i = 0; i < groups.size(); ++i) by_condition[groups[i].condition].push_back(i);
  for (const auto& [_, members] : by_condition) {
    std::vector<metrics::ConditionMetrics> context;
    for (std::size_t i : members) context.push_back(rows[i]);
    metrics::score_conditions(context);
    for (std::size_t k = 0; k < members.size(); ++k) rows[members[k]].m_c = context[k].m_c;
  }
  return rows;
}

}  // namespace meher::lab
