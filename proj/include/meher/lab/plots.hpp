#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "meher/lab/report.hpp"

namespace meher::lab {

// kSRatio: one figure per algorithm, a line (or bar) per S-ratio.
// kAlgorithm: one figure for everything, a line (or bar) per algorithm and S-ratio.
// Either way a figure has one panel per environment condition.
enum class Grouping { kSRatio, kAlgorithm };

std::string_view to_string(Grouping g);
Grouping parse_grouping(std::string_view tag);

struct Series {
  std::string label;
  metrics::MedianCurve steps;
  metrics::MedianCurve clock;
  std::optional<double> m_c;
};

struct Panel {
  std::string condition;
  std::vector<Series> series;
};

struct Figure {
  std::string name;  // file stem
  std::vector<Panel> panels;
};

std::vector<Figure> layout_figures(const std::vector<Group>& groups,
                                   const std::vector<metrics::ConditionMetrics>& scores, Grouping grouping);

/// Median line plus interquartile band per series.
std::string curve_svg(const Figure& figure, metrics::Axis axis);
/// M_c bars; undefined values are drawn as an empty slot labelled "n/a".
std::string bar_svg(const Figure& figure);

/// Writes <name>_steps.svg, <name>_clock.svg and <name>_mc.svg per figure.
std::vector<std::filesystem::path> emit_plots(const std::vector<Group>& groups,
                                              const std::vector<metrics::ConditionMetrics>& scores,
                                              const std::filesystem::path& out_dir, Grouping grouping);

}  // namespace meher::lab
