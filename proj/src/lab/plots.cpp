#include "meher/lab/plots.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "meher/errors.hpp"

namespace meher::lab {

namespace fs = std::filesystem;

namespace {

constexpr double kPanelW = 360;
constexpr double kPanelH = 260;
constexpr double kMarginL = 52;
constexpr double kMarginR = 16;
constexpr double kMarginT = 30;
constexpr double kMarginB = 40;
constexpr int kColumns = 3;
constexpr double kLegendRow = 16;

const char* const kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf", "#000000"};

std::string num(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

std::string px(double v) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(2);
  s << v;
  return s.str();
}

std::string escape(std::string_view text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string ratio_label(double s) {
  std::ostringstream out;
  out << "S=" << s;
  return out.str();
}

std::string series_label(const Group& g, Grouping grouping) {
  if (grouping == Grouping::kSRatio) return g.s_ratio ? ratio_label(*g.s_ratio) : g.algorithm;
  return g.s_ratio ? g.algorithm + " " + ratio_label(*g.s_ratio) : g.algorithm;
}

std::size_t legend_rows(const Figure& f) {
  std::size_t n = 0;
  for (const Panel& p : f.panels) n = std::max(n, p.series.size());
  return n;
}

struct Canvas {
  std::ostringstream body;
  double width = 0;
  double height = 0;
  double panel_h = 0;

  explicit Canvas(const Figure& f) {
    const std::size_t cols = std::min<std::size_t>(kColumns, std::max<std::size_t>(1, f.panels.size()));
    const std::size_t rows = (f.panels.size() + cols - 1) / cols;
    panel_h = kPanelH + kLegendRow * static_cast<double>(legend_rows(f));
    width = kPanelW * static_cast<double>(cols);
    height = panel_h * static_cast<double>(std::max<std::size_t>(rows, 1));
  }

  std::pair<double, double> origin(std::size_t i) const {
    return {kPanelW * static_cast<double>(i % kColumns), panel_h * static_cast<double>(i / kColumns)};
  }

  std::string finish() const {
    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << px(width) << "\" height=\"" << px(height)
        << "\" font-family=\"sans-serif\" font-size=\"11\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << body.str() << "</svg>\n";
    return out.str();
  }
};

void frame(std::ostringstream& out, double x0, double y0, const std::string& title, const std::string& xlabel,
           const std::string& ylabel, double x_max) {
  const double w = kPanelW - kMarginL - kMarginR;
  const double h = kPanelH - kMarginT - kMarginB;
  const double left = x0 + kMarginL;
  const double top = y0 + kMarginT;
  out << "<text x=\"" << px(x0 + kPanelW / 2) << "\" y=\"" << px(y0 + 18) << "\" text-anchor=\"middle\" font-size=\"13\">"
      << escape(title) << "</text>\n";
  out << "<rect x=\"" << px(left) << "\" y=\"" << px(top) << "\" width=\"" << px(w) << "\" height=\"" << px(h)
      << "\" fill=\"none\" stroke=\"#444\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double y = top + h * (1.0 - k / 4.0);
    out << "<line x1=\"" << px(left - 4) << "\" y1=\"" << px(y) << "\" x2=\"" << px(left) << "\" y2=\"" << px(y)
        << "\" stroke=\"#444\"/><text x=\"" << px(left - 6) << "\" y=\"" << px(y + 4) << "\" text-anchor=\"end\">"
        << num(k / 4.0) << "</text>\n";
  }
  if (x_max > 0) {
    for (int k = 0; k <= 4; ++k) {
      const double x = left + w * k / 4.0;
      std::ostringstream tick;
      tick << std::defaultfloat;
      tick.precision(3);
      tick << x_max * k / 4.0;
      out << "<text x=\"" << px(x) << "\" y=\"" << px(top + h + 14) << "\" text-anchor=\"middle\">" << tick.str()
          << "</text>\n";
    }
  }
  out << "<text x=\"" << px(left + w / 2) << "\" y=\"" << px(top + h + 30) << "\" text-anchor=\"middle\">"
      << escape(xlabel) << "</text>\n";
  out << "<text transform=\"translate(" << px(x0 + 14) << "," << px(top + h / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
      << escape(ylabel) << "</text>\n";
}

void legend(std::ostringstream& out, double x0, double y0, std::size_t k, const std::string& label) {
  const double y = y0 + kPanelH + kLegendRow * static_cast<double>(k) - 4;
  out << "<rect x=\"" << px(x0 + kMarginL) << "\" y=\"" << px(y - 9) << "\" width=\"12\" height=\"10\" fill=\""
      << kPalette[k % std::size(kPalette)] << "\"/><text x=\"" << px(x0 + kMarginL + 18) << "\" y=\"" << px(y) << "\">"
      << escape(label) << "</text>\n";
}

}  // namespace

std::string_view to_string(Grouping g) { return g == Grouping::kSRatio ? "s_ratio" : "algorithm"; }

Grouping parse_grouping(std::string_view tag) {
  if (tag == "s_ratio") return Grouping::kSRatio;
  if (tag == "algorithm") return Grouping::kAlgorithm;
  throw ConfigError("unknown grouping '" + std::string(tag) + "' (expected s_ratio or algorithm)");
}

std::vector<Figure> layout_figures(const std::vector<Group>& groups,
                                   const std::vector<metrics::ConditionMetrics>& scores, Grouping grouping) {
  std::map<std::string, std::optional<double>> mc;
  for (const auto& row : scores) mc[row.condition_id] = row.m_c;

  std::vector<Figure> figures;
  auto figure_for = [&](const std::string& name) -> Figure& {
    for (Figure& f : figures) {
      if (f.name == name) return f;
    }
    figures.push_back({name, {}});
    return figures.back();
  };
  for (const Group& g : groups) {
    Figure& f = figure_for(grouping == Grouping::kSRatio ? g.algorithm : "all");
    auto panel = std::find_if(f.panels.begin(), f.panels.end(), [&](const Panel& p) { return p.condition == g.condition; });
    if (panel == f.panels.end()) {
      f.panels.push_back({g.condition, {}});
      panel = std::prev(f.panels.end());
    }
    const auto score = mc.find(g.group);
    panel->series.push_back({series_label(g, grouping), metrics::median_curve(g.curves, metrics::Axis::kSteps),
                             metrics::median_curve(g.curves, metrics::Axis::kWallclock),
                             score == mc.end() ? std::nullopt : score->second});
  }
  return figures;
}

std::string curve_svg(const Figure& figure, metrics::Axis axis) {
  Canvas canvas(figure);
  auto& out = canvas.body;
  for (std::size_t i = 0; i < figure.panels.size(); ++i) {
    const Panel& panel = figure.panels[i];
    const auto [x0, y0] = canvas.origin(i);
    double x_max = 0;
    for (const Series& s : panel.series) {
      const auto& c = axis == metrics::Axis::kSteps ? s.steps : s.clock;
      if (!c.grid.empty()) x_max = std::max(x_max, c.grid.back());
    }
    frame(out, x0, y0, panel.condition, axis == metrics::Axis::kSteps ? "steps" : "wall-clock (s)", "success rate",
          x_max);
    const double w = kPanelW - kMarginL - kMarginR;
    const double h = kPanelH - kMarginT - kMarginB;
    auto X = [&](double v) { return x0 + kMarginL + (x_max > 0 ? w * v / x_max : 0.0); };
    auto Y = [&](double v) { return y0 + kMarginT + h * (1.0 - v); };
    for (std::size_t k = 0; k < panel.series.size(); ++k) {
      const Series& s = panel.series[k];
      const auto& c = axis == metrics::Axis::kSteps ? s.steps : s.clock;
      const char* color = kPalette[k % std::size(kPalette)];
      // Previous-value interpolation, so draw steps; the last value runs to the right edge.
      auto trace = [&](const std::vector<double>& v, bool reverse) {
        std::vector<std::pair<double, double>> pts;
        for (std::size_t j = 0; j < c.grid.size(); ++j) {
          const double next = j + 1 < c.grid.size() ? c.grid[j + 1] : x_max;
          pts.emplace_back(X(c.grid[j]), Y(v[j]));
          pts.emplace_back(X(next), Y(v[j]));
        }
        if (reverse) std::reverse(pts.begin(), pts.end());
        std::string s;
        for (const auto& [x, y] : pts) s += px(x) + "," + px(y) + " ";
        return s;
      };
      out << "<g class=\"series\" data-label=\"" << escape(s.label) << "\">\n";
      out << "<polygon points=\"" << trace(c.q75, false) << trace(c.q25, true) << "\" fill=\"" << color
          << "\" fill-opacity=\"0.2\" stroke=\"none\"/>\n";
      out << "<polyline points=\"" << trace(c.median, false) << "\" fill=\"none\" stroke=\"" << color
          << "\" stroke-width=\"2\"/>\n</g>\n";
      legend(out, x0, y0, k, s.label + " (n=" + std::to_string(c.n_curves) + ")");
    }
  }
  return canvas.finish();
}

std::string bar_svg(const Figure& figure) {
  Canvas canvas(figure);
  auto& out = canvas.body;
  for (std::size_t i = 0; i < figure.panels.size(); ++i) {
    const Panel& panel = figure.panels[i];
    const auto [x0, y0] = canvas.origin(i);
    frame(out, x0, y0, panel.condition, "", "M_c", 0);
    const double w = kPanelW - kMarginL - kMarginR;
    const double h = kPanelH - kMarginT - kMarginB;
    const double slot = w / static_cast<double>(std::max<std::size_t>(panel.series.size(), 1));
    for (std::size_t k = 0; k < panel.series.size(); ++k) {
      const Series& s = panel.series[k];
      const double left = x0 + kMarginL + slot * static_cast<double>(k);
      const double base = y0 + kMarginT + h;
      if (s.m_c) {
        const double bar = h * *s.m_c;
        out << "<rect class=\"bar\" data-label=\"" << escape(s.label) << "\" data-value=\"" << num(*s.m_c) << "\" x=\""
            << px(left + slot * 0.15) << "\" y=\"" << px(base - bar) << "\" width=\"" << px(slot * 0.7)
            << "\" height=\"" << px(bar) << "\" fill=\"" << kPalette[k % std::size(kPalette)] << "\"/>\n";
      } else {
        out << "<text x=\"" << px(left + slot / 2) << "\" y=\"" << px(base - 4) << "\" text-anchor=\"middle\">n/a</text>\n";
      }
      out << "<text x=\"" << px(left + slot / 2) << "\" y=\"" << px(base + 14) << "\" text-anchor=\"middle\" font-size=\"9\">"
          << escape(s.label) << "</text>\n";
    }
  }
  return canvas.finish();
}

std::vector<fs::path> emit_plots(const std::vector<Group>& groups, const std::vector<metrics::ConditionMetrics>& scores,
                                 const fs::path& out_dir, Grouping grouping) {
  fs::create_directories(out_dir);
  std::vector<fs::path> written;
  auto write = [&](const fs::path& p, const std::string& body) {
    std::ofstream out(p, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    out << body;
    written.push_back(p);
  };
  for (const Figure& f : layout_figures(groups, scores, grouping)) {
    write(out_dir / (f.name + "_steps.svg"), curve_svg(f, metrics::Axis::kSteps));
    write(out_dir / (f.name + "_clock.svg"), curve_svg(f, metrics::Axis::kWallclock));
    write(out_dir / (f.name + "_mc.svg"), bar_svg(f));
  }
  return written;
}

}  // namespace meher::lab
