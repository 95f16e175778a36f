#include "meher/metrics/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "meher/errors.hpp"

namespace meher::metrics {

namespace {

constexpr double kSumTolerance = 1e-9;
constexpr double kThresholdFraction = 0.95;

std::string number(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

double parse_double(const std::string& s) {
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw ConfigError("bad number '" + s + "' in CSV");
  return v;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

constexpr const char* kCurveHeader = "step,eval_success_rate,rolling_success_rate,mode,achieved_s_ratio";
constexpr const char* kTimingHeader = "step,wallclock_s";

double position(const CurvePoint& p, Axis axis) {
  return axis == Axis::kSteps ? static_cast<double>(p.step) : p.wallclock_s;
}

}  // namespace

double entropy_bits(std::span<const double> distribution) {
  if (distribution.empty()) throw UsageError("entropy of an empty distribution");
  double total = 0.0;
  for (double p : distribution) {
    if (!(p >= 0.0)) throw UsageError("probabilities must be non-negative");
    total += p;
  }
  if (std::abs(total - 1.0) > kSumTolerance) throw UsageError("probabilities must sum to 1");
  double h = 0.0;
  for (double p : distribution) {
    if (p > 0.0) h -= p * std::log2(p);
  }
  return h;
}

void LearningCurve::validate() const {
  for (std::size_t i = 0; i < points.size(); ++i) {
    const CurvePoint& p = points[i];
    if (i > 0 && p.step <= points[i - 1].step) throw UsageError("curve steps must strictly increase");
    for (double r : {p.eval_success_rate, p.rolling_success_rate}) {
      if (!(r >= 0.0 && r <= 1.0)) throw UsageError("success rates must lie in [0, 1]");
    }
  }
}

void write_curve_csv(std::ostream& out, const LearningCurve& curve) {
  out << kCurveHeader << '\n';
  for (const CurvePoint& p : curve.points) {
    out << p.step << ',' << number(p.eval_success_rate) << ',' << number(p.rolling_success_rate) << ','
        << p.mode << ',' << number(p.achieved_s_ratio) << '\n';
  }
}

LearningCurve read_curve_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kCurveHeader) throw ConfigError("not a learning-curve CSV");
  LearningCurve curve;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::vector<std::string> cells = split(line);
    if (cells.size() != 5) throw ConfigError("learning-curve row has " + std::to_string(cells.size()) + " cells");
    CurvePoint p;
    p.step = static_cast<std::uint64_t>(parse_double(cells[0]));
    p.eval_success_rate = parse_double(cells[1]);
    p.rolling_success_rate = parse_double(cells[2]);
    p.mode = cells[3];
    p.achieved_s_ratio = parse_double(cells[4]);
    curve.points.push_back(p);
  }
  curve.validate();
  return curve;
}

void write_timing_csv(std::ostream& out, const LearningCurve& curve) {
  out << kTimingHeader << '\n';
  for (const CurvePoint& p : curve.points) out << p.step << ',' << number(p.wallclock_s) << '\n';
}

void merge_timing_csv(std::istream& in, LearningCurve& curve) {
  std::string line;
  if (!std::getline(in, line) || line != kTimingHeader) throw ConfigError("not a timing CSV");
  std::map<std::uint64_t, double> seconds;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::vector<std::string> cells = split(line);
    if (cells.size() != 2) throw ConfigError("timing row needs 2 cells");
    seconds[static_cast<std::uint64_t>(parse_double(cells[0]))] = parse_double(cells[1]);
  }
  for (CurvePoint& p : curve.points) {
    auto it = seconds.find(p.step);
    if (it == seconds.end()) throw ConfigError("timing file misses step " + std::to_string(p.step));
    p.wallclock_s = it->second;
  }
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw UsageError("percentile of no values");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

MedianCurve median_curve(std::span<const LearningCurve> curves, Axis axis) {
  if (curves.empty()) throw UsageError("median_curve needs at least one curve");
  MedianCurve out;
  out.n_curves = curves.size();
  for (const LearningCurve& c : curves) {
    for (const CurvePoint& p : c.points) out.grid.push_back(position(p, axis));
  }
  std::sort(out.grid.begin(), out.grid.end());
  out.grid.erase(std::unique(out.grid.begin(), out.grid.end()), out.grid.end());
  if (out.grid.empty()) throw UsageError("median_curve needs at least one checkpoint");

  std::vector<std::size_t> cursor(curves.size(), 0);
  for (double x : out.grid) {
    std::vector<double> values;
    for (std::size_t i = 0; i < curves.size(); ++i) {
      const auto& pts = curves[i].points;
      while (cursor[i] < pts.size() && position(pts[cursor[i]], axis) <= x) ++cursor[i];
      if (cursor[i] > 0) values.push_back(pts[cursor[i] - 1].eval_success_rate);
    }
    out.median.push_back(percentile(values, 0.5));
    out.q25.push_back(percentile(values, 0.25));
    out.q75.push_back(percentile(values, 0.75));
  }
  return out;
}

CurveSummary summarize(const MedianCurve& curve) {
  if (curve.median.empty()) throw UsageError("summarize needs a non-empty median curve");
  CurveSummary s;
  s.r_c = *std::max_element(curve.median.begin(), curve.median.end());
  const double threshold = kThresholdFraction * s.r_c;
  for (std::size_t i = 0; i < curve.median.size(); ++i) {
    if (curve.median[i] >= threshold) {
      s.t_c = curve.grid[i];
      break;
    }
  }
  return s;
}

std::optional<double> m_c(double r_c, double t_c, double max_r, double max_t) {
  if (!(max_r > 0.0) || !(max_t > 0.0)) return std::nullopt;
  return r_c / max_r * (1.0 - t_c / max_t);
}

void score_conditions(std::span<ConditionMetrics> conditions) {
  double max_r = 0.0;
  double max_t = 0.0;
  for (const ConditionMetrics& c : conditions) {
    max_r = std::max(max_r, c.r_c);
    max_t = std::max(max_t, c.t_c);
  }
  for (ConditionMetrics& c : conditions) c.m_c = m_c(c.r_c, c.t_c, max_r, max_t);
}

void write_metrics_csv(std::ostream& out, std::span<const ConditionMetrics> rows) {
  out << "condition_id,spawner,prey_policy,algorithm,s_ratio,R_c,T_c,M_c,n_seeds\n";
  for (const ConditionMetrics& r : rows) {
    out << r.condition_id << ',' << r.spawner << ',' << r.prey_policy << ',' << r.algorithm << ','
        << (r.s_ratio ? number(*r.s_ratio) : std::string()) << ',' << number(r.r_c) << ',' << number(r.t_c) << ','
        << (r.m_c ? number(*r.m_c) : std::string("undefined")) << ',' << r.n_seeds << '\n';
  }
}

}  // namespace meher::metrics
