#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace meher::metrics {

/// Shannon entropy in bits, with 0 log 0 = 0. Throws UsageError unless the
/// entries are non-negative and sum to 1 within 1e-9.
double entropy_bits(std::span<const double> distribution);

struct CurvePoint {
  std::uint64_t step = 0;
  double eval_success_rate = 0.0;
  double rolling_success_rate = 0.0;
  double wallclock_s = 0.0;
  std::string mode;
  double achieved_s_ratio = 0.0;
};

struct LearningCurve {
  std::vector<CurvePoint> points;

  /// Throws UsageError unless steps strictly increase and rates lie in [0, 1].
  void validate() const;
};

/// Deterministic columns only; timing lives in a separate file so reruns
/// produce identical bytes.
void write_curve_csv(std::ostream& out, const LearningCurve& curve);
LearningCurve read_curve_csv(std::istream& in);
void write_timing_csv(std::ostream& out, const LearningCurve& curve);
/// Fills wallclock_s of `curve` from a timing file, matching rows by step.
void merge_timing_csv(std::istream& in, LearningCurve& curve);

enum class Axis { kSteps, kWallclock };

struct MedianCurve {
  std::vector<double> grid;
  std::vector<double> median;
  std::vector<double> q25;
  std::vector<double> q75;
  std::size_t n_curves = 0;
};

/// Linear interpolation between closest ranks (numpy's default).
double percentile(std::vector<double> values, double q);

/// Median and quartiles of evaluation success across curves on the union of
/// their checkpoints. Each curve holds its previous value between (and after)
/// its own checkpoints and is left out before its first one.
MedianCurve median_curve(std::span<const LearningCurve> curves, Axis axis = Axis::kSteps);

struct CurveSummary {
  double r_c = 0.0;  // maximum median success
  double t_c = 0.0;  // first grid position where the median reaches 0.95 r_c
};

CurveSummary summarize(const MedianCurve& curve);

/// R_c / max(R_C) * (1 - T_c / max(T_C)); empty when either maximum is 0.
std::optional<double> m_c(double r_c, double t_c, double max_r, double max_t);

struct ConditionMetrics {
  std::string condition_id;
  std::string spawner;
  std::string prey_policy;
  std::string algorithm;
  std::optional<double> s_ratio;  // MEHER cells only
  double r_c = 0.0;
  double t_c = 0.0;
  std::optional<double> m_c;
  std::size_t n_seeds = 0;
};

/// Fills m_c of every entry using the maxima over `conditions`.
void score_conditions(std::span<ConditionMetrics> conditions);

void write_metrics_csv(std::ostream& out, std::span<const ConditionMetrics> rows);

}  // namespace meher::metrics
