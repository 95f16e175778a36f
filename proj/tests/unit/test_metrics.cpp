#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "meher/errors.hpp"
#include "meher/metrics/metrics.hpp"

namespace meher::metrics {
namespace {

LearningCurve constant_curve(double rate, std::initializer_list<std::uint64_t> steps) {
  LearningCurve c;
  for (std::uint64_t s : steps) c.points.push_back({s, rate, rate, 0.0, "PPO", 0.0});
  return c;
}

LearningCurve curve_of(std::initializer_list<std::pair<std::uint64_t, double>> pts) {
  LearningCurve c;
  for (auto [s, r] : pts) c.points.push_back({s, r, r, static_cast<double>(s) / 1000.0, "PPO", 0.0});
  return c;
}

TEST(Entropy, Examples) {
  const double half[] = {0.5, 0.5};
  EXPECT_EQ(entropy_bits(half), 1.0);
  const double delta[] = {1.0, 0.0};
  EXPECT_EQ(entropy_bits(delta), 0.0);
  const double delta4[] = {0.0, 0.0, 1.0, 0.0};
  EXPECT_EQ(entropy_bits(delta4), 0.0);
  const double skew[] = {0.6, 0.4};
  // -0.6 log2 0.6 - 0.4 log2 0.4
  EXPECT_NEAR(entropy_bits(skew), 0.970951, 5e-7);
  const double uniform4[] = {0.25, 0.25, 0.25, 0.25};
  EXPECT_DOUBLE_EQ(entropy_bits(uniform4), 2.0);
}

TEST(Entropy, InvalidDistributions) {
  const double negative[] = {1.2, -0.2};
  EXPECT_THROW(entropy_bits(negative), UsageError);
  const double short_sum[] = {0.5, 0.4};
  EXPECT_THROW(entropy_bits(short_sum), UsageError);
  EXPECT_THROW(entropy_bits({}), UsageError);
}

TEST(Entropy, BinarySymmetricAndUnimodal) {
  double previous = -1.0;
  for (int k = 0; k <= 100; ++k) {
    const double p = k / 100.0;
    const double a[] = {p, 1.0 - p};
    const double b[] = {1.0 - p, p};
    EXPECT_EQ(entropy_bits(a), entropy_bits(b));
    const double h = entropy_bits(a);
    if (k <= 50) {
      EXPECT_GT(h, previous);
    } else {
      EXPECT_LT(h, previous);
    }
    previous = h;
  }
}

TEST(Percentile, LinearBetweenRanks) {
  EXPECT_DOUBLE_EQ(percentile({0.2, 0.5, 0.8}, 0.5), 0.5);
  EXPECT_DOUBLE_EQ(percentile({0.8, 0.2, 0.5}, 0.25), 0.35);
  EXPECT_DOUBLE_EQ(percentile({0.2, 0.5, 0.8}, 0.75), 0.65);
  EXPECT_DOUBLE_EQ(percentile({1.0, 2.0, 3.0, 4.0}, 0.5), 2.5);
  EXPECT_EQ(percentile({7.0}, 0.25), 7.0);
  EXPECT_THROW(percentile({}, 0.5), UsageError);
}

TEST(MedianCurve, ThreeConstantCurves) {
  const std::vector<LearningCurve> cs{constant_curve(0.2, {0, 10, 20}), constant_curve(0.5, {0, 10, 20}),
                                      constant_curve(0.8, {0, 10, 20})};
  const MedianCurve m = median_curve(cs);
  ASSERT_EQ(m.grid.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_DOUBLE_EQ(m.median[i], 0.5);
    EXPECT_DOUBLE_EQ(m.q25[i], 0.35);
    EXPECT_DOUBLE_EQ(m.q75[i], 0.65);
  }
}

TEST(MedianCurve, IdenticalAndSingleCurves) {
  const LearningCurve c = curve_of({{0, 0.0}, {5, 0.3}, {9, 0.7}});
  const std::vector<LearningCurve> same{c, c, c, c};
  const MedianCurve m = median_curve(same);
  for (std::size_t i = 0; i < m.grid.size(); ++i) {
    EXPECT_EQ(m.q25[i], m.q75[i]);
    EXPECT_EQ(m.median[i], c.points[i].eval_success_rate);
  }
  const std::vector<LearningCurve> one{c};
  const MedianCurve s = median_curve(one);
  EXPECT_EQ(s.median, (std::vector<double>{0.0, 0.3, 0.7}));
  EXPECT_THROW(median_curve(std::vector<LearningCurve>{}), UsageError);
}

TEST(MedianCurve, PreviousValueOnUnionGrid) {
  // The second curve stopped early and holds its last value.
  const std::vector<LearningCurve> cs{curve_of({{0, 0.0}, {10, 0.2}, {20, 0.4}, {30, 0.6}}),
                                      curve_of({{0, 0.0}, {10, 1.0}})};
  const MedianCurve m = median_curve(cs);
  EXPECT_EQ(m.grid, (std::vector<double>{0, 10, 20, 30}));
  EXPECT_DOUBLE_EQ(m.median[2], 0.7);
  EXPECT_DOUBLE_EQ(m.median[3], 0.8);

  const MedianCurve clock = median_curve(cs, Axis::kWallclock);
  EXPECT_EQ(clock.grid, (std::vector<double>{0.0, 0.01, 0.02, 0.03}));
}

TEST(Summary, RcAndTc) {
  const std::vector<LearningCurve> cs{curve_of({{0, 0.0}, {100, 0.5}, {200, 0.96}, {300, 1.0}, {400, 0.9}})};
  const CurveSummary s = summarize(median_curve(cs));
  EXPECT_EQ(s.r_c, 1.0);
  EXPECT_EQ(s.t_c, 200.0);
}

TEST(Mc, EquationFixtures) {
  EXPECT_DOUBLE_EQ(*m_c(1.0, 100, 1.0, 200), 0.5);
  EXPECT_DOUBLE_EQ(*m_c(0.5, 200, 1.0, 200), 0.0);
  EXPECT_EQ(*m_c(0.8, 300, 0.8, 300), 0.0);
  EXPECT_EQ(*m_c(0.8, 0, 0.8, 300), 1.0);
  EXPECT_FALSE(m_c(0.0, 10, 0.0, 10).has_value());
  EXPECT_FALSE(m_c(0.5, 0, 0.5, 0).has_value());
}

TEST(Mc, ScoredConditionSet) {
  std::vector<ConditionMetrics> cs(2);
  cs[0].r_c = 1.0;
  cs[0].t_c = 100;
  cs[1].r_c = 0.5;
  cs[1].t_c = 200;
  score_conditions(cs);
  EXPECT_DOUBLE_EQ(*cs[0].m_c, 0.5);
  EXPECT_DOUBLE_EQ(*cs[1].m_c, 0.0);
}

TEST(Mc, FlatZeroCurveScoresZero) {
  const std::vector<LearningCurve> flat{constant_curve(0.0, {0, 100, 200})};
  const CurveSummary s = summarize(median_curve(flat));
  EXPECT_EQ(s.r_c, 0.0);
  EXPECT_EQ(*m_c(s.r_c, s.t_c, 1.0, 300), 0.0);
}

TEST(Mc, NonLearnerLooksFast) {
  // A learner that climbs to 1.0, and a flat 0.6 curve that never improves.
  const std::vector<LearningCurve> learner{curve_of({{0, 0.0}, {100, 0.3}, {200, 0.7}, {300, 1.0}})};
  const std::vector<LearningCurve> flat{constant_curve(0.6, {0, 100, 200, 300})};
  std::vector<ConditionMetrics> cs(2);
  const CurveSummary a = summarize(median_curve(learner));
  const CurveSummary b = summarize(median_curve(flat));
  cs[0].r_c = a.r_c;
  cs[0].t_c = a.t_c;
  cs[1].r_c = b.r_c;
  cs[1].t_c = b.t_c;
  score_conditions(cs);
  EXPECT_EQ(b.t_c, 0.0);
  EXPECT_EQ(*cs[0].m_c, 0.0);
  EXPECT_DOUBLE_EQ(*cs[1].m_c, 0.6);
  EXPECT_GT(*cs[1].m_c, *cs[0].m_c);
}

TEST(Mc, BoundedOnRandomSets) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<ConditionMetrics> cs(1 + rng() % 6);
    for (auto& c : cs) {
      c.r_c = u(rng);
      c.t_c = std::floor(u(rng) * 1000.0);
    }
    score_conditions(cs);
    for (const auto& c : cs) {
      if (!c.m_c) continue;
      EXPECT_GE(*c.m_c, 0.0);
      EXPECT_LE(*c.m_c, 1.0);
    }
  }
}

TEST(CurveCsv, RoundTripAndTiming) {
  LearningCurve c = curve_of({{0, 0.0}, {2048, 0.125}, {4096, 1.0 / 3.0}});
  c.points[1].mode = "PPO_HER";
  c.points[2].achieved_s_ratio = 0.6000000000000001;
  std::ostringstream curve_out;
  std::ostringstream timing_out;
  write_curve_csv(curve_out, c);
  write_timing_csv(timing_out, c);
  EXPECT_EQ(curve_out.str().find("wallclock"), std::string::npos);

  std::istringstream curve_in(curve_out.str());
  LearningCurve back = read_curve_csv(curve_in);
  std::istringstream timing_in(timing_out.str());
  merge_timing_csv(timing_in, back);
  ASSERT_EQ(back.points.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(back.points[i].step, c.points[i].step);
    EXPECT_EQ(back.points[i].eval_success_rate, c.points[i].eval_success_rate);
    EXPECT_EQ(back.points[i].mode, c.points[i].mode);
    EXPECT_EQ(back.points[i].achieved_s_ratio, c.points[i].achieved_s_ratio);
    EXPECT_EQ(back.points[i].wallclock_s, c.points[i].wallclock_s);
  }
  std::istringstream bad("step,foo\n");
  EXPECT_THROW(read_curve_csv(bad), ConfigError);
}

TEST(CurveCsv, Validation) {
  LearningCurve c = curve_of({{10, 0.0}, {10, 0.5}});
  EXPECT_THROW(c.validate(), UsageError);
  c = curve_of({{0, 1.5}});
  EXPECT_THROW(c.validate(), UsageError);
}

TEST(MetricsCsv, Columns) {
  std::vector<ConditionMetrics> rows(2);
  rows[0] = {"SpawnApart/Attract/MEHER_Uniform/0.6", "SpawnApart", "Attract", "MEHER_Uniform", 0.6, 1.0, 4096, 0.5, 5};
  rows[1] = {"SpawnApart/Attract/PPO", "SpawnApart", "Attract", "PPO", std::nullopt, 0.0, 0, std::nullopt, 5};
  std::ostringstream out;
  write_metrics_csv(out, rows);
  EXPECT_EQ(out.str(),
            "condition_id,spawner,prey_policy,algorithm,s_ratio,R_c,T_c,M_c,n_seeds\n"
            "SpawnApart/Attract/MEHER_Uniform/0.6,SpawnApart,Attract,MEHER_Uniform,0.6,1,4096,0.5,5\n"
            "SpawnApart/Attract/PPO,SpawnApart,Attract,PPO,,0,0,undefined,5\n");
}

}  // namespace
}  // namespace meher::metrics
