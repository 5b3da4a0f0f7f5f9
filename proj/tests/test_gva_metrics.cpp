#include <gtest/gtest.h>

#include <cmath>

#include "gva/errors.hpp"
#include "gva/gva_metrics.hpp"

using namespace gva;

namespace {

TrainingCurve curve_of(const std::vector<double>& rewards, std::size_t stride = 10) {
  TrainingCurve c;
  for (std::size_t i = 0; i < rewards.size(); ++i)
    c.push_back(CurvePoint{i * stride, rewards[i], 1.0 / (1.0 + i)});
  return c;
}

}  // namespace

TEST(Threshold, SignAware) {
  EXPECT_DOUBLE_EQ(near_best_threshold(100.0), 95.0);
  EXPECT_DOUBLE_EQ(near_best_threshold(-100.0), -105.0);
  EXPECT_DOUBLE_EQ(near_best_threshold(0.0), 0.0);
}

TEST(Summarize, FlatCurve) {
  const GvaSummary s = summarize(curve_of(std::vector<double>(9, 5.0)));
  EXPECT_EQ(s.j_max, 5.0);
  EXPECT_EQ(s.range_mid, 0.0);
  EXPECT_EQ(s.mu_mid, 5.0);
  ASSERT_TRUE(s.t_early.has_value());
  EXPECT_EQ(*s.t_early, 0.0);
  EXPECT_FALSE(s.t_worse.has_value());
}

TEST(Summarize, HandExample) {
  // steps 0..80, middle window [20, 60] holds indices 2..6
  const std::vector<double> r{0, 50, 100, 20, 99, 40, 96, 90, 97};
  const GvaSummary s = summarize(curve_of(r));
  EXPECT_EQ(s.j_max, 100.0);
  EXPECT_EQ(s.j_final, 97.0);
  EXPECT_DOUBLE_EQ(s.mu_mid, (100.0 + 20 + 99 + 40 + 96) / 5.0);
  EXPECT_EQ(s.range_mid, 80.0);
  EXPECT_DOUBLE_EQ(*s.t_early, 20.0 / 80.0);
  EXPECT_DOUBLE_EQ(*s.t_worse, 70.0 / 80.0);  // last record below 95
  EXPECT_DOUBLE_EQ(s.loss_min, 1.0 / 9.0);
  EXPECT_DOUBLE_EQ(s.loss_final, 1.0 / 9.0);
}

TEST(Summarize, Rejects) {
  EXPECT_THROW(summarize(curve_of({1, 2, 3})), ArgumentError);
  TrainingCurve c = curve_of({1, 2, 3, 4});
  c[2].step = c[1].step;
  EXPECT_THROW(summarize(c), ArgumentError);
}

TEST(Median, LowerMedianAndMissingAsInfinity) {
  std::vector<GvaSummary> v(4);
  const double vals[4] = {4, 1, 3, 2};
  for (int i = 0; i < 4; ++i) {
    v[i].j_max = vals[i];
    v[i].range_mid = 10 * vals[i];
  }
  v[0].t_worse = 0.5;
  v[1].t_worse = 0.7;
  const GvaSummary m = median_over_seeds(v);
  EXPECT_EQ(m.j_max, 2.0);
  EXPECT_EQ(m.range_mid, 20.0);
  ASSERT_TRUE(m.t_worse.has_value());
  EXPECT_EQ(*m.t_worse, 0.7);
  v[1].t_worse.reset();
  EXPECT_FALSE(median_over_seeds(v).t_worse.has_value());
  EXPECT_THROW(median_over_seeds({}), ArgumentError);
}

TEST(Compare, RatioAndDeltas) {
  GvaSummary raw, ema;
  raw.range_mid = 4.0;
  ema.range_mid = 1.0;
  raw.mu_mid = 10.0;
  ema.mu_mid = 12.0;
  const Comparison c = compare(raw, ema);
  EXPECT_EQ(c.oscillation_ratio, 0.25);
  EXPECT_EQ(c.d_mu_mid, 2.0);
  raw.range_mid = 0.0;
  ema.range_mid = 0.0;
  EXPECT_EQ(compare(raw, ema).oscillation_ratio, 1.0);
  ema.range_mid = 1.0;
  EXPECT_TRUE(std::isinf(compare(raw, ema).oscillation_ratio));
}

TEST(SummaryTable, ColumnsAndRendering) {
  GvaSummary s = summarize(curve_of({0, 50, 100, 20, 99, 40, 96, 90, 97}));
  const CsvTable t = summary_table({{"a/raw", s, std::nullopt}, {"a/ema", s, 0.5}});
  EXPECT_EQ(t.header.back(), "oscillation_ratio");
  EXPECT_EQ(t.rows[0].back(), "-");
  EXPECT_EQ(parse_real(t.rows[1].back()), 0.5);
  const CsvTable plain = summary_table({{"a", s, std::nullopt}});
  EXPECT_EQ(plain.header.size(), 9u);
  const std::string text = format_table(t);
  EXPECT_NE(text.find("a/ema"), std::string::npos);
  EXPECT_NE(text.find("-----"), std::string::npos);
}
