#include "vecsim/metrics.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace {

using vecsim::BoxStats;
using vecsim::EpisodeMetrics;
using vecsim::SlotObservation;

SlotObservation obs(int n_total, int n_off, int n_local, int overload,
                    double energy) {
  SlotObservation o;
  o.n_total = n_total;
  o.n_off = n_off;
  o.n_local = n_local;
  o.overload = overload;
  o.energy_j = energy;
  return o;
}

TEST(Metrics, OverloadRatioHandAverage) {
  // Per vehicle-slot normalized overloads 0, 0.5, 1, 0.5.
  std::vector<SlotObservation> v = {
      obs(4, 0, 4, 0, 0.0),
      obs(4, 0, 4, 2, 0.0),
      obs(3, 0, 3, 3, 0.0),
      obs(2, 0, 2, 1, 0.0),
  };
  EXPECT_DOUBLE_EQ(vecsim::overload_ratio(v), 0.5);
}

TEST(Metrics, ZeroTotalSlotsCountInDenominator) {
  std::vector<SlotObservation> v = {
      obs(2, 0, 2, 2, 0.0),
      obs(0, 0, 0, 0, 0.0),
  };
  EXPECT_DOUBLE_EQ(vecsim::overload_ratio(v), 0.5);
  std::vector<SlotObservation> w = {
      obs(2, 2, 0, 0, 0.0),
      obs(0, 0, 0, 0, 0.0),
  };
  EXPECT_DOUBLE_EQ(vecsim::offloading_efficiency_pct(w), 50.0);
}

TEST(Metrics, EfficiencyHalfSlotsHalfOffloaded) {
  std::vector<SlotObservation> v = {
      obs(4, 2, 2, 0, 0.0),
      obs(6, 3, 3, 0, 0.0),
      obs(5, 0, 5, 0, 0.0),
      obs(2, 0, 2, 0, 0.0),
  };
  EXPECT_DOUBLE_EQ(vecsim::offloading_efficiency_pct(v), 25.0);
}

TEST(Metrics, RatiosOfEmptyInputAreZero) {
  EXPECT_DOUBLE_EQ(vecsim::overload_ratio({}), 0.0);
  EXPECT_DOUBLE_EQ(vecsim::offloading_efficiency_pct({}), 0.0);
}

TEST(Metrics, QuartilesOfOneToHundred) {
  std::vector<double> xs(100);
  for (int i = 0; i < 100; ++i) xs[i] = i + 1.0;
  EXPECT_DOUBLE_EQ(vecsim::quantile_sorted(xs, 0.25), 25.75);
  EXPECT_DOUBLE_EQ(vecsim::quantile_sorted(xs, 0.5), 50.5);
  EXPECT_DOUBLE_EQ(vecsim::quantile_sorted(xs, 0.75), 75.25);
  EXPECT_DOUBLE_EQ(vecsim::quantile_sorted(xs, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(vecsim::quantile_sorted(xs, 1.0), 100.0);
}

TEST(Metrics, QuantileEdges) {
  EXPECT_DOUBLE_EQ(vecsim::quantile_sorted({7.0}, 0.5), 7.0);
  EXPECT_THROW(vecsim::quantile_sorted({}, 0.5), vecsim::MetricsError);
  EXPECT_THROW(vecsim::quantile_sorted({1.0}, 1.5), vecsim::MetricsError);
}

TEST(Metrics, BoxStatsNoOutliers) {
  std::vector<double> xs(100);
  for (int i = 0; i < 100; ++i) xs[i] = i + 1.0;
  BoxStats b = vecsim::box_stats(xs);
  EXPECT_EQ(b.n, 100u);
  EXPECT_DOUBLE_EQ(b.mean, 50.5);
  EXPECT_DOUBLE_EQ(b.q1, 25.75);
  EXPECT_DOUBLE_EQ(b.median, 50.5);
  EXPECT_DOUBLE_EQ(b.q3, 75.25);
  EXPECT_DOUBLE_EQ(b.whisker_lo, 1.0);
  EXPECT_DOUBLE_EQ(b.whisker_hi, 100.0);
  EXPECT_TRUE(b.outliers.empty());
}

TEST(Metrics, BoxStatsFlagsOutlier) {
  std::vector<double> xs = {1, 2, 3, 4, 5, 6, 7, 8, 9, 1000};
  BoxStats b = vecsim::box_stats(xs);
  EXPECT_DOUBLE_EQ(b.q1, 3.25);
  EXPECT_DOUBLE_EQ(b.median, 5.5);
  EXPECT_DOUBLE_EQ(b.q3, 7.75);
  // Upper fence is 7.75 + 1.5 * 4.5 = 14.5, so 1000 falls outside.
  EXPECT_DOUBLE_EQ(b.whisker_lo, 1.0);
  EXPECT_DOUBLE_EQ(b.whisker_hi, 9.0);
  ASSERT_EQ(b.outliers.size(), 1u);
  EXPECT_DOUBLE_EQ(b.outliers[0], 1000.0);
  EXPECT_DOUBLE_EQ(b.mean, 104.5);
}

TEST(Metrics, SummarizeEpisodeHandCase) {
  std::vector<double> rewards = {-1.0, -3.0};
  std::vector<SlotObservation> v = {
      obs(4, 2, 1, 0, 1.5),
      obs(2, 1, 1, 0, 0.5),
      obs(0, 0, 0, 0, 0.25),
      obs(3, 3, 0, 2, 0.75),
  };
  EpisodeMetrics m = vecsim::summarize_episode(7, "sac", rewards, v);
  EXPECT_EQ(m.episode, 7);
  EXPECT_EQ(m.agent, "sac");
  EXPECT_DOUBLE_EQ(m.mean_reward, -2.0);
  EXPECT_DOUBLE_EQ(m.mean_energy_j, 1.5);
  EXPECT_EQ(m.computation_count, 8);
  EXPECT_EQ(m.offload_count, 6);
  EXPECT_DOUBLE_EQ(m.overload_ratio, (2.0 / 3.0) / 4.0);
  EXPECT_DOUBLE_EQ(m.offload_efficiency_pct, 50.0);
}

TEST(Metrics, SummarizeRejectsRaggedInput) {
  EXPECT_THROW(
      vecsim::summarize_episode(0, "sac", {-1.0, -2.0}, {obs(1, 0, 1, 0, 0)}),
      vecsim::MetricsError);
  EXPECT_THROW(vecsim::summarize_episode(0, "sac", {}, {}),
               vecsim::MetricsError);
}

TEST(Metrics, EpisodeCsvRowFormat) {
  EpisodeMetrics m;
  m.episode = 3;
  m.agent = "td3";
  m.mean_energy_j = 1.5;
  m.mean_reward = -0.125;
  m.computation_count = 42;
  m.offload_count = 17;
  m.overload_ratio = 0.25;
  m.offload_efficiency_pct = 12.5;
  EXPECT_EQ(vecsim::episode_csv_row(m), "3,td3,1.5,-0.125,42,17,0.25,12.5");
}

TEST(Metrics, G17RoundTripsDoubles) {
  const double v = 0.1 + 0.2;
  EXPECT_EQ(std::stod(vecsim::format_g17(v)), v);
  EXPECT_EQ(vecsim::format_g17(2.0), "2");
}

TEST(Metrics, EpisodesCsvFileRoundTrip) {
  const std::string path = testing::TempDir() + "/episodes_test.csv";
  EpisodeMetrics m;
  m.episode = 1;
  m.agent = "random";
  m.mean_energy_j = 0.5;
  vecsim::write_episodes_csv(path, {m});
  std::ifstream in(path);
  ASSERT_TRUE(in);
  std::string header, row, extra;
  ASSERT_TRUE(std::getline(in, header));
  EXPECT_EQ(header, vecsim::kEpisodesHeader);
  ASSERT_TRUE(std::getline(in, row));
  EXPECT_EQ(row, "1,random,0.5,0,0,0,0,0");
  EXPECT_FALSE(std::getline(in, extra));
}

TEST(Metrics, BoxStatsCsvWellFormed) {
  const std::string path = testing::TempDir() + "/boxstats_test.csv";
  vecsim::LabeledBoxStats row;
  row.agent = "sac";
  row.metric = "mean_energy_j";
  row.stats = vecsim::box_stats({1, 2, 3, 4, 5, 6, 7, 8, 9, 1000});
  vecsim::write_boxstats_csv(path, {row});
  std::ifstream in(path);
  ASSERT_TRUE(in);
  std::string header, line;
  ASSERT_TRUE(std::getline(in, header));
  EXPECT_EQ(header, vecsim::kBoxStatsHeader);
  ASSERT_TRUE(std::getline(in, line));
  EXPECT_EQ(line, "sac,mean_energy_j,10,104.5,3.25,5.5,7.75,1,9,1");
}

TEST(Metrics, HeadAndTailMeans) {
  std::vector<double> xs(10);
  for (int i = 0; i < 10; ++i) xs[i] = i + 1.0;
  EXPECT_DOUBLE_EQ(vecsim::tail_mean(xs, 0.1), 10.0);
  EXPECT_DOUBLE_EQ(vecsim::head_mean(xs, 0.1), 1.0);
  // ceil(2.5) = 3 elements at fraction 0.25.
  EXPECT_DOUBLE_EQ(vecsim::tail_mean(xs, 0.25), 9.0);
  EXPECT_DOUBLE_EQ(vecsim::head_mean(xs, 0.25), 2.0);
  EXPECT_DOUBLE_EQ(vecsim::tail_mean({5.0}, 0.1), 5.0);
  EXPECT_THROW(vecsim::tail_mean({}, 0.1), vecsim::MetricsError);
}

}  // namespace
