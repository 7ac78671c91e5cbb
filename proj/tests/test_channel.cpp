#include "vecsim/channel.hpp"

#include <cmath>

#include <gtest/gtest.h>

using vecsim::ChannelSample;
using vecsim::Rng;
using vecsim::SimConfig;
using vecsim::StreamPurpose;

namespace {

const double kRelTol = 1e-9;

void expect_rel(double got, double want) {
  EXPECT_NEAR(got, want, std::abs(want) * kRelTol + 1e-300);
}

}  // namespace

TEST(Channel, PathLossFrozenValues) {
  expect_rel(vecsim::path_loss_db(1000.0), 128.1);
  expect_rel(vecsim::path_loss_db(100.0), 90.5);
  expect_rel(vecsim::path_loss_db(2000.0), 139.4187278369657);
  expect_rel(vecsim::path_loss_db(250.0), 105.46254432606861);
}

TEST(Channel, NoiseConversion) {
  expect_rel(vecsim::noise_watts(-114.0), 3.9810717055349695e-15);
  expect_rel(vecsim::noise_watts(30.0), 1.0);  // 30 dBm is one watt
}

TEST(Channel, GainComposition) {
  SimConfig c = vecsim::default_config();
  Rng rng = Rng::stream(1, StreamPurpose::kChannel);
  for (int i = 0; i < 1000; ++i) {
    const ChannelSample s = vecsim::sample_channel(300.0, c, rng);
    const double expect = std::pow(10.0, -s.path_loss_db / 10.0) *
                          std::pow(10.0, s.shadow_db / 10.0) * s.fading;
    expect_rel(s.gain, expect);
    EXPECT_GT(s.gain, 0.0);
    EXPECT_GE(s.fading, 1e-12);
  }
}

TEST(Channel, NoShadowNoFadeGainIsPurePathLoss) {
  SimConfig c = vecsim::default_config();
  c.shadow_std_db = 0.0;
  Rng rng = Rng::stream(2, StreamPurpose::kChannel);
  const ChannelSample s = vecsim::sample_channel(1000.0, c, rng);
  expect_rel(s.gain / s.fading, 1.5488166189124858e-13);
}

TEST(Channel, ShadowAndFadeStatistics) {
  SimConfig c = vecsim::default_config();
  Rng rng = Rng::stream(3, StreamPurpose::kChannel);
  const int n = 1000000;
  double sh_sum = 0.0, sh_sq = 0.0, fade_sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const ChannelSample s = vecsim::sample_channel(200.0, c, rng);
    sh_sum += s.shadow_db;
    sh_sq += s.shadow_db * s.shadow_db;
    fade_sum += s.fading;
  }
  const double mean = sh_sum / n;
  const double std = std::sqrt(sh_sq / n - mean * mean);
  EXPECT_NEAR(mean, 0.0, 0.05);
  EXPECT_NEAR(std, 8.0, 0.1);
  EXPECT_NEAR(fade_sum / n, 1.0, 0.01);
}

TEST(Channel, RateFrozenValue) {
  SimConfig c = vecsim::default_config();  // bandwidth 2e6 over 5 vehicles
  ChannelSample s;
  s.distance_m = 100.0;
  s.gain = 3.0 * vecsim::noise_watts(c.noise_dbm);  // SNR = 3 at 1 W
  expect_rel(vecsim::achievable_rate(s, 1.0, c), 800000.0);
}

TEST(Channel, PaperLiteralKeepsDistanceFactor) {
  SimConfig c = vecsim::default_config();
  c.rate_formula = "paper_literal";
  ChannelSample s;
  s.distance_m = 3.0;
  s.gain = vecsim::noise_watts(c.noise_dbm);  // SNR = 1 at 1 W, then x3
  expect_rel(vecsim::achievable_rate(s, 1.0, c), 800000.0);
}

TEST(Channel, RateMonotonicInPower) {
  SimConfig c = vecsim::default_config();
  ChannelSample s;
  s.distance_m = 250.0;
  s.gain = 1e-11;
  double prev = 0.0;
  for (double p = 5.0; p <= 200.0; p += 5.0) {
    const double r = vecsim::achievable_rate(s, p, c);
    EXPECT_GT(r, prev);
    prev = r;
  }
}

TEST(Channel, BandSplitsAcrossVehicles) {
  SimConfig c = vecsim::default_config();
  ChannelSample s;
  s.distance_m = 100.0;
  s.gain = 3.0 * vecsim::noise_watts(c.noise_dbm);
  const double r5 = vecsim::achievable_rate(s, 1.0, c);
  c.n_vehicles = 10;
  const double r10 = vecsim::achievable_rate(s, 1.0, c);
  expect_rel(r5, 2.0 * r10);
}
