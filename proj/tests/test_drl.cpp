#include "vecsim/drl.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "vecsim/config.hpp"
#include "vecsim/neural.hpp"
#include "vecsim/rng.hpp"

using vecsim::Agent;
using vecsim::DdpgAgent;
using vecsim::LossReport;
using vecsim::MappedAction;
using vecsim::Minibatch;
using vecsim::Mlp;
using vecsim::MlpShape;
using vecsim::RandomAgent;
using vecsim::ReplayBuffer;
using vecsim::Rng;
using vecsim::RunningStat;
using vecsim::SacAgent;
using vecsim::SimConfig;
using vecsim::StateBuilder;
using vecsim::StreamPurpose;
using vecsim::Td3Agent;
using vecsim::Transition;

namespace {

// One vehicle keeps the agent dimensions at 3/3 so finite differences stay
// cheap; width 8 matches the other gradient-check suites.
SimConfig tiny_cfg() {
  SimConfig c;
  c.n_vehicles = 1;
  c.hidden_width = 8;
  c.n_hidden = 1;
  c.warmup_size = 4;
  c.minibatch = 4;
  c.buffer_capacity = 512;
  return c;
}

double max_rel_err(const std::vector<double>& a, const std::vector<double>& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double denom = std::max({std::abs(a[i]), std::abs(b[i]), 1e-8});
    if (std::abs(a[i]) < 1e-10 && std::abs(b[i]) < 1e-10) continue;
    worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
  }
  return worst;
}

Minibatch random_minibatch(int m, int sdim, int adim, Rng& rng) {
  Minibatch mb;
  mb.m = m;
  mb.states.resize(static_cast<std::size_t>(m) * sdim);
  mb.actions.resize(static_cast<std::size_t>(m) * adim);
  mb.rewards.resize(static_cast<std::size_t>(m));
  mb.next_states.resize(static_cast<std::size_t>(m) * sdim);
  for (auto& v : mb.states) v = rng.uniform(-1.5, 1.5);
  for (auto& v : mb.actions) v = rng.uniform(-0.9, 0.9);
  for (auto& v : mb.rewards) v = rng.uniform(-2.0, 2.0);
  for (auto& v : mb.next_states) v = rng.uniform(-1.5, 1.5);
  return mb;
}

Transition make_transition(const std::vector<double>& a, double r) {
  Transition t;
  t.state.assign(3, 0.0);
  t.next_state.assign(3, 0.0);
  t.action = a;
  t.reward = r;
  return t;
}

// Quadratic one-step bandit around a fixed optimum; with gamma = 0 the TD
// target is the reward itself, so the critic has a closed-form optimum and
// the greedy action should approach `optimum`.
const std::vector<double> kBanditOptimum{0.3, -0.2, 0.4};

double bandit_reward(const std::vector<double>& a) {
  double r = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double d = a[j] - kBanditOptimum[j];
    r -= d * d;
  }
  return r;
}

void fill_bandit_replay(Agent& agent, int n, Rng& rng) {
  for (int i = 0; i < n; ++i) {
    std::vector<double> a(3);
    for (auto& v : a) v = rng.uniform(-1.0, 1.0);
    agent.replay().push(make_transition(a, bandit_reward(a)));
  }
}

}  // namespace

// ---- state standardization ----------------------------------------------

TEST(Drl, RunningStatMatchesBatchMoments) {
  RunningStat stat(2);
  const std::vector<std::vector<double>> xs = {
      {1.0, -3.0}, {2.0, 5.0}, {4.0, 0.5}, {-1.0, 2.5}};
  for (const auto& x : xs) stat.update(x);
  for (int d = 0; d < 2; ++d) {
    double mean = 0.0;
    for (const auto& x : xs) mean += x[d];
    mean /= xs.size();
    double var = 0.0;
    for (const auto& x : xs) var += (x[d] - mean) * (x[d] - mean);
    var /= xs.size();
    const std::vector<double> probe = {0.7, 0.7};
    const double want = (probe[d] - mean) / std::sqrt(var + 1e-8);
    EXPECT_NEAR(stat.standardize(probe)[d], want, 1e-12);
  }
}

TEST(Drl, StateBuilderFirstObservationIsZero) {
  StateBuilder sb(2);
  const auto s = sb.build({1e-12, 3e-13}, {11.0, 14.0}, {40.0, 7.0});
  ASSERT_EQ(s.size(), 6u);
  for (double v : s) EXPECT_EQ(v, 0.0);
}

TEST(Drl, StateBuilderConcatenatesBlocksInOrder) {
  StateBuilder sb(2);
  sb.build({1.0, 2.0}, {3.0, 4.0}, {5.0, 6.0});
  const auto& mean = sb.stat().mean();
  const std::vector<double> want = {1.0, 2.0, 3.0, 4.0, 5.0, 6.0};
  ASSERT_EQ(mean.size(), want.size());
  for (std::size_t i = 0; i < want.size(); ++i)
    EXPECT_DOUBLE_EQ(mean[i], want[i]);
}

TEST(Drl, StateBuilderSecondObservationMatchesHandWelford) {
  StateBuilder sb(1);
  sb.build({2.0}, {10.0}, {0.0});
  const auto s = sb.build({4.0}, {14.0}, {8.0});
  // Two observations: mean is their midpoint, population variance is
  // (d/2)^2 with d the gap, so the newer point standardizes to
  // (d/2) / sqrt(d^2/4 + 1e-8).
  EXPECT_NEAR(s[0], 1.0 / std::sqrt(1.0 + 1e-8), 1e-12);
  EXPECT_NEAR(s[1], 2.0 / std::sqrt(4.0 + 1e-8), 1e-12);
  EXPECT_NEAR(s[2], 4.0 / std::sqrt(16.0 + 1e-8), 1e-12);
}

TEST(Drl, StateBuilderRejectsNonFinite) {
  StateBuilder sb(1);
  EXPECT_THROW(sb.build({std::nan("")}, {1.0}, {1.0}), vecsim::DrlError);
  EXPECT_THROW(sb.build({1.0, 2.0}, {1.0}, {1.0}), vecsim::DrlError);
}

// ---- action mapping ------------------------------------------------------

TEST(Drl, MapActionLowerCorner) {
  SimConfig c = tiny_cfg();
  c.n_vehicles = 3;
  const MappedAction m = vecsim::map_action(std::vector<double>(9, -1.0), c);
  for (int i = 0; i < 3; ++i) {
    EXPECT_DOUBLE_EQ(m.powers_w[i], c.p_min_w);
    EXPECT_DOUBLE_EQ(m.freqs_hz[i], c.f_min_hz);
    EXPECT_DOUBLE_EQ(m.ratios[i], 0.0);
  }
}

TEST(Drl, MapActionFullRatiosNormalize) {
  SimConfig c = tiny_cfg();
  c.n_vehicles = 5;
  std::vector<double> raw(15, 0.0);
  for (int i = 10; i < 15; ++i) raw[i] = 1.0;
  const MappedAction m = vecsim::map_action(raw, c);
  for (int i = 0; i < 5; ++i) EXPECT_NEAR(m.ratios[i], 0.2, 1e-12);
}

TEST(Drl, MapActionSmallRatioSumUntouched) {
  SimConfig c = tiny_cfg();
  c.n_vehicles = 2;
  // Half-shifted ratios 0.5 and 0.3 sum to 0.8, below the projection point.
  const std::vector<double> raw = {0.0, 0.0, 0.0, 0.0, 0.0, -0.4};
  const MappedAction m = vecsim::map_action(raw, c);
  EXPECT_DOUBLE_EQ(m.ratios[0], 0.5);
  EXPECT_DOUBLE_EQ(m.ratios[1], 0.3);
}

TEST(Drl, MapActionBoundsFuzz) {
  SimConfig c = tiny_cfg();
  c.n_vehicles = 4;
  Rng rng = Rng::stream(11, StreamPurpose::kSelfTest);
  for (int trial = 0; trial < 100000; ++trial) {
    std::vector<double> raw(12);
    for (auto& v : raw)
      v = rng.bernoulli(0.05) ? (rng.bernoulli(0.5) ? 1.0 : -1.0)
                              : rng.uniform(-1.0, 1.0);
    const MappedAction m = vecsim::map_action(raw, c);
    double q_sum = 0.0;
    for (int i = 0; i < 4; ++i) {
      ASSERT_GE(m.powers_w[i], c.p_min_w);
      ASSERT_LE(m.powers_w[i], c.p_max_w);
      ASSERT_GE(m.freqs_hz[i], c.f_min_hz);
      ASSERT_LE(m.freqs_hz[i], c.f_max_hz);
      ASSERT_GE(m.ratios[i], 0.0);
      ASSERT_LE(m.ratios[i], 1.0);
      q_sum += m.ratios[i];
    }
    ASSERT_LE(q_sum, 1.0 + 1e-9);
  }
}

// ---- reward --------------------------------------------------------------

TEST(Drl, RewardHandCases) {
  const std::array<double, 3> w{10.0, 0.001, 0.01};
  EXPECT_DOUBLE_EQ(vecsim::reward({1.2, 0.8}, {0.0, 0.0}, {0.0, 0.0}, w),
                   -20.0);
  EXPECT_DOUBLE_EQ(vecsim::reward({0.0}, {0.0}, {0.0}, w), 0.0);
  const double base = vecsim::reward({1.0}, {0.0}, {5.0}, w);
  const double bumped = vecsim::reward({1.0}, {1000.0}, {5.0}, w);
  EXPECT_NEAR(bumped - base, -1.0, 1e-12);
  EXPECT_THROW(vecsim::reward({1.0}, {0.0, 0.0}, {0.0}, w), vecsim::DrlError);
}

// ---- replay buffer -------------------------------------------------------

TEST(Drl, ReplayRingEvictsOldest) {
  ReplayBuffer buf(1, 1, 5);
  for (int i = 0; i < 6; ++i) {
    Transition t;
    t.state = {static_cast<double>(i)};
    t.action = {0.0};
    t.next_state = {0.0};
    t.reward = 0.0;
    buf.push(std::move(t));
  }
  EXPECT_EQ(buf.size(), 5);
  // Slot 0 now holds the sixth item; items 1..4 are untouched.
  EXPECT_DOUBLE_EQ(buf.at(0).state[0], 5.0);
  EXPECT_DOUBLE_EQ(buf.at(1).state[0], 1.0);
  EXPECT_DOUBLE_EQ(buf.at(4).state[0], 4.0);
}

TEST(Drl, ReplaySampleWholeBufferIsPermutation) {
  ReplayBuffer buf(1, 1, 16);
  for (int i = 0; i < 10; ++i) {
    Transition t;
    t.state = {static_cast<double>(i)};
    t.action = {0.0};
    t.next_state = {0.0};
    buf.push(std::move(t));
  }
  Rng rng = Rng::stream(3, StreamPurpose::kReplaySample);
  auto idx = buf.sample_indices(rng, 10);
  std::sort(idx.begin(), idx.end());
  for (int i = 0; i < 10; ++i) EXPECT_EQ(idx[static_cast<std::size_t>(i)], i);
}

TEST(Drl, ReplayRejectsBadUse) {
  ReplayBuffer buf(2, 3, 8);
  Transition bad;
  bad.state = {1.0};  // wrong width
  bad.action = {0.0, 0.0, 0.0};
  bad.next_state = {0.0, 0.0};
  EXPECT_THROW(buf.push(bad), vecsim::DrlError);
  Transition nan_t;
  nan_t.state = {0.0, 0.0};
  nan_t.action = {0.0, std::nan(""), 0.0};
  nan_t.next_state = {0.0, 0.0};
  EXPECT_THROW(buf.push(nan_t), vecsim::DrlError);
  Transition ok;
  ok.state = {0.0, 0.0};
  ok.action = {0.0, 0.0, 0.0};
  ok.next_state = {0.0, 0.0};
  buf.push(ok);
  Rng rng = Rng::stream(4, StreamPurpose::kReplaySample);
  EXPECT_THROW(buf.sample_indices(rng, 2), vecsim::DrlError);
  EXPECT_THROW(buf.sample_indices(rng, 0), vecsim::DrlError);
}

TEST(Drl, ReplaySamplingIsUniform) {
  ReplayBuffer buf(1, 1, 100);
  for (int i = 0; i < 100; ++i) {
    Transition t;
    t.state = {static_cast<double>(i)};
    t.action = {0.0};
    t.next_state = {0.0};
    buf.push(std::move(t));
  }
  Rng rng = Rng::stream(5, StreamPurpose::kReplaySample);
  std::vector<std::int64_t> counts(100, 0);
  const int calls = 100000;
  const int m = 10;
  for (int i = 0; i < calls; ++i)
    for (auto k : buf.sample_indices(rng, m))
      counts[static_cast<std::size_t>(k)] += 1;
  const double expect = static_cast<double>(calls) * m / 100.0;
  for (auto c : counts) {
    EXPECT_GT(static_cast<double>(c), expect * 0.95);
    EXPECT_LT(static_cast<double>(c), expect * 1.05);
  }
}

// ---- squashed Gaussian policy -------------------------------------------

TEST(Drl, SacDeterministicSelectionRepeats) {
  SimConfig c = tiny_cfg();
  Rng init = Rng::stream(6, StreamPurpose::kNetInit);
  SacAgent agent(3, 3, c, init);
  Rng r1 = Rng::stream(7, StreamPurpose::kActionNoise);
  Rng r2 = Rng::stream(8, StreamPurpose::kActionNoise);
  const std::vector<double> s = {0.4, -1.0, 0.2};
  const auto a1 = agent.select_action(s, false, r1);
  const auto a2 = agent.select_action(s, false, r2);
  ASSERT_EQ(a1.size(), 3u);
  for (int j = 0; j < 3; ++j) {
    EXPECT_EQ(a1[j], a2[j]);
    EXPECT_GT(a1[j], -1.0);
    EXPECT_LT(a1[j], 1.0);
  }
}

TEST(Drl, SacDegenerateStdCollapsesToMeanAction) {
  SimConfig c = tiny_cfg();
  Rng init = Rng::stream(9, StreamPurpose::kNetInit);
  SacAgent agent(3, 3, c, init);
  // Zero the actor, then pin the output biases: means (0.3, -0.4, 1.2) and
  // log-stds -40, which the clamp lifts to -20 (sigma ~ 2e-9).
  Mlp& actor = agent.actor();
  vecsim::vec_fill(actor.params(), 0.0);
  double* bias = actor.b(actor.n_layers() - 1);
  bias[0] = 0.3;
  bias[1] = -0.4;
  bias[2] = 1.2;
  bias[3] = bias[4] = bias[5] = -40.0;
  Rng rng = Rng::stream(10, StreamPurpose::kActionNoise);
  for (int trial = 0; trial < 50; ++trial) {
    const auto a = agent.select_action({0.0, 0.0, 0.0}, true, rng);
    EXPECT_NEAR(a[0], std::tanh(0.3), 1e-6);
    EXPECT_NEAR(a[1], std::tanh(-0.4), 1e-6);
    EXPECT_NEAR(a[2], std::tanh(1.2), 1e-6);
  }
}

// Histogram oracle for the squashed 1-D density: empirical bin masses from
// 1e6 draws against Simpson integration of exp(log_prob) over each bin.
TEST(Drl, SquashedLogProbMatchesHistogramOracle) {
  const double mu = 0.2;
  const double sigma = 0.6;
  vecsim::detail::PolicyBatch p;
  p.batch = 1;
  p.adim = 1;
  p.mean = {mu};
  p.log_std_raw = {std::log(sigma)};
  p.log_std = {std::log(sigma)};
  p.sigma = {sigma};

  auto density = [&](double a) {
    const double z = std::atanh(a);
    const std::vector<double> eps = {(z - mu) / sigma};
    return std::exp(vecsim::detail::squash_sample(p, eps).log_prob[0]);
  };

  const int bins = 20;
  const double lo = -0.999;
  const double hi = 0.999;
  const double w = (hi - lo) / bins;

  std::vector<double> emp(bins, 0.0);
  Rng rng = Rng::stream(12, StreamPurpose::kActionNoise);
  const int draws = 1000000;
  for (int i = 0; i < draws; ++i) {
    const double a = std::tanh(mu + sigma * rng.normal(0.0, 1.0));
    const int b = static_cast<int>(std::floor((a - lo) / w));
    if (b >= 0 && b < bins) emp[static_cast<std::size_t>(b)] += 1.0;
  }
  for (auto& v : emp) v /= draws;

  for (int b = 0; b < bins; ++b) {
    const double x0 = lo + b * w;
    const int steps = 200;  // even
    const double h = w / steps;
    double mass = density(x0) + density(x0 + w);
    for (int i = 1; i < steps; ++i)
      mass += density(x0 + i * h) * (i % 2 == 1 ? 4.0 : 2.0);
    mass *= h / 3.0;
    EXPECT_NEAR(emp[static_cast<std::size_t>(b)], mass, 1e-3);
  }
}

// ---- gradient checks (finite differences, width 8) -----------------------

TEST(Drl, CriticMseGradientMatchesFd) {
  Mlp critic(MlpShape{6, 8, 1, 1});
  Rng rng = Rng::stream(13, StreamPurpose::kNetInit);
  critic.init(rng, true);
  const int m = 5;
  std::vector<double> xs(6 * m);
  std::vector<double> y(m);
  for (auto& v : xs) v = rng.uniform(-1.0, 1.0);
  for (auto& v : y) v = rng.uniform(-2.0, 2.0);

  std::vector<double> grad(critic.n_params(), 0.0);
  vecsim::critic_mse(critic, xs, m, y, &grad);

  std::vector<double> fd(critic.n_params(), 0.0);
  const double h = 1e-5;
  for (std::size_t i = 0; i < critic.n_params(); ++i) {
    const double keep = critic.params()[i];
    critic.params()[i] = keep + h;
    const double lp = vecsim::critic_mse(critic, xs, m, y);
    critic.params()[i] = keep - h;
    const double lm = vecsim::critic_mse(critic, xs, m, y);
    critic.params()[i] = keep;
    fd[i] = (lp - lm) / (2.0 * h);
  }
  EXPECT_LT(max_rel_err(grad, fd), 1e-4);
}

TEST(Drl, SacActorLossGradientMatchesFd) {
  SimConfig c = tiny_cfg();
  Rng init = Rng::stream(14, StreamPurpose::kNetInit);
  SacAgent agent(3, 3, c, init);
  Rng rng = Rng::stream(15, StreamPurpose::kSelfTest);
  const Minibatch mb = random_minibatch(4, 3, 3, rng);
  const std::vector<double> eps = vecsim::detail::normals(rng, 12);

  Mlp& actor = agent.actor();
  std::vector<double> grad(actor.n_params(), 0.0);
  agent.actor_loss(mb, eps, &grad);

  std::vector<double> fd(actor.n_params(), 0.0);
  const double h = 1e-6;
  for (std::size_t i = 0; i < actor.n_params(); ++i) {
    const double keep = actor.params()[i];
    actor.params()[i] = keep + h;
    const double lp = agent.actor_loss(mb, eps);
    actor.params()[i] = keep - h;
    const double lm = agent.actor_loss(mb, eps);
    actor.params()[i] = keep;
    fd[i] = (lp - lm) / (2.0 * h);
  }
  EXPECT_LT(max_rel_err(grad, fd), 1e-4);
}

TEST(Drl, SacTemperatureLossGradientMatchesFd) {
  SimConfig c = tiny_cfg();
  Rng init = Rng::stream(16, StreamPurpose::kNetInit);
  SacAgent agent(3, 3, c, init);
  double grad = 0.0;
  const double mean_logp = -2.7;
  const double loss = agent.temperature_loss(mean_logp, &grad);
  // Loss is linear in log beta: slope = -(mean_logp + target_entropy).
  EXPECT_DOUBLE_EQ(loss, -agent.log_beta() * (mean_logp - 3.0));
  EXPECT_DOUBLE_EQ(grad, -(mean_logp - 3.0));
}

TEST(Drl, DdpgActorLossGradientMatchesFd) {
  SimConfig c = tiny_cfg();
  Rng init = Rng::stream(17, StreamPurpose::kNetInit);
  DdpgAgent agent(3, 3, c, init);
  Rng rng = Rng::stream(18, StreamPurpose::kSelfTest);
  const Minibatch mb = random_minibatch(4, 3, 3, rng);

  Mlp& actor = agent.actor();
  std::vector<double> grad(actor.n_params(), 0.0);
  agent.actor_loss(mb, &grad);

  std::vector<double> fd(actor.n_params(), 0.0);
  const double h = 1e-6;
  for (std::size_t i = 0; i < actor.n_params(); ++i) {
    const double keep = actor.params()[i];
    actor.params()[i] = keep + h;
    const double lp = agent.actor_loss(mb);
    actor.params()[i] = keep - h;
    const double lm = agent.actor_loss(mb);
    actor.params()[i] = keep;
    fd[i] = (lp - lm) / (2.0 * h);
  }
  EXPECT_LT(max_rel_err(grad, fd), 1e-4);
}

TEST(Drl, Td3ActorLossGradientMatchesFd) {
  SimConfig c = tiny_cfg();
  Rng init = Rng::stream(19, StreamPurpose::kNetInit);
  Td3Agent agent(3, 3, c, init);
  Rng rng = Rng::stream(20, StreamPurpose::kSelfTest);
  const Minibatch mb = random_minibatch(4, 3, 3, rng);

  Mlp& actor = agent.actor();
  std::vector<double> grad(actor.n_params(), 0.0);
  agent.actor_loss(mb, &grad);

  std::vector<double> fd(actor.n_params(), 0.0);
  const double h = 1e-6;
  for (std::size_t i = 0; i < actor.n_params(); ++i) {
    const double keep = actor.params()[i];
    actor.params()[i] = keep + h;
    const double lp = agent.actor_loss(mb);
    actor.params()[i] = keep - h;
    const double lm = agent.actor_loss(mb);
    actor.params()[i] = keep;
    fd[i] = (lp - lm) / (2.0 * h);
  }
  EXPECT_LT(max_rel_err(grad, fd), 1e-4);
}

// ---- targets and soft updates -------------------------------------------

TEST(Drl, SoftUpdateEndpointsAndDrift) {
  SimConfig c = tiny_cfg();
  Rng init = Rng::stream(21, StreamPurpose::kNetInit);
  SacAgent agent(3, 3, c, init);
  // Push the critics away from their targets.
  Rng noise = Rng::stream(22, StreamPurpose::kSelfTest);
  for (auto& p : agent.critic1().params()) p += noise.uniform(-0.5, 0.5);
  for (auto& p : agent.critic2().params()) p += noise.uniform(-0.5, 0.5);

  const std::vector<double> t1_before = agent.target1().params();
  const std::vector<double> c1 = agent.critic1().params();
  agent.soft_update_targets(0.0);
  for (std::size_t i = 0; i < t1_before.size(); ++i)
    EXPECT_EQ(agent.target1().params()[i], t1_before[i]);

  agent.soft_update_targets(0.3);
  for (std::size_t i = 0; i < t1_before.size(); ++i) {
    const double drift = agent.target1().params()[i] - t1_before[i];
    EXPECT_NEAR(drift, 0.3 * (c1[i] - t1_before[i]), 1e-12);
  }

  agent.soft_update_targets(1.0);
  for (std::size_t i = 0; i < c1.size(); ++i)
    EXPECT_DOUBLE_EQ(agent.target1().params()[i], c1[i]);
}

TEST(Drl, Td3TargetNoiseIsClipped) {
  SimConfig c = tiny_cfg();
  Rng init = Rng::stream(23, StreamPurpose::kNetInit);
  Td3Agent agent(3, 3, c, init);
  Rng rng = Rng::stream(24, StreamPurpose::kSelfTest);
  const Minibatch mb = random_minibatch(6, 3, 3, rng);
  // Huge unit normals: the scaled noise must still respect the clip.
  std::vector<double> eps(18);
  for (auto& v : eps) v = rng.uniform(-50.0, 50.0);
  std::vector<double> a_next;
  agent.td_targets(mb, eps, &a_next);
  const vecsim::ForwardTrace ta =
      vecsim::forward_batch(agent.target_actor(), mb.next_states.data(), mb.m);
  for (std::size_t k = 0; k < a_next.size(); ++k) {
    const double base = std::tanh(ta.output()[k]);
    EXPECT_LE(std::abs(a_next[k] - base), 0.5 + 1e-12);
    EXPECT_LE(std::abs(a_next[k]), 1.0);
  }
}

TEST(Drl, DdpgDeterministicRollout) {
  SimConfig c = tiny_cfg();
  Rng init = Rng::stream(25, StreamPurpose::kNetInit);
  DdpgAgent agent(3, 3, c, init);
  Rng r1 = Rng::stream(26, StreamPurpose::kActionNoise);
  Rng r2 = Rng::stream(27, StreamPurpose::kActionNoise);
  const std::vector<double> s = {1.0, -0.5, 0.25};
  const auto a1 = agent.select_action(s, false, r1);
  const auto a2 = agent.select_action(s, false, r2);
  for (int j = 0; j < 3; ++j) EXPECT_EQ(a1[j], a2[j]);
}

// ---- bandit learning (closed-form optimum oracle) ------------------------

TEST(Drl, SacLearnsBanditOptimum) {
  SimConfig c = tiny_cfg();
  c.gamma = 0.0;
  c.hidden_width = 32;
  c.warmup_size = 64;
  c.minibatch = 64;
  Rng init = Rng::stream(30, StreamPurpose::kNetInit);
  SacAgent agent(3, 3, c, init);
  Rng fill = Rng::stream(31, StreamPurpose::kSelfTest);
  fill_bandit_replay(agent, 500, fill);

  Rng up = Rng::stream(32, StreamPurpose::kAgentUpdate);
  const int steps = 3000;
  double early = 0.0;
  double late = 0.0;
  for (int i = 0; i < steps; ++i) {
    const LossReport rep = agent.update(up);
    ASSERT_TRUE(rep.updated);
    ASSERT_GT(rep.beta, 0.0);
    if (i < 10) early += rep.critic1;
    if (i >= steps - 10) late += rep.critic1;
  }
  EXPECT_LT(late, 0.5 * early);
  // The temperature must have moved off its initial value of 1.
  EXPECT_NE(agent.log_beta(), 0.0);

  Rng act = Rng::stream(33, StreamPurpose::kActionNoise);
  const auto a = agent.select_action({0.0, 0.0, 0.0}, false, act);
  for (int j = 0; j < 3; ++j) EXPECT_NEAR(a[j], kBanditOptimum[j], 0.1);
}

TEST(Drl, DdpgLearnsBanditOptimum) {
  SimConfig c = tiny_cfg();
  c.gamma = 0.0;
  c.hidden_width = 64;
  c.warmup_size = 64;
  c.minibatch = 64;
  Rng init = Rng::stream(34, StreamPurpose::kNetInit);
  DdpgAgent agent(3, 3, c, init);
  Rng fill = Rng::stream(35, StreamPurpose::kSelfTest);
  fill_bandit_replay(agent, 2000, fill);

  Rng up = Rng::stream(36, StreamPurpose::kAgentUpdate);
  const int steps = 5000;
  double early = 0.0;
  double late = 0.0;
  for (int i = 0; i < steps; ++i) {
    const LossReport rep = agent.update(up);
    ASSERT_TRUE(rep.updated);
    if (i < 10) early += rep.critic1;
    if (i >= steps - 10) late += rep.critic1;
  }
  EXPECT_LT(late, 0.5 * early);

  Rng act = Rng::stream(37, StreamPurpose::kActionNoise);
  const auto a = agent.select_action({0.0, 0.0, 0.0}, false, act);
  for (int j = 0; j < 3; ++j) EXPECT_NEAR(a[j], kBanditOptimum[j], 0.1);
}

TEST(Drl, Td3LearnsBanditOptimum) {
  SimConfig c = tiny_cfg();
  c.gamma = 0.0;
  c.hidden_width = 32;
  c.warmup_size = 64;
  c.minibatch = 64;
  Rng init = Rng::stream(38, StreamPurpose::kNetInit);
  Td3Agent agent(3, 3, c, init);
  Rng fill = Rng::stream(39, StreamPurpose::kSelfTest);
  fill_bandit_replay(agent, 500, fill);

  Rng up = Rng::stream(40, StreamPurpose::kAgentUpdate);
  const int steps = 10000;
  double early = 0.0;
  double late = 0.0;
  for (int i = 0; i < steps; ++i) {
    const LossReport rep = agent.update(up);
    ASSERT_TRUE(rep.updated);
    if (i < 10) early += rep.critic1;
    if (i >= steps - 10) late += rep.critic1;
  }
  EXPECT_LT(late, 0.5 * early);
  EXPECT_EQ(agent.update_count(), steps);

  Rng act = Rng::stream(41, StreamPurpose::kActionNoise);
  const auto a = agent.select_action({0.0, 0.0, 0.0}, false, act);
  for (int j = 0; j < 3; ++j) EXPECT_NEAR(a[j], kBanditOptimum[j], 0.1);
}

// ---- checkpoints and factory --------------------------------------------

TEST(Drl, AgentCheckpointRoundTrip) {
  SimConfig c = tiny_cfg();
  const std::vector<std::string> kinds = {"sac", "ddpg", "td3"};
  for (const auto& kind : kinds) {
    c.agent_kind = kind;
    Rng init = Rng::stream(50, StreamPurpose::kNetInit);
    auto saved = vecsim::make_agent(c, init);
    // A couple of updates so optim-adjacent state (log beta, counters) is
    // not at defaults when saved.
    Rng fill = Rng::stream(51, StreamPurpose::kSelfTest);
    fill_bandit_replay(*saved, 32, fill);
    Rng up = Rng::stream(52, StreamPurpose::kAgentUpdate);
    saved->update(up);
    saved->update(up);

    const std::string path =
        ::testing::TempDir() + "vecsim_agent_" + kind + ".bin";
    vecsim::write_checkpoint(path, saved->to_sections());

    Rng init2 = Rng::stream(53, StreamPurpose::kNetInit);
    auto loaded = vecsim::make_agent(c, init2);
    loaded->load_sections(vecsim::read_checkpoint(path));
    std::remove(path.c_str());

    Rng r1 = Rng::stream(54, StreamPurpose::kActionNoise);
    Rng r2 = Rng::stream(54, StreamPurpose::kActionNoise);
    const std::vector<double> s = {0.2, -0.7, 1.1};
    const auto a1 = saved->select_action(s, false, r1);
    const auto a2 = loaded->select_action(s, false, r2);
    for (int j = 0; j < 3; ++j)
      EXPECT_EQ(a1[j], a2[j]) << "agent kind " << kind;
  }
}

TEST(Drl, SacCheckpointPreservesTemperature) {
  SimConfig c = tiny_cfg();
  Rng init = Rng::stream(55, StreamPurpose::kNetInit);
  SacAgent saved(3, 3, c, init);
  Rng fill = Rng::stream(56, StreamPurpose::kSelfTest);
  fill_bandit_replay(saved, 32, fill);
  Rng up = Rng::stream(57, StreamPurpose::kAgentUpdate);
  for (int i = 0; i < 20; ++i) saved.update(up);
  ASSERT_NE(saved.log_beta(), 0.0);

  const std::string path = ::testing::TempDir() + "vecsim_sac_temp.bin";
  vecsim::write_checkpoint(path, saved.to_sections());
  Rng init2 = Rng::stream(58, StreamPurpose::kNetInit);
  SacAgent loaded(3, 3, c, init2);
  loaded.load_sections(vecsim::read_checkpoint(path));
  std::remove(path.c_str());
  EXPECT_EQ(loaded.log_beta(), saved.log_beta());
}

TEST(Drl, CheckpointMissingSectionRejected) {
  SimConfig c = tiny_cfg();
  Rng init = Rng::stream(59, StreamPurpose::kNetInit);
  SacAgent agent(3, 3, c, init);
  auto sections = agent.to_sections();
  sections.pop_back();  // drop "temperature"
  SacAgent other(3, 3, c, init);
  EXPECT_THROW(other.load_sections(sections), vecsim::DrlError);
}

TEST(Drl, MakeAgentKindsAndRandomAgent) {
  SimConfig c = tiny_cfg();
  c.n_vehicles = 2;
  Rng init = Rng::stream(60, StreamPurpose::kNetInit);
  for (const auto& kind : {"sac", "ddpg", "td3", "random"}) {
    c.agent_kind = kind;
    auto agent = vecsim::make_agent(c, init);
    EXPECT_EQ(agent->kind(), kind);
    EXPECT_EQ(agent->state_dim(), 6);
    EXPECT_EQ(agent->action_dim(), 6);
  }
  c.agent_kind = "ppo";
  EXPECT_THROW(vecsim::make_agent(c, init), vecsim::DrlError);

  c.agent_kind = "random";
  auto rnd = vecsim::make_agent(c, init);
  Rng act = Rng::stream(61, StreamPurpose::kActionNoise);
  const std::vector<double> s(6, 0.0);
  for (int i = 0; i < 1000; ++i) {
    const auto a = rnd->select_action(s, true, act);
    for (double v : a) {
      ASSERT_GE(v, -1.0);
      ASSERT_LE(v, 1.0);
    }
  }
  Rng up = Rng::stream(62, StreamPurpose::kAgentUpdate);
  EXPECT_FALSE(rnd->update(up).updated);
}
