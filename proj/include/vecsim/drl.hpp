#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "vecsim/config.hpp"
#include "vecsim/neural.hpp"
#include "vecsim/rng.hpp"

namespace vecsim {

struct DrlError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---- state standardization ----------------------------------------------

// Welford running mean/variance per dimension. Raw state blocks differ by
// many orders of magnitude (channel gains ~1e-12, task counts ~1e1), so
// feeding them unnormalized stalls every agent.
class RunningStat {
 public:
  explicit RunningStat(int dim)
      : mean_(static_cast<std::size_t>(dim), 0.0),
        m2_(static_cast<std::size_t>(dim), 0.0) {}

  void update(const std::vector<double>& x) {
    if (x.size() != mean_.size())
      throw DrlError("RunningStat::update: dimension mismatch");
    count_ += 1;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double d = x[i] - mean_[i];
      mean_[i] += d / static_cast<double>(count_);
      m2_[i] += d * (x[i] - mean_[i]);
    }
  }

  // (x - mean) / sqrt(var + 1e-8); population variance. With a single
  // observation this maps the state to all zeros, which is fine: the agent
  // sees meaningful contrasts as soon as statistics accumulate.
  std::vector<double> standardize(const std::vector<double>& x) const {
    if (x.size() != mean_.size())
      throw DrlError("RunningStat::standardize: dimension mismatch");
    if (count_ == 0) return std::vector<double>(x.size(), 0.0);
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double var = m2_[i] / static_cast<double>(count_);
      out[i] = (x[i] - mean_[i]) / std::sqrt(var + 1e-8);
    }
    return out;
  }

  std::int64_t count() const { return count_; }
  const std::vector<double>& mean() const { return mean_; }

 private:
  std::vector<double> mean_;
  std::vector<double> m2_;
  std::int64_t count_ = 0;
};

// Concatenates the per-vehicle blocks [gains | velocities | totals] and
// standardizes against statistics updated with the new observation first.
class StateBuilder {
 public:
  explicit StateBuilder(int n_vehicles)
      : n_(n_vehicles), stat_(3 * n_vehicles) {
    if (n_vehicles < 1) throw DrlError("StateBuilder: n_vehicles must be >= 1");
  }

  int dim() const { return 3 * n_; }

  std::vector<double> build(const std::vector<double>& gains,
                            const std::vector<double>& velocities,
                            const std::vector<double>& totals) {
    const auto n = static_cast<std::size_t>(n_);
    if (gains.size() != n || velocities.size() != n || totals.size() != n)
      throw DrlError("StateBuilder::build: expected one value per vehicle");
    std::vector<double> raw;
    raw.reserve(3 * n);
    raw.insert(raw.end(), gains.begin(), gains.end());
    raw.insert(raw.end(), velocities.begin(), velocities.end());
    raw.insert(raw.end(), totals.begin(), totals.end());
    for (double v : raw)
      if (!std::isfinite(v)) throw DrlError("StateBuilder::build: non-finite");
    stat_.update(raw);
    return stat_.standardize(raw);
  }

  const RunningStat& stat() const { return stat_; }

 private:
  int n_;
  RunningStat stat_;
};

// ---- action mapping and reward ------------------------------------------

struct MappedAction {
  std::vector<double> powers_w;
  std::vector<double> freqs_hz;
  std::vector<double> ratios;
};

// Raw layout: [powers | freqs | ratios], each block n_vehicles wide, every
// entry in [-1, 1]. Powers and frequencies map affinely onto their ranges;
// ratios half-shift to [0, 1] and are rescaled by their sum only when it
// exceeds 1, so low-offload joint actions survive untouched.
inline MappedAction map_action(const std::vector<double>& raw,
                               const SimConfig& cfg) {
  const int n = cfg.n_vehicles;
  if (raw.size() != static_cast<std::size_t>(3 * n))
    throw DrlError("map_action: raw action must have 3 * n_vehicles entries");
  MappedAction out;
  out.powers_w.resize(n);
  out.freqs_hz.resize(n);
  out.ratios.resize(n);
  double q_sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double half_p = 0.5 * (raw[i] + 1.0);
    const double half_f = 0.5 * (raw[n + i] + 1.0);
    const double half_q = 0.5 * (raw[2 * n + i] + 1.0);
    out.powers_w[i] = cfg.p_min_w + half_p * (cfg.p_max_w - cfg.p_min_w);
    out.freqs_hz[i] = cfg.f_min_hz + half_f * (cfg.f_max_hz - cfg.f_min_hz);
    out.ratios[i] = half_q;
    q_sum += half_q;
  }
  if (q_sum > 1.0)
    for (double& q : out.ratios) q /= q_sum;
  return out;
}

// r = -sum_n (w0 * energy + w1 * overload + w2 * buffer).
inline double reward(const std::vector<double>& energy_totals_j,
                     const std::vector<double>& overloads,
                     const std::vector<double>& buffers,
                     const std::array<double, 3>& weights) {
  const std::size_t n = energy_totals_j.size();
  if (overloads.size() != n || buffers.size() != n)
    throw DrlError("reward: component lists must have equal length");
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    acc += weights[0] * energy_totals_j[i] + weights[1] * overloads[i] +
           weights[2] * buffers[i];
  return -acc;
}

// ---- replay buffer -------------------------------------------------------

struct Transition {
  std::vector<double> state;
  std::vector<double> action;
  double reward = 0.0;
  std::vector<double> next_state;
};

// Fixed-capacity ring; storage grows lazily up to capacity, then the oldest
// entry is overwritten.
class ReplayBuffer {
 public:
  ReplayBuffer(int state_dim, int action_dim, std::int64_t capacity)
      : state_dim_(state_dim), action_dim_(action_dim), capacity_(capacity) {
    if (state_dim < 1 || action_dim < 1 || capacity < 1)
      throw DrlError("ReplayBuffer: dims and capacity must be >= 1");
  }

  int state_dim() const { return state_dim_; }
  int action_dim() const { return action_dim_; }
  std::int64_t capacity() const { return capacity_; }
  std::int64_t size() const { return static_cast<std::int64_t>(items_.size()); }

  void push(Transition t) {
    if (t.state.size() != static_cast<std::size_t>(state_dim_) ||
        t.next_state.size() != static_cast<std::size_t>(state_dim_) ||
        t.action.size() != static_cast<std::size_t>(action_dim_))
      throw DrlError("ReplayBuffer::push: transition dimension mismatch");
    if (!all_finite(t.state) || !all_finite(t.action) ||
        !all_finite(t.next_state) || !std::isfinite(t.reward))
      throw DrlError("ReplayBuffer::push: non-finite transition");
    if (size() < capacity_) {
      items_.push_back(std::move(t));
    } else {
      items_[static_cast<std::size_t>(write_)] = std::move(t);
    }
    write_ = (write_ + 1) % capacity_;
  }

  const Transition& at(std::int64_t i) const {
    return items_.at(static_cast<std::size_t>(i));
  }

  // Uniform draw of m distinct indices (partial Fisher-Yates).
  std::vector<std::int64_t> sample_indices(Rng& rng, int m) const {
    if (m < 1 || static_cast<std::int64_t>(m) > size())
      throw DrlError("ReplayBuffer::sample_indices: bad minibatch size");
    std::vector<std::int64_t> idx(items_.size());
    for (std::size_t i = 0; i < idx.size(); ++i)
      idx[i] = static_cast<std::int64_t>(i);
    for (int i = 0; i < m; ++i) {
      const auto j = i + static_cast<std::int64_t>(
                             rng.uniform_index(idx.size() - i));
      std::swap(idx[static_cast<std::size_t>(i)],
                idx[static_cast<std::size_t>(j)]);
    }
    idx.resize(static_cast<std::size_t>(m));
    return idx;
  }

 private:
  int state_dim_;
  int action_dim_;
  std::int64_t capacity_;
  std::int64_t write_ = 0;
  std::vector<Transition> items_;
};

// Flat row-major views of a sampled minibatch.
struct Minibatch {
  int m = 0;
  std::vector<double> states;
  std::vector<double> actions;
  std::vector<double> rewards;
  std::vector<double> next_states;
};

inline Minibatch gather(const ReplayBuffer& buf,
                        const std::vector<std::int64_t>& idx) {
  Minibatch mb;
  mb.m = static_cast<int>(idx.size());
  const auto sd = static_cast<std::size_t>(buf.state_dim());
  const auto ad = static_cast<std::size_t>(buf.action_dim());
  mb.states.reserve(idx.size() * sd);
  mb.actions.reserve(idx.size() * ad);
  mb.rewards.reserve(idx.size());
  mb.next_states.reserve(idx.size() * sd);
  for (auto i : idx) {
    const Transition& t = buf.at(i);
    mb.states.insert(mb.states.end(), t.state.begin(), t.state.end());
    mb.actions.insert(mb.actions.end(), t.action.begin(), t.action.end());
    mb.rewards.push_back(t.reward);
    mb.next_states.insert(mb.next_states.end(), t.next_state.begin(),
                          t.next_state.end());
  }
  return mb;
}

// ---- squashed Gaussian policy head --------------------------------------

inline constexpr double kLogStdMin = -20.0;
inline constexpr double kLogStdMax = 2.0;
inline constexpr double kSquashEps = 1e-6;

namespace detail {

// Actor forward pass split into mean and clamped log-std halves. The raw
// log-std is kept so the backward pass can zero gradients where the clamp
// was active.
struct PolicyBatch {
  int batch = 0;
  int adim = 0;
  ForwardTrace trace;
  std::vector<double> mean;
  std::vector<double> log_std_raw;
  std::vector<double> log_std;
  std::vector<double> sigma;
};

inline PolicyBatch policy_forward(const Mlp& actor, const double* states,
                                  int batch) {
  PolicyBatch p;
  p.batch = batch;
  p.adim = actor.shape().output / 2;
  p.trace = forward_batch(actor, states, batch);
  const auto n = static_cast<std::size_t>(batch) * p.adim;
  p.mean.resize(n);
  p.log_std_raw.resize(n);
  p.log_std.resize(n);
  p.sigma.resize(n);
  const std::vector<double>& out = p.trace.output();
  for (int i = 0; i < batch; ++i) {
    const double* row = out.data() + static_cast<std::size_t>(i) * 2 * p.adim;
    for (int j = 0; j < p.adim; ++j) {
      const std::size_t k = static_cast<std::size_t>(i) * p.adim + j;
      p.mean[k] = row[j];
      p.log_std_raw[k] = row[p.adim + j];
      p.log_std[k] = std::clamp(row[p.adim + j], kLogStdMin, kLogStdMax);
      p.sigma[k] = std::exp(p.log_std[k]);
    }
  }
  return p;
}

// a = tanh(mean + sigma * eps); log-density includes the tanh change of
// variables with the usual 1e-6 guard.
struct SquashedSample {
  std::vector<double> action;
  std::vector<double> log_prob;
};

inline constexpr double kHalfLog2Pi = 0.9189385332046727;

inline SquashedSample squash_sample(const PolicyBatch& p,
                                    const std::vector<double>& eps) {
  const auto n = static_cast<std::size_t>(p.batch) * p.adim;
  if (eps.size() != n) throw DrlError("squash_sample: eps size mismatch");
  SquashedSample s;
  s.action.resize(n);
  s.log_prob.assign(static_cast<std::size_t>(p.batch), 0.0);
  for (int i = 0; i < p.batch; ++i) {
    double lp = 0.0;
    for (int j = 0; j < p.adim; ++j) {
      const std::size_t k = static_cast<std::size_t>(i) * p.adim + j;
      const double z = p.mean[k] + p.sigma[k] * eps[k];
      const double a = std::tanh(z);
      s.action[k] = a;
      lp += -0.5 * eps[k] * eps[k] - kHalfLog2Pi - p.log_std[k] -
            std::log(1.0 - a * a + kSquashEps);
    }
    s.log_prob[static_cast<std::size_t>(i)] = lp;
  }
  return s;
}

// Maps dL/d_action (batch x adim) and dL/d_log_prob (batch) back to the
// actor's output heads, producing d_out for backward(). eps must be the
// draw used by squash_sample.
inline std::vector<double> squash_backward(const PolicyBatch& p,
                                           const SquashedSample& s,
                                           const std::vector<double>& eps,
                                           const std::vector<double>& d_action,
                                           const std::vector<double>& d_logp) {
  std::vector<double> d_out(
      static_cast<std::size_t>(p.batch) * 2 * p.adim, 0.0);
  for (int i = 0; i < p.batch; ++i) {
    const double dlp = d_logp[static_cast<std::size_t>(i)];
    double* row = d_out.data() + static_cast<std::size_t>(i) * 2 * p.adim;
    for (int j = 0; j < p.adim; ++j) {
      const std::size_t k = static_cast<std::size_t>(i) * p.adim + j;
      const double a = s.action[k];
      const double one_minus_a2 = 1.0 - a * a;
      // d log_prob / d a from the squash correction term.
      const double da_total =
          d_action[k] + dlp * 2.0 * a / (one_minus_a2 + kSquashEps);
      const double dz = da_total * one_minus_a2;
      const bool inside =
          p.log_std_raw[k] > kLogStdMin && p.log_std_raw[k] < kLogStdMax;
      row[j] = dz;
      row[p.adim + j] = inside ? dz * p.sigma[k] * eps[k] - dlp : 0.0;
    }
  }
  return d_out;
}

// Concatenated (state, action) rows for critic input.
inline std::vector<double> join_rows(const std::vector<double>& states,
                                     int sdim,
                                     const std::vector<double>& actions,
                                     int adim, int m) {
  std::vector<double> xs(static_cast<std::size_t>(m) * (sdim + adim));
  for (int i = 0; i < m; ++i) {
    double* row = xs.data() + static_cast<std::size_t>(i) * (sdim + adim);
    std::copy_n(states.data() + static_cast<std::size_t>(i) * sdim, sdim, row);
    std::copy_n(actions.data() + static_cast<std::size_t>(i) * adim, adim,
                row + sdim);
  }
  return xs;
}

inline std::vector<double> normals(Rng& rng, std::size_t n) {
  std::vector<double> out(n);
  for (double& x : out) x = rng.normal(0.0, 1.0);
  return out;
}

}  // namespace detail

// Mean squared error of `critic` against targets y over joined (s, a) rows;
// parameter gradients accumulate into grad when non-null, input gradients
// into d_input when non-null.
inline double critic_mse(const Mlp& critic, const std::vector<double>& xs,
                         int m, const std::vector<double>& y,
                         std::vector<double>* grad = nullptr,
                         std::vector<double>* d_input = nullptr) {
  ForwardTrace trace = forward_batch(critic, xs.data(), m);
  const std::vector<double>& q = trace.output();
  double loss = 0.0;
  std::vector<double> d_out(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    const double e = q[static_cast<std::size_t>(i)] -
                     y[static_cast<std::size_t>(i)];
    loss += e * e;
    d_out[static_cast<std::size_t>(i)] = 2.0 * e / m;
  }
  loss /= m;
  if (grad != nullptr) backward(critic, trace, d_out, *grad, d_input);
  return loss;
}

// ---- agents --------------------------------------------------------------

struct LossReport {
  bool updated = false;
  double critic1 = 0.0;
  double critic2 = 0.0;
  double actor = 0.0;
  double temperature = 0.0;
  double beta = 0.0;
};

// Common surface shared by the orchestrator: raw actions live in [-1, 1],
// update() performs at most one optimization step per call, and target
// tracking is left to the caller's schedule.
class Agent {
 public:
  Agent(int state_dim, int action_dim, const SimConfig& cfg)
      : state_dim_(state_dim),
        action_dim_(action_dim),
        gamma_(cfg.gamma),
        minibatch_(cfg.minibatch),
        warmup_(std::max(cfg.warmup_size, cfg.minibatch)),
        replay_(state_dim, action_dim, cfg.buffer_capacity) {}
  virtual ~Agent() = default;

  int state_dim() const { return state_dim_; }
  int action_dim() const { return action_dim_; }
  ReplayBuffer& replay() { return replay_; }
  const ReplayBuffer& replay() const { return replay_; }

  virtual std::string kind() const = 0;
  virtual std::vector<double> select_action(const std::vector<double>& state,
                                            bool explore, Rng& rng) = 0;
  virtual LossReport update(Rng& rng) = 0;
  virtual void soft_update_targets(double omega) {}
  virtual std::vector<CheckpointSection> to_sections() const = 0;
  virtual void load_sections(
      const std::vector<CheckpointSection>& sections) = 0;

 protected:
  bool ready() const { return replay_.size() >= warmup_; }

  int state_dim_;
  int action_dim_;
  double gamma_;
  int minibatch_;
  std::int64_t warmup_;
  ReplayBuffer replay_;
};

namespace detail {

inline CheckpointSection scalar_section(const std::string& name,
                                        const std::string& entry, double v) {
  return CheckpointSection{name, {{entry, {1}}}, {v}};
}

inline const CheckpointSection& find_section(
    const std::vector<CheckpointSection>& sections, const std::string& name) {
  for (const auto& s : sections)
    if (s.name == name) return s;
  throw DrlError("checkpoint is missing section '" + name + "'");
}

}  // namespace detail

// Soft Actor-Critic with automatic entropy temperature. The actor outputs
// [mean | log-std] heads; both critics are trained to the same entropy-
// regularized TD target; beta is optimized in log space so it stays
// positive.
class SacAgent : public Agent {
 public:
  SacAgent(int state_dim, int action_dim, const SimConfig& cfg, Rng& init_rng)
      : Agent(state_dim, action_dim, cfg),
        actor_(MlpShape{state_dim, cfg.hidden_width, cfg.n_hidden,
                        2 * action_dim}),
        critic1_(MlpShape{state_dim + action_dim, cfg.hidden_width,
                          cfg.n_hidden, 1}),
        critic2_(MlpShape{state_dim + action_dim, cfg.hidden_width,
                          cfg.n_hidden, 1}),
        target_entropy_(cfg.target_entropy_per_dim * action_dim) {
    actor_.init(init_rng, true);
    critic1_.init(init_rng, true);
    critic2_.init(init_rng, true);
    target1_ = critic1_;
    target2_ = critic2_;
  }

  std::string kind() const override { return "sac"; }

  std::vector<double> select_action(const std::vector<double>& state,
                                    bool explore, Rng& rng) override {
    if (state.size() != static_cast<std::size_t>(state_dim_))
      throw DrlError("select_action: state dimension mismatch");
    detail::PolicyBatch p = detail::policy_forward(actor_, state.data(), 1);
    std::vector<double> eps(static_cast<std::size_t>(action_dim_), 0.0);
    if (explore) eps = detail::normals(rng, eps.size());
    return detail::squash_sample(p, eps).action;
  }

  // Entropy-regularized TD targets; eps_next drives the fresh next-state
  // action draw, one unit normal per (sample, action dim).
  std::vector<double> td_targets(const Minibatch& mb,
                                 const std::vector<double>& eps_next) const {
    detail::PolicyBatch p =
        detail::policy_forward(actor_, mb.next_states.data(), mb.m);
    detail::SquashedSample s = detail::squash_sample(p, eps_next);
    const std::vector<double> xs = detail::join_rows(
        mb.next_states, state_dim_, s.action, action_dim_, mb.m);
    const ForwardTrace t1 = forward_batch(target1_, xs.data(), mb.m);
    const ForwardTrace t2 = forward_batch(target2_, xs.data(), mb.m);
    const double beta = std::exp(log_beta_);
    std::vector<double> y(static_cast<std::size_t>(mb.m));
    for (int i = 0; i < mb.m; ++i) {
      const auto k = static_cast<std::size_t>(i);
      const double qmin = std::min(t1.output()[k], t2.output()[k]);
      y[k] = mb.rewards[k] + gamma_ * (qmin - beta * s.log_prob[k]);
    }
    return y;
  }

  // L = mean(beta * log pi(a'|s) - min(Q1, Q2)(s, a')) with a' drawn via
  // eps; beta is held constant. Gradients accumulate into grad.
  double actor_loss(const Minibatch& mb, const std::vector<double>& eps,
                    std::vector<double>* grad = nullptr,
                    double* mean_logp_out = nullptr) const {
    detail::PolicyBatch p =
        detail::policy_forward(actor_, mb.states.data(), mb.m);
    detail::SquashedSample s = detail::squash_sample(p, eps);
    const std::vector<double> xs = detail::join_rows(
        mb.states, state_dim_, s.action, action_dim_, mb.m);
    const ForwardTrace t1 = forward_batch(critic1_, xs.data(), mb.m);
    const ForwardTrace t2 = forward_batch(critic2_, xs.data(), mb.m);
    const double beta = std::exp(log_beta_);

    double loss = 0.0;
    double mean_logp = 0.0;
    std::vector<double> pick1(static_cast<std::size_t>(mb.m), 0.0);
    std::vector<double> pick2(static_cast<std::size_t>(mb.m), 0.0);
    for (int i = 0; i < mb.m; ++i) {
      const auto k = static_cast<std::size_t>(i);
      const double q1 = t1.output()[k];
      const double q2 = t2.output()[k];
      loss += beta * s.log_prob[k] - std::min(q1, q2);
      mean_logp += s.log_prob[k];
      // The min picks which critic feeds gradient back into the action.
      (q1 <= q2 ? pick1[k] : pick2[k]) = -1.0 / mb.m;
    }
    loss /= mb.m;
    mean_logp /= mb.m;
    if (mean_logp_out != nullptr) *mean_logp_out = mean_logp;

    if (grad != nullptr) {
      std::vector<double> scratch(critic1_.n_params(), 0.0);
      std::vector<double> din1;
      std::vector<double> din2;
      backward(critic1_, t1, pick1, scratch, &din1);
      vec_fill(scratch, 0.0);
      backward(critic2_, t2, pick2, scratch, &din2);
      std::vector<double> d_action(
          static_cast<std::size_t>(mb.m) * action_dim_);
      const int joined = state_dim_ + action_dim_;
      for (int i = 0; i < mb.m; ++i)
        for (int j = 0; j < action_dim_; ++j) {
          const std::size_t src =
              static_cast<std::size_t>(i) * joined + state_dim_ + j;
          d_action[static_cast<std::size_t>(i) * action_dim_ + j] =
              din1[src] + din2[src];
        }
      std::vector<double> d_logp(static_cast<std::size_t>(mb.m),
                                 beta / mb.m);
      const std::vector<double> d_out =
          detail::squash_backward(p, s, eps, d_action, d_logp);
      backward(actor_, p.trace, d_out, *grad);
    }
    return loss;
  }

  // L = -log beta * (mean log pi + target entropy); the parenthesized term
  // is detached, making this linear in log beta.
  double temperature_loss(double mean_logp, double* grad = nullptr) const {
    const double pressure = mean_logp + target_entropy_;
    if (grad != nullptr) *grad = -pressure;
    return -log_beta_ * pressure;
  }

  LossReport update(Rng& rng) override {
    LossReport rep;
    rep.beta = std::exp(log_beta_);
    if (!ready()) return rep;
    const Minibatch mb =
        gather(replay_, replay_.sample_indices(rng, minibatch_));
    const auto na = static_cast<std::size_t>(mb.m) * action_dim_;

    const std::vector<double> y = td_targets(mb, detail::normals(rng, na));
    const std::vector<double> xs = detail::join_rows(
        mb.states, state_dim_, mb.actions, action_dim_, mb.m);
    std::vector<double> grad(critic1_.n_params(), 0.0);
    rep.critic1 = critic_mse(critic1_, xs, mb.m, y, &grad);
    adam_step(critic1_.params(), grad, opt_c1_);
    vec_fill(grad, 0.0);
    rep.critic2 = critic_mse(critic2_, xs, mb.m, y, &grad);
    adam_step(critic2_.params(), grad, opt_c2_);

    std::vector<double> agrad(actor_.n_params(), 0.0);
    double mean_logp = 0.0;
    rep.actor = actor_loss(mb, detail::normals(rng, na), &agrad, &mean_logp);
    adam_step(actor_.params(), agrad, opt_actor_);

    double tgrad = 0.0;
    rep.temperature = temperature_loss(mean_logp, &tgrad);
    std::vector<double> lb{log_beta_};
    adam_step(lb, {tgrad}, opt_beta_);
    log_beta_ = lb[0];

    rep.beta = std::exp(log_beta_);
    rep.updated = true;
    return rep;
  }

  void soft_update_targets(double omega) override {
    auto blend = [omega](const Mlp& src, Mlp& dst) {
      for (std::size_t i = 0; i < dst.params().size(); ++i)
        dst.params()[i] =
            omega * src.params()[i] + (1.0 - omega) * dst.params()[i];
    };
    blend(critic1_, target1_);
    blend(critic2_, target2_);
  }

  std::vector<CheckpointSection> to_sections() const override {
    return {to_section(actor_, "actor"),      to_section(critic1_, "critic1"),
            to_section(critic2_, "critic2"),  to_section(target1_, "target1"),
            to_section(target2_, "target2"),
            detail::scalar_section("temperature", "log_beta", log_beta_)};
  }

  void load_sections(
      const std::vector<CheckpointSection>& sections) override {
    from_section(detail::find_section(sections, "actor"), actor_);
    from_section(detail::find_section(sections, "critic1"), critic1_);
    from_section(detail::find_section(sections, "critic2"), critic2_);
    from_section(detail::find_section(sections, "target1"), target1_);
    from_section(detail::find_section(sections, "target2"), target2_);
    const auto& t = detail::find_section(sections, "temperature");
    if (t.data.size() != 1)
      throw DrlError("temperature section must hold a single value");
    log_beta_ = t.data[0];
  }

  const Mlp& actor() const { return actor_; }
  Mlp& actor() { return actor_; }
  const Mlp& critic1() const { return critic1_; }
  Mlp& critic1() { return critic1_; }
  const Mlp& critic2() const { return critic2_; }
  Mlp& critic2() { return critic2_; }
  const Mlp& target1() const { return target1_; }
  const Mlp& target2() const { return target2_; }
  double log_beta() const { return log_beta_; }
  double beta() const { return std::exp(log_beta_); }
  double target_entropy() const { return target_entropy_; }

 private:
  Mlp actor_;
  Mlp critic1_;
  Mlp critic2_;
  Mlp target1_;
  Mlp target2_;
  double log_beta_ = 0.0;
  double target_entropy_;
  AdamState opt_actor_;
  AdamState opt_c1_;
  AdamState opt_c2_;
  AdamState opt_beta_;
};

// Deterministic-policy baseline: tanh-bounded actor, single critic, target
// copies of both, Gaussian exploration noise added in action space.
class DdpgAgent : public Agent {
 public:
  static constexpr double kExploreStd = 0.1;

  DdpgAgent(int state_dim, int action_dim, const SimConfig& cfg, Rng& init_rng)
      : Agent(state_dim, action_dim, cfg),
        actor_(MlpShape{state_dim, cfg.hidden_width, cfg.n_hidden,
                        action_dim}),
        critic1_(MlpShape{state_dim + action_dim, cfg.hidden_width,
                          cfg.n_hidden, 1}) {
    actor_.init(init_rng, true);
    critic1_.init(init_rng, true);
    target_actor_ = actor_;
    target1_ = critic1_;
  }

  std::string kind() const override { return "ddpg"; }

  std::vector<double> select_action(const std::vector<double>& state,
                                    bool explore, Rng& rng) override {
    if (state.size() != static_cast<std::size_t>(state_dim_))
      throw DrlError("select_action: state dimension mismatch");
    const ForwardTrace t = forward(actor_, state);
    std::vector<double> a(static_cast<std::size_t>(action_dim_));
    for (int j = 0; j < action_dim_; ++j) {
      double v = std::tanh(t.output()[static_cast<std::size_t>(j)]);
      if (explore) v += rng.normal(0.0, kExploreStd);
      a[static_cast<std::size_t>(j)] = std::clamp(v, -1.0, 1.0);
    }
    return a;
  }

  std::vector<double> td_targets(const Minibatch& mb) const {
    const ForwardTrace ta =
        forward_batch(target_actor_, mb.next_states.data(), mb.m);
    std::vector<double> a_next(
        static_cast<std::size_t>(mb.m) * action_dim_);
    for (std::size_t k = 0; k < a_next.size(); ++k)
      a_next[k] = std::tanh(ta.output()[k]);
    const std::vector<double> xs = detail::join_rows(
        mb.next_states, state_dim_, a_next, action_dim_, mb.m);
    const ForwardTrace tq = forward_batch(target1_, xs.data(), mb.m);
    std::vector<double> y(static_cast<std::size_t>(mb.m));
    for (int i = 0; i < mb.m; ++i) {
      const auto k = static_cast<std::size_t>(i);
      y[k] = mb.rewards[k] + gamma_ * tq.output()[k];
    }
    return y;
  }

  // L = -mean Q(s, tanh(actor(s))); critic parameters held fixed.
  double actor_loss(const Minibatch& mb,
                    std::vector<double>* grad = nullptr) const {
    const ForwardTrace ta = forward_batch(actor_, mb.states.data(), mb.m);
    std::vector<double> a(static_cast<std::size_t>(mb.m) * action_dim_);
    for (std::size_t k = 0; k < a.size(); ++k)
      a[k] = std::tanh(ta.output()[k]);
    const std::vector<double> xs =
        detail::join_rows(mb.states, state_dim_, a, action_dim_, mb.m);
    const ForwardTrace tq = forward_batch(critic1_, xs.data(), mb.m);
    double loss = 0.0;
    for (int i = 0; i < mb.m; ++i)
      loss -= tq.output()[static_cast<std::size_t>(i)];
    loss /= mb.m;

    if (grad != nullptr) {
      std::vector<double> d_q(static_cast<std::size_t>(mb.m), -1.0 / mb.m);
      std::vector<double> scratch(critic1_.n_params(), 0.0);
      std::vector<double> din;
      backward(critic1_, tq, d_q, scratch, &din);
      const int joined = state_dim_ + action_dim_;
      std::vector<double> d_out(a.size());
      for (int i = 0; i < mb.m; ++i)
        for (int j = 0; j < action_dim_; ++j) {
          const std::size_t k =
              static_cast<std::size_t>(i) * action_dim_ + j;
          const double da =
              din[static_cast<std::size_t>(i) * joined + state_dim_ + j];
          d_out[k] = da * (1.0 - a[k] * a[k]);
        }
      backward(actor_, ta, d_out, *grad);
    }
    return loss;
  }

  LossReport update(Rng& rng) override {
    LossReport rep;
    if (!ready()) return rep;
    const Minibatch mb =
        gather(replay_, replay_.sample_indices(rng, minibatch_));
    const std::vector<double> y = td_targets(mb);
    const std::vector<double> xs = detail::join_rows(
        mb.states, state_dim_, mb.actions, action_dim_, mb.m);
    std::vector<double> grad(critic1_.n_params(), 0.0);
    rep.critic1 = critic_mse(critic1_, xs, mb.m, y, &grad);
    adam_step(critic1_.params(), grad, opt_c1_);

    std::vector<double> agrad(actor_.n_params(), 0.0);
    rep.actor = actor_loss(mb, &agrad);
    adam_step(actor_.params(), agrad, opt_actor_);
    rep.updated = true;
    return rep;
  }

  void soft_update_targets(double omega) override {
    auto blend = [omega](const Mlp& src, Mlp& dst) {
      for (std::size_t i = 0; i < dst.params().size(); ++i)
        dst.params()[i] =
            omega * src.params()[i] + (1.0 - omega) * dst.params()[i];
    };
    blend(actor_, target_actor_);
    blend(critic1_, target1_);
  }

  std::vector<CheckpointSection> to_sections() const override {
    return {to_section(actor_, "actor"), to_section(critic1_, "critic1"),
            to_section(target_actor_, "target_actor"),
            to_section(target1_, "target1")};
  }

  void load_sections(
      const std::vector<CheckpointSection>& sections) override {
    from_section(detail::find_section(sections, "actor"), actor_);
    from_section(detail::find_section(sections, "critic1"), critic1_);
    from_section(detail::find_section(sections, "target_actor"),
                 target_actor_);
    from_section(detail::find_section(sections, "target1"), target1_);
  }

  const Mlp& actor() const { return actor_; }
  Mlp& actor() { return actor_; }
  const Mlp& critic1() const { return critic1_; }
  Mlp& critic1() { return critic1_; }
  const Mlp& target_actor() const { return target_actor_; }
  const Mlp& target1() const { return target1_; }

 private:
  Mlp actor_;
  Mlp critic1_;
  Mlp target_actor_;
  Mlp target1_;
  AdamState opt_actor_;
  AdamState opt_c1_;
};

// Twin-delayed variant: second critic, clipped noise on the target action,
// actor updates every other call.
class Td3Agent : public Agent {
 public:
  static constexpr double kExploreStd = 0.1;
  static constexpr double kTargetNoiseStd = 0.2;
  static constexpr double kTargetNoiseClip = 0.5;
  static constexpr int kActorDelay = 2;

  Td3Agent(int state_dim, int action_dim, const SimConfig& cfg, Rng& init_rng)
      : Agent(state_dim, action_dim, cfg),
        actor_(MlpShape{state_dim, cfg.hidden_width, cfg.n_hidden,
                        action_dim}),
        critic1_(MlpShape{state_dim + action_dim, cfg.hidden_width,
                          cfg.n_hidden, 1}),
        critic2_(MlpShape{state_dim + action_dim, cfg.hidden_width,
                          cfg.n_hidden, 1}) {
    actor_.init(init_rng, true);
    critic1_.init(init_rng, true);
    critic2_.init(init_rng, true);
    target_actor_ = actor_;
    target1_ = critic1_;
    target2_ = critic2_;
  }

  std::string kind() const override { return "td3"; }

  std::vector<double> select_action(const std::vector<double>& state,
                                    bool explore, Rng& rng) override {
    if (state.size() != static_cast<std::size_t>(state_dim_))
      throw DrlError("select_action: state dimension mismatch");
    const ForwardTrace t = forward(actor_, state);
    std::vector<double> a(static_cast<std::size_t>(action_dim_));
    for (int j = 0; j < action_dim_; ++j) {
      double v = std::tanh(t.output()[static_cast<std::size_t>(j)]);
      if (explore) v += rng.normal(0.0, kExploreStd);
      a[static_cast<std::size_t>(j)] = std::clamp(v, -1.0, 1.0);
    }
    return a;
  }

  // Target policy smoothing: clipped Gaussian noise on the target action,
  // then the clipped double-Q minimum.
  std::vector<double> td_targets(const Minibatch& mb,
                                 const std::vector<double>& eps_next,
                                 std::vector<double>* a_next_out =
                                     nullptr) const {
    const ForwardTrace ta =
        forward_batch(target_actor_, mb.next_states.data(), mb.m);
    std::vector<double> a_next(
        static_cast<std::size_t>(mb.m) * action_dim_);
    for (std::size_t k = 0; k < a_next.size(); ++k) {
      const double noise = std::clamp(eps_next[k] * kTargetNoiseStd,
                                      -kTargetNoiseClip, kTargetNoiseClip);
      a_next[k] = std::clamp(std::tanh(ta.output()[k]) + noise, -1.0, 1.0);
    }
    if (a_next_out != nullptr) *a_next_out = a_next;
    const std::vector<double> xs = detail::join_rows(
        mb.next_states, state_dim_, a_next, action_dim_, mb.m);
    const ForwardTrace t1 = forward_batch(target1_, xs.data(), mb.m);
    const ForwardTrace t2 = forward_batch(target2_, xs.data(), mb.m);
    std::vector<double> y(static_cast<std::size_t>(mb.m));
    for (int i = 0; i < mb.m; ++i) {
      const auto k = static_cast<std::size_t>(i);
      y[k] = mb.rewards[k] +
             gamma_ * std::min(t1.output()[k], t2.output()[k]);
    }
    return y;
  }

  // L = -mean Q1(s, tanh(actor(s))).
  double actor_loss(const Minibatch& mb,
                    std::vector<double>* grad = nullptr) const {
    const ForwardTrace ta = forward_batch(actor_, mb.states.data(), mb.m);
    std::vector<double> a(static_cast<std::size_t>(mb.m) * action_dim_);
    for (std::size_t k = 0; k < a.size(); ++k)
      a[k] = std::tanh(ta.output()[k]);
    const std::vector<double> xs =
        detail::join_rows(mb.states, state_dim_, a, action_dim_, mb.m);
    const ForwardTrace tq = forward_batch(critic1_, xs.data(), mb.m);
    double loss = 0.0;
    for (int i = 0; i < mb.m; ++i)
      loss -= tq.output()[static_cast<std::size_t>(i)];
    loss /= mb.m;

    if (grad != nullptr) {
      std::vector<double> d_q(static_cast<std::size_t>(mb.m), -1.0 / mb.m);
      std::vector<double> scratch(critic1_.n_params(), 0.0);
      std::vector<double> din;
      backward(critic1_, tq, d_q, scratch, &din);
      const int joined = state_dim_ + action_dim_;
      std::vector<double> d_out(a.size());
      for (int i = 0; i < mb.m; ++i)
        for (int j = 0; j < action_dim_; ++j) {
          const std::size_t k =
              static_cast<std::size_t>(i) * action_dim_ + j;
          const double da =
              din[static_cast<std::size_t>(i) * joined + state_dim_ + j];
          d_out[k] = da * (1.0 - a[k] * a[k]);
        }
      backward(actor_, ta, d_out, *grad);
    }
    return loss;
  }

  LossReport update(Rng& rng) override {
    LossReport rep;
    if (!ready()) return rep;
    const Minibatch mb =
        gather(replay_, replay_.sample_indices(rng, minibatch_));
    const auto na = static_cast<std::size_t>(mb.m) * action_dim_;
    const std::vector<double> y = td_targets(mb, detail::normals(rng, na));
    const std::vector<double> xs = detail::join_rows(
        mb.states, state_dim_, mb.actions, action_dim_, mb.m);
    std::vector<double> grad(critic1_.n_params(), 0.0);
    rep.critic1 = critic_mse(critic1_, xs, mb.m, y, &grad);
    adam_step(critic1_.params(), grad, opt_c1_);
    vec_fill(grad, 0.0);
    rep.critic2 = critic_mse(critic2_, xs, mb.m, y, &grad);
    adam_step(critic2_.params(), grad, opt_c2_);

    update_count_ += 1;
    if (update_count_ % kActorDelay == 0) {
      std::vector<double> agrad(actor_.n_params(), 0.0);
      rep.actor = actor_loss(mb, &agrad);
      adam_step(actor_.params(), agrad, opt_actor_);
    }
    rep.updated = true;
    return rep;
  }

  void soft_update_targets(double omega) override {
    auto blend = [omega](const Mlp& src, Mlp& dst) {
      for (std::size_t i = 0; i < dst.params().size(); ++i)
        dst.params()[i] =
            omega * src.params()[i] + (1.0 - omega) * dst.params()[i];
    };
    blend(actor_, target_actor_);
    blend(critic1_, target1_);
    blend(critic2_, target2_);
  }

  std::vector<CheckpointSection> to_sections() const override {
    return {to_section(actor_, "actor"),
            to_section(critic1_, "critic1"),
            to_section(critic2_, "critic2"),
            to_section(target_actor_, "target_actor"),
            to_section(target1_, "target1"),
            to_section(target2_, "target2")};
  }

  void load_sections(
      const std::vector<CheckpointSection>& sections) override {
    from_section(detail::find_section(sections, "actor"), actor_);
    from_section(detail::find_section(sections, "critic1"), critic1_);
    from_section(detail::find_section(sections, "critic2"), critic2_);
    from_section(detail::find_section(sections, "target_actor"),
                 target_actor_);
    from_section(detail::find_section(sections, "target1"), target1_);
    from_section(detail::find_section(sections, "target2"), target2_);
  }

  const Mlp& actor() const { return actor_; }
  Mlp& actor() { return actor_; }
  const Mlp& critic1() const { return critic1_; }
  Mlp& critic1() { return critic1_; }
  const Mlp& critic2() const { return critic2_; }
  const Mlp& target_actor() const { return target_actor_; }
  const Mlp& target1() const { return target1_; }
  const Mlp& target2() const { return target2_; }
  std::int64_t update_count() const { return update_count_; }

 private:
  Mlp actor_;
  Mlp critic1_;
  Mlp critic2_;
  Mlp target_actor_;
  Mlp target1_;
  Mlp target2_;
  std::int64_t update_count_ = 0;
  AdamState opt_actor_;
  AdamState opt_c1_;
  AdamState opt_c2_;
};

// Uniform random policy; keeps the replay machinery so the orchestrator
// treats all agents identically, but never learns.
class RandomAgent : public Agent {
 public:
  RandomAgent(int state_dim, int action_dim, const SimConfig& cfg)
      : Agent(state_dim, action_dim, cfg) {}

  std::string kind() const override { return "random"; }

  std::vector<double> select_action(const std::vector<double>& state,
                                    bool /*explore*/, Rng& rng) override {
    if (state.size() != static_cast<std::size_t>(state_dim_))
      throw DrlError("select_action: state dimension mismatch");
    std::vector<double> a(static_cast<std::size_t>(action_dim_));
    for (double& v : a) v = rng.uniform(-1.0, 1.0);
    return a;
  }

  LossReport update(Rng& /*rng*/) override { return LossReport{}; }

  std::vector<CheckpointSection> to_sections() const override { return {}; }
  void load_sections(
      const std::vector<CheckpointSection>& /*sections*/) override {}
};

inline std::unique_ptr<Agent> make_agent(const SimConfig& cfg,
                                         Rng& init_rng) {
  const int dim = 3 * cfg.n_vehicles;
  if (cfg.agent_kind == "sac")
    return std::make_unique<SacAgent>(dim, dim, cfg, init_rng);
  if (cfg.agent_kind == "ddpg")
    return std::make_unique<DdpgAgent>(dim, dim, cfg, init_rng);
  if (cfg.agent_kind == "td3")
    return std::make_unique<Td3Agent>(dim, dim, cfg, init_rng);
  if (cfg.agent_kind == "random")
    return std::make_unique<RandomAgent>(dim, dim, cfg);
  throw DrlError("unknown agent_kind: " + cfg.agent_kind);
}

}  // namespace vecsim
