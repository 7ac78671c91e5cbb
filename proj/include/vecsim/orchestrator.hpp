#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <ostream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "vecsim/channel.hpp"
#include "vecsim/compute.hpp"
#include "vecsim/config.hpp"
#include "vecsim/drl.hpp"
#include "vecsim/fedssl.hpp"
#include "vecsim/metrics.hpp"
#include "vecsim/mobility.hpp"
#include "vecsim/neural.hpp"
#include "vecsim/rng.hpp"
#include "vecsim/task_alloc.hpp"

namespace vecsim {

struct OrchestratorError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr const char* kCodeVersion = "0.1.0";
inline constexpr int kSslClasses = 10;
// Fixed batch the global model's loss is tracked on; drawn once per run with
// frozen augmentations so the logged loss is a pure function of the weights.
inline constexpr int kLossEvalBatch = 32;

// Everything logged about one vehicle in one slot.
struct VehicleSlotLog {
  double t_prime_s = 0.0;
  double x_m = 0.0;
  double y_m = 0.0;
  double velocity_mps = 0.0;
  ChannelSample channel;
  double power_w = 0.0;
  double freq_hz = 0.0;
  double ratio = 0.0;
  double rate_bps = 0.0;
  TransmissionResult trans;
  std::int64_t n_expected = 0;
  std::int64_t n_actual = 0;
  std::int64_t n_rsu_budget = 0;
  TaskSplit split;
  double e_local_j = 0.0;
  double e_rsu_j = 0.0;
  double e_trans_j = 0.0;
  double e_total_j = 0.0;
};

struct SlotRecord {
  int episode = 0;  // 1-based
  int slot = 0;     // 1-based, resets each episode
  std::int64_t round = 0;  // accumulates across episodes
  std::vector<VehicleSlotLog> vehicles;
  double reward = 0.0;
  double global_ssl_loss = 0.0;
  LossReport losses;
  bool target_updated = false;
};

struct WorldOptions {
  bool train = true;    // exploration, replay pushes, scheduled agent updates
  bool run_ssl = true;  // execute SSL training and aggregation
  int workers = 1;      // SSL worker pool size
};

// Owns all mutable simulation state: vehicle kinematics, task backlog, the
// agent, the global encoder, and the named rng streams. One call to
// run_slot() advances everything by one slot.
//
// Determinism holds for any worker count because the shared streams are only
// drawn from on the orchestrator thread, in vehicle order, while the
// fanned-out SSL work draws from streams keyed by (vehicle, round).
class World {
 public:
  explicit World(const SimConfig& cfg, WorldOptions opts = {})
      : cfg_(cfg),
        opts_(opts),
        agg_mode_(parse_aggregation_mode(cfg.aggregation_mode)),
        state_builder_(cfg.n_vehicles),
        true_time_rng_(Rng::stream(cfg.seed, StreamPurpose::kTrueTime)),
        mobility_rng_(Rng::stream(cfg.seed, StreamPurpose::kMobilityStep)),
        channel_rng_(Rng::stream(cfg.seed, StreamPurpose::kChannel)),
        action_rng_(Rng::stream(cfg.seed, StreamPurpose::kActionNoise)),
        update_rng_(Rng::stream(cfg.seed, StreamPurpose::kAgentUpdate)) {
    if (opts_.workers < 1) throw OrchestratorError("workers must be >= 1");
    {
      Rng init = Rng::stream(cfg.seed, StreamPurpose::kMobilityInit);
      for (int v = 0; v < cfg.n_vehicles; ++v)
        kin_.push_back(spawn_vehicle(cfg, init));
    }
    {
      Rng data = Rng::stream(cfg.seed, StreamPurpose::kDataset);
      pool_ = make_synthetic_dataset(kSslClasses, cfg.ssl_per_class, data);
    }
    global_ = Mlp(encoder_shape(pool_.dim()));
    {
      Rng net = Rng::stream(cfg.seed, StreamPurpose::kNetInit);
      global_.init(net);
    }
    {
      Rng net = Rng::stream(cfg.seed, StreamPurpose::kNetInit, 1);
      agent_ = make_agent(cfg, net);
    }
    backlog_.assign(cfg.n_vehicles, 0);
    last_total_.assign(cfg.n_vehicles, 0);
    build_loss_eval_batch();
  }

  const SimConfig& config() const { return cfg_; }
  Agent& agent() { return *agent_; }
  Mlp& global_model() { return global_; }
  const ImagePool& pool() const { return pool_; }
  std::int64_t rounds_completed() const { return slots_done_; }

  void set_global_params(const std::vector<double>& p) {
    if (p.size() != global_.n_params())
      throw OrchestratorError("encoder parameter count mismatch");
    global_.params() = p;
    ++global_version_;
  }

  SlotRecord run_slot() {
    const int n = cfg_.n_vehicles;
    const std::int64_t r = slots_done_ + 1;
    SlotRecord rec;
    rec.round = r;
    rec.episode = static_cast<int>((r - 1) / cfg_.s_max) + 1;
    rec.slot = static_cast<int>((r - 1) % cfg_.s_max) + 1;
    rec.vehicles.resize(n);

    // One true-training-time draw per vehicle.
    for (int v = 0; v < n; ++v)
      rec.vehicles[v].t_prime_s = true_time_rng_.uniform(
          cfg_.true_time_fraction_range[0] * cfg_.slot_duration_s,
          cfg_.true_time_fraction_range[1] * cfg_.slot_duration_s);

    // Mobility, then channels, both in vehicle order.
    std::vector<double> gains(n), vels(n), totals(n);
    for (int v = 0; v < n; ++v) {
      kin_[v] = step_mobility(kin_[v], cfg_, mobility_rng_);
      auto& log = rec.vehicles[v];
      log.x_m = kin_[v].x;
      log.y_m = kin_[v].y;
      log.velocity_mps = kin_[v].velocity_mps;
    }
    for (int v = 0; v < n; ++v) {
      const double dist =
          distance_to(kin_[v].x, kin_[v].y, cfg_.rsu_position);
      rec.vehicles[v].channel = sample_channel(dist, cfg_, channel_rng_);
      gains[v] = rec.vehicles[v].channel.gain;
      vels[v] = kin_[v].velocity_mps;
      // The agent observes the workload as of the last completed slot; this
      // slot's total depends on the frequency it is about to pick.
      totals[v] = static_cast<double>(last_total_[v]);
    }
    const std::vector<double> state =
        state_builder_.build(gains, vels, totals);

    // The previous slot's transition completes now that its successor state
    // exists; the last slot of a run stays pending and is dropped.
    if (opts_.train && has_pending_)
      agent_->replay().push(
          {pending_state_, pending_action_, pending_reward_, state});

    const std::vector<double> raw =
        agent_->select_action(state, opts_.train, action_rng_);
    const MappedAction act = map_action(raw, cfg_);

    std::vector<double> energies(n), overloads(n), buffers(n);
    for (int v = 0; v < n; ++v) {
      auto& log = rec.vehicles[v];
      log.power_w = act.powers_w[v];
      log.freq_hz = act.freqs_hz[v];
      log.ratio = act.ratios[v];
      log.n_expected = expected_iterations(log.freq_hz, cfg_);
      log.n_actual = actual_iterations(log.freq_hz, log.t_prime_s, cfg_);
      log.rate_bps = achievable_rate(log.channel, log.power_w, cfg_);
      log.trans = transmission(log.power_w, log.rate_bps, cfg_);
      log.n_rsu_budget = rsu_budget(log.trans.delay_s, cfg_);
      log.split =
          allocate(log.ratio, log.trans.feasible, log.n_expected,
                   log.n_actual, backlog_[v], log.n_rsu_budget, cfg_);
      backlog_[v] = log.split.buffer_out;
      last_total_[v] = log.split.n_total;
      log.e_local_j =
          static_cast<double>(log.split.n_local) *
          iteration_energy(log.freq_hz, cfg_);
      log.e_rsu_j = static_cast<double>(log.split.n_off) *
                    iteration_energy(cfg_.f_rsu_hz, cfg_);
      log.e_trans_j = log.trans.energy_j;
      log.e_total_j =
          slot_energy(log.split.g, log.e_rsu_j, log.e_local_j, log.e_trans_j);
      energies[v] = log.e_total_j;
      overloads[v] = static_cast<double>(log.split.overload);
      buffers[v] = static_cast<double>(log.split.buffer_out);
    }

    if (opts_.run_ssl) run_ssl_round(rec, r);
    rec.global_ssl_loss = global_loss();

    rec.reward = reward(energies, overloads, buffers, cfg_.reward_weights);

    if (opts_.train) {
      pending_state_ = state;
      pending_action_ = raw;
      pending_reward_ = rec.reward;
      has_pending_ = true;
      if (r % cfg_.update_every_slots == 0)
        rec.losses = agent_->update(update_rng_);
      if (r % cfg_.target_update_every_slots == 0) {
        agent_->soft_update_targets(cfg_.tau_soft);
        rec.target_updated = true;
      }
    }
    ++slots_done_;
    return rec;
  }

  // Dual-temperature loss of the current global model on the frozen eval
  // batch, cached until the model changes.
  double global_loss() {
    if (loss_version_ != global_version_) {
      cached_loss_ =
          ssl_objective(global_, eval_v1_.data(), eval_v2_.data(),
                        eval_raw_.data(), eval_z_, cfg_.tau1, cfg_.tau2);
      loss_version_ = global_version_;
    }
    return cached_loss_;
  }

 private:
  void build_loss_eval_batch() {
    Rng probe = Rng::stream(cfg_.seed, StreamPurpose::kProbe);
    eval_z_ = static_cast<int>(
        std::min<std::size_t>(kLossEvalBatch, pool_.size()));
    const std::size_t dim = static_cast<std::size_t>(pool_.dim());
    eval_v1_.resize(eval_z_ * dim);
    eval_v2_.resize(eval_z_ * dim);
    eval_raw_.resize(eval_z_ * dim);
    for (int i = 0; i < eval_z_; ++i) {
      const auto idx = probe.uniform_index(pool_.size());
      const auto& img = pool_.images[idx];
      auto views = augment_pair(img, pool_.width, pool_.height,
                                pool_.channels, probe);
      std::copy(views.first.begin(), views.first.end(),
                eval_v1_.begin() + i * dim);
      std::copy(views.second.begin(), views.second.end(),
                eval_v2_.begin() + i * dim);
      std::copy(img.begin(), img.end(), eval_raw_.begin() + i * dim);
    }
  }

  ImagePool sample_batch(int v, std::int64_t r) {
    Rng batch_rng = Rng::stream(cfg_.seed, StreamPurpose::kSslBatch,
                                static_cast<std::uint64_t>(v),
                                static_cast<std::uint64_t>(r));
    ImagePool b;
    b.width = pool_.width;
    b.height = pool_.height;
    b.channels = pool_.channels;
    for (int i = 0; i < cfg_.ssl_batch; ++i) {
      const auto idx = batch_rng.uniform_index(pool_.size());
      b.images.push_back(pool_.images[idx]);
      b.labels.push_back(pool_.labels[idx]);
    }
    return b;
  }

  // One federated round: every vehicle trains a copy of the global model on
  // its allocated local budget, offloading vehicles additionally train an
  // RSU-side copy, and the round ends with one aggregation at the barrier.
  void run_ssl_round(SlotRecord& rec, std::int64_t r) {
    const int n = cfg_.n_vehicles;
    std::vector<std::vector<double>> locals(n), rsus(n);
    std::vector<int> gflag(n, 0);

    auto work = [&](int v) {
      const TaskSplit& split = rec.vehicles[v].split;
      const ImagePool batch = sample_batch(v, r);
      {
        Mlp m = global_;
        SgdState opt;
        Rng lrng = Rng::stream(cfg_.seed, StreamPurpose::kSslLocalTrain,
                               static_cast<std::uint64_t>(v),
                               static_cast<std::uint64_t>(r));
        local_train(m, batch, split.n_local, cfg_.ssl_lr, cfg_.ssl_momentum,
                    cfg_.tau1, cfg_.tau2, opt, lrng);
        locals[v] = m.params();
      }
      if (split.g && split.n_off > 0) {
        Mlp m = global_;
        SgdState opt;
        Rng rrng = Rng::stream(cfg_.seed, StreamPurpose::kSslRsuTrain,
                               static_cast<std::uint64_t>(v),
                               static_cast<std::uint64_t>(r));
        rsu_train(m, batch, split.n_off, cfg_.ssl_lr, cfg_.ssl_momentum,
                  cfg_.tau1, cfg_.tau2, opt, rrng);
        rsus[v] = m.params();
        gflag[v] = 1;
      }
    };

    const int workers = std::min(opts_.workers, n);
    if (workers <= 1) {
      for (int v = 0; v < n; ++v) work(v);
    } else {
      std::vector<std::thread> threads;
      threads.reserve(workers);
      for (int w = 0; w < workers; ++w)
        threads.emplace_back([&, w] {
          for (int v = w; v < n; v += workers) work(v);
        });
      for (auto& t : threads) t.join();
    }

    // Reduction order is vehicle order regardless of worker count.
    global_.params() = aggregate(locals, rsus, gflag, agg_mode_);
    ++global_version_;
  }

  SimConfig cfg_;
  WorldOptions opts_;
  AggregationMode agg_mode_;
  StateBuilder state_builder_;
  Rng true_time_rng_, mobility_rng_, channel_rng_, action_rng_, update_rng_;

  std::vector<VehicleKinematics> kin_;
  std::vector<std::int64_t> backlog_;
  std::vector<std::int64_t> last_total_;
  std::unique_ptr<Agent> agent_;

  ImagePool pool_;
  Mlp global_;
  std::vector<double> eval_v1_, eval_v2_, eval_raw_;
  int eval_z_ = 0;
  std::int64_t global_version_ = 0;
  std::int64_t loss_version_ = -1;
  double cached_loss_ = 0.0;

  bool has_pending_ = false;
  std::vector<double> pending_state_, pending_action_;
  double pending_reward_ = 0.0;
  std::int64_t slots_done_ = 0;
};

// Spec-facing alias for advancing the world by one slot.
inline SlotRecord run_slot(World& world) { return world.run_slot(); }

// ---- run artifacts -------------------------------------------------------

// p_bs_w is carried for completeness: the uplink to the base station is part
// of the allocation story but never enters the energy ledger, so the column
// is logged as zero.
inline constexpr const char* kSlotsHeader =
    "episode,slot,round,vehicle,t_prime_s,x_m,y_m,velocity_mps,distance_m,"
    "path_loss_db,shadow_db,fading,gain,power_w,freq_hz,ratio,p_bs_w,"
    "rate_bps,trans_delay_s,trans_feasible,n_expected,n_actual,n_rsu_budget,"
    "n_total,n_off_expected,n_off,n_local,overload,buffer_out,offload_flag,"
    "e_local_j,e_rsu_j,e_trans_j,e_total_j,reward,global_ssl_loss,"
    "agent_updated,critic1_loss,critic2_loss,actor_loss,temperature_loss,"
    "beta,target_updated";

inline void append_slot_rows(std::ostream& out, const SlotRecord& rec) {
  for (std::size_t v = 0; v < rec.vehicles.size(); ++v) {
    const VehicleSlotLog& L = rec.vehicles[v];
    out << rec.episode << ',' << rec.slot << ',' << rec.round << ',' << v
        << ',' << format_g17(L.t_prime_s) << ',' << format_g17(L.x_m) << ','
        << format_g17(L.y_m) << ',' << format_g17(L.velocity_mps) << ','
        << format_g17(L.channel.distance_m) << ','
        << format_g17(L.channel.path_loss_db) << ','
        << format_g17(L.channel.shadow_db) << ','
        << format_g17(L.channel.fading) << ',' << format_g17(L.channel.gain)
        << ',' << format_g17(L.power_w) << ',' << format_g17(L.freq_hz)
        << ',' << format_g17(L.ratio) << ',' << format_g17(0.0) << ','
        << format_g17(L.rate_bps) << ',' << format_g17(L.trans.delay_s)
        << ',' << (L.trans.feasible ? 1 : 0) << ',' << L.n_expected << ','
        << L.n_actual << ',' << L.n_rsu_budget << ',' << L.split.n_total
        << ',' << L.split.n_off_expected << ',' << L.split.n_off << ','
        << L.split.n_local << ',' << L.split.overload << ','
        << L.split.buffer_out << ',' << L.split.g << ','
        << format_g17(L.e_local_j) << ',' << format_g17(L.e_rsu_j) << ','
        << format_g17(L.e_trans_j) << ',' << format_g17(L.e_total_j) << ','
        << format_g17(rec.reward) << ',' << format_g17(rec.global_ssl_loss)
        << ',' << (rec.losses.updated ? 1 : 0) << ','
        << format_g17(rec.losses.critic1) << ','
        << format_g17(rec.losses.critic2) << ','
        << format_g17(rec.losses.actor) << ','
        << format_g17(rec.losses.temperature) << ','
        << format_g17(rec.losses.beta) << ','
        << (rec.target_updated ? 1 : 0) << "\n";
  }
}

inline SlotObservation to_observation(const VehicleSlotLog& L) {
  SlotObservation o;
  o.n_total = static_cast<int>(L.split.n_total);
  o.n_off = static_cast<int>(L.split.n_off);
  o.n_local = static_cast<int>(L.split.n_local);
  o.overload = static_cast<int>(L.split.overload);
  o.energy_j = L.e_total_j;
  return o;
}

struct RunResult {
  std::filesystem::path dir;
  std::vector<EpisodeMetrics> episodes;
};

inline void write_manifest(const std::filesystem::path& dir,
                           const SimConfig& cfg,
                           std::int64_t rounds_completed) {
  nlohmann::ordered_json j;
  j["code_version"] = kCodeVersion;
  j["agent_kind"] = cfg.agent_kind;
  j["seed"] = cfg.seed;
  j["n_vehicles"] = cfg.n_vehicles;
  j["e_max"] = cfg.e_max;
  j["s_max"] = cfg.s_max;
  j["rounds_completed"] = rounds_completed;
  std::ofstream out(dir / "manifest.json");
  if (!out) throw OrchestratorError("cannot write manifest.json");
  out << j.dump(2) << "\n";
}

// Full training run: E_max x S_max slots, slots.csv and episodes.csv, final
// encoder and agent checkpoints, config copy, manifest.
inline RunResult run_experiment(const SimConfig& cfg,
                                const std::filesystem::path& out_dir,
                                int workers = 1) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir / "checkpoints");
  save_config(cfg, (out_dir / "config.json").string());

  WorldOptions opts;
  opts.train = true;
  opts.run_ssl = true;
  opts.workers = workers;
  World world(cfg, opts);

  std::ofstream slots(out_dir / "slots.csv");
  if (!slots) throw OrchestratorError("cannot write slots.csv");
  slots << kSlotsHeader << "\n";

  RunResult result;
  result.dir = out_dir;
  std::vector<double> ep_rewards;
  std::vector<SlotObservation> ep_obs;
  for (int e = 1; e <= cfg.e_max; ++e) {
    ep_rewards.clear();
    ep_obs.clear();
    for (int t = 1; t <= cfg.s_max; ++t) {
      SlotRecord rec;
      try {
        rec = world.run_slot();
      } catch (const std::exception& ex) {
        throw OrchestratorError("episode " + std::to_string(e) + " slot " +
                                std::to_string(t) + ": " + ex.what());
      }
      append_slot_rows(slots, rec);
      ep_rewards.push_back(rec.reward);
      for (const auto& L : rec.vehicles) ep_obs.push_back(to_observation(L));
    }
    result.episodes.push_back(
        summarize_episode(e, cfg.agent_kind, ep_rewards, ep_obs));
  }
  slots.close();
  if (!slots) throw OrchestratorError("short write on slots.csv");

  write_episodes_csv((out_dir / "episodes.csv").string(), result.episodes);
  write_checkpoint((out_dir / "checkpoints" / "global_model.ckpt").string(),
                   {to_section(world.global_model(), "encoder")});
  write_checkpoint((out_dir / "checkpoints" / "agent.ckpt").string(),
                   world.agent().to_sections());
  write_manifest(out_dir, cfg, world.rounds_completed());
  return result;
}

// ---- frozen-policy evaluation protocol -----------------------------------

inline constexpr int kEvalRounds = 4;
inline constexpr int kEvalEpisodesPerRound = 50;
// Evaluation episode seeds live far from the small integers used for
// training seeds: base + round * 1000 + episode.
inline constexpr std::uint64_t kEvalSeedBase = 1000000;

struct EvalProtocolResult {
  std::vector<double> episode_energies;  // one mean per evaluation episode
  std::vector<double> episode_rewards;
  std::vector<double> round_means;       // mean energy per test round
  double mean_of_means = 0.0;
};

// Runs the boxed test protocol: kEvalRounds rounds of kEvalEpisodesPerRound
// seeded episodes each, all under the frozen policy (no exploration, no
// updates, no SSL weight changes).
inline EvalProtocolResult run_evaluation(
    const SimConfig& cfg, const std::vector<CheckpointSection>& agent_sections,
    int workers = 1) {
  EvalProtocolResult res;
  for (int round = 0; round < kEvalRounds; ++round) {
    double round_sum = 0.0;
    for (int ep = 0; ep < kEvalEpisodesPerRound; ++ep) {
      SimConfig c = cfg;
      c.e_max = 1;
      c.seed = cfg.seed + kEvalSeedBase +
               static_cast<std::uint64_t>(round) * 1000 +
               static_cast<std::uint64_t>(ep);
      WorldOptions opts;
      opts.train = false;
      opts.run_ssl = false;
      opts.workers = workers;
      World world(c, opts);
      world.agent().load_sections(agent_sections);

      std::vector<double> rewards;
      std::vector<SlotObservation> obs;
      for (int t = 1; t <= c.s_max; ++t) {
        const SlotRecord rec = world.run_slot();
        rewards.push_back(rec.reward);
        for (const auto& L : rec.vehicles) obs.push_back(to_observation(L));
      }
      const EpisodeMetrics m =
          summarize_episode(ep + 1, cfg.agent_kind, rewards, obs);
      res.episode_energies.push_back(m.mean_energy_j);
      res.episode_rewards.push_back(m.mean_reward);
      round_sum += m.mean_energy_j;
    }
    res.round_means.push_back(round_sum / kEvalEpisodesPerRound);
  }
  for (double m : res.round_means) res.mean_of_means += m;
  res.mean_of_means /= static_cast<double>(res.round_means.size());
  return res;
}

}  // namespace vecsim
