#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace vecsim {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// All experiment knobs in one flat struct. Fields map 1:1 onto the JSON
// config schema; unknown JSON keys are rejected so typos cannot silently
// fall back to defaults.
struct SimConfig {
  // Fleet and schedule.
  int n_vehicles = 5;
  int e_max = 3000;
  int s_max = 100;
  double slot_duration_s = 1.0;
  double t_max_s = 0.02;
  std::array<double, 2> true_time_fraction_range{0.005, 1.0};

  // Compute platform.
  double f_min_hz = 5e7;
  double f_max_hz = 4e8;
  double f_rsu_hz = 6e9;
  double p_min_w = 5.0;
  double p_max_w = 200.0;
  double kappa = 1e-27;
  double cycles_per_kb = 1600.0;
  double data_size_kb = 1500.0;
  double model_size_kb = 11468.8;

  // Radio.
  double total_bandwidth_hz = 2e6;
  double noise_dbm = -114.0;
  double shadow_mean_db = 0.0;
  double shadow_std_db = 8.0;

  // Road grid and motion.
  double v_min_mps = 10.0;
  double v_max_mps = 15.0;
  std::array<double, 3> turn_probs{0.3, 0.3, 0.4};
  double block_length_m = 250.0;
  std::array<double, 2> rsu_position{250.0, 250.0};
  std::array<double, 2> bs_position{0.0, 0.0};

  // Offloading policy.
  double q_threshold = 0.005;
  std::array<double, 3> reward_weights{10.0, 0.001, 0.01};

  // Agent training.
  double gamma = 0.99;
  double tau_soft = 0.005;
  double target_entropy_per_dim = -1.0;
  std::int64_t buffer_capacity = 1000000;
  int warmup_size = 256;
  int minibatch = 64;
  int update_every_slots = 2;
  int target_update_every_slots = 80;
  int hidden_width = 512;
  int n_hidden = 2;

  // Self-supervised training.
  int ssl_batch = 512;
  double tau1 = 0.1;
  double tau2 = 1.0;
  double ssl_lr = 0.01;
  double ssl_momentum = 0.9;
  int ssl_per_class = 100;

  // Mode switches.
  std::string agent_kind = "sac";
  std::string rate_formula = "standard";
  std::string aggregation_mode = "paper_2n";

  std::uint64_t seed = 1;
};

inline SimConfig default_config() { return SimConfig{}; }

// Returns one message per violated constraint; empty means valid.
inline std::vector<std::string> validate(const SimConfig& c) {
  std::vector<std::string> errs;
  auto fail = [&errs](const std::string& m) { errs.push_back(m); };

  if (c.n_vehicles < 1) fail("n_vehicles must be >= 1");
  if (c.e_max < 1) fail("e_max must be >= 1");
  if (c.s_max < 1) fail("s_max must be >= 1");
  if (!(c.slot_duration_s > 0.0)) fail("slot_duration_s must be > 0");
  if (!(c.t_max_s > 0.0 && c.t_max_s < c.slot_duration_s))
    fail("t_max_s must satisfy 0 < t_max_s < slot_duration_s");
  if (!(c.true_time_fraction_range[0] > 0.0 &&
        c.true_time_fraction_range[0] <= c.true_time_fraction_range[1] &&
        c.true_time_fraction_range[1] <= 1.0))
    fail("true_time_fraction_range must satisfy 0 < lo <= hi <= 1");
  if (!(c.f_min_hz > 0.0 && c.f_min_hz <= c.f_max_hz))
    fail("f_min_hz/f_max_hz must satisfy 0 < f_min_hz <= f_max_hz");
  if (!(c.f_rsu_hz > 0.0)) fail("f_rsu_hz must be > 0");
  if (!(c.p_min_w > 0.0 && c.p_min_w <= c.p_max_w))
    fail("p_min_w/p_max_w must satisfy 0 < p_min_w <= p_max_w");
  if (!(c.kappa > 0.0)) fail("kappa must be > 0");
  if (!(c.cycles_per_kb > 0.0)) fail("cycles_per_kb must be > 0");
  if (!(c.data_size_kb > 0.0)) fail("data_size_kb must be > 0");
  if (!(c.model_size_kb > 0.0)) fail("model_size_kb must be > 0");
  if (!(c.total_bandwidth_hz > 0.0)) fail("total_bandwidth_hz must be > 0");
  if (!(c.shadow_std_db >= 0.0)) fail("shadow_std_db must be >= 0");
  if (!(c.v_min_mps > 0.0 && c.v_min_mps <= c.v_max_mps))
    fail("v_min_mps/v_max_mps must satisfy 0 < v_min_mps <= v_max_mps");
  {
    double sum = 0.0;
    bool nonneg = true;
    for (double p : c.turn_probs) {
      sum += p;
      nonneg = nonneg && p >= 0.0;
    }
    if (!nonneg || std::abs(sum - 1.0) > 1e-9)
      fail("turn_probs must be non-negative and sum to 1");
  }
  if (!(c.block_length_m > 0.0)) fail("block_length_m must be > 0");
  if (!(c.q_threshold > 0.0 && c.q_threshold < 1.0))
    fail("q_threshold must satisfy 0 < q_threshold < 1");
  for (double w : c.reward_weights)
    if (!(w >= 0.0)) {
      fail("reward_weights must be non-negative");
      break;
    }
  if (!(c.gamma >= 0.0 && c.gamma <= 1.0)) fail("gamma must be in [0, 1]");
  if (!(c.tau_soft > 0.0 && c.tau_soft <= 1.0))
    fail("tau_soft must be in (0, 1]");
  if (!std::isfinite(c.target_entropy_per_dim))
    fail("target_entropy_per_dim must be finite");
  if (c.buffer_capacity < 1) fail("buffer_capacity must be >= 1");
  if (c.warmup_size < 1) fail("warmup_size must be >= 1");
  if (c.minibatch < 1) fail("minibatch must be >= 1");
  if (c.minibatch > c.buffer_capacity)
    fail("minibatch must be <= buffer_capacity");
  if (c.update_every_slots < 1) fail("update_every_slots must be >= 1");
  if (c.target_update_every_slots < 1)
    fail("target_update_every_slots must be >= 1");
  if (c.hidden_width < 1) fail("hidden_width must be >= 1");
  if (c.n_hidden < 1) fail("n_hidden must be >= 1");
  if (c.ssl_batch < 2) fail("ssl_batch must be >= 2");
  if (!(c.tau1 > 0.0)) fail("tau1 must be > 0");
  if (!(c.tau2 > 0.0)) fail("tau2 must be > 0");
  if (!(c.ssl_lr > 0.0)) fail("ssl_lr must be > 0");
  if (!(c.ssl_momentum >= 0.0 && c.ssl_momentum < 1.0))
    fail("ssl_momentum must be in [0, 1)");
  if (c.ssl_per_class < 2) fail("ssl_per_class must be >= 2");
  if (c.agent_kind != "sac" && c.agent_kind != "ddpg" &&
      c.agent_kind != "td3" && c.agent_kind != "random")
    fail("agent_kind must be one of sac, ddpg, td3, random");
  if (c.rate_formula != "standard" && c.rate_formula != "paper_literal")
    fail("rate_formula must be one of standard, paper_literal");
  if (c.aggregation_mode != "paper_2n" &&
      c.aggregation_mode != "produced_only")
    fail("aggregation_mode must be one of paper_2n, produced_only");
  return errs;
}

namespace detail {

template <typename T>
void read_field(nlohmann::json& j, const char* key, T& out,
                std::vector<std::string>& errs) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    out = it->template get<T>();
  } catch (const nlohmann::json::exception&) {
    errs.push_back(std::string(key) + " has the wrong JSON type");
  }
  j.erase(it);
}

template <typename T, std::size_t N>
void read_array(nlohmann::json& j, const char* key, std::array<T, N>& out,
                std::vector<std::string>& errs) {
  auto it = j.find(key);
  if (it == j.end()) return;
  if (!it->is_array() || it->size() != N) {
    errs.push_back(std::string(key) + " must be an array of length " +
                   std::to_string(N));
    j.erase(it);
    return;
  }
  try {
    for (std::size_t i = 0; i < N; ++i) out[i] = (*it)[i].template get<T>();
  } catch (const nlohmann::json::exception&) {
    errs.push_back(std::string(key) + " has the wrong JSON element type");
  }
  j.erase(it);
}

}  // namespace detail

// Applies a parsed JSON object on top of `cfg`. Consumes recognized keys;
// anything left over is unknown and reported as an error.
inline void apply_json(nlohmann::json j, SimConfig& cfg) {
  using detail::read_array;
  using detail::read_field;
  if (!j.is_object()) throw ConfigError("config root must be a JSON object");
  std::vector<std::string> errs;

  read_field(j, "n_vehicles", cfg.n_vehicles, errs);
  read_field(j, "e_max", cfg.e_max, errs);
  read_field(j, "s_max", cfg.s_max, errs);
  read_field(j, "slot_duration_s", cfg.slot_duration_s, errs);
  read_field(j, "t_max_s", cfg.t_max_s, errs);
  read_array(j, "true_time_fraction_range", cfg.true_time_fraction_range,
             errs);
  read_field(j, "f_min_hz", cfg.f_min_hz, errs);
  read_field(j, "f_max_hz", cfg.f_max_hz, errs);
  read_field(j, "f_rsu_hz", cfg.f_rsu_hz, errs);
  read_field(j, "p_min_w", cfg.p_min_w, errs);
  read_field(j, "p_max_w", cfg.p_max_w, errs);
  read_field(j, "kappa", cfg.kappa, errs);
  read_field(j, "cycles_per_kb", cfg.cycles_per_kb, errs);
  read_field(j, "data_size_kb", cfg.data_size_kb, errs);
  read_field(j, "model_size_kb", cfg.model_size_kb, errs);
  read_field(j, "total_bandwidth_hz", cfg.total_bandwidth_hz, errs);
  read_field(j, "noise_dbm", cfg.noise_dbm, errs);
  read_field(j, "shadow_mean_db", cfg.shadow_mean_db, errs);
  read_field(j, "shadow_std_db", cfg.shadow_std_db, errs);
  read_field(j, "v_min_mps", cfg.v_min_mps, errs);
  read_field(j, "v_max_mps", cfg.v_max_mps, errs);
  read_array(j, "turn_probs", cfg.turn_probs, errs);
  read_field(j, "block_length_m", cfg.block_length_m, errs);
  read_array(j, "rsu_position", cfg.rsu_position, errs);
  read_array(j, "bs_position", cfg.bs_position, errs);
  read_field(j, "q_threshold", cfg.q_threshold, errs);
  read_array(j, "reward_weights", cfg.reward_weights, errs);
  read_field(j, "gamma", cfg.gamma, errs);
  read_field(j, "tau_soft", cfg.tau_soft, errs);
  read_field(j, "target_entropy_per_dim", cfg.target_entropy_per_dim, errs);
  read_field(j, "buffer_capacity", cfg.buffer_capacity, errs);
  read_field(j, "warmup_size", cfg.warmup_size, errs);
  read_field(j, "minibatch", cfg.minibatch, errs);
  read_field(j, "update_every_slots", cfg.update_every_slots, errs);
  read_field(j, "target_update_every_slots", cfg.target_update_every_slots,
             errs);
  read_field(j, "hidden_width", cfg.hidden_width, errs);
  read_field(j, "n_hidden", cfg.n_hidden, errs);
  read_field(j, "ssl_batch", cfg.ssl_batch, errs);
  read_field(j, "tau1", cfg.tau1, errs);
  read_field(j, "tau2", cfg.tau2, errs);
  read_field(j, "ssl_lr", cfg.ssl_lr, errs);
  read_field(j, "ssl_momentum", cfg.ssl_momentum, errs);
  read_field(j, "ssl_per_class", cfg.ssl_per_class, errs);
  read_field(j, "agent_kind", cfg.agent_kind, errs);
  read_field(j, "rate_formula", cfg.rate_formula, errs);
  read_field(j, "aggregation_mode", cfg.aggregation_mode, errs);
  read_field(j, "seed", cfg.seed, errs);

  for (auto& [key, value] : j.items()) {
    (void)value;
    errs.push_back("unknown config key: " + key);
  }
  if (!errs.empty()) {
    std::string msg = "invalid config:";
    for (const auto& e : errs) msg += "\n  " + e;
    throw ConfigError(msg);
  }
}

inline nlohmann::ordered_json to_json(const SimConfig& c) {
  nlohmann::ordered_json j;
  j["n_vehicles"] = c.n_vehicles;
  j["e_max"] = c.e_max;
  j["s_max"] = c.s_max;
  j["slot_duration_s"] = c.slot_duration_s;
  j["t_max_s"] = c.t_max_s;
  j["true_time_fraction_range"] = c.true_time_fraction_range;
  j["f_min_hz"] = c.f_min_hz;
  j["f_max_hz"] = c.f_max_hz;
  j["f_rsu_hz"] = c.f_rsu_hz;
  j["p_min_w"] = c.p_min_w;
  j["p_max_w"] = c.p_max_w;
  j["kappa"] = c.kappa;
  j["cycles_per_kb"] = c.cycles_per_kb;
  j["data_size_kb"] = c.data_size_kb;
  j["model_size_kb"] = c.model_size_kb;
  j["total_bandwidth_hz"] = c.total_bandwidth_hz;
  j["noise_dbm"] = c.noise_dbm;
  j["shadow_mean_db"] = c.shadow_mean_db;
  j["shadow_std_db"] = c.shadow_std_db;
  j["v_min_mps"] = c.v_min_mps;
  j["v_max_mps"] = c.v_max_mps;
  j["turn_probs"] = c.turn_probs;
  j["block_length_m"] = c.block_length_m;
  j["rsu_position"] = c.rsu_position;
  j["bs_position"] = c.bs_position;
  j["q_threshold"] = c.q_threshold;
  j["reward_weights"] = c.reward_weights;
  j["gamma"] = c.gamma;
  j["tau_soft"] = c.tau_soft;
  j["target_entropy_per_dim"] = c.target_entropy_per_dim;
  j["buffer_capacity"] = c.buffer_capacity;
  j["warmup_size"] = c.warmup_size;
  j["minibatch"] = c.minibatch;
  j["update_every_slots"] = c.update_every_slots;
  j["target_update_every_slots"] = c.target_update_every_slots;
  j["hidden_width"] = c.hidden_width;
  j["n_hidden"] = c.n_hidden;
  j["ssl_batch"] = c.ssl_batch;
  j["tau1"] = c.tau1;
  j["tau2"] = c.tau2;
  j["ssl_lr"] = c.ssl_lr;
  j["ssl_momentum"] = c.ssl_momentum;
  j["ssl_per_class"] = c.ssl_per_class;
  j["agent_kind"] = c.agent_kind;
  j["rate_formula"] = c.rate_formula;
  j["aggregation_mode"] = c.aggregation_mode;
  j["seed"] = c.seed;
  return j;
}

// `spec` is "key=value" with the value parsed as a JSON literal; bare words
// that fail to parse as JSON are treated as strings (agent_kind=sac works
// without quoting).
inline void apply_override(const std::string& spec, SimConfig& cfg) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("override must look like key=value: " + spec);
  const std::string key = spec.substr(0, eq);
  const std::string raw = spec.substr(eq + 1);
  nlohmann::json value = nlohmann::json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  nlohmann::json patch;
  patch[key] = value;
  apply_json(patch, cfg);
}

inline void validate_or_throw(const SimConfig& cfg) {
  const auto errs = validate(cfg);
  if (!errs.empty()) {
    std::string msg = "invalid config:";
    for (const auto& e : errs) msg += "\n  " + e;
    throw ConfigError(msg);
  }
}

// Full pipeline: defaults <- file <- VECSIM_SEED <- --set overrides, then
// validation. `overrides` come from the command line in given order.
inline SimConfig load_config(const std::string& path,
                             const std::vector<std::string>& overrides = {}) {
  SimConfig cfg = default_config();
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded())
      throw ConfigError("config file is not valid JSON: " + path);
    apply_json(std::move(j), cfg);
  }
  if (const char* env = std::getenv("VECSIM_SEED")) {
    try {
      cfg.seed = static_cast<std::uint64_t>(std::stoull(env));
    } catch (const std::exception&) {
      throw ConfigError("VECSIM_SEED must be an unsigned integer");
    }
  }
  for (const auto& o : overrides) apply_override(o, cfg);
  validate_or_throw(cfg);
  return cfg;
}

inline void save_config(const SimConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write config file: " + path);
  out << to_json(cfg).dump(2) << "\n";
}

}  // namespace vecsim
