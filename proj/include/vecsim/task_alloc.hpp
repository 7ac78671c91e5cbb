#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "vecsim/compute.hpp"
#include "vecsim/config.hpp"

namespace vecsim {

// Project-wide rule for turning a real-valued iteration budget into a count:
// floor, with a 1e-9 dust absorber so products like 0.3 * 10 that are exact
// in the reals do not lose an iteration to binary rounding.
inline std::int64_t floor_iterations(double x) {
  return static_cast<std::int64_t>(std::floor(x + 1e-9));
}

// Iterations a vehicle is expected to produce in a slot if the whole
// compute window (slot minus transmission budget) were available.
inline std::int64_t expected_iterations(double f_hz, const SimConfig& cfg) {
  const double window = cfg.slot_duration_s - cfg.t_max_s;
  return floor_iterations(window * f_hz / cycles_per_iteration(cfg));
}

// Iterations the vehicle actually completes given its true available time
// t_prime (which may be shorter than the slot, or shorter than t_max).
inline std::int64_t actual_iterations(double f_hz, double t_prime_s,
                                      const SimConfig& cfg) {
  const double window = std::max(0.0, t_prime_s - cfg.t_max_s);
  return floor_iterations(window * f_hz / cycles_per_iteration(cfg));
}

// Iterations the RSU can run for this vehicle in the remainder of the slot
// after the transmission budget and the actual uplink delay are subtracted.
// Callers must pass a capped delay (<= t_max_s); a negative window clamps
// to zero budget.
inline std::int64_t rsu_budget(double trans_delay_s, const SimConfig& cfg) {
  const double window =
      cfg.slot_duration_s - cfg.t_max_s - trans_delay_s;
  if (window <= 0.0) return 0;
  const double iter = cycles_per_iteration(cfg) / cfg.f_rsu_hz;
  return floor_iterations(window / iter);
}

struct TaskSplit {
  int g = 0;                        // offload decision
  std::int64_t n_total = 0;         // expected this slot + carried backlog
  std::int64_t n_off_expected = 0;  // requested RSU share, before clamping
  std::int64_t overload = 0;        // request beyond what exists
  std::int64_t n_off = 0;           // iterations actually sent to the RSU
  std::int64_t n_local = 0;         // iterations run on the vehicle
  std::int64_t buffer_out = 0;      // carried to the next slot
};

// Per-slot split of the workload between RSU, local compute, and the carry
// buffer. `q` is the allocated RSU share in [0, 1]; the offload only
// happens when q clears the threshold and the uplink is feasible, otherwise
// the request is treated as zero. Conservation: n_off + n_local +
// buffer_out == n_total always.
inline TaskSplit allocate(double q, bool transmission_feasible,
                          std::int64_t n_expected, std::int64_t n_actual,
                          std::int64_t backlog_in,
                          std::int64_t n_rsu_budget, const SimConfig& cfg) {
  TaskSplit s;
  s.n_total = n_expected + backlog_in;
  s.g = (transmission_feasible && q >= cfg.q_threshold) ? 1 : 0;
  const double q_eff = s.g ? q : 0.0;
  s.n_off_expected =
      s.g ? floor_iterations(q_eff * static_cast<double>(n_rsu_budget)) : 0;
  s.overload = std::max<std::int64_t>(0, s.n_off_expected - s.n_total);
  s.n_off = std::min(s.n_off_expected, s.n_total);
  const std::int64_t n_re = s.n_total - s.n_off;
  s.n_local = std::min(n_re, n_actual);
  s.buffer_out = n_re - s.n_local;
  return s;
}

}  // namespace vecsim
