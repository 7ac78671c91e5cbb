#pragma once

#include <algorithm>
#include <cmath>
#include <limits>

#include "vecsim/config.hpp"

namespace vecsim {

// Cycles needed for one training iteration over the per-iteration data
// volume: cycles-per-KB density times data size in KB.
inline double cycles_per_iteration(const SimConfig& cfg) {
  return cfg.cycles_per_kb * cfg.data_size_kb;
}

// DVFS power draw at clock f: kappa * f^3.
inline double dvfs_power(double f_hz, double kappa) {
  return kappa * f_hz * f_hz * f_hz;
}

// Wall time of one iteration at clock f.
inline double iteration_delay(double f_hz, const SimConfig& cfg) {
  return cycles_per_iteration(cfg) / f_hz;
}

// Energy of one iteration at clock f: power * delay = kappa * f^2 * cycles.
inline double iteration_energy(double f_hz, const SimConfig& cfg) {
  return cfg.kappa * f_hz * f_hz * cycles_per_iteration(cfg);
}

struct TransmissionResult {
  double raw_delay_s = 0.0;  // payload / rate, uncapped
  double delay_s = 0.0;      // raw delay capped at t_max_s
  double energy_j = 0.0;     // power * capped delay
  bool feasible = false;     // raw delay fits in the transmission budget
};

// Uplink transfer of the per-round payload (training data plus model), both
// sized in KB. An uplink that cannot finish within t_max_s marks the slot
// infeasible for offloading; callers then force the offload decision to 0
// rather than raising an error.
inline TransmissionResult transmission(double power_w, double rate_bps,
                                       const SimConfig& cfg) {
  TransmissionResult r;
  const double payload_bits =
      (cfg.data_size_kb + cfg.model_size_kb) * 8192.0;
  r.raw_delay_s = rate_bps > 0.0
                      ? payload_bits / rate_bps
                      : std::numeric_limits<double>::infinity();
  r.feasible = r.raw_delay_s <= cfg.t_max_s;
  r.delay_s = std::min(r.raw_delay_s, cfg.t_max_s);
  r.energy_j = power_w * r.delay_s;
  return r;
}

// Slot energy roll-up: RSU compute and the uplink are only paid when the
// offload actually happened (g = 1); local compute is always paid.
inline double slot_energy(int g, double e_rsu_j, double e_local_j,
                          double e_trans_j) {
  return g * e_rsu_j + e_local_j + g * e_trans_j;
}

}  // namespace vecsim
