#pragma once

#include <cmath>

#include "vecsim/config.hpp"
#include "vecsim/rng.hpp"

namespace vecsim {

// Urban macro path loss in dB for a distance in meters (the constant term is
// referenced to kilometers).
inline double path_loss_db(double distance_m) {
  return 128.1 + 37.6 * std::log10(distance_m / 1000.0);
}

// dBm -> watts.
inline double noise_watts(double noise_dbm) {
  return std::pow(10.0, (noise_dbm - 30.0) / 10.0);
}

struct ChannelSample {
  double distance_m = 0.0;
  double path_loss_db = 0.0;
  double shadow_db = 0.0;   // log-normal shadowing term, in dB
  double fading = 0.0;      // small-scale power coefficient, Exp(1)
  double gain = 0.0;        // linear channel power gain
};

// Draws shadowing and small-scale fading for one vehicle-slot. Path loss
// attenuates (negative dB exponent); shadowing shifts the dB budget either
// way; Rayleigh-envelope power fading multiplies on top and is floored at
// 1e-12 by resampling so the gain never collapses to zero.
inline ChannelSample sample_channel(double distance_m, const SimConfig& cfg,
                                    Rng& rng) {
  ChannelSample s;
  s.distance_m = distance_m;
  s.path_loss_db = path_loss_db(distance_m);
  s.shadow_db = rng.normal(cfg.shadow_mean_db, cfg.shadow_std_db);
  s.fading = rng.exponential_unit(1e-12);
  const double large_scale =
      std::pow(10.0, -s.path_loss_db / 10.0) *
      std::pow(10.0, s.shadow_db / 10.0);
  s.gain = large_scale * s.fading;
  return s;
}

// Shannon rate over this vehicle's equal share of the uplink band. The
// "paper_literal" variant keeps the printed distance factor inside the SNR;
// "standard" (default) does not.
inline double achievable_rate(const ChannelSample& s, double power_w,
                              const SimConfig& cfg) {
  const double band_hz = cfg.total_bandwidth_hz / cfg.n_vehicles;
  double snr = power_w * s.gain / noise_watts(cfg.noise_dbm);
  if (cfg.rate_formula == "paper_literal") snr *= s.distance_m;
  return band_hz * std::log2(1.0 + snr);
}

}  // namespace vecsim
