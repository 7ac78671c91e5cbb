#pragma once

#include <algorithm>
#include <array>
#include <cmath>

#include "vecsim/config.hpp"
#include "vecsim/rng.hpp"

namespace vecsim {

// Road network: a 2x2 Manhattan grid on a torus of period 2L per axis, with
// road lines at x in {0, L} and y in {0, L} and the four intersections at
// their crossings. L is block_length_m. Vehicles move along a road at a
// per-slot velocity, turn or go straight at intersections, and wrap at the
// torus boundary onto the opposite road end.

enum class Heading : int { kEast = 0, kNorth = 1, kWest = 2, kSouth = 3 };

struct VehicleKinematics {
  double x = 0.0;
  double y = 0.0;
  Heading heading = Heading::kEast;
  double velocity_mps = 0.0;  // in effect for the next advance
};

namespace detail {

inline bool heading_horizontal(Heading h) {
  return h == Heading::kEast || h == Heading::kWest;
}

inline double wrap_coord(double v, double period) {
  double w = std::fmod(v, period);
  if (w < 0.0) w += period;
  // fmod can return the period itself through rounding.
  if (w >= period) w = 0.0;
  return w;
}

// Distance along +axis direction to the next road line in {0, L} on a torus
// of period 2L. `forward` false means the -axis direction.
inline double dist_to_next_line(double pos, double l, bool forward) {
  const double period = 2.0 * l;
  double d;
  if (forward) {
    if (pos < l) {
      d = l - pos;
    } else {
      d = period - pos;
    }
  } else {
    if (pos > l) {
      d = pos - l;
    } else if (pos > 0.0) {
      d = pos;
    } else {
      d = l;  // exactly at 0: previous line is L, one block away
    }
  }
  if (d <= 0.0) d = l;  // exactly on a line: next one is a full block away
  return d;
}

}  // namespace detail

// True if the position lies on a road line (within tol), used as a model
// invariant after every step.
inline bool on_grid(double x, double y, double block_length_m,
                    double tol = 1e-6) {
  const double l = block_length_m;
  auto near_line = [&](double v) {
    const double w = detail::wrap_coord(v, 2.0 * l);
    return std::abs(w) <= tol || std::abs(w - l) <= tol ||
           std::abs(w - 2.0 * l) <= tol;
  };
  return near_line(x) || near_line(y);
}

inline Heading turn_left(Heading h) {
  return static_cast<Heading>((static_cast<int>(h) + 1) % 4);
}
inline Heading turn_right(Heading h) {
  return static_cast<Heading>((static_cast<int>(h) + 3) % 4);
}

// Advances one slot using the kinematics' current velocity, resolving any
// intersection crossings sequentially; snaps onto intersection coordinates
// when one is reached so repeated block-length trips land exactly. Draws the
// turn decision at every intersection and a fresh velocity for the next slot
// from `rng`.
inline VehicleKinematics step_mobility(const VehicleKinematics& kin,
                                       const SimConfig& cfg, Rng& rng) {
  const double l = cfg.block_length_m;
  const double period = 2.0 * l;
  VehicleKinematics out = kin;
  double remaining = kin.velocity_mps * cfg.slot_duration_s;
  // v*T < 2L holds for any sane config, but stay safe against many
  // crossings in one slot.
  int guard = 64;
  while (remaining > 0.0 && guard-- > 0) {
    const bool horiz = detail::heading_horizontal(out.heading);
    const bool forward =
        out.heading == Heading::kEast || out.heading == Heading::kNorth;
    double& moving = horiz ? out.x : out.y;
    const double to_line = detail::dist_to_next_line(moving, l, forward);
    if (remaining + 1e-9 >= to_line) {
      // Land exactly on the intersection line.
      double snapped;
      if (forward) {
        snapped = (moving < l) ? l : 0.0;
      } else {
        snapped = (moving > l) ? l : ((moving > 0.0) ? 0.0 : l);
      }
      moving = snapped;
      remaining = std::max(0.0, remaining - to_line);
      const int turn =
          rng.pick3(cfg.turn_probs[0], cfg.turn_probs[1]);
      if (turn == 0) {
        out.heading = turn_left(out.heading);
      } else if (turn == 1) {
        out.heading = turn_right(out.heading);
      }
      if (remaining <= 1e-12) {
        remaining = 0.0;
        break;
      }
    } else {
      moving = detail::wrap_coord(moving + (forward ? remaining : -remaining),
                                  period);
      remaining = 0.0;
    }
  }
  out.x = detail::wrap_coord(out.x, period);
  out.y = detail::wrap_coord(out.y, period);
  out.velocity_mps = rng.uniform(cfg.v_min_mps, cfg.v_max_mps);
  return out;
}

// Uniform placement over the road network (4 roads of length 2L each) with a
// heading along the chosen road and an initial per-slot velocity.
inline VehicleKinematics spawn_vehicle(const SimConfig& cfg, Rng& rng) {
  const double l = cfg.block_length_m;
  VehicleKinematics kin;
  const std::uint64_t road = rng.uniform_index(4);
  const double offset = rng.uniform(0.0, 2.0 * l);
  const bool fwd = rng.bernoulli(0.5);
  switch (road) {
    case 0:  // horizontal road y = 0
      kin.y = 0.0;
      kin.x = offset;
      kin.heading = fwd ? Heading::kEast : Heading::kWest;
      break;
    case 1:  // horizontal road y = L
      kin.y = l;
      kin.x = offset;
      kin.heading = fwd ? Heading::kEast : Heading::kWest;
      break;
    case 2:  // vertical road x = 0
      kin.x = 0.0;
      kin.y = offset;
      kin.heading = fwd ? Heading::kNorth : Heading::kSouth;
      break;
    default:  // vertical road x = L
      kin.x = l;
      kin.y = offset;
      kin.heading = fwd ? Heading::kNorth : Heading::kSouth;
      break;
  }
  kin.velocity_mps = rng.uniform(cfg.v_min_mps, cfg.v_max_mps);
  return kin;
}

// Plain Euclidean distance clamped from below so propagation formulas never
// see a zero distance (vehicle driving exactly through the RSU point).
inline double distance_to(double x, double y, const std::array<double, 2>& p,
                          double min_dist_m = 1.0) {
  const double dx = x - p[0];
  const double dy = y - p[1];
  return std::max(min_dist_m, std::sqrt(dx * dx + dy * dy));
}

}  // namespace vecsim
