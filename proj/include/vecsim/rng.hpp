#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace vecsim {

// Counter-free deterministic RNG. Every consumer derives its own stream from
// (seed, purpose tag, indices...) so that results never depend on the order
// in which unrelated components draw, or on how work is split across threads.
//
// Core generator is splitmix64; distribution code is written out here instead
// of using <random> because libstdc++/libc++ do not guarantee identical
// variate sequences and byte-identical output files are a hard requirement.

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Mixes an arbitrary list of 64-bit words into one stream key.
inline std::uint64_t mix_key(std::initializer_list<std::uint64_t> words) {
  std::uint64_t h = 0x8AD2D3F6E7A15B4CULL;
  for (std::uint64_t w : words) {
    std::uint64_t s = h ^ (w + 0x9E3779B97F4A7C15ULL);
    h = splitmix64(s) + 0x1D8E4E27C47D124FULL * (w | 1ULL);
  }
  return h;
}

// Stream purposes. Values are part of the stream identity: renumbering them
// changes every sampled trajectory, so append only.
enum class StreamPurpose : std::uint64_t {
  kMobilityInit = 1,
  kMobilityStep = 2,
  kTrueTime = 3,
  kChannel = 4,
  kActionNoise = 5,
  kAgentUpdate = 6,
  kReplaySample = 7,
  kNetInit = 8,
  kDataset = 9,
  kSslBatch = 10,
  kSslLocalTrain = 11,
  kSslRsuTrain = 12,
  kProbe = 13,
  kSelfTest = 14,
};

class Rng {
 public:
  explicit Rng(std::uint64_t key) : state_(key) {
    // A couple of warm-up outputs decorrelate nearby keys.
    splitmix64(state_);
    splitmix64(state_);
  }

  static Rng stream(std::uint64_t seed, StreamPurpose purpose,
                    std::uint64_t a = 0, std::uint64_t b = 0,
                    std::uint64_t c = 0) {
    return Rng(mix_key({seed, static_cast<std::uint64_t>(purpose), a, b, c}));
  }

  std::uint64_t next_u64() { return splitmix64(state_); }

  // Uniform on [0, 1): 53 random mantissa bits.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Unbiased integer in [0, n) via rejection.
  std::uint64_t uniform_index(std::uint64_t n) {
    if (n == 0) return 0;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % n;
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Box-Muller without the cached spare so that the draw count per call is
  // fixed (two uniforms), which keeps streams alignment-free.
  double normal(double mean, double stddev) {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return mean + stddev * r * std::cos(6.283185307179586476925286766559 * u2);
  }

  // Exp(1) by inversion. Resamples values below the floor so downstream
  // divisions by the fading coefficient stay well defined.
  double exponential_unit(double floor_value = 1e-12) {
    for (;;) {
      double u = uniform();
      while (u >= 1.0) u = uniform();
      const double x = -std::log1p(-u);
      if (x >= floor_value) return x;
    }
  }

  // Picks 0, 1, or 2 with the given probabilities (p0 + p1 + p2 == 1).
  int pick3(double p0, double p1) {
    const double u = uniform();
    if (u < p0) return 0;
    if (u < p0 + p1) return 1;
    return 2;
  }

 private:
  std::uint64_t state_;
};

}  // namespace vecsim
