#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace vecsim {

struct MetricsError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shortest decimal form that round-trips a double exactly.
inline std::string format_g17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// ---- per-slot observations ----------------------------------------------

// The unit both ratio metrics average over: one vehicle in one slot.
struct SlotObservation {
  int n_total = 0;
  int n_off = 0;
  int n_local = 0;
  int overload = 0;
  double energy_j = 0.0;
};

// Mean normalized overload. Slots with no pending work contribute 0, they
// are not dropped from the denominator.
inline double overload_ratio(const std::vector<SlotObservation>& obs) {
  if (obs.empty()) return 0.0;
  double acc = 0.0;
  for (const auto& o : obs)
    if (o.n_total > 0)
      acc += static_cast<double>(o.overload) / o.n_total;
  return acc / static_cast<double>(obs.size());
}

// Mean offloaded fraction of total work, in percent; same zero-work rule.
inline double offloading_efficiency_pct(
    const std::vector<SlotObservation>& obs) {
  if (obs.empty()) return 0.0;
  double acc = 0.0;
  for (const auto& o : obs)
    if (o.n_total > 0)
      acc += 100.0 * static_cast<double>(o.n_off) / o.n_total;
  return acc / static_cast<double>(obs.size());
}

// ---- per-episode aggregation --------------------------------------------

struct EpisodeMetrics {
  int episode = 0;
  std::string agent;
  double mean_energy_j = 0.0;
  double mean_reward = 0.0;
  std::int64_t computation_count = 0;
  std::int64_t offload_count = 0;
  double overload_ratio = 0.0;
  double offload_efficiency_pct = 0.0;
};

// `slot_rewards` holds one reward per slot; `obs` holds n_vehicles entries
// per slot. Mean energy is per slot (summed across vehicles first).
inline EpisodeMetrics summarize_episode(
    int episode, const std::string& agent,
    const std::vector<double>& slot_rewards,
    const std::vector<SlotObservation>& obs) {
  if (slot_rewards.empty() || obs.size() % slot_rewards.size() != 0)
    throw MetricsError(
        "summarize_episode: observations must be a whole number of slots");
  EpisodeMetrics m;
  m.episode = episode;
  m.agent = agent;
  for (double r : slot_rewards) m.mean_reward += r;
  m.mean_reward /= static_cast<double>(slot_rewards.size());
  for (const auto& o : obs) {
    m.mean_energy_j += o.energy_j;
    m.computation_count += o.n_local + o.n_off;
    m.offload_count += o.n_off;
  }
  m.mean_energy_j /= static_cast<double>(slot_rewards.size());
  m.overload_ratio = overload_ratio(obs);
  m.offload_efficiency_pct = offloading_efficiency_pct(obs);
  return m;
}

// ---- quantiles and box statistics ---------------------------------------

// Linear interpolation between order statistics: rank h = (n-1)p, value
// x[floor(h)] + frac(h) * (x[floor(h)+1] - x[floor(h)]).
inline double quantile_sorted(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw MetricsError("quantile of an empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw MetricsError("quantile p out of [0, 1]");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + (h - std::floor(h)) * (sorted[lo + 1] - sorted[lo]);
}

struct BoxStats {
  std::size_t n = 0;
  double mean = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double whisker_lo = 0.0;
  double whisker_hi = 0.0;
  std::vector<double> outliers;
};

// Tukey box: whiskers reach the extreme data points still inside
// 1.5 * IQR beyond the quartiles; everything outside is an outlier.
inline BoxStats box_stats(std::vector<double> values) {
  if (values.empty()) throw MetricsError("box_stats of an empty sample");
  std::sort(values.begin(), values.end());
  BoxStats b;
  b.n = values.size();
  for (double v : values) b.mean += v;
  b.mean /= static_cast<double>(values.size());
  b.q1 = quantile_sorted(values, 0.25);
  b.median = quantile_sorted(values, 0.5);
  b.q3 = quantile_sorted(values, 0.75);
  const double iqr = b.q3 - b.q1;
  const double lo_fence = b.q1 - 1.5 * iqr;
  const double hi_fence = b.q3 + 1.5 * iqr;
  b.whisker_lo = b.whisker_hi = b.median;
  bool found = false;
  for (double v : values) {
    if (v < lo_fence || v > hi_fence) {
      b.outliers.push_back(v);
      continue;
    }
    if (!found) {
      b.whisker_lo = v;
      found = true;
    }
    b.whisker_hi = v;
  }
  return b;
}

// ---- CSV emission --------------------------------------------------------

inline constexpr const char* kEpisodesHeader =
    "episode,agent,mean_energy_j,mean_reward,computation_count,"
    "offload_count,overload_ratio,offload_efficiency_pct";

inline std::string episode_csv_row(const EpisodeMetrics& m) {
  std::string row;
  row += std::to_string(m.episode);
  row += ',';
  row += m.agent;
  row += ',';
  row += format_g17(m.mean_energy_j);
  row += ',';
  row += format_g17(m.mean_reward);
  row += ',';
  row += std::to_string(m.computation_count);
  row += ',';
  row += std::to_string(m.offload_count);
  row += ',';
  row += format_g17(m.overload_ratio);
  row += ',';
  row += format_g17(m.offload_efficiency_pct);
  return row;
}

inline void write_episodes_csv(const std::string& path,
                               const std::vector<EpisodeMetrics>& rows) {
  std::ofstream out(path);
  if (!out) throw MetricsError("cannot write " + path);
  out << kEpisodesHeader << "\n";
  for (const auto& m : rows) out << episode_csv_row(m) << "\n";
  if (!out) throw MetricsError("short write on " + path);
}

inline constexpr const char* kBoxStatsHeader =
    "agent,metric,n,mean,q1,median,q3,whisker_lo,whisker_hi,n_outliers";

struct LabeledBoxStats {
  std::string agent;
  std::string metric;
  BoxStats stats;
};

inline void write_boxstats_csv(const std::string& path,
                               const std::vector<LabeledBoxStats>& rows) {
  std::ofstream out(path);
  if (!out) throw MetricsError("cannot write " + path);
  out << kBoxStatsHeader << "\n";
  for (const auto& r : rows) {
    out << r.agent << ',' << r.metric << ',' << r.stats.n << ','
        << format_g17(r.stats.mean) << ',' << format_g17(r.stats.q1) << ','
        << format_g17(r.stats.median) << ',' << format_g17(r.stats.q3) << ','
        << format_g17(r.stats.whisker_lo) << ','
        << format_g17(r.stats.whisker_hi) << ',' << r.stats.outliers.size()
        << "\n";
  }
  if (!out) throw MetricsError("short write on " + path);
}

// Episode means over the tail fraction of a run, the comparison unit used
// by the trend checks.
inline double tail_mean(const std::vector<double>& per_episode,
                        double fraction) {
  if (per_episode.empty()) throw MetricsError("tail_mean of an empty series");
  auto n = static_cast<std::size_t>(
      std::ceil(fraction * static_cast<double>(per_episode.size())));
  n = std::max<std::size_t>(1, std::min(n, per_episode.size()));
  double acc = 0.0;
  for (std::size_t i = per_episode.size() - n; i < per_episode.size(); ++i)
    acc += per_episode[i];
  return acc / static_cast<double>(n);
}

inline double head_mean(const std::vector<double>& per_episode,
                        double fraction) {
  if (per_episode.empty()) throw MetricsError("head_mean of an empty series");
  auto n = static_cast<std::size_t>(
      std::ceil(fraction * static_cast<double>(per_episode.size())));
  n = std::max<std::size_t>(1, std::min(n, per_episode.size()));
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += per_episode[i];
  return acc / static_cast<double>(n);
}

}  // namespace vecsim
