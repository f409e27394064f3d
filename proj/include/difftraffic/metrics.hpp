#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "difftraffic/errors.hpp"
#include "difftraffic/idm.hpp"
#include "difftraffic/optimizer.hpp"
#include "difftraffic/trajectory.hpp"

namespace difftraffic {

/// Accelerations strictly above this magnitude mark a trajectory implausible.
inline constexpr double kImplausibleAcceleration = 10.0;

struct AccelerationStats {
  double mean = 0.0;  // mean |a|
  double std = 0.0;   // population std of |a|
};

struct TrajectoryReport {
  std::string id;
  double positional_error_pct = 0.0;
  AccelerationStats acceleration;
  bool implausible = false;
  std::size_t negative_speed_steps = 0;
  double wall_seconds = 0.0;
};

/// Mean of |P_obs - P[k_j]| over observations, divided by the spatial length
/// of the observed trajectory, in percent. Steps past the end of `dense` are
/// clamped to its last row.
inline double positional_error_rate(const DenseTrajectory& dense, const ObservedTrajectory& obs) {
  obs.validate();
  if (dense.size() == 0) throw InvalidArgument("positional_error_rate: empty dense trajectory");
  const double length = obs.positions.back() - obs.positions.front();
  if (!(std::abs(length) > 0.0)) {
    throw InvalidArgument("positional_error_rate: zero-length trajectory " + obs.id);
  }
  std::vector<double> rel(obs.size());
  for (std::size_t j = 0; j < obs.size(); ++j) rel[j] = obs.timestamps[j] - dense.start_time;
  const auto indices =
      nearest_step_indices(rel, dense.dt, std::numeric_limits<std::size_t>::max() / 2);
  double sum = 0.0;
  for (std::size_t j = 0; j < obs.size(); ++j) {
    const std::size_t k = std::min(indices[j], dense.size() - 1);
    sum += std::abs(obs.positions[j] - dense.positions[k]);
  }
  return 100.0 * sum / static_cast<double>(obs.size()) / std::abs(length);
}

inline AccelerationStats acceleration_stats(std::span<const double> accelerations) {
  if (accelerations.empty()) throw InvalidArgument("acceleration_stats: empty input");
  const auto n = static_cast<double>(accelerations.size());
  double mean = 0.0;
  for (double a : accelerations) mean += std::abs(a);
  mean /= n;
  double var = 0.0;
  for (double a : accelerations) {
    const double d = std::abs(a) - mean;
    var += d * d;
  }
  return {mean, std::sqrt(var / n)};
}

inline bool implausible(std::span<const double> accelerations) {
  return std::any_of(accelerations.begin(), accelerations.end(),
                     [](double a) { return std::abs(a) > kImplausibleAcceleration; });
}

inline std::size_t negative_speed_steps(std::span<const double> speeds) {
  return static_cast<std::size_t>(
      std::count_if(speeds.begin(), speeds.end(), [](double v) { return v < 0.0; }));
}

inline TrajectoryReport evaluate(const DenseTrajectory& dense, const ObservedTrajectory& obs,
                                 double wall_seconds = 0.0) {
  TrajectoryReport r;
  r.id = obs.id;
  r.positional_error_pct = positional_error_rate(dense, obs);
  r.acceleration = acceleration_stats(dense.accelerations);
  r.implausible = implausible(dense.accelerations);
  r.negative_speed_steps = negative_speed_steps(dense.speeds);
  r.wall_seconds = wall_seconds;
  return r;
}

struct HistogramBin {
  std::string parameter;
  double low = 0.0;
  double high = 0.0;
  std::size_t count = 0;
};

struct CorpusSummary {
  std::size_t trajectories = 0;
  double positional_error_pct = 0.0;   // mean over trajectories
  double acceleration_mean = 0.0;      // mean over trajectories of mean |a|
  double acceleration_std = 0.0;       // mean over trajectories of std |a|
  double implausible_pct = 0.0;
  std::size_t negative_speed_steps = 0;
  double wall_seconds = 0.0;           // mean per trajectory
};

inline CorpusSummary summarize(std::span<const TrajectoryReport> reports) {
  CorpusSummary s;
  s.trajectories = reports.size();
  if (reports.empty()) return s;
  std::size_t flagged = 0;
  for (const auto& r : reports) {
    s.positional_error_pct += r.positional_error_pct;
    s.acceleration_mean += r.acceleration.mean;
    s.acceleration_std += r.acceleration.std;
    s.wall_seconds += r.wall_seconds;
    s.negative_speed_steps += r.negative_speed_steps;
    if (r.implausible) ++flagged;
  }
  const auto n = static_cast<double>(reports.size());
  s.positional_error_pct /= n;
  s.acceleration_mean /= n;
  s.acceleration_std /= n;
  s.wall_seconds /= n;
  s.implausible_pct = 100.0 * static_cast<double>(flagged) / n;
  return s;
}

inline const char* parameter_name(std::size_t index) {
  static constexpr const char* kNames[kOptimizedParams] = {"a_max", "a_pref", "t_pref", "s_min",
                                                            "v_targ"};
  return kNames[index];
}

/// Equal-width bins spanning each parameter's box. The top edge is inclusive.
inline std::vector<HistogramBin> parameter_histograms(std::span<const IdmParams> params,
                                                      const BoxConstraints& box = {},
                                                      std::size_t bins = 10) {
  if (bins == 0) throw InvalidArgument("parameter_histograms: need at least one bin");
  std::vector<HistogramBin> out;
  out.reserve(kOptimizedParams * bins);
  for (std::size_t p = 0; p < kOptimizedParams; ++p) {
    const double lo = box.bounds[p].low;
    const double width = (box.bounds[p].high - lo) / static_cast<double>(bins);
    const std::size_t first = out.size();
    for (std::size_t b = 0; b < bins; ++b) {
      out.push_back({parameter_name(p), lo + width * static_cast<double>(b),
                     b + 1 == bins ? box.bounds[p].high : lo + width * static_cast<double>(b + 1),
                     0});
    }
    for (const auto& param : params) {
      const double x = to_array(param)[p];
      const double pos = std::floor((x - lo) / width);
      const auto b = static_cast<std::size_t>(std::clamp(pos, 0.0, static_cast<double>(bins - 1)));
      ++out[first + b].count;
    }
  }
  return out;
}

struct Aggregate {
  CorpusSummary summary;
  std::vector<HistogramBin> histograms;
};

inline Aggregate aggregate(std::span<const TrajectoryReport> reports,
                           std::span<const IdmParams> params, const BoxConstraints& box = {}) {
  return {summarize(reports), params.empty() ? std::vector<HistogramBin>{}
                                             : parameter_histograms(params, box)};
}

}  // namespace difftraffic
