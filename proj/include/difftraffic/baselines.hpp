#pragma once

// Classical comparison methods: linear interpolation, centered moving
// average, symmetric exponential smoothing, and finite-difference profiles.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "difftraffic/errors.hpp"
#include "difftraffic/trajectory.hpp"

namespace difftraffic {

struct Profiles {
  std::vector<double> speeds;
  std::vector<double> accelerations;
};

/// Forward differences with the last value repeated: v_k = (p_{k+1} - p_k) / dt,
/// a_k = (v_{k+1} - v_k) / dt.
inline Profiles finite_difference_profiles(std::span<const double> positions, double dt) {
  if (positions.size() < 3) throw InvalidArgument("finite_difference_profiles: need 3 positions");
  if (!(dt > 0.0)) throw InvalidArgument("finite_difference_profiles: dt must be positive");
  const std::size_t n = positions.size();
  Profiles out;
  out.speeds.resize(n);
  out.accelerations.resize(n);
  for (std::size_t k = 0; k + 1 < n; ++k) out.speeds[k] = (positions[k + 1] - positions[k]) / dt;
  out.speeds[n - 1] = out.speeds[n - 2];
  for (std::size_t k = 0; k + 1 < n; ++k) {
    out.accelerations[k] = (out.speeds[k + 1] - out.speeds[k]) / dt;
  }
  out.accelerations[n - 1] = out.accelerations[n - 2];
  return out;
}

namespace detail {

inline DenseTrajectory with_profiles(std::vector<double> positions, double dt, double start) {
  DenseTrajectory out;
  out.dt = dt;
  out.start_time = start;
  out.positions = std::move(positions);
  if (out.positions.size() >= 3) {
    auto prof = finite_difference_profiles(out.positions, dt);
    out.speeds = std::move(prof.speeds);
    out.accelerations = std::move(prof.accelerations);
  } else {
    out.speeds.assign(out.positions.size(), 0.0);
    out.accelerations.assign(out.positions.size(), 0.0);
    if (out.positions.size() == 2) {
      const double v = (out.positions[1] - out.positions[0]) / dt;
      out.speeds = {v, v};
    }
  }
  return out;
}

}  // namespace detail

/// Piecewise-linear positions at every multiple of dt in [T_1, T_l].
inline DenseTrajectory linear_interpolate(const ObservedTrajectory& obs, double dt) {
  obs.validate();
  if (!(dt > 0.0)) throw InvalidArgument("linear_interpolate: dt must be positive");
  const double t0 = obs.timestamps.front();
  const double span = obs.duration();
  const auto rows = static_cast<std::size_t>(std::floor(span / dt + 1e-9)) + 1;
  std::vector<double> positions(rows);
  std::size_t seg = 0;
  for (std::size_t k = 0; k < rows; ++k) {
    const double t = t0 + static_cast<double>(k) * dt;
    while (seg + 2 < obs.size() && obs.timestamps[seg + 1] <= t) ++seg;
    const double ta = obs.timestamps[seg];
    const double tb = obs.timestamps[seg + 1];
    // Snap to knots that sit on the grid up to rounding.
    if (std::abs(t - ta) <= 1e-9 * std::max(1.0, std::abs(ta))) {
      positions[k] = obs.positions[seg];
    } else if (std::abs(t - tb) <= 1e-9 * std::max(1.0, std::abs(tb))) {
      positions[k] = obs.positions[seg + 1];
    } else {
      const double w = std::clamp((t - ta) / (tb - ta), 0.0, 1.0);
      positions[k] = obs.positions[seg] + w * (obs.positions[seg + 1] - obs.positions[seg]);
    }
  }
  return detail::with_profiles(std::move(positions), dt, t0);
}

/// Centered mean over `window` samples; near the ends the window shrinks
/// symmetrically.
inline DenseTrajectory moving_average(const DenseTrajectory& dense, std::size_t window = 9) {
  if (window == 0 || window % 2 == 0) throw InvalidArgument("moving_average: window must be odd");
  const std::size_t n = dense.size();
  const std::size_t half = window / 2;
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t h = std::min({half, i, n - 1 - i});
    double sum = 0.0;
    for (std::size_t j = i - h; j <= i + h; ++j) sum += dense.positions[j];
    out[i] = sum / static_cast<double>(2 * h + 1);
  }
  return detail::with_profiles(std::move(out), dense.dt, dense.start_time);
}

/// Symmetric exponential kernel exp(-|i - j| / width), truncated at
/// 4 * width samples per side and renormalized over the samples present.
inline DenseTrajectory exponential_moving_average(const DenseTrajectory& dense, double width = 5.0) {
  if (!(width > 0.0)) throw InvalidArgument("exponential_moving_average: width must be positive");
  const std::size_t n = dense.size();
  const auto reach = static_cast<std::size_t>(std::floor(4.0 * width));
  std::vector<double> weights(reach + 1);
  for (std::size_t d = 0; d <= reach; ++d) weights[d] = std::exp(-static_cast<double>(d) / width);

  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= reach ? i - reach : 0;
    const std::size_t hi = std::min(n - 1, i + reach);
    double num = 0.0;
    double den = 0.0;
    for (std::size_t j = lo; j <= hi; ++j) {
      const double w = weights[j > i ? j - i : i - j];
      num += w * dense.positions[j];
      den += w;
    }
    out[i] = num / den;
  }
  return detail::with_profiles(std::move(out), dense.dt, dense.start_time);
}

}  // namespace difftraffic
