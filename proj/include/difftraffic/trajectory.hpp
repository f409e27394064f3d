#pragma once

// Observed and dense 1-D trajectories, observation-to-step alignment, and the
// absolute-error reconstruction loss.

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "difftraffic/errors.hpp"

namespace difftraffic {

struct ObservedTrajectory {
  std::string id;
  std::vector<double> timestamps;  // s, strictly increasing
  std::vector<double> positions;   // m

  std::size_t size() const { return timestamps.size(); }

  void validate() const {
    if (timestamps.size() != positions.size()) {
      throw InvalidArgument("trajectory " + id + ": timestamp/position count mismatch");
    }
    if (timestamps.size() < 2) {
      throw InvalidArgument("trajectory " + id + ": need at least 2 observations");
    }
    for (std::size_t j = 0; j < size(); ++j) {
      if (!std::isfinite(timestamps[j]) || !std::isfinite(positions[j])) {
        throw InvalidArgument("trajectory " + id + ": non-finite observation");
      }
      if (j > 0 && !(timestamps[j] > timestamps[j - 1])) {
        throw InvalidArgument("trajectory " + id + ": timestamps not strictly increasing");
      }
    }
  }

  double duration() const { return timestamps.back() - timestamps.front(); }
};

/// Shifts time and position so the first observation sits at (0, 0).
inline ObservedTrajectory normalized(const ObservedTrajectory& obs) {
  ObservedTrajectory out = obs;
  const double t0 = obs.timestamps.front();
  const double p0 = obs.positions.front();
  for (auto& t : out.timestamps) t -= t0;
  for (auto& p : out.positions) p -= p0;
  return out;
}

/// Uniformly sampled trajectory: row k is at start_time + k * dt.
struct DenseTrajectory {
  double dt = 0.1;
  double start_time = 0.0;
  std::vector<double> positions;
  std::vector<double> speeds;
  std::vector<double> accelerations;

  std::size_t size() const { return positions.size(); }
};

/// Nearest simulation step for each timestamp, round half up. Timestamps are
/// relative to the first observation. `horizon` is the last valid step.
inline std::vector<std::size_t> nearest_step_indices(std::span<const double> timestamps,
                                                     double dt, std::size_t horizon) {
  if (!(dt > 0.0)) throw InvalidArgument("nearest_step_indices: dt must be positive");
  std::vector<std::size_t> out;
  out.reserve(timestamps.size());
  for (double t : timestamps) {
    if (t < 0.0) throw InvalidArgument("nearest_step_indices: negative timestamp");
    // The slack absorbs representation error in t / dt (0.35 / 0.1 is
    // 3.4999999999999996) so exact halves still round up.
    const double k = std::floor(t / dt + 0.5 + 1e-9);
    if (k > static_cast<double>(horizon)) {
      throw InvalidArgument("nearest_step_indices: timestamp " + std::to_string(t) +
                            " beyond simulated horizon");
    }
    out.push_back(static_cast<std::size_t>(k));
  }
  return out;
}

struct LossResult {
  double loss = 0.0;
  std::vector<double> position_grads;  // one per dense row
};

/// Sum of absolute residuals between observed and simulated positions at the
/// aligned steps, with its subgradient (sign(0) = 0).
inline LossResult reconstruction_loss(std::span<const double> dense_positions,
                                      std::span<const double> observed,
                                      std::span<const std::size_t> indices) {
  if (observed.size() != indices.size()) {
    throw InvalidArgument("reconstruction_loss: observation/index count mismatch");
  }
  LossResult out;
  out.position_grads.assign(dense_positions.size(), 0.0);
  for (std::size_t j = 0; j < observed.size(); ++j) {
    const std::size_t k = indices[j];
    if (k >= dense_positions.size()) throw InvalidArgument("reconstruction_loss: index out of range");
    const double r = observed[j] - dense_positions[k];
    out.loss += std::abs(r);
    out.position_grads[k] += r > 0.0 ? -1.0 : (r < 0.0 ? 1.0 : 0.0);
  }
  return out;
}

}  // namespace difftraffic
