#pragma once

// Gradient-based fitting of driver parameters and virtual-leader terms to an
// observed trajectory.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "difftraffic/engine.hpp"
#include "difftraffic/errors.hpp"
#include "difftraffic/idm.hpp"
#include "difftraffic/optimizer.hpp"
#include "difftraffic/trajectory.hpp"

namespace difftraffic {

struct FixedLeaderTerms {
  std::vector<double> gaps;
  std::vector<double> speed_diffs;
};

struct FitOptions {
  double dt = 0.1;
  std::size_t iterations = 500;
  LearningRate learning_rate;
  BoxConstraints box;
  IdmParams initial_params;  // (10, 2, 1, 5, 50), a_min = -10
  double initial_gap = 10.0;
  double initial_speed_diff = 0.0;
  // When set, the leader terms are held at these values (at least K entries)
  // and only the five parameters are optimized.
  std::optional<FixedLeaderTerms> leader;
};

struct FitResult {
  std::string id;
  IdmParams params;
  std::vector<double> gaps;
  std::vector<double> speed_diffs;
  DenseTrajectory dense;  // absolute time and position
  double initial_loss = 0.0;
  double final_loss = 0.0;
  std::vector<double> loss_trace;
  std::vector<double> residuals;  // observed minus fitted, per observation
  double wall_seconds = 0.0;
};

/// Number of Euler steps so the last observation has a valid nearest step.
inline std::size_t simulation_steps(double duration, double dt) {
  return static_cast<std::size_t>(std::ceil(duration / dt)) + 1;
}

/// Speed implied by the first two observations, floored at zero.
inline double initial_speed(const ObservedTrajectory& obs) {
  const double v = (obs.positions[1] - obs.positions[0]) / (obs.timestamps[1] - obs.timestamps[0]);
  return std::max(v, 0.0);
}

inline FitResult fit(const ObservedTrajectory& observations, const FitOptions& options = {}) {
  const auto started = std::chrono::steady_clock::now();
  observations.validate();
  options.box.validate();
  if (!(options.dt > 0.0)) throw InvalidArgument("fit: dt must be positive");
  if (options.iterations == 0) throw InvalidArgument("fit: need at least one iteration");

  const ObservedTrajectory obs = normalized(observations);
  const std::size_t steps = simulation_steps(obs.duration(), options.dt);
  const auto indices = nearest_step_indices(obs.timestamps, options.dt, steps);
  const double v0 = initial_speed(obs);

  const bool free_leader = !options.leader.has_value();
  if (!free_leader && (options.leader->gaps.size() < steps ||
                       options.leader->speed_diffs.size() < steps)) {
    throw InvalidArgument("fit: fixed leader terms shorter than the simulation horizon");
  }

  // Flat variable layout: five parameters, then K gaps, then K speed diffs.
  const std::size_t n_vars = kOptimizedParams + (free_leader ? 2 * steps : 0);
  std::vector<double> vars(n_vars);
  const ParamArray init = to_array(options.initial_params);
  std::copy(init.begin(), init.end(), vars.begin());
  std::vector<double> gaps, speed_diffs;
  if (free_leader) {
    std::fill(vars.begin() + kOptimizedParams, vars.begin() + kOptimizedParams + steps,
              options.initial_gap);
    std::fill(vars.begin() + kOptimizedParams + steps, vars.end(), options.initial_speed_diff);
  } else {
    gaps.assign(options.leader->gaps.begin(), options.leader->gaps.begin() + steps);
    speed_diffs.assign(options.leader->speed_diffs.begin(),
                       options.leader->speed_diffs.begin() + steps);
  }

  auto params_from = [&](const std::vector<double>& x) {
    ParamArray a;
    std::copy(x.begin(), x.begin() + kOptimizedParams, a.begin());
    return from_array(a, options.initial_params);
  };
  auto simulate = [&](const std::vector<double>& x) {
    if (free_leader) {
      const std::span<const double> all(x);
      return rollout_virtual_leader(0.0, v0, params_from(x), all.subspan(kOptimizedParams, steps),
                                    all.subspan(kOptimizedParams + steps, steps), options.dt);
    }
    return rollout_virtual_leader(0.0, v0, params_from(x), gaps, speed_diffs, options.dt);
  };

  FitResult result;
  result.id = observations.id;
  result.loss_trace.reserve(options.iterations + 1);
  AdamState adam(n_vars);
  std::vector<double> grads(n_vars);

  for (std::size_t it = 0; it < options.iterations; ++it) {
    const auto buffer = simulate(vars);
    const auto loss = reconstruction_loss(buffer.positions, obs.positions, indices);
    if (!std::isfinite(loss.loss)) throw NumericalFailure("fit: non-finite loss at iteration", it);
    result.loss_trace.push_back(loss.loss);

    const auto adj = backward(buffer, loss.position_grads);
    std::copy(adj.params[0].begin(), adj.params[0].end(), grads.begin());
    if (free_leader) {
      std::copy(adj.gaps.begin(), adj.gaps.end(), grads.begin() + kOptimizedParams);
      std::copy(adj.speed_diffs.begin(), adj.speed_diffs.end(),
                grads.begin() + kOptimizedParams + steps);
    }
    adam_step(adam, vars, grads, lr_schedule(it, options.iterations, options.learning_rate));
    project(std::span<double, kOptimizedParams>(vars.data(), kOptimizedParams), options.box);
  }

  const auto buffer = simulate(vars);
  const auto loss = reconstruction_loss(buffer.positions, obs.positions, indices);
  if (!std::isfinite(loss.loss)) {
    throw NumericalFailure("fit: non-finite loss at iteration", options.iterations);
  }
  result.loss_trace.push_back(loss.loss);
  result.initial_loss = result.loss_trace.front();
  result.final_loss = loss.loss;
  result.params = params_from(vars);
  if (free_leader) {
    result.gaps.assign(vars.begin() + kOptimizedParams, vars.begin() + kOptimizedParams + steps);
    result.speed_diffs.assign(vars.begin() + kOptimizedParams + steps, vars.end());
  } else {
    result.gaps = std::move(gaps);
    result.speed_diffs = std::move(speed_diffs);
  }

  const double origin = observations.positions.front();
  auto& dense = result.dense;
  dense.dt = options.dt;
  dense.start_time = observations.timestamps.front();
  dense.positions.resize(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) dense.positions[k] = origin + buffer.positions[k];
  dense.speeds = buffer.speeds;
  dense.accelerations = buffer.accelerations;
  dense.accelerations.push_back(buffer.accelerations.back());

  result.residuals.resize(obs.size());
  for (std::size_t j = 0; j < obs.size(); ++j) {
    result.residuals[j] = obs.positions[j] - buffer.positions[indices[j]];
  }
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

}  // namespace difftraffic
