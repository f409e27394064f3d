#pragma once

// Throughput harness: a ring road of N vehicles, each following the next,
// stepped forward and differentiated against a quadratic position loss.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "difftraffic/engine.hpp"
#include "difftraffic/errors.hpp"
#include "difftraffic/parallel.hpp"

namespace difftraffic {

inline constexpr double kRingSpacing = 25.0;
inline constexpr double kRingVehicleLength = 4.5;

/// Speed at which a vehicle holds `gap` behind a leader at the same speed
/// (zero acceleration), by bisection on [0, v_targ].
inline double equilibrium_speed(const IdmParams& p, double gap, double dt = 0.1) {
  double lo = 0.0;
  double hi = p.v_targ;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (idm_acceleration(p, {mid, gap, 0.0, dt}) > 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// N vehicles evenly spaced kRingSpacing apart on a ring of circumference
/// N * kRingSpacing; vehicle i follows i + 1 and the last follows the first.
/// All start at the equilibrium speed for that spacing. A nonzero seed
/// jitters positions by up to +-1 m.
inline WorldState make_ring(std::size_t n, std::uint64_t seed = 0) {
  if (n < 2) throw InvalidArgument("make_ring: need at least 2 vehicles");
  WorldState s;
  s.ring_length = kRingSpacing * static_cast<double>(n);
  s.positions.resize(n);
  s.speeds.assign(n, equilibrium_speed(IdmParams{}, kRingSpacing - kRingVehicleLength));
  s.lengths.assign(n, kRingVehicleLength);
  s.params.assign(n, IdmParams{});
  s.leaders.resize(n);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter(-1.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    s.positions[i] = kRingSpacing * static_cast<double>(i) + (seed != 0 ? jitter(rng) : 0.0);
    s.leaders[i] = static_cast<std::int32_t>((i + 1) % n);
  }
  return s;
}

struct BenchResult {
  std::size_t vehicles = 0;
  std::size_t steps = 0;
  int threads = 1;
  double forward_ms_per_step = 0.0;
  double backward_ms_per_step = 0.0;
  double mean_abs_acceleration = 0.0;
  // Order-fixed sum over final state and gradients; equal across thread
  // counts when results are bit-identical.
  double checksum = 0.0;
};

inline BenchResult bench(std::size_t vehicles, std::size_t steps, int threads = 0,
                         std::uint64_t seed = 0) {
  if (steps < 1) throw InvalidArgument("bench: need at least one step");
  set_thread_count(threads);
  const auto state = make_ring(vehicles, seed);
  using clock = std::chrono::steady_clock;

  const auto t0 = clock::now();
  const auto buffer = rollout(state, steps, 0.1);
  const auto t1 = clock::now();

  // L = 1/2 sum_k sum_i (p_k,i - p_0,i - k dt v_0,i)^2
  std::vector<double> grads(buffer.positions.size());
  parallel_for(vehicles, [&](std::size_t i) {
    for (std::size_t k = 0; k <= steps; ++k) {
      const double ref = buffer.position(0, i) + static_cast<double>(k) * buffer.dt * buffer.speed(0, i);
      grads[k * vehicles + i] = buffer.position(k, i) - ref;
    }
  });
  const auto t2 = clock::now();
  const auto adj = backward(buffer, grads);
  const auto t3 = clock::now();

  BenchResult r;
  r.vehicles = vehicles;
  r.steps = steps;
  r.threads = thread_count();
  const auto ms = [](auto d) { return std::chrono::duration<double, std::milli>(d).count(); };
  r.forward_ms_per_step = ms(t1 - t0) / static_cast<double>(steps);
  r.backward_ms_per_step = (ms(t2 - t1) + ms(t3 - t2)) / static_cast<double>(steps);
  double acc = 0.0;
  for (double a : buffer.accelerations) acc += std::abs(a);
  r.mean_abs_acceleration = acc / static_cast<double>(buffer.accelerations.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < vehicles; ++i) {
    sum += buffer.position(steps, i) + buffer.speed(steps, i) + adj.initial_speeds[i];
    for (double g : adj.params[i]) sum += g;
  }
  r.checksum = sum;
  return r;
}

}  // namespace difftraffic
