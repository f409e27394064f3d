#pragma once

// Multi-vehicle Euler stepper, recorded rollouts, and the reverse pass that
// differentiates a rollout with respect to parameters and leader terms.

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "difftraffic/errors.hpp"
#include "difftraffic/idm.hpp"
#include "difftraffic/parallel.hpp"

namespace difftraffic {

inline constexpr std::int32_t kNoLeader = -1;

/// Gap used for vehicles without a leader. The interaction term it produces
/// is below 1e-4 of a_max for any spacing the parameter boxes allow.
inline constexpr double kFreeRoadGap = 1e4;

struct WorldState {
  std::vector<double> positions;
  std::vector<double> speeds;
  std::vector<double> lengths;
  std::vector<std::int32_t> leaders;
  std::vector<IdmParams> params;
  // Optional, empty or one flag per vehicle. Flagged vehicles keep their speed
  // (zero acceleration) and only act as leaders.
  std::vector<std::uint8_t> kinematic;
  // Circumference of a ring road; gaps wrap when positive.
  double ring_length = 0.0;

  std::size_t size() const { return positions.size(); }

  bool is_kinematic(std::size_t i) const { return !kinematic.empty() && kinematic[i] != 0; }

  void validate() const {
    const std::size_t n = size();
    if (speeds.size() != n || lengths.size() != n || leaders.size() != n ||
        params.size() != n || (!kinematic.empty() && kinematic.size() != n)) {
      throw InvalidArgument("world state: per-vehicle arrays differ in length");
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::isfinite(positions[i]) || !std::isfinite(speeds[i]) || speeds[i] < 0.0) {
        throw InvalidArgument("world state: bad position/speed for vehicle " + std::to_string(i));
      }
      const auto h = leaders[i];
      if (h == static_cast<std::int32_t>(i)) {
        throw InvalidArgument("world state: vehicle " + std::to_string(i) + " follows itself");
      }
      if (h != kNoLeader && (h < 0 || static_cast<std::size_t>(h) >= n)) {
        throw InvalidArgument("world state: leader index out of range for vehicle " +
                              std::to_string(i));
      }
    }
  }
};

struct LeaderTerms {
  double dp = kFreeRoadGap;
  double dv = 0.0;
};

namespace detail {

inline LeaderTerms leader_terms(std::span<const double> positions, std::span<const double> speeds,
                                std::span<const double> lengths,
                                std::span<const std::int32_t> leaders, double ring_length,
                                std::size_t i) {
  const auto h = leaders[i];
  if (h == kNoLeader) return {};
  const auto hi = static_cast<std::size_t>(h);
  double gap = positions[hi] - positions[i];
  if (ring_length > 0.0 && gap < 0.0) gap += ring_length;
  return {gap - lengths[hi], speeds[i] - speeds[hi]};
}

}  // namespace detail

inline std::vector<LeaderTerms> gather_leader(const WorldState& state) {
  state.validate();
  std::vector<LeaderTerms> out(state.size());
  parallel_for(state.size(), [&](std::size_t i) {
    out[i] = detail::leader_terms(state.positions, state.speeds, state.lengths, state.leaders,
                                  state.ring_length, i);
  });
  return out;
}

/// Dense record of a rollout. Row k of positions/speeds is the state before
/// step k (K + 1 rows); accelerations and leader terms have K rows.
struct TrajectoryBuffer {
  std::size_t vehicles = 0;
  std::size_t steps = 0;
  double dt = 0.1;
  std::vector<double> positions;
  std::vector<double> speeds;
  std::vector<double> accelerations;
  std::vector<double> gaps;
  std::vector<double> speed_diffs;

  // What backward needs to replay the kernel.
  std::vector<IdmParams> params;
  std::vector<std::int32_t> leaders;
  std::vector<std::uint8_t> kinematic;
  bool virtual_leader = false;

  double position(std::size_t k, std::size_t i) const { return positions[k * vehicles + i]; }
  double speed(std::size_t k, std::size_t i) const { return speeds[k * vehicles + i]; }
  double acceleration(std::size_t k, std::size_t i) const {
    return accelerations[k * vehicles + i];
  }
  bool is_kinematic(std::size_t i) const { return !kinematic.empty() && kinematic[i] != 0; }

  /// Positions of one vehicle over all K + 1 rows.
  std::vector<double> vehicle_positions(std::size_t i) const { return column(positions, steps + 1, i); }
  std::vector<double> vehicle_speeds(std::size_t i) const { return column(speeds, steps + 1, i); }
  std::vector<double> vehicle_accelerations(std::size_t i) const {
    return column(accelerations, steps, i);
  }

 private:
  std::vector<double> column(const std::vector<double>& v, std::size_t rows, std::size_t i) const {
    std::vector<double> out(rows);
    for (std::size_t k = 0; k < rows; ++k) out[k] = v[k * vehicles + i];
    return out;
  }
};

namespace detail {

// One synchronous Euler step from row k to row k + 1 of `buf`. Every vehicle
// reads only row k, so the per-vehicle loop has no ordering dependence.
inline void advance(TrajectoryBuffer& buf, std::span<const double> lengths, double ring_length,
                    std::size_t k) {
  const std::size_t n = buf.vehicles;
  const std::span<const double> pos(buf.positions.data() + k * n, n);
  const std::span<const double> spd(buf.speeds.data() + k * n, n);
  parallel_for(n, [&](std::size_t i) {
    const std::size_t at = k * n + i;
    const std::size_t next = at + n;
    double accel = 0.0;
    if (!buf.is_kinematic(i)) {
      if (!buf.virtual_leader) {
        const auto terms = leader_terms(pos, spd, lengths, buf.leaders, ring_length, i);
        buf.gaps[at] = terms.dp;
        buf.speed_diffs[at] = terms.dv;
      }
      accel = idm_acceleration(buf.params[i], {spd[i], buf.gaps[at], buf.speed_diffs[at], buf.dt});
    }
    buf.accelerations[at] = accel;
    buf.positions[next] = pos[i] + buf.dt * spd[i];
    buf.speeds[next] = spd[i] + buf.dt * accel;
  });
}

inline TrajectoryBuffer allocate(std::size_t n, std::size_t steps, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidArgument("rollout: dt must be positive");
  TrajectoryBuffer buf;
  buf.vehicles = n;
  buf.steps = steps;
  buf.dt = dt;
  buf.positions.resize((steps + 1) * n);
  buf.speeds.resize((steps + 1) * n);
  buf.accelerations.resize(steps * n);
  buf.gaps.assign(steps * n, kFreeRoadGap);
  buf.speed_diffs.assign(steps * n, 0.0);
  return buf;
}

}  // namespace detail

/// Advances every vehicle by one Euler step from the same pre-step snapshot.
inline WorldState step(const WorldState& state, double dt) {
  state.validate();
  auto buf = detail::allocate(state.size(), 1, dt);
  buf.params = state.params;
  buf.leaders = state.leaders;
  buf.kinematic = state.kinematic;
  std::copy(state.positions.begin(), state.positions.end(), buf.positions.begin());
  std::copy(state.speeds.begin(), state.speeds.end(), buf.speeds.begin());
  detail::advance(buf, state.lengths, state.ring_length, 0);

  WorldState out = state;
  const std::size_t n = state.size();
  std::copy(buf.positions.begin() + n, buf.positions.end(), out.positions.begin());
  std::copy(buf.speeds.begin() + n, buf.speeds.end(), out.speeds.begin());
  return out;
}

inline TrajectoryBuffer rollout(const WorldState& initial, std::size_t steps, double dt) {
  initial.validate();
  if (steps < 1) throw InvalidArgument("rollout: need at least one step");
  auto buf = detail::allocate(initial.size(), steps, dt);
  buf.params = initial.params;
  buf.leaders = initial.leaders;
  buf.kinematic = initial.kinematic;
  std::copy(initial.positions.begin(), initial.positions.end(), buf.positions.begin());
  std::copy(initial.speeds.begin(), initial.speeds.end(), buf.speeds.begin());
  for (std::size_t k = 0; k < steps; ++k) {
    detail::advance(buf, initial.lengths, initial.ring_length, k);
  }
  return buf;
}

/// Single-vehicle rollout whose leader terms at step k are given directly.
inline TrajectoryBuffer rollout_virtual_leader(double p0, double v0, const IdmParams& params,
                                               std::span<const double> gaps,
                                               std::span<const double> speed_diffs, double dt) {
  if (gaps.size() != speed_diffs.size()) {
    throw InvalidArgument("rollout_virtual_leader: gap and speed-difference lengths differ");
  }
  if (!std::isfinite(p0) || !std::isfinite(v0) || v0 < 0.0) {
    throw InvalidArgument("rollout_virtual_leader: bad initial state");
  }
  const std::size_t steps = gaps.size();
  auto buf = detail::allocate(1, steps, dt);
  buf.params = {params};
  buf.leaders = {kNoLeader};
  buf.virtual_leader = true;
  std::copy(gaps.begin(), gaps.end(), buf.gaps.begin());
  std::copy(speed_diffs.begin(), speed_diffs.end(), buf.speed_diffs.begin());
  buf.positions[0] = p0;
  buf.speeds[0] = v0;
  for (std::size_t k = 0; k < steps; ++k) detail::advance(buf, {}, 0.0, k);
  return buf;
}

struct AdjointState {
  std::vector<ParamArray> params;       // per vehicle
  std::vector<double> gaps;             // per step, per vehicle
  std::vector<double> speed_diffs;      // per step, per vehicle
  std::vector<double> initial_positions;
  std::vector<double> initial_speeds;
};

/// Reverse pass over a recorded rollout. `position_grads` holds dL/dp for
/// every row of `buffer.positions` ((K + 1) x N, row-major).
///
/// In multi-vehicle mode a follower's gap depends on its leader's state, so
/// each step runs two passes: every vehicle first computes its own adjoint
/// and leader-term gradients, then each leader gathers the contributions of
/// its followers in ascending index order. Gradients at the free-road
/// sentinel are reported as zero.
inline AdjointState backward(const TrajectoryBuffer& buffer,
                             std::span<const double> position_grads) {
  const std::size_t n = buffer.vehicles;
  const std::size_t steps = buffer.steps;
  if (position_grads.size() != (steps + 1) * n) {
    throw InvalidArgument("backward: gradient shape does not match buffer");
  }
  const double dt = buffer.dt;

  AdjointState adj;
  adj.params.assign(n, ParamArray{});
  adj.gaps.assign(steps * n, 0.0);
  adj.speed_diffs.assign(steps * n, 0.0);

  // Followers of each vehicle, CSR layout, ascending follower index.
  std::vector<std::size_t> follower_start(n + 1, 0);
  std::vector<std::size_t> followers;
  const bool coupled = !buffer.virtual_leader;
  if (coupled) {
    for (std::size_t i = 0; i < n; ++i) {
      if (buffer.leaders[i] != kNoLeader) ++follower_start[buffer.leaders[i] + 1];
    }
    for (std::size_t i = 0; i < n; ++i) follower_start[i + 1] += follower_start[i];
    followers.resize(follower_start[n]);
    std::vector<std::size_t> fill(follower_start.begin(), follower_start.end() - 1);
    for (std::size_t i = 0; i < n; ++i) {
      if (buffer.leaders[i] != kNoLeader) followers[fill[buffer.leaders[i]]++] = i;
    }
  }

  std::vector<double> lam_p(position_grads.begin() + steps * n, position_grads.end());
  std::vector<double> lam_v(n, 0.0);
  std::vector<double> next_p(n), next_v(n);

  for (std::size_t kk = steps; kk-- > 0;) {
    const std::size_t row = kk * n;
    parallel_for(n, [&](std::size_t i) {
      const std::size_t at = row + i;
      double lp = position_grads[at] + lam_p[i];
      double lv = dt * lam_p[i] + lam_v[i];
      if (!buffer.is_kinematic(i)) {
        const double abar = dt * lam_v[i];
        IdmGradient g;
        idm_acceleration_grad(buffer.params[i],
                              {buffer.speeds[at], buffer.gaps[at], buffer.speed_diffs[at], dt}, g);
        lv += abar * g.d_v;
        const auto pg = to_array(g);
        for (std::size_t j = 0; j < kOptimizedParams; ++j) adj.params[i][j] += abar * pg[j];
        const bool has_terms = buffer.virtual_leader || buffer.leaders[i] != kNoLeader;
        if (has_terms) {
          adj.gaps[at] = abar * g.d_dp;
          adj.speed_diffs[at] = abar * g.d_dv;
          if (coupled) {
            lp -= adj.gaps[at];
            lv += adj.speed_diffs[at];
          }
        }
      }
      next_p[i] = lp;
      next_v[i] = lv;
    });
    if (coupled) {
      parallel_for(n, [&](std::size_t h) {
        for (std::size_t f = follower_start[h]; f < follower_start[h + 1]; ++f) {
          const std::size_t at = row + followers[f];
          next_p[h] += adj.gaps[at];
          next_v[h] -= adj.speed_diffs[at];
        }
      });
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::isfinite(next_p[i]) || !std::isfinite(next_v[i])) {
        throw NumericalFailure("backward: non-finite adjoint at step", kk);
      }
    }
    lam_p.swap(next_p);
    lam_v.swap(next_v);
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (double g : adj.params[i]) {
      if (!std::isfinite(g)) throw NumericalFailure("backward: non-finite parameter gradient", i);
    }
  }
  adj.initial_positions = std::move(lam_p);
  adj.initial_speeds = std::move(lam_v);
  return adj;
}

}  // namespace difftraffic
