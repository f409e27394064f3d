#pragma once

// Reproducible synthetic corpora: car-following trajectories generated by the
// IDM kernel behind an oscillating leader, observed with Gaussian position
// noise.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "difftraffic/engine.hpp"
#include "difftraffic/idm.hpp"
#include "difftraffic/optimizer.hpp"
#include "difftraffic/predict.hpp"
#include "difftraffic/trajectory.hpp"

namespace difftraffic {

struct SyntheticOptions {
  std::size_t count = 100;
  double sample_dt = 0.1;          // observation spacing (s)
  double sim_dt = 0.1;             // ground-truth integration step (s)
  double min_duration = 30.0;      // s
  double max_duration = 60.0;      // s
  double noise_sigma = 0.3;        // m
  // Extra random spacing added to sample_dt for sparse corpora (s).
  double max_extra_spacing = 0.0;
  std::uint64_t seed = 7;
};

struct SyntheticTrajectory {
  ObservedTrajectory observed;
  IdmParams truth;
  DenseTrajectory clean;  // noise-free positions at sim_dt
};

namespace detail {

inline IdmParams random_params(std::mt19937_64& rng, const BoxConstraints& box) {
  ParamArray a;
  for (std::size_t i = 0; i < kOptimizedParams; ++i) {
    std::uniform_real_distribution<double> u(box.bounds[i].low, box.bounds[i].high);
    a[i] = u(rng);
  }
  return from_array(a);
}

}  // namespace detail

inline SyntheticTrajectory make_synthetic_trajectory(std::mt19937_64& rng,
                                                     const SyntheticOptions& opt,
                                                     const std::string& id) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  SyntheticTrajectory out;
  out.truth = detail::random_params(rng, BoxConstraints{});
  const double duration = uniform(opt.min_duration, opt.max_duration);
  const double base_speed = uniform(8.0, 20.0);
  const double amplitude = uniform(0.0, 0.35) * base_speed;
  const double period = uniform(15.0, 45.0);
  const double phase = uniform(0.0, 2.0 * std::numbers::pi);
  const double leader_length = 4.5;
  auto leader_speed = [&](double t) {
    return base_speed + amplitude * std::sin(2.0 * std::numbers::pi * t / period + phase);
  };

  const double dt = opt.sim_dt;
  const auto steps = static_cast<std::size_t>(std::ceil(duration / dt));
  // Start near the steady-state gap so the opening transient stays mild.
  double v = leader_speed(0.0);
  const double ratio = std::pow(v / out.truth.v_targ, out.truth.delta);
  double gap = softplus(optimal_spacing(out.truth, v, 0.0)) / std::sqrt(std::max(1e-3, 1.0 - ratio));
  double p = 0.0;
  double leader_p = gap + leader_length;

  out.clean.dt = dt;
  out.clean.positions.reserve(steps + 1);
  out.clean.speeds.reserve(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) {
    const double t = static_cast<double>(k) * dt;
    const double vl = leader_speed(t);
    out.clean.positions.push_back(p);
    out.clean.speeds.push_back(v);
    const double a =
        idm_acceleration(out.truth, {v, leader_p - p - leader_length, v - vl, dt});
    out.clean.accelerations.push_back(a);
    p += dt * v;
    v += dt * a;
    leader_p += dt * vl;
  }

  std::normal_distribution<double> noise(0.0, opt.noise_sigma);
  out.observed.id = id;
  const double total = static_cast<double>(steps) * dt;
  double t = 0.0;
  while (t <= total + 1e-9) {
    // Linear interpolation of the clean signal at t.
    const double x = t / dt;
    const auto k = std::min(static_cast<std::size_t>(x), steps - 1);
    const double w = x - static_cast<double>(k);
    const double clean = (1.0 - w) * out.clean.positions[k] + w * out.clean.positions[k + 1];
    out.observed.timestamps.push_back(t);
    out.observed.positions.push_back(clean + (opt.noise_sigma > 0.0 ? noise(rng) : 0.0));
    const double extra = opt.max_extra_spacing > 0.0 ? uniform(0.0, opt.max_extra_spacing) : 0.0;
    // Round to milliseconds so timestamps survive a text round trip.
    t = std::round((t + opt.sample_dt + extra) * 1000.0) / 1000.0;
  }
  return out;
}

inline std::vector<SyntheticTrajectory> make_synthetic_corpus(const SyntheticOptions& opt) {
  std::mt19937_64 rng(opt.seed);
  std::vector<SyntheticTrajectory> out;
  out.reserve(opt.count);
  for (std::size_t i = 0; i < opt.count; ++i) {
    out.push_back(make_synthetic_trajectory(rng, opt, "veh" + std::to_string(i)));
  }
  return out;
}

inline std::vector<ObservedTrajectory> observations_of(
    const std::vector<SyntheticTrajectory>& corpus) {
  std::vector<ObservedTrajectory> out;
  out.reserve(corpus.size());
  for (const auto& s : corpus) out.push_back(s.observed);
  return out;
}

struct SyntheticSceneOptions {
  std::size_t max_agents = 3;
  double warmup = 5.0;          // s simulated before the first history frame
  double lane_length = 600.0;   // m
  std::uint64_t seed = 11;
};

/// Steady-state bumper gap for `p` at speed v behind a leader at the same
/// speed.
inline double equilibrium_gap(const IdmParams& p, double v) {
  const double free = std::pow(v / p.v_targ, p.delta);
  return softplus(optimal_spacing(p, v, 0.0)) / std::sqrt(std::max(1e-3, 1.0 - free));
}

/// One lane (straight, or a circular arc of radius >= 300 m) carrying a
/// platoon behind an unseen constant-speed lead vehicle. Ground truth comes
/// from the multi-vehicle engine with the lead vehicle marked kinematic.
inline SceneSample make_synthetic_scene(std::mt19937_64& rng, const SyntheticSceneOptions& opt) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  const double heading = uniform(0.0, 2.0 * std::numbers::pi);
  const double origin_x = uniform(-100.0, 100.0);
  const double origin_y = uniform(-100.0, 100.0);
  const bool curved = unit(rng) < 0.5;
  const double curvature = curved ? (unit(rng) < 0.5 ? -1.0 : 1.0) / uniform(300.0, 1000.0) : 0.0;
  std::vector<Point2> pts;
  const double spacing = 2.0;
  const auto count = static_cast<std::size_t>(opt.lane_length / spacing) + 1;
  for (std::size_t i = 0; i < count; ++i) {
    const double s = spacing * static_cast<double>(i);
    const double theta = heading + curvature * s;
    if (curvature == 0.0) {
      pts.push_back({origin_x + s * std::cos(heading), origin_y + s * std::sin(heading)});
    } else {
      pts.push_back({origin_x + (std::sin(theta) - std::sin(heading)) / curvature,
                     origin_y - (std::cos(theta) - std::cos(heading)) / curvature});
    }
  }
  SceneSample scene;
  scene.lanes.emplace_back("lane0", std::move(pts));
  const auto& lane = scene.lanes.front();

  const std::size_t agents = 1 + static_cast<std::size_t>(unit(rng) * static_cast<double>(opt.max_agents));
  const double lead_speed = uniform(8.0, 20.0);
  WorldState state;
  double s = 20.0;
  for (std::size_t a = 0; a < std::min(agents, opt.max_agents); ++a) {
    const IdmParams p = detail::random_params(rng, BoxConstraints{});
    const double v = std::max(0.0, lead_speed + uniform(-1.0, 1.0));
    state.positions.push_back(s);
    state.speeds.push_back(v);
    state.lengths.push_back(kDefaultVehicleLength);
    state.params.push_back(p);
    state.kinematic.push_back(0);
    state.leaders.push_back(static_cast<std::int32_t>(a + 1));
    s += equilibrium_gap(p, lead_speed) * uniform(0.85, 1.15) + kDefaultVehicleLength;
  }
  const std::size_t real = state.size();
  state.positions.push_back(s);
  state.speeds.push_back(lead_speed);
  state.lengths.push_back(kDefaultVehicleLength);
  state.params.push_back(IdmParams{});
  state.kinematic.push_back(1);
  state.leaders.push_back(kNoLeader);

  const auto warm = static_cast<std::size_t>(std::round(opt.warmup / kFrameDt));
  const std::size_t frames = kHistoryFrames + kFutureFrames;
  const auto buffer = rollout(state, warm + frames - 1, kFrameDt);
  for (std::size_t a = 0; a < real; ++a) {
    SceneAgent agent;
    agent.id = std::to_string(a + 1);
    std::vector<Point2> future;
    for (std::size_t f = 0; f < frames; ++f) {
      const Point2 q = lane.point_at(buffer.position(warm + f, a));
      if (f < kHistoryFrames) {
        agent.history.push_back(q);
      } else {
        future.push_back(q);
      }
    }
    agent.future = std::move(future);
    scene.agents.push_back(std::move(agent));
  }
  return scene;
}

inline std::vector<SceneSample> make_synthetic_scenes(std::size_t count,
                                                      const SyntheticSceneOptions& opt) {
  std::mt19937_64 rng(opt.seed);
  std::vector<SceneSample> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(make_synthetic_scene(rng, opt));
  return out;
}

}  // namespace difftraffic
