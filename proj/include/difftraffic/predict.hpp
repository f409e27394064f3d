#pragma once

// Training-free forecasting on lanes: agents are projected onto lane
// centerlines, fitted on their 1-second history, rolled out jointly per lane,
// and mapped back to the plane.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "difftraffic/engine.hpp"
#include "difftraffic/errors.hpp"
#include "difftraffic/fit.hpp"
#include "difftraffic/parallel.hpp"

namespace difftraffic {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

inline double distance(Point2 a, Point2 b) { return std::hypot(a.x - b.x, a.y - b.y); }

class LanePolyline {
 public:
  LanePolyline() = default;

  LanePolyline(std::string id, std::vector<Point2> points)
      : id_(std::move(id)), points_(std::move(points)) {
    if (points_.size() < 2) throw InvalidArgument("lane " + id_ + ": need at least 2 points");
    arc_.resize(points_.size());
    arc_[0] = 0.0;
    for (std::size_t i = 1; i < points_.size(); ++i) {
      const double seg = distance(points_[i - 1], points_[i]);
      if (!(seg > 0.0)) throw InvalidArgument("lane " + id_ + ": repeated or non-finite point");
      arc_[i] = arc_[i - 1] + seg;
    }
  }

  const std::string& id() const { return id_; }
  const std::vector<Point2>& points() const { return points_; }
  const std::vector<double>& arc_lengths() const { return arc_; }
  double length() const { return arc_.back(); }

  /// Point at arc length s, linear within segments and clamped to the ends.
  Point2 point_at(double s) const {
    if (s <= 0.0) return points_.front();
    if (s >= length()) return points_.back();
    const auto it = std::upper_bound(arc_.begin(), arc_.end(), s);
    const std::size_t i = static_cast<std::size_t>(it - arc_.begin()) - 1;
    const double w = (s - arc_[i]) / (arc_[i + 1] - arc_[i]);
    return {points_[i].x + w * (points_[i + 1].x - points_[i].x),
            points_[i].y + w * (points_[i + 1].y - points_[i].y)};
  }

 private:
  std::string id_;
  std::vector<Point2> points_;
  std::vector<double> arc_;
};

struct LaneProjection {
  double s = 0.0;  // arc length of the closest point
  double d = 0.0;  // distance to it
};

/// Closest point over all segments; ties go to the smaller arc length.
inline LaneProjection project_to_lane(Point2 p, const LanePolyline& lane) {
  const auto& pts = lane.points();
  const auto& arc = lane.arc_lengths();
  LaneProjection best{0.0, std::numeric_limits<double>::infinity()};
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const double ex = pts[i + 1].x - pts[i].x;
    const double ey = pts[i + 1].y - pts[i].y;
    const double len2 = ex * ex + ey * ey;
    const double t = std::clamp(((p.x - pts[i].x) * ex + (p.y - pts[i].y) * ey) / len2, 0.0, 1.0);
    const Point2 q{pts[i].x + t * ex, pts[i].y + t * ey};
    const double d = distance(p, q);
    const double s = arc[i] + t * (arc[i + 1] - arc[i]);
    if (d < best.d || (d == best.d && s < best.s)) best = {s, d};
  }
  return best;
}

inline constexpr double kDefaultLaneThreshold = 2.5;
inline constexpr double kDefaultMissThreshold = 2.0;
// Backward drift along the lane tolerated before an agent counts as moving
// against the lane direction.
inline constexpr double kBackwardTolerance = 0.05;

struct LaneAssignment {
  std::optional<std::size_t> lane;  // index into the lane list
  double mean_distance = 0.0;
};

inline LaneAssignment assign_lane(std::span<const Point2> history,
                                  std::span<const LanePolyline> lanes,
                                  double threshold = kDefaultLaneThreshold) {
  if (lanes.empty()) throw InvalidArgument("assign_lane: no lanes");
  if (history.empty()) throw InvalidArgument("assign_lane: empty history");
  LaneAssignment best{std::nullopt, std::numeric_limits<double>::infinity()};
  std::size_t best_index = 0;
  for (std::size_t l = 0; l < lanes.size(); ++l) {
    double sum = 0.0;
    for (const auto& p : history) sum += project_to_lane(p, lanes[l]).d;
    const double mean = sum / static_cast<double>(history.size());
    if (mean < best.mean_distance) {
      best.mean_distance = mean;
      best_index = l;
    }
  }
  if (best.mean_distance > threshold) return best;
  double prev = -std::numeric_limits<double>::infinity();
  for (const auto& p : history) {
    const double s = project_to_lane(p, lanes[best_index]).s;
    if (s < prev - kBackwardTolerance) return best;
    prev = std::max(prev, s);
  }
  best.lane = best_index;
  return best;
}

/// True when id a orders before id b. All-digit ids compare numerically.
inline bool id_less(const std::string& a, const std::string& b) {
  const auto digits = [](const std::string& s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
  };
  if (digits(a) && digits(b) && a.size() != b.size()) return a.size() < b.size();
  return a < b;
}

/// Leader of each agent (index into the inputs) or kNoLeader for the
/// frontmost. Equal arc lengths put the larger id ahead.
inline std::vector<std::int32_t> order_on_lane(std::span<const double> arc,
                                               std::span<const std::string> ids) {
  if (arc.size() != ids.size()) throw InvalidArgument("order_on_lane: size mismatch");
  std::vector<std::size_t> order(arc.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (arc[a] != arc[b]) return arc[a] < arc[b];
    return id_less(ids[a], ids[b]);
  });
  std::vector<std::int32_t> leader(arc.size(), kNoLeader);
  for (std::size_t r = 0; r + 1 < order.size(); ++r) {
    leader[order[r]] = static_cast<std::int32_t>(order[r + 1]);
  }
  return leader;
}

inline constexpr std::size_t kHistoryFrames = 11;
inline constexpr std::size_t kFutureFrames = 80;
inline constexpr double kFrameDt = 0.1;
inline constexpr double kDefaultVehicleLength = 4.5;

struct SceneAgent {
  std::string id;
  std::vector<Point2> history;                // kHistoryFrames, oldest first
  std::optional<std::vector<Point2>> future;  // kFutureFrames, evaluation only
  double length = kDefaultVehicleLength;
};

struct SceneSample {
  std::vector<LanePolyline> lanes;
  std::vector<SceneAgent> agents;
};

struct AgentPrediction {
  std::string id;
  std::vector<Point2> positions;  // kFutureFrames
  std::vector<double> arc;        // predicted arc lengths, empty when not on a lane
  std::optional<IdmParams> params;
  std::optional<std::size_t> lane;
  bool constant_velocity = false;  // fallback used (unassigned or failed fit)
  std::string error;               // fit/rollout failure message, if any
};

struct PredictionResult {
  std::vector<AgentPrediction> agents;
};

struct ForecastOptions {
  double lane_threshold = kDefaultLaneThreshold;
  std::size_t horizon = kFutureFrames;
  FitOptions fit;  // dt is forced to the frame spacing
};

namespace detail {

inline std::vector<Point2> constant_velocity(std::span<const Point2> history, std::size_t horizon,
                                             double frame_dt) {
  const Point2 last = history.back();
  const double span = frame_dt * static_cast<double>(history.size() - 1);
  const double vx = history.size() > 1 ? (last.x - history.front().x) / span : 0.0;
  const double vy = history.size() > 1 ? (last.y - history.front().y) / span : 0.0;
  std::vector<Point2> out(horizon);
  for (std::size_t j = 0; j < horizon; ++j) {
    const double t = frame_dt * static_cast<double>(j + 1);
    out[j] = {last.x + vx * t, last.y + vy * t};
  }
  return out;
}

inline std::vector<double> frame_speeds(std::span<const double> s, double frame_dt) {
  std::vector<double> v(s.size(), 0.0);
  for (std::size_t k = 0; k + 1 < s.size(); ++k) v[k] = (s[k + 1] - s[k]) / frame_dt;
  if (s.size() > 1) v.back() = v[s.size() - 2];
  return v;
}

struct LaneAgentFit {
  std::size_t agent = 0;
  std::vector<double> arc;  // projected history
  std::int32_t leader = kNoLeader;
  std::optional<FitResult> fit;
  std::string error;
};

}  // namespace detail

inline void validate_scene(const SceneSample& scene) {
  for (const auto& a : scene.agents) {
    if (a.history.size() != kHistoryFrames) {
      throw InvalidArgument("agent " + a.id + ": expected " + std::to_string(kHistoryFrames) +
                            " history frames");
    }
    if (a.future && a.future->size() != kFutureFrames) {
      throw InvalidArgument("agent " + a.id + ": expected " + std::to_string(kFutureFrames) +
                            " future frames");
    }
  }
}

/// Per-lane joint forecast. Agents with a leader on their lane are fitted
/// against the leader's projected history; the frontmost agent of each lane
/// is fitted with free virtual-leader terms, and during the rollout that
/// virtual leader continues at constant speed as a kinematic vehicle.
inline PredictionResult forecast(const SceneSample& scene, const ForecastOptions& options = {}) {
  validate_scene(scene);
  const std::size_t n = scene.agents.size();
  PredictionResult result;
  result.agents.resize(n);
  for (std::size_t i = 0; i < n; ++i) result.agents[i].id = scene.agents[i].id;

  std::vector<std::vector<std::size_t>> groups(scene.lanes.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (!scene.lanes.empty()) {
      const auto assignment =
          assign_lane(scene.agents[i].history, scene.lanes, options.lane_threshold);
      result.agents[i].lane = assignment.lane;
      if (assignment.lane) groups[*assignment.lane].push_back(i);
    }
  }

  // Order within lanes, then fit every assigned agent independently.
  std::vector<detail::LaneAgentFit> fits;
  std::vector<std::size_t> fit_of_agent(n, std::numeric_limits<std::size_t>::max());
  for (std::size_t l = 0; l < groups.size(); ++l) {
    const auto& members = groups[l];
    std::vector<double> current(members.size());
    std::vector<std::string> ids(members.size());
    const std::size_t first = fits.size();
    for (std::size_t m = 0; m < members.size(); ++m) {
      detail::LaneAgentFit f;
      f.agent = members[m];
      for (const auto& p : scene.agents[members[m]].history) {
        f.arc.push_back(project_to_lane(p, scene.lanes[l]).s);
      }
      current[m] = f.arc.back();
      ids[m] = scene.agents[members[m]].id;
      fit_of_agent[members[m]] = fits.size();
      fits.push_back(std::move(f));
    }
    const auto leaders = order_on_lane(current, ids);
    for (std::size_t m = 0; m < members.size(); ++m) {
      fits[first + m].leader =
          leaders[m] == kNoLeader ? kNoLeader : static_cast<std::int32_t>(first + leaders[m]);
    }
  }

  FitOptions base = options.fit;
  base.dt = kFrameDt;
  parallel_for_tasks(fits.size(), [&](std::size_t f) {
    auto& entry = fits[f];
    ObservedTrajectory obs;
    obs.id = scene.agents[entry.agent].id;
    for (std::size_t k = 0; k < entry.arc.size(); ++k) {
      obs.timestamps.push_back(kFrameDt * static_cast<double>(k));
      obs.positions.push_back(entry.arc[k]);
    }
    FitOptions opt = base;
    if (entry.leader != kNoLeader) {
      const auto& lead = fits[static_cast<std::size_t>(entry.leader)];
      const double lead_length = scene.agents[lead.agent].length;
      const auto own_v = detail::frame_speeds(entry.arc, kFrameDt);
      const auto lead_v = detail::frame_speeds(lead.arc, kFrameDt);
      FixedLeaderTerms terms;
      for (std::size_t k = 0; k < entry.arc.size(); ++k) {
        terms.gaps.push_back(lead.arc[k] - entry.arc[k] - lead_length);
        terms.speed_diffs.push_back(own_v[k] - lead_v[k]);
      }
      const std::size_t need = simulation_steps(obs.timestamps.back(), kFrameDt);
      while (terms.gaps.size() < need) {
        terms.gaps.push_back(terms.gaps.back());
        terms.speed_diffs.push_back(terms.speed_diffs.back());
      }
      opt.leader = std::move(terms);
    }
    try {
      entry.fit = fit(obs, opt);
    } catch (const std::exception& e) {
      entry.error = e.what();
    }
  });

  // One joint rollout per lane.
  for (std::size_t l = 0; l < groups.size(); ++l) {
    const auto& members = groups[l];
    if (members.empty()) continue;
    const auto& lane = scene.lanes[l];
    bool ok = true;
    for (std::size_t a : members) {
      if (!fits[fit_of_agent[a]].fit) {
        ok = false;
        result.agents[a].error = fits[fit_of_agent[a]].error;
      }
    }
    if (ok) {
      try {
        WorldState state;
        const std::size_t current = kHistoryFrames - 1;
        for (std::size_t a : members) {
          const auto& f = fits[fit_of_agent[a]];
          state.positions.push_back(f.arc[current]);
          state.speeds.push_back(std::max(0.0, f.fit->dense.speeds[current]));
          state.lengths.push_back(scene.agents[a].length);
          state.params.push_back(f.fit->params);
          state.kinematic.push_back(0);
          state.leaders.push_back(kNoLeader);
        }
        for (std::size_t m = 0; m < members.size(); ++m) {
          const auto& f = fits[fit_of_agent[members[m]]];
          if (f.leader != kNoLeader) {
            const auto lead_agent = fits[static_cast<std::size_t>(f.leader)].agent;
            const auto it = std::find(members.begin(), members.end(), lead_agent);
            state.leaders[m] = static_cast<std::int32_t>(it - members.begin());
            continue;
          }
          // Virtual leader continues at its fitted average gap and speed.
          const std::size_t used = std::max<std::size_t>(1, f.fit->gaps.size() - 1);
          double gap = 0.0, dv = 0.0;
          for (std::size_t k = 0; k < used; ++k) {
            gap += f.fit->gaps[k];
            dv += f.fit->speed_diffs[k];
          }
          gap /= static_cast<double>(used);
          dv /= static_cast<double>(used);
          state.leaders[m] = static_cast<std::int32_t>(state.size());
          state.positions.push_back(state.positions[m] + std::max(gap, kMinGap) +
                                    kDefaultVehicleLength);
          state.speeds.push_back(std::max(0.0, state.speeds[m] - dv));
          state.lengths.push_back(kDefaultVehicleLength);
          state.params.push_back(IdmParams{});
          state.kinematic.push_back(1);
          state.leaders.push_back(kNoLeader);
        }
        const auto buffer = rollout(state, options.horizon, kFrameDt);
        for (std::size_t m = 0; m < members.size(); ++m) {
          auto& pred = result.agents[members[m]];
          pred.params = fits[fit_of_agent[members[m]]].fit->params;
          pred.arc.resize(options.horizon);
          pred.positions.resize(options.horizon);
          for (std::size_t j = 0; j < options.horizon; ++j) {
            pred.arc[j] = buffer.position(j + 1, m);
            pred.positions[j] = lane.point_at(pred.arc[j]);
          }
        }
        continue;
      } catch (const std::exception& e) {
        for (std::size_t a : members) result.agents[a].error = e.what();
      }
    }
    for (std::size_t a : members) {
      result.agents[a].constant_velocity = true;
      result.agents[a].positions =
          detail::constant_velocity(scene.agents[a].history, options.horizon, kFrameDt);
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    if (!result.agents[i].lane) {
      result.agents[i].constant_velocity = true;
      result.agents[i].positions =
          detail::constant_velocity(scene.agents[i].history, options.horizon, kFrameDt);
    }
  }
  return result;
}

struct DisplacementMetrics {
  double min_ade = 0.0;
  double min_fde = 0.0;
  bool miss = false;
};

/// Single-mode displacement errors; the minimum over modes is that mode.
inline DisplacementMetrics displacement_metrics(std::span<const Point2> prediction,
                                                std::span<const Point2> truth,
                                                double miss_threshold = kDefaultMissThreshold) {
  if (prediction.size() != truth.size() || truth.empty()) {
    throw InvalidArgument("displacement_metrics: frame count mismatch");
  }
  double sum = 0.0;
  for (std::size_t j = 0; j < truth.size(); ++j) sum += distance(prediction[j], truth[j]);
  DisplacementMetrics m;
  m.min_ade = sum / static_cast<double>(truth.size());
  m.min_fde = distance(prediction.back(), truth.back());
  m.miss = m.min_fde > miss_threshold;
  return m;
}

}  // namespace difftraffic
