#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "difftraffic/predict.hpp"
#include "difftraffic/synthetic.hpp"

namespace dt = difftraffic;

namespace {

dt::LanePolyline straight_lane(double length = 10.0, std::string id = "l0") {
  return dt::LanePolyline(std::move(id), {{0.0, 0.0}, {length, 0.0}});
}

std::vector<dt::Point2> cruise(double x0, double y, double speed, std::size_t frames,
                               std::size_t offset = 0) {
  std::vector<dt::Point2> out;
  for (std::size_t f = 0; f < frames; ++f) {
    out.push_back({x0 + speed * dt::kFrameDt * static_cast<double>(f + offset), y});
  }
  return out;
}

TEST(Lane, ArcLengths) {
  const dt::LanePolyline lane("l", {{0, 0}, {3, 4}, {3, 10}});
  EXPECT_EQ(lane.arc_lengths(), (std::vector<double>{0.0, 5.0, 11.0}));
  EXPECT_EQ(lane.length(), 11.0);
  EXPECT_THROW(dt::LanePolyline("x", {{0, 0}}), dt::InvalidArgument);
  EXPECT_THROW(dt::LanePolyline("x", {{0, 0}, {0, 0}}), dt::InvalidArgument);
}

TEST(Projection, AxisAligned) {
  const auto p = dt::project_to_lane({1.0, 1.0}, straight_lane());
  EXPECT_DOUBLE_EQ(p.s, 1.0);
  EXPECT_DOUBLE_EQ(p.d, 1.0);
}

TEST(Projection, OnPolyline) {
  const dt::LanePolyline lane("l", {{0, 0}, {3, 4}, {3, 10}});
  EXPECT_EQ(dt::project_to_lane({3.0, 7.0}, lane).d, 0.0);
  EXPECT_DOUBLE_EQ(dt::project_to_lane({3.0, 7.0}, lane).s, 8.0);
}

TEST(Projection, ClampedPastEnd) {
  const auto p = dt::project_to_lane({12.0, 0.0}, straight_lane());
  EXPECT_DOUBLE_EQ(p.s, 10.0);
  EXPECT_DOUBLE_EQ(p.d, 2.0);
}

TEST(Projection, TieTakesSmallerArcLength) {
  // Equidistant from both arms of a U-shaped lane.
  const dt::LanePolyline lane("u", {{0, 0}, {10, 0}, {10, 4}, {0, 4}});
  const auto p = dt::project_to_lane({5.0, 2.0}, lane);
  EXPECT_DOUBLE_EQ(p.d, 2.0);
  EXPECT_DOUBLE_EQ(p.s, 5.0);
}

TEST(Projection, RoundTripOnPolyline) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<dt::Point2> pts{{0, 0}};
  double heading = 0.0;
  for (int i = 0; i < 30; ++i) {
    heading += -0.3 + 0.6 * u(rng);
    const double len = 1.0 + 5.0 * u(rng);
    pts.push_back({pts.back().x + len * std::cos(heading), pts.back().y + len * std::sin(heading)});
  }
  const dt::LanePolyline lane("r", pts);
  for (int n = 0; n < 500; ++n) {
    const double s = lane.length() * u(rng);
    const auto q = lane.point_at(s);
    const auto back = lane.point_at(dt::project_to_lane(q, lane).s);
    EXPECT_NEAR(back.x, q.x, 1e-9);
    EXPECT_NEAR(back.y, q.y, 1e-9);
  }
}

TEST(Projection, PointAtClamps) {
  const auto lane = straight_lane();
  EXPECT_EQ(lane.point_at(-3.0).x, 0.0);
  EXPECT_EQ(lane.point_at(30.0).x, 10.0);
  EXPECT_EQ(lane.point_at(2.5).x, 2.5);
}

TEST(AssignLane, OnCenterline) {
  const std::vector<dt::LanePolyline> lanes{straight_lane(100.0)};
  const auto a = dt::assign_lane(cruise(5.0, 0.0, 10.0, 11), lanes);
  ASSERT_TRUE(a.lane.has_value());
  EXPECT_EQ(*a.lane, 0u);
  EXPECT_NEAR(a.mean_distance, 0.0, 1e-12);
}

TEST(AssignLane, FarFromEveryLane) {
  const std::vector<dt::LanePolyline> lanes{straight_lane(100.0),
                                            dt::LanePolyline("b", {{0, -4}, {100, -4}})};
  EXPECT_FALSE(dt::assign_lane(cruise(5.0, 10.0, 10.0, 11), lanes, 2.5).lane.has_value());
}

TEST(AssignLane, NearerOfTwoParallelLanes) {
  const std::vector<dt::LanePolyline> lanes{dt::LanePolyline("b", {{0, 4}, {100, 4}}),
                                            straight_lane(100.0)};
  const auto a = dt::assign_lane(cruise(5.0, 0.0, 10.0, 11), lanes);
  ASSERT_TRUE(a.lane.has_value());
  EXPECT_EQ(*a.lane, 1u);
}

TEST(AssignLane, AgainstLaneDirection) {
  const std::vector<dt::LanePolyline> lanes{straight_lane(100.0)};
  EXPECT_FALSE(dt::assign_lane(cruise(50.0, 0.0, -10.0, 11), lanes).lane.has_value());
}

TEST(AssignLane, StationaryJitterTolerated) {
  const std::vector<dt::LanePolyline> lanes{straight_lane(100.0)};
  std::vector<dt::Point2> h(11, {20.0, 0.3});
  h[4].x = 19.99;
  EXPECT_TRUE(dt::assign_lane(h, lanes).lane.has_value());
}

TEST(AssignLane, Errors) {
  const std::vector<dt::LanePolyline> none;
  EXPECT_THROW(dt::assign_lane(cruise(0, 0, 1, 11), none), dt::InvalidArgument);
  const std::vector<dt::LanePolyline> lanes{straight_lane()};
  EXPECT_THROW(dt::assign_lane(std::vector<dt::Point2>{}, lanes), dt::InvalidArgument);
}

TEST(OrderOnLane, TwoAgents) {
  const std::vector<double> s{10.0, 30.0};
  const std::vector<std::string> ids{"a", "b"};
  EXPECT_EQ(dt::order_on_lane(s, ids), (std::vector<std::int32_t>{1, dt::kNoLeader}));
}

TEST(OrderOnLane, SingleAgent) {
  const std::vector<double> s{3.0};
  const std::vector<std::string> ids{"x"};
  EXPECT_EQ(dt::order_on_lane(s, ids), (std::vector<std::int32_t>{dt::kNoLeader}));
}

TEST(OrderOnLane, TieLargerIdAhead) {
  const std::vector<double> s{5.0, 5.0};
  const std::vector<std::string> ids{"12", "9"};
  // Numeric ids compare as numbers: 12 is ahead of 9.
  EXPECT_EQ(dt::order_on_lane(s, ids), (std::vector<std::int32_t>{dt::kNoLeader, 0}));
}

TEST(OrderOnLane, ChainTerminatesWithoutCycles) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 100.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> s(12);
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < s.size(); ++i) {
      s[i] = std::round(u(rng) / 10.0);  // frequent ties
      ids.push_back(std::to_string(i));
    }
    const auto leader = dt::order_on_lane(s, ids);
    std::size_t front = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      std::size_t hops = 0;
      auto at = static_cast<std::int32_t>(i);
      while (leader[at] != dt::kNoLeader) {
        EXPECT_GE(s[leader[at]], s[at]);
        at = leader[at];
        ASSERT_LE(++hops, s.size());
      }
      if (leader[i] == dt::kNoLeader) ++front;
    }
    EXPECT_EQ(front, 1u);
  }
}

TEST(Displacement, Examples) {
  const auto truth = cruise(0.0, 0.0, 10.0, 80);
  auto m = dt::displacement_metrics(truth, truth);
  EXPECT_EQ(m.min_ade, 0.0);
  EXPECT_EQ(m.min_fde, 0.0);
  EXPECT_FALSE(m.miss);

  auto shifted = truth;
  for (auto& p : shifted) {
    p.x += 3.0;
    p.y += 4.0;
  }
  m = dt::displacement_metrics(shifted, truth);
  EXPECT_NEAR(m.min_ade, 5.0, 1e-12);
  EXPECT_NEAR(m.min_fde, 5.0, 1e-12);
  EXPECT_TRUE(m.miss);

  auto last = truth;
  last.back().y += 1.0;
  m = dt::displacement_metrics(last, truth);
  EXPECT_DOUBLE_EQ(m.min_fde, 1.0);
  EXPECT_FALSE(m.miss);

  EXPECT_THROW(dt::displacement_metrics(std::vector<dt::Point2>(79), truth), dt::InvalidArgument);
}

dt::ForecastOptions quick() {
  dt::ForecastOptions o;
  o.fit.iterations = 200;
  return o;
}

TEST(Forecast, SingleCruisingAgent) {
  dt::SceneSample scene;
  scene.lanes.push_back(straight_lane(2000.0));
  dt::SceneAgent a;
  a.id = "1";
  a.history = cruise(100.0, 0.0, 12.0, 11);
  a.future = cruise(100.0, 0.0, 12.0, 80, 11);
  scene.agents.push_back(a);
  const auto r = dt::forecast(scene);
  ASSERT_EQ(r.agents.size(), 1u);
  EXPECT_FALSE(r.agents[0].constant_velocity);
  ASSERT_TRUE(r.agents[0].params.has_value());
  EXPECT_TRUE(dt::BoxConstraints{}.contains(dt::to_array(*r.agents[0].params)));
  const auto m = dt::displacement_metrics(r.agents[0].positions, *a.future);
  EXPECT_LT(m.min_ade, 0.5);
}

TEST(Forecast, StationaryAgent) {
  dt::SceneSample scene;
  scene.lanes.push_back(straight_lane(200.0));
  dt::SceneAgent a;
  a.id = "1";
  a.history.assign(11, {50.0, 0.5});
  scene.agents.push_back(a);
  const auto r = dt::forecast(scene, quick());
  const auto& pred = r.agents[0].positions;
  ASSERT_EQ(pred.size(), 80u);
  EXPECT_LT(dt::distance(pred.back(), {50.0, 0.0}), 1.0);
}

TEST(Forecast, ClampsAtLaneEnd) {
  dt::SceneSample scene;
  scene.lanes.push_back(straight_lane(120.0));
  dt::SceneAgent a;
  a.id = "1";
  a.history = cruise(100.0, 0.0, 15.0, 11);
  scene.agents.push_back(a);
  const auto r = dt::forecast(scene, quick());
  EXPECT_TRUE(r.agents[0].error.empty());
  EXPECT_EQ(r.agents[0].positions.back().x, 120.0);
  EXPECT_EQ(r.agents[0].positions.back().y, 0.0);
}

TEST(Forecast, UnassignedFallsBackToConstantVelocity) {
  dt::SceneSample scene;
  scene.lanes.push_back(straight_lane(500.0));
  dt::SceneAgent a;
  a.id = "7";
  a.history = cruise(10.0, 30.0, 5.0, 11);
  scene.agents.push_back(a);
  const auto r = dt::forecast(scene, quick());
  EXPECT_TRUE(r.agents[0].constant_velocity);
  EXPECT_FALSE(r.agents[0].lane.has_value());
  EXPECT_NEAR(r.agents[0].positions[0].x, 10.0 + 5.0 * 1.1, 1e-9);
  EXPECT_NEAR(r.agents[0].positions.back().x, 10.0 + 5.0 * 9.0, 1e-9);
}

TEST(Forecast, RejectsWrongHistoryLength) {
  dt::SceneSample scene;
  scene.lanes.push_back(straight_lane(500.0));
  dt::SceneAgent a;
  a.id = "1";
  a.history = cruise(10.0, 0.0, 5.0, 10);
  scene.agents.push_back(a);
  EXPECT_THROW(dt::forecast(scene), dt::InvalidArgument);
}

TEST(Forecast, ArcLengthsNonDecreasingAndNoOvertaking) {
  dt::SyntheticSceneOptions opt;
  opt.seed = 5;
  auto scenes = dt::make_synthetic_scenes(12, opt);
  for (const auto& scene : scenes) {
    const auto r = dt::forecast(scene, quick());
    for (const auto& a : r.agents) {
      for (std::size_t j = 1; j < a.arc.size(); ++j) EXPECT_GE(a.arc[j], a.arc[j - 1]);
    }
    // Agents are generated back to front with increasing ids.
    for (std::size_t i = 0; i + 1 < r.agents.size(); ++i) {
      if (r.agents[i].arc.empty() || r.agents[i + 1].arc.empty()) continue;
      for (std::size_t j = 0; j < r.agents[i].arc.size(); ++j) {
        EXPECT_LT(r.agents[i].arc[j], r.agents[i + 1].arc[j]);
      }
    }
  }
}

TEST(Forecast, SyntheticScenesAreAccurate) {
  dt::SyntheticSceneOptions opt;
  opt.seed = 8;
  const auto scenes = dt::make_synthetic_scenes(10, opt);
  double ade = 0.0;
  std::size_t agents = 0;
  for (const auto& scene : scenes) {
    const auto r = dt::forecast(scene);
    for (std::size_t i = 0; i < r.agents.size(); ++i) {
      ade += dt::displacement_metrics(r.agents[i].positions, *scene.agents[i].future).min_ade;
      ++agents;
    }
  }
  EXPECT_LT(ade / static_cast<double>(agents), 1.0);
}

}  // namespace
