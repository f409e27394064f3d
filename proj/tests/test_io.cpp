#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "difftraffic/fit.hpp"
#include "difftraffic/io.hpp"
#include "difftraffic/synthetic.hpp"

namespace dt = difftraffic;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("difftraffic_io_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string points(std::size_t n, double x0 = 0.0) {
  std::string s = "[";
  for (std::size_t i = 0; i < n; ++i) {
    if (i) s += ",";
    s += "[" + std::to_string(x0 + static_cast<double>(i)) + ",0]";
  }
  return s + "]";
}

TEST(TrajectoryCsv, TwoRows) {
  std::istringstream in("vehicle_id,timestamp_s,position_m\na,0.0,1.5\na,0.1,2.5\n");
  const auto f = dt::parse_trajectories(in);
  ASSERT_EQ(f.trajectories.size(), 1u);
  EXPECT_EQ(f.trajectories[0].id, "a");
  EXPECT_EQ(f.trajectories[0].timestamps, (std::vector<double>{0.0, 0.1}));
  EXPECT_EQ(f.trajectories[0].positions, (std::vector<double>{1.5, 2.5}));
  EXPECT_TRUE(f.warnings.empty());
}

TEST(TrajectoryCsv, VersionLineCommentsAndInterleaving) {
  std::istringstream in(
      "# difftraffic-v1\nvehicle_id,timestamp_s,position_m\nb,0,0\na,0,5\n\nb,1,1\na,1,6\n");
  const auto f = dt::parse_trajectories(in);
  ASSERT_EQ(f.trajectories.size(), 2u);
  EXPECT_EQ(f.trajectories[0].id, "b");
  EXPECT_EQ(f.trajectories[1].positions, (std::vector<double>{5.0, 6.0}));
}

TEST(TrajectoryCsv, HeaderOnlyWarns) {
  std::istringstream in("vehicle_id,timestamp_s,position_m\n");
  const auto f = dt::parse_trajectories(in);
  EXPECT_TRUE(f.trajectories.empty());
  EXPECT_EQ(f.warnings.size(), 1u);
}

TEST(TrajectoryCsv, DuplicateTimestamp) {
  std::istringstream in("vehicle_id,timestamp_s,position_m\na,0,0\na,0,1\n");
  EXPECT_THROW(dt::parse_trajectories(in), dt::DataError);
}

TEST(TrajectoryCsv, DecreasingTimestampNamesVehicle) {
  std::istringstream in("vehicle_id,timestamp_s,position_m\nq7,1,0\nq7,0.5,1\n");
  try {
    dt::parse_trajectories(in);
    FAIL() << "expected DataError";
  } catch (const dt::DataError& e) {
    EXPECT_NE(std::string(e.what()).find("q7"), std::string::npos);
  }
}

TEST(TrajectoryCsv, MalformedRowGivesLineNumber) {
  std::istringstream in("vehicle_id,timestamp_s,position_m\na,0,0\na,zero,1\n");
  try {
    dt::parse_trajectories(in, "f.csv");
    FAIL() << "expected ParseError";
  } catch (const dt::ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("f.csv:3"), std::string::npos) << e.what();
  }
}

TEST(TrajectoryCsv, HeaderAndLengthErrors) {
  std::istringstream wrong("id,t,x\n");
  EXPECT_THROW(dt::parse_trajectories(wrong), dt::ParseError);
  std::istringstream single("vehicle_id,timestamp_s,position_m\na,0,0\n");
  EXPECT_THROW(dt::parse_trajectories(single), dt::DataError);
  EXPECT_THROW(dt::read_trajectories("/nonexistent/x.csv"), dt::DataError);
}

TEST(TrajectoryCsv, WriteReadRoundTripIsExact) {
  dt::SyntheticOptions opt;
  opt.count = 4;
  opt.min_duration = 5.0;
  opt.max_duration = 8.0;
  const auto corpus = dt::observations_of(dt::make_synthetic_corpus(opt));
  std::stringstream ss;
  dt::write_trajectories(ss, corpus);
  const auto back = dt::parse_trajectories(ss);
  ASSERT_EQ(back.trajectories.size(), corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    EXPECT_EQ(back.trajectories[i].id, corpus[i].id);
    EXPECT_EQ(back.trajectories[i].timestamps, corpus[i].timestamps);
    EXPECT_EQ(back.trajectories[i].positions, corpus[i].positions);
  }
}

TEST(FormatDouble, ShortestRoundTrip) {
  EXPECT_EQ(dt::format_double(0.1), "0.1");
  EXPECT_EQ(dt::format_double(-2.0), "-2");
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 1000; ++i) {
    const double x = u(rng);
    EXPECT_EQ(std::strtod(dt::format_double(x).c_str(), nullptr), x);
  }
}

TEST(Scene, MinimalValid) {
  const std::string text = R"({"lanes":[{"id":"L","points":[[0,0],[100,0]]}],"agents":[{"id":3,"history":)" +
                           points(11) + "}]}";
  const auto s = dt::parse_scene(text);
  ASSERT_EQ(s.lanes.size(), 1u);
  EXPECT_EQ(s.lanes[0].length(), 100.0);
  ASSERT_EQ(s.agents.size(), 1u);
  EXPECT_EQ(s.agents[0].id, "3");
  EXPECT_FALSE(s.agents[0].future.has_value());
}

TEST(Scene, LaneWithOnePointRejected) {
  const std::string text = R"({"lanes":[{"id":"L","points":[[0,0]]}],"agents":[]})";
  try {
    dt::parse_scene(text);
    FAIL() << "expected ParseError";
  } catch (const dt::ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("$.lanes[0].points"), std::string::npos) << e.what();
  }
}

TEST(Scene, ShortHistoryRejectedWithPath) {
  const std::string text = R"({"lanes":[{"id":"L","points":[[0,0],[9,0]]}],"agents":[{"id":"a","history":)" +
                           points(11) + R"(},{"id":"b","history":)" + points(10) + "}]}";
  try {
    dt::parse_scene(text);
    FAIL() << "expected ParseError";
  } catch (const dt::ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("$.agents[1].history"), std::string::npos) << e.what();
  }
}

TEST(Scene, OtherErrors) {
  EXPECT_THROW(dt::parse_scene("{"), dt::ParseError);
  EXPECT_THROW(dt::parse_scene("[]"), dt::ParseError);
  EXPECT_THROW(dt::parse_scene(R"({"lanes":[]})"), dt::ParseError);
  EXPECT_THROW(dt::parse_scene(R"({"lanes":[{"id":"L","points":[[0,"x"],[1,0]]}],"agents":[]})"),
               dt::ParseError);
}

TEST(Scene, JsonRoundTrip) {
  dt::SyntheticSceneOptions opt;
  opt.seed = 2;
  std::mt19937_64 rng(opt.seed);
  const auto scene = dt::make_synthetic_scene(rng, opt);
  const auto back = dt::parse_scene(dt::scene_to_json(scene));
  ASSERT_EQ(back.agents.size(), scene.agents.size());
  ASSERT_EQ(back.lanes.size(), scene.lanes.size());
  for (std::size_t i = 0; i < scene.agents.size(); ++i) {
    EXPECT_EQ(back.agents[i].id, scene.agents[i].id);
    for (std::size_t j = 0; j < scene.agents[i].history.size(); ++j) {
      EXPECT_EQ(back.agents[i].history[j].x, scene.agents[i].history[j].x);
      EXPECT_EQ(back.agents[i].history[j].y, scene.agents[i].history[j].y);
    }
  }
}

TEST(Dense, RoundTripBitExact) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n(0.0, 100.0);
  dt::DenseTrajectory d;
  d.dt = 0.1;
  d.start_time = 12.5;
  for (int k = 0; k < 300; ++k) {
    d.positions.push_back(n(rng));
    d.speeds.push_back(n(rng));
    d.accelerations.push_back(n(rng));
  }
  const auto dir = scratch("dense");
  {
    std::ofstream out(dir / "d.csv");
    dt::write_dense(out, d);
  }
  const auto back = dt::read_dense(dir / "d.csv");
  EXPECT_EQ(back.positions, d.positions);
  EXPECT_EQ(back.speeds, d.speeds);
  EXPECT_EQ(back.accelerations, d.accelerations);
  EXPECT_EQ(back.start_time, 12.5);
  EXPECT_NEAR(back.dt, 0.1, 1e-12);
  fs::remove_all(dir);
}

TEST(Outputs, FilesWritten) {
  const dt::ObservedTrajectory obs{"veh/1", {0.0, 1.0, 2.0}, {0.0, 5.0, 10.0}};
  dt::FitOptions fo;
  fo.iterations = 10;
  const auto r = dt::fit(obs, fo);
  dt::CorpusOutput out;
  out.method = "filter";
  out.ids = {obs.id};
  out.dense = {r.dense};
  out.reports = {dt::evaluate(r.dense, obs, r.wall_seconds)};
  out.fits = {r};
  const auto dir = scratch("outputs");
  dt::write_outputs(out, dir);
  for (const char* f : {"dense_veh_1.csv", "metrics.json", "timing.json", "params.csv",
                        "param_hist.csv"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
  const auto metrics = slurp(dir / "metrics.json");
  EXPECT_NE(metrics.find("\"method\": \"filter\""), std::string::npos);
  EXPECT_EQ(metrics.find("time"), std::string::npos);
  EXPECT_EQ(dt::read_dense(dir / "dense_veh_1.csv").positions, r.dense.positions);

  out.fits.clear();
  const auto base = scratch("outputs_baseline");
  dt::write_outputs(out, base);
  EXPECT_FALSE(fs::exists(base / "params.csv"));
  fs::remove_all(dir);
  fs::remove_all(base);
  EXPECT_THROW(dt::write_outputs(dt::CorpusOutput{}, base), dt::InvalidArgument);
}

TEST(Outputs, MetricsJsonDeterministic) {
  dt::CorpusSummary s;
  s.trajectories = 3;
  s.positional_error_pct = 0.123;
  s.wall_seconds = 99.0;
  const auto a = dt::metrics_json("filter", s);
  s.wall_seconds = 1.0;
  EXPECT_EQ(dt::metrics_json("filter", s), a);
  EXPECT_NE(dt::timing_json("filter", s, 3.0).find("time_s_total"), std::string::npos);
}

TEST(Outputs, FileSafe) {
  EXPECT_EQ(dt::file_safe("a b/c:d.e-f_9"), "a_b_c_d.e-f_9");
}

}  // namespace
