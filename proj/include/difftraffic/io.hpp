#pragma once

// File formats: trajectory CSV input, scene JSON input, and the dense /
// parameter / metrics / histogram / prediction outputs. Every CSV starts with
// a `# difftraffic-v1` line; every JSON object carries "version": 1.

#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "json.hpp"

#include "difftraffic/errors.hpp"
#include "difftraffic/fit.hpp"
#include "difftraffic/metrics.hpp"
#include "difftraffic/predict.hpp"
#include "difftraffic/trajectory.hpp"

namespace difftraffic {

inline constexpr std::string_view kCsvVersionLine = "# difftraffic-v1";
inline constexpr std::string_view kTrajectoryHeader = "vehicle_id,timestamp_s,position_m";
inline constexpr std::string_view kDenseHeader = "step,time_s,position_m,speed_mps,accel_mps2";

/// Shortest text that parses back to the same double.
inline std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split(std::string_view line, char sep = ',') {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(trim(line.substr(start, pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline bool parse_double(std::string_view s, double& out) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size() && std::isfinite(out);
}

inline std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return in;
}

inline std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

}  // namespace detail

struct TrajectoryFile {
  std::vector<ObservedTrajectory> trajectories;  // in order of first appearance
  std::vector<std::string> warnings;
};

/// Rows of one vehicle must appear with strictly increasing timestamps.
inline TrajectoryFile parse_trajectories(std::istream& in, const std::string& name = "<input>") {
  TrajectoryFile file;
  std::map<std::string, std::size_t> index;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    const auto text = detail::trim(line);
    if (text.empty() || text.front() == '#') continue;
    if (!header_seen) {
      if (text != kTrajectoryHeader) {
        throw ParseError(name + ":" + std::to_string(line_no) + ": expected header '" +
                         std::string(kTrajectoryHeader) + "'");
      }
      header_seen = true;
      continue;
    }
    const auto fields = detail::split(text);
    double t = 0.0;
    double p = 0.0;
    if (fields.size() != 3 || fields[0].empty() || !detail::parse_double(fields[1], t) ||
        !detail::parse_double(fields[2], p)) {
      throw ParseError(name + ":" + std::to_string(line_no) + ": malformed row");
    }
    const std::string id(fields[0]);
    auto [it, inserted] = index.try_emplace(id, file.trajectories.size());
    if (inserted) file.trajectories.push_back({id, {}, {}});
    auto& traj = file.trajectories[it->second];
    if (!traj.timestamps.empty()) {
      if (t == traj.timestamps.back()) {
        throw DataError(name + ":" + std::to_string(line_no) + ": duplicate timestamp for id " + id);
      }
      if (t < traj.timestamps.back()) {
        throw DataError(name + ":" + std::to_string(line_no) + ": non-monotone timestamps for id " +
                        id);
      }
    }
    traj.timestamps.push_back(t);
    traj.positions.push_back(p);
  }
  if (!header_seen) throw ParseError(name + ": missing header");
  if (file.trajectories.empty()) file.warnings.push_back(name + ": no trajectories");
  for (const auto& t : file.trajectories) {
    if (t.size() < 2) {
      throw DataError(name + ": id " + t.id + " has fewer than 2 observations");
    }
  }
  return file;
}

inline TrajectoryFile read_trajectories(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  return parse_trajectories(in, path.string());
}

inline void write_trajectories(std::ostream& out, std::span<const ObservedTrajectory> corpus) {
  out << kCsvVersionLine << '\n' << kTrajectoryHeader << '\n';
  for (const auto& t : corpus) {
    for (std::size_t j = 0; j < t.size(); ++j) {
      out << t.id << ',' << format_double(t.timestamps[j]) << ',' << format_double(t.positions[j])
          << '\n';
    }
  }
}

namespace detail {

using nlohmann::json;

inline Point2 parse_point(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
    throw ParseError(path + ": expected [x, y]");
  }
  return {j[0].get<double>(), j[1].get<double>()};
}

inline std::vector<Point2> parse_points(const json& j, const std::string& path) {
  if (!j.is_array()) throw ParseError(path + ": expected an array of points");
  std::vector<Point2> out;
  out.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    out.push_back(parse_point(j[i], path + "[" + std::to_string(i) + "]"));
  }
  return out;
}

inline std::string parse_id(const json& j, const std::string& path) {
  if (j.is_string()) return j.get<std::string>();
  if (j.is_number_integer()) return std::to_string(j.get<long long>());
  throw ParseError(path + ": expected a string or integer id");
}

}  // namespace detail

inline SceneSample parse_scene(const std::string& text) {
  using detail::json;
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("$: ") + e.what());
  }
  if (!root.is_object()) throw ParseError("$: expected an object");
  if (root.contains("version") && root["version"] != 1) throw ParseError("$.version: expected 1");
  if (!root.contains("lanes") || !root["lanes"].is_array()) {
    throw ParseError("$.lanes: expected an array");
  }
  if (!root.contains("agents") || !root["agents"].is_array()) {
    throw ParseError("$.agents: expected an array");
  }

  SceneSample scene;
  const auto& lanes = root["lanes"];
  for (std::size_t i = 0; i < lanes.size(); ++i) {
    const std::string path = "$.lanes[" + std::to_string(i) + "]";
    if (!lanes[i].is_object() || !lanes[i].contains("id") || !lanes[i].contains("points")) {
      throw ParseError(path + ": expected {id, points}");
    }
    auto points = detail::parse_points(lanes[i]["points"], path + ".points");
    try {
      scene.lanes.emplace_back(detail::parse_id(lanes[i]["id"], path + ".id"), std::move(points));
    } catch (const InvalidArgument& e) {
      throw ParseError(path + ".points: " + e.what());
    }
  }
  const auto& agents = root["agents"];
  for (std::size_t i = 0; i < agents.size(); ++i) {
    const std::string path = "$.agents[" + std::to_string(i) + "]";
    const auto& a = agents[i];
    if (!a.is_object() || !a.contains("id") || !a.contains("history")) {
      throw ParseError(path + ": expected {id, history, future}");
    }
    SceneAgent agent;
    agent.id = detail::parse_id(a["id"], path + ".id");
    agent.history = detail::parse_points(a["history"], path + ".history");
    if (agent.history.size() != kHistoryFrames) {
      throw ParseError(path + ".history: expected " + std::to_string(kHistoryFrames) + " frames, got " +
                       std::to_string(agent.history.size()));
    }
    if (a.contains("future") && !a["future"].is_null()) {
      agent.future = detail::parse_points(a["future"], path + ".future");
      if (agent.future->size() != kFutureFrames) {
        throw ParseError(path + ".future: expected " + std::to_string(kFutureFrames) +
                         " frames, got " + std::to_string(agent.future->size()));
      }
    }
    if (a.contains("length")) {
      if (!a["length"].is_number() || !(a["length"].get<double>() > 0.0)) {
        throw ParseError(path + ".length: expected a positive number");
      }
      agent.length = a["length"].get<double>();
    }
    scene.agents.push_back(std::move(agent));
  }
  return scene;
}

inline SceneSample read_scene(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_scene(ss.str());
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

inline std::string scene_to_json(const SceneSample& scene) {
  using detail::json;
  auto points = [](const std::vector<Point2>& pts) {
    json arr = json::array();
    for (const auto& p : pts) arr.push_back({p.x, p.y});
    return arr;
  };
  json root;
  root["version"] = 1;
  root["lanes"] = json::array();
  for (const auto& l : scene.lanes) root["lanes"].push_back({{"id", l.id()}, {"points", points(l.points())}});
  root["agents"] = json::array();
  for (const auto& a : scene.agents) {
    json j{{"id", a.id}, {"history", points(a.history)}};
    j["future"] = a.future ? points(*a.future) : json(nullptr);
    j["length"] = a.length;
    root["agents"].push_back(std::move(j));
  }
  return root.dump(1);
}

/// Characters outside [A-Za-z0-9_.-] become '_'.
inline std::string file_safe(std::string_view id) {
  std::string out(id);
  for (auto& c : out) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                    c == '_' || c == '.' || c == '-';
    if (!ok) c = '_';
  }
  return out;
}

inline void write_dense(std::ostream& out, const DenseTrajectory& dense) {
  out << kCsvVersionLine << '\n' << kDenseHeader << '\n';
  for (std::size_t k = 0; k < dense.size(); ++k) {
    const double t = dense.start_time + static_cast<double>(k) * dense.dt;
    out << k << ',' << format_double(t) << ',' << format_double(dense.positions[k]) << ','
        << format_double(dense.speeds[k]) << ',' << format_double(dense.accelerations[k]) << '\n';
  }
}

inline DenseTrajectory read_dense(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  DenseTrajectory dense;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  std::vector<double> times;
  while (std::getline(in, line)) {
    ++line_no;
    const auto text = detail::trim(line);
    if (text.empty() || text.front() == '#') continue;
    if (!header_seen) {
      if (text != kDenseHeader) throw ParseError(path.string() + ": expected dense header");
      header_seen = true;
      continue;
    }
    const auto f = detail::split(text);
    double step = 0, t = 0, p = 0, v = 0, a = 0;
    if (f.size() != 5 || !detail::parse_double(f[0], step) || !detail::parse_double(f[1], t) ||
        !detail::parse_double(f[2], p) || !detail::parse_double(f[3], v) ||
        !detail::parse_double(f[4], a)) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": malformed row");
    }
    times.push_back(t);
    dense.positions.push_back(p);
    dense.speeds.push_back(v);
    dense.accelerations.push_back(a);
  }
  if (!times.empty()) dense.start_time = times.front();
  if (times.size() > 1) dense.dt = times[1] - times[0];
  return dense;
}

inline void write_params(std::ostream& out, std::span<const FitResult> results) {
  out << kCsvVersionLine << '\n' << "id";
  for (std::size_t p = 0; p < kOptimizedParams; ++p) out << ',' << parameter_name(p);
  out << '\n';
  for (const auto& r : results) {
    out << r.id;
    for (double x : to_array(r.params)) out << ',' << format_double(x);
    out << '\n';
  }
}

inline void write_histograms(std::ostream& out, std::span<const HistogramBin> bins) {
  out << kCsvVersionLine << '\n' << "parameter,bin_low,bin_high,count\n";
  for (const auto& b : bins) {
    out << b.parameter << ',' << format_double(b.low) << ',' << format_double(b.high) << ','
        << b.count << '\n';
  }
}

/// Deterministic corpus metrics. Wall-clock time lives in timing.json.
inline std::string metrics_json(const std::string& method, const CorpusSummary& s) {
  nlohmann::ordered_json j;
  j["version"] = 1;
  j["method"] = method;
  j["trajectories"] = s.trajectories;
  j["positional_error_pct"] = s.positional_error_pct;
  j["acceleration_mean"] = s.acceleration_mean;
  j["acceleration_std"] = s.acceleration_std;
  j["implausible_pct"] = s.implausible_pct;
  j["negative_speed_steps"] = s.negative_speed_steps;
  return j.dump(2) + "\n";
}

inline std::string timing_json(const std::string& method, const CorpusSummary& s,
                               double total_seconds) {
  nlohmann::ordered_json j;
  j["version"] = 1;
  j["method"] = method;
  j["time_s_per_trajectory"] = s.wall_seconds;
  j["time_s_total"] = total_seconds;
  return j.dump(2) + "\n";
}

struct CorpusOutput {
  std::string method;
  std::vector<std::string> ids;
  std::vector<DenseTrajectory> dense;
  std::vector<TrajectoryReport> reports;
  std::vector<FitResult> fits;  // empty for baselines
  double total_seconds = 0.0;
};

/// Writes dense_<id>.csv per trajectory, metrics.json, timing.json, and for
/// fitted corpora params.csv and param_hist.csv.
inline void write_outputs(const CorpusOutput& output, const std::filesystem::path& dir) {
  if (output.dense.empty()) throw InvalidArgument("write_outputs: no results");
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < output.dense.size(); ++i) {
    auto out = detail::open_output(dir / ("dense_" + file_safe(output.ids[i]) + ".csv"));
    write_dense(out, output.dense[i]);
  }
  const auto summary = summarize(output.reports);
  {
    auto out = detail::open_output(dir / "metrics.json");
    out << metrics_json(output.method, summary);
  }
  {
    auto out = detail::open_output(dir / "timing.json");
    out << timing_json(output.method, summary, output.total_seconds);
  }
  if (!output.fits.empty()) {
    std::vector<IdmParams> params;
    for (const auto& f : output.fits) params.push_back(f.params);
    {
      auto out = detail::open_output(dir / "params.csv");
      write_params(out, output.fits);
    }
    auto out = detail::open_output(dir / "param_hist.csv");
    write_histograms(out, parameter_histograms(params));
  }
}

inline void write_predictions(const SceneSample& scene, const PredictionResult& prediction,
                              const std::filesystem::path& dir, double miss_threshold) {
  std::filesystem::create_directories(dir);
  {
    auto out = detail::open_output(dir / "predictions.csv");
    out << kCsvVersionLine << '\n' << "agent_id,frame,time_s,x_m,y_m,lane_id,constant_velocity\n";
    for (const auto& a : prediction.agents) {
      const std::string lane = a.lane ? scene.lanes[*a.lane].id() : "";
      for (std::size_t j = 0; j < a.positions.size(); ++j) {
        out << a.id << ',' << j + 1 << ',' << format_double(kFrameDt * static_cast<double>(j + 1))
            << ',' << format_double(a.positions[j].x) << ',' << format_double(a.positions[j].y) << ','
            << lane << ',' << (a.constant_velocity ? 1 : 0) << '\n';
      }
    }
  }
  nlohmann::ordered_json j;
  j["version"] = 1;
  j["agents"] = prediction.agents.size();
  std::size_t evaluated = 0, misses = 0, fallbacks = 0;
  double ade = 0.0, fde = 0.0;
  for (std::size_t i = 0; i < prediction.agents.size(); ++i) {
    if (prediction.agents[i].constant_velocity) ++fallbacks;
    const auto& truth = scene.agents[i].future;
    if (!truth) continue;
    const auto m = displacement_metrics(prediction.agents[i].positions, *truth, miss_threshold);
    ++evaluated;
    ade += m.min_ade;
    fde += m.min_fde;
    if (m.miss) ++misses;
  }
  j["constant_velocity_agents"] = fallbacks;
  j["evaluated_agents"] = evaluated;
  if (evaluated > 0) {
    const auto n = static_cast<double>(evaluated);
    j["min_ade"] = ade / n;
    j["min_fde"] = fde / n;
    j["miss_rate"] = static_cast<double>(misses) / n;
  }
  auto out = detail::open_output(dir / "metrics.json");
  out << j.dump(2) << '\n';
}

}  // namespace difftraffic
