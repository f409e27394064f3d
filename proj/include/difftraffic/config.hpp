#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>

#include "json.hpp"

#include "difftraffic/errors.hpp"
#include "difftraffic/fit.hpp"
#include "difftraffic/metrics.hpp"
#include "difftraffic/optimizer.hpp"
#include "difftraffic/predict.hpp"

namespace difftraffic {

/// Run-wide settings. Unset dt means "task default" (0.1 s filtering,
/// 1.0 s reconstruction).
struct RunConfig {
  std::optional<double> dt;
  std::size_t iterations = 500;
  LearningRate learning_rate;
  BoxConstraints box;
  double lane_threshold = kDefaultLaneThreshold;
  double miss_threshold = kDefaultMissThreshold;
  int threads = 0;  // 0 leaves the runtime default
  std::uint64_t seed = 0;

  void validate() const {
    if (dt && !(*dt > 0.0)) throw DataError("config: dt must be positive");
    if (iterations == 0) throw DataError("config: iterations must be positive");
    if (!(learning_rate.initial > 0.0) || !(learning_rate.final > 0.0)) {
      throw DataError("config: learning rates must be positive");
    }
    if (!(lane_threshold > 0.0) || !(miss_threshold > 0.0)) {
      throw DataError("config: thresholds must be positive");
    }
    if (threads < 0) throw DataError("config: threads must be non-negative");
    try {
      box.validate();
    } catch (const InvalidArgument& e) {
      throw DataError(std::string("config: ") + e.what());
    }
  }

  FitOptions fit_options(double default_dt) const {
    FitOptions o;
    o.dt = dt.value_or(default_dt);
    o.iterations = iterations;
    o.learning_rate = learning_rate;
    o.box = box;
    return o;
  }
};

/// Keys: dt, iterations, lr_initial, lr_final, bounds {name: [low, high]},
/// lane_threshold, miss_threshold, threads, seed. Unknown keys are rejected.
inline RunConfig parse_config(const std::string& text) {
  using nlohmann::json;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("$: ") + e.what());
  }
  if (!j.is_object()) throw ParseError("$: expected an object");
  RunConfig c;
  auto number = [&](const std::string& key) {
    if (!j[key].is_number()) throw ParseError("$." + key + ": expected a number");
    return j[key].get<double>();
  };
  for (const auto& [key, value] : j.items()) {
    if (key == "version") {
      if (value != 1) throw ParseError("$.version: expected 1");
    } else if (key == "dt") {
      c.dt = number(key);
    } else if (key == "iterations") {
      if (!value.is_number_unsigned()) throw ParseError("$.iterations: expected a positive integer");
      c.iterations = value.get<std::size_t>();
    } else if (key == "lr_initial") {
      c.learning_rate.initial = number(key);
    } else if (key == "lr_final") {
      c.learning_rate.final = number(key);
    } else if (key == "lane_threshold") {
      c.lane_threshold = number(key);
    } else if (key == "miss_threshold") {
      c.miss_threshold = number(key);
    } else if (key == "threads") {
      if (!value.is_number_integer()) throw ParseError("$.threads: expected an integer");
      c.threads = value.get<int>();
    } else if (key == "seed") {
      if (!value.is_number_unsigned()) throw ParseError("$.seed: expected a non-negative integer");
      c.seed = value.get<std::uint64_t>();
    } else if (key == "bounds") {
      if (!value.is_object()) throw ParseError("$.bounds: expected an object");
      for (const auto& [name, range] : value.items()) {
        std::size_t p = 0;
        while (p < kOptimizedParams && name != parameter_name(p)) ++p;
        if (p == kOptimizedParams) throw ParseError("$.bounds." + name + ": unknown parameter");
        if (!range.is_array() || range.size() != 2 || !range[0].is_number() ||
            !range[1].is_number()) {
          throw ParseError("$.bounds." + name + ": expected [low, high]");
        }
        c.box.bounds[p] = {range[0].get<double>(), range[1].get<double>()};
      }
    } else {
      throw ParseError("$." + key + ": unknown key");
    }
  }
  c.validate();
  return c;
}

inline RunConfig read_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str());
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

}  // namespace difftraffic
