// Command-line front end: filter, reconstruct, baseline, predict, bench, synth.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "difftraffic/baselines.hpp"
#include "difftraffic/bench.hpp"
#include "difftraffic/config.hpp"
#include "difftraffic/errors.hpp"
#include "difftraffic/io.hpp"
#include "difftraffic/metrics.hpp"
#include "difftraffic/parallel.hpp"
#include "difftraffic/predict.hpp"
#include "difftraffic/synthetic.hpp"
#include "difftraffic/tasks.hpp"

namespace dt = difftraffic;
namespace fs = std::filesystem;

namespace {

constexpr int kExitData = 1;
constexpr int kExitNumerical = 2;

struct GlobalOptions {
  std::string config_path;
  std::uint64_t seed = 0;
  int threads = 0;
  bool seed_set = false;
};

dt::RunConfig load_config(const GlobalOptions& g) {
  dt::RunConfig c = g.config_path.empty() ? dt::RunConfig{} : dt::read_config(g.config_path);
  if (g.threads > 0) c.threads = g.threads;
  if (g.seed_set) c.seed = g.seed;
  dt::set_thread_count(c.threads);
  return c;
}

std::vector<dt::ObservedTrajectory> load_corpus(const std::string& path) {
  auto file = dt::read_trajectories(path);
  for (const auto& w : file.warnings) std::cerr << "warning: " << w << '\n';
  return std::move(file.trajectories);
}

void run_fit(const GlobalOptions& g, const std::string& input, const std::string& out_dir,
             double dt_override, double default_dt, const std::string& method) {
  auto config = load_config(g);
  if (dt_override > 0.0) config.dt = dt_override;
  const auto corpus = load_corpus(input);
  if (corpus.empty()) return;
  const auto started = std::chrono::steady_clock::now();
  auto fits = dt::fit_corpus(corpus, config.fit_options(default_dt));
  const double total =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

  dt::CorpusOutput out;
  out.method = method;
  out.total_seconds = total;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    out.ids.push_back(corpus[i].id);
    out.dense.push_back(fits[i].dense);
    out.reports.push_back(dt::evaluate(fits[i].dense, corpus[i], fits[i].wall_seconds));
  }
  out.fits = std::move(fits);
  dt::write_outputs(out, out_dir);
  const auto s = dt::summarize(out.reports);
  std::printf("%s: %zu trajectories, pos %.4f%%, acc %.3f/%.3f, imp %.2f%%, %.3f s/trajectory\n",
              method.c_str(), s.trajectories, s.positional_error_pct, s.acceleration_mean,
              s.acceleration_std, s.implausible_pct, s.wall_seconds);
}

void run_baseline(const GlobalOptions& g, const std::string& method, const std::string& input,
                  const std::string& out_dir, double dt_override) {
  auto config = load_config(g);
  if (dt_override > 0.0) config.dt = dt_override;
  const double step = config.dt.value_or(0.1);
  const auto corpus = load_corpus(input);
  if (corpus.empty()) return;
  const auto started = std::chrono::steady_clock::now();
  dt::CorpusOutput out;
  out.method = method;
  out.dense.resize(corpus.size());
  std::vector<double> seconds(corpus.size());
  dt::parallel_for_tasks(corpus.size(), [&](std::size_t i) {
    const auto t0 = std::chrono::steady_clock::now();
    auto dense = dt::linear_interpolate(corpus[i], step);
    if (method == "ma") dense = dt::moving_average(dense, 9);
    if (method == "ema") dense = dt::exponential_moving_average(dense, 5.0);
    out.dense[i] = std::move(dense);
    seconds[i] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  });
  out.total_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    out.ids.push_back(corpus[i].id);
    out.reports.push_back(dt::evaluate(out.dense[i], corpus[i], seconds[i]));
  }
  dt::write_outputs(out, out_dir);
  const auto s = dt::summarize(out.reports);
  std::printf("%s: %zu trajectories, pos %.4f%%, acc %.3f/%.3f, imp %.2f%%\n", method.c_str(),
              s.trajectories, s.positional_error_pct, s.acceleration_mean, s.acceleration_std,
              s.implausible_pct);
}

void run_predict(const GlobalOptions& g, const std::string& scene_path, const std::string& out_dir,
                 double lane_threshold, double miss_threshold) {
  auto config = load_config(g);
  if (lane_threshold > 0.0) config.lane_threshold = lane_threshold;
  if (miss_threshold > 0.0) config.miss_threshold = miss_threshold;
  const auto scene = dt::read_scene(scene_path);
  dt::ForecastOptions opt;
  opt.lane_threshold = config.lane_threshold;
  opt.fit = config.fit_options(dt::kFrameDt);
  const auto prediction = dt::forecast(scene, opt);
  dt::write_predictions(scene, prediction, out_dir, config.miss_threshold);
  for (const auto& a : prediction.agents) {
    if (!a.error.empty()) std::cerr << "warning: agent " << a.id << ": " << a.error << '\n';
  }
  std::printf("predicted %zu agents\n", prediction.agents.size());
}

void run_bench(const GlobalOptions& g, std::size_t vehicles, std::size_t steps, int threads) {
  auto config = load_config(g);
  const int t = threads > 0 ? threads : config.threads;
  const auto r = dt::bench(vehicles, steps, t, config.seed);
  nlohmann::ordered_json j;
  j["version"] = 1;
  j["vehicles"] = r.vehicles;
  j["steps"] = r.steps;
  j["threads"] = r.threads;
  j["forward_ms_per_step"] = r.forward_ms_per_step;
  j["backward_ms_per_step"] = r.backward_ms_per_step;
  j["mean_abs_acceleration"] = r.mean_abs_acceleration;
  j["checksum"] = dt::format_double(r.checksum);
  std::cout << j.dump() << '\n';
}

void run_synth(const GlobalOptions& g, std::size_t count, const std::string& out, bool sparse,
               bool scene) {
  const auto config = load_config(g);
  const auto seed = config.seed != 0 ? config.seed : 7;
  fs::path path(out);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream file(path, std::ios::binary);
  if (!file) throw dt::DataError("cannot write " + out);
  if (scene) {
    dt::SyntheticSceneOptions opt;
    opt.seed = seed;
    std::mt19937_64 rng(opt.seed);
    file << dt::scene_to_json(dt::make_synthetic_scene(rng, opt)) << '\n';
    return;
  }
  dt::SyntheticOptions opt;
  opt.count = count;
  opt.seed = seed;
  if (sparse) {
    opt.sample_dt = 1.0;
    opt.max_extra_spacing = 1.0;
  }
  dt::write_trajectories(file, dt::observations_of(dt::make_synthetic_corpus(opt)));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Differentiable IDM traffic simulator: trajectory filtering, reconstruction, "
               "prediction and benchmarks"};
  app.require_subcommand(1);
  GlobalOptions g;
  app.add_option("--config", g.config_path, "JSON run configuration")->check(CLI::ExistingFile);
  auto* seed_opt = app.add_option("--seed", g.seed, "Seed for synthetic data and bench jitter");
  app.add_option("--threads", g.threads, "Worker thread cap (0 = runtime default)");
  app.fallthrough();

  std::string input, out_dir, method, scene;
  double step = 0.0, lane_threshold = 0.0, miss_threshold = 0.0;
  std::size_t vehicles = 0, steps = 0, count = 100;
  int bench_threads = 0;
  bool sparse = false, make_scene = false;

  auto* filter = app.add_subcommand("filter", "Fit dense noisy trajectories (dt 0.1 s)");
  filter->add_option("--input", input, "Trajectory CSV")->required();
  filter->add_option("--out", out_dir, "Output directory")->required();
  filter->add_option("--dt", step, "Simulation step (s)");

  auto* reconstruct = app.add_subcommand("reconstruct", "Fit sparse trajectories (dt 1.0 s)");
  reconstruct->add_option("--input", input, "Trajectory CSV")->required();
  reconstruct->add_option("--out", out_dir, "Output directory")->required();
  reconstruct->add_option("--dt", step, "Simulation step (s)");

  auto* baseline = app.add_subcommand("baseline", "Linear / moving-average / EMA baselines");
  baseline->add_option("--method", method, "linear|ma|ema")
      ->required()
      ->check(CLI::IsMember({"linear", "ma", "ema"}));
  baseline->add_option("--input", input, "Trajectory CSV")->required();
  baseline->add_option("--out", out_dir, "Output directory")->required();
  baseline->add_option("--dt", step, "Resampling step (s)");

  auto* predict = app.add_subcommand("predict", "Forecast 8 s of motion for a scene");
  predict->add_option("--scene", scene, "Scene JSON")->required();
  predict->add_option("--out", out_dir, "Output directory")->required();
  predict->add_option("--lane-threshold", lane_threshold, "Lane assignment distance (m)");
  predict->add_option("--miss-threshold", miss_threshold, "Final displacement miss threshold (m)");

  auto* bench = app.add_subcommand("bench", "Ring-road forward/backward throughput");
  bench->add_option("--vehicles", vehicles, "Number of vehicles")->required()->check(CLI::Range(2, 1 << 30));
  bench->add_option("--steps", steps, "Simulation steps")->required()->check(CLI::PositiveNumber);
  bench->add_option("--threads", bench_threads, "Worker threads");

  auto* synth = app.add_subcommand("synth", "Write a synthetic trajectory corpus or scene");
  synth->add_option("--out", out_dir, "Output file")->required();
  synth->add_option("--count", count, "Number of trajectories");
  synth->add_flag("--sparse", sparse, "Irregular 1-2 s sampling instead of 10 Hz");
  synth->add_flag("--scene", make_scene, "Write a prediction scene instead");

  CLI11_PARSE(app, argc, argv);
  g.seed_set = seed_opt->count() > 0;

  try {
    if (*filter) run_fit(g, input, out_dir, step, 0.1, "filter");
    if (*reconstruct) run_fit(g, input, out_dir, step, 1.0, "reconstruct");
    if (*baseline) run_baseline(g, method, input, out_dir, step);
    if (*predict) run_predict(g, scene, out_dir, lane_threshold, miss_threshold);
    if (*bench) run_bench(g, vehicles, steps, bench_threads);
    if (*synth) run_synth(g, count, out_dir, sparse, make_scene);
  } catch (const dt::NumericalFailure& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const dt::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const dt::InvalidArgument& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kExitData;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  }
  return 0;
}
