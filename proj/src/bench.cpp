#include "hsdrive/bench.hpp"

#include <algorithm>
#include <chrono>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "hsdrive/fcn.hpp"
#include "hsdrive/patchwork.hpp"
#include "hsdrive/quant.hpp"
#include "hsdrive/spectral.hpp"
#include "json.hpp"

namespace hsd {
namespace {

using Clock = std::chrono::steady_clock;
static_assert(Clock::is_steady);

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

constexpr int kBenchClasses = 5;

}  // namespace

FpsStats fps_stats(std::span<const double> times_ms) {
  if (times_ms.empty()) throw DataError("fps_stats: no samples");
  std::vector<double> fps;
  fps.reserve(times_ms.size());
  for (double t : times_ms) {
    if (!(t > 0.0) || !std::isfinite(t)) throw DataError("fps_stats: sample times must be positive");
    fps.push_back(1000.0 / t);
  }
  std::sort(fps.begin(), fps.end());
  FpsStats s;
  s.mean = std::accumulate(fps.begin(), fps.end(), 0.0) / static_cast<double>(fps.size());
  s.median = fps[(fps.size() - 1) / 2];
  s.min = fps.front();
  s.max = fps.back();
  return s;
}

const std::vector<std::string>& bench_workloads() {
  static const std::vector<std::string> names{"preprocess", "unet_float", "unet_quant", "mlp", "end_to_end"};
  return names;
}

BenchReport run_bench(std::string name, const BenchBody& body, const BenchOptions& options) {
  if (options.iterations < 1) throw ConfigError("benchmark needs at least one iteration");
  if (options.warmup < 0) throw ConfigError("warmup must be non-negative");
  if (options.workers < 1) throw ConfigError("worker count must be at least 1");
  BenchReport r;
  r.workload = std::move(name);
  r.iterations = options.iterations;
  r.warmup = options.warmup;
  r.workers = options.workers;
  for (int i = 0; i < options.warmup; ++i) body();
  r.times_ms.reserve(static_cast<std::size_t>(options.iterations));
  for (int i = 0; i < options.iterations; ++i) {
    const auto t0 = Clock::now();
    const double reported = body();
    const double wall = elapsed_ms(t0);
    r.times_ms.push_back(reported > 0.0 ? reported : wall);
  }
  r.fps = fps_stats(r.times_ms);
  r.mean_ms = std::accumulate(r.times_ms.begin(), r.times_ms.end(), 0.0) / static_cast<double>(r.times_ms.size());
  return r;
}

BenchReport run_bench(std::string_view workload, const BenchOptions& options) {
  const auto& names = bench_workloads();
  if (std::find(names.begin(), names.end(), workload) == names.end()) {
    throw ConfigError("unknown benchmark workload '" + std::string(workload) + "'");
  }
  const SynthScene scene = synth_scene(SceneSpec::default_scene(), options.seed);
  PreprocessConfig pre;
  pre.crop_offset = scene.calibration.crop_offset;
  const HyperCube cube = run_pipeline(scene.raw, scene.calibration, pre).cube;
  const PatchGrid grid = plan_grid(cube.height(), cube.width(), 128, 3, 6);

  UNetConfig ucfg;
  ucfg.classes = kBenchClasses;
  const LayerGraph unet = build_unet(ucfg);
  const WeightStore unet_weights = init_weights(unet, options.seed);
  const FloatNetwork float_net(unet, unet_weights);

  if (workload == "preprocess") {
    std::vector<StageTiming> per_iter;
    BenchBody body = [&] {
      auto result = run_pipeline(scene.raw, scene.calibration, pre);
      per_iter.push_back(result.timing);
      return result.timing.total_ms;
    };
    auto r = run_bench("preprocess", body, options);
    // drop warmup iterations and average each stage
    per_iter.erase(per_iter.begin(), per_iter.begin() + options.warmup);
    StageTiming mean;
    for (std::size_t s = 0; s < per_iter.front().stages.size(); ++s) {
      double sum = 0.0;
      for (const auto& t : per_iter) sum += t.stages[s].second;
      mean.add(per_iter.front().stages[s].first, sum / static_cast<double>(per_iter.size()));
    }
    r.stages = mean;
    return r;
  }
  if (workload == "unet_float") {
    PatchModel model = [&](const Tensor3<float>& p) { return float_net.forward(p); };
    return run_bench("unet_float", [&] { segment(cube, grid, model, options.workers); return 0.0; }, options);
  }
  if (workload == "unet_quant") {
    const auto calib_patches = extract(cube, grid);
    const QuantizedModel q = quantize_model(unet, unet_weights, calib_patches);
    const QuantNetwork qnet(q.folded.graph, q.weights);
    PatchModel model = [&](const Tensor3<float>& p) { return qnet.forward(p); };
    return run_bench("unet_quant", [&] { segment(cube, grid, model, options.workers); return 0.0; }, options);
  }
  if (workload == "mlp") {
    const WeightStore mlp = init_weights(build_mlp(mlp_sizes(cube.bands(), kBenchClasses)), options.seed);
    return run_bench("mlp", [&] { mlp_forward(mlp, cube); return 0.0; }, options);
  }
  // end_to_end
  PatchModel model = [&](const Tensor3<float>& p) { return float_net.forward(p); };
  BenchBody body = [&] {
    const auto c = run_pipeline(scene.raw, scene.calibration, pre).cube;
    argmax_map(segment(c, grid, model, options.workers));
    return 0.0;
  };
  return run_bench("end_to_end", body, options);
}

std::string BenchReport::to_text() const {
  std::ostringstream out;
  out << std::fixed << std::setprecision(2);
  out << "workload   " << workload << "\niterations " << iterations << " (warmup " << warmup << ", workers "
      << workers << ")\n\n";
  if (stages) {
    std::size_t width = 5;
    for (const auto& [n, ms] : stages->stages) width = std::max(width, n.size());
    out << std::left << std::setw(static_cast<int>(width)) << "Stage" << std::right << std::setw(12) << "Time (ms)"
        << '\n';
    for (const auto& [n, ms] : stages->stages) {
      out << std::left << std::setw(static_cast<int>(width)) << n << std::right << std::setw(12) << ms << '\n';
    }
    out << std::left << std::setw(static_cast<int>(width)) << "Total" << std::right << std::setw(12)
        << stages->total_ms << "\n\n";
  }
  out << std::right << std::setw(10) << "Mean FPS" << std::setw(12) << "Median FPS" << std::setw(10) << "Max FPS"
      << std::setw(10) << "Min FPS" << std::setw(12) << "Mean ms" << '\n';
  out << std::setw(10) << fps.mean << std::setw(12) << fps.median << std::setw(10) << fps.max << std::setw(10)
      << fps.min << std::setw(12) << mean_ms << '\n';
  return out.str();
}

std::string BenchReport::to_json() const {
  nlohmann::ordered_json j;
  j["workload"] = workload;
  j["iterations"] = iterations;
  j["warmup"] = warmup;
  j["workers"] = workers;
  j["fps"] = {{"mean", fps.mean}, {"median", fps.median}, {"max", fps.max}, {"min", fps.min}};
  j["mean_ms"] = mean_ms;
  j["times_ms"] = times_ms;
  if (stages) {
    auto s = nlohmann::ordered_json::array();
    for (const auto& [n, ms] : stages->stages) s.push_back({{"stage", n}, {"ms", ms}});
    s.push_back({{"stage", "Total"}, {"ms", stages->total_ms}});
    j["stages"] = s;
  }
  return j.dump(2);
}

}  // namespace hsd
