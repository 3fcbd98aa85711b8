#include "hsdrive/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "binary_io.hpp"
#include "hsdrive/bench.hpp"
#include "hsdrive/eval.hpp"
#include "hsdrive/fcn.hpp"
#include "hsdrive/patchwork.hpp"
#include "hsdrive/preprocess.hpp"
#include "hsdrive/quant.hpp"
#include "hsdrive/spectral.hpp"
#include "json.hpp"

namespace hsd {
namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

std::uint64_t default_seed() {
  const char* env = std::getenv("SPECDRIVE_SEED");
  if (env == nullptr || *env == '\0') return 0;
  try {
    std::size_t used = 0;
    const auto v = std::stoull(env, &used);
    if (used != std::string(env).size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError(std::string("SPECDRIVE_SEED is not an unsigned integer: ") + env);
  }
}

std::string read_text(const fs::path& p) { return detail::read_file(p); }

Json parse_json_file(const fs::path& p) {
  try {
    return Json::parse(read_text(p));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(p.string() + ": " + e.what());
  }
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output directory " + dir.string() + ": " + ec.message());
}

std::vector<fs::path> files_with_extension(const fs::path& dir, std::string_view ext) {
  if (!fs::is_directory(dir)) throw DataError("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ext) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw DataError("no " + std::string(ext) + " files in " + dir.string());
  return files;
}

// Palette: road, road marks, vegetation, sky, other. Ignore is black.
constexpr std::array<std::array<std::uint8_t, 3>, 5> kPalette{{
    {128, 64, 128}, {255, 255, 255}, {40, 160, 40}, {90, 150, 220}, {200, 120, 40}}};

void save_preview(const LabelMap& labels, const fs::path& path) {
  std::string bytes = "P6\n" + std::to_string(labels.width) + " " + std::to_string(labels.height) + "\n255\n";
  for (auto l : labels.labels) {
    const auto rgb = l < kPalette.size() ? kPalette[l] : std::array<std::uint8_t, 3>{0, 0, 0};
    for (auto v : rgb) bytes.push_back(static_cast<char>(v));
  }
  detail::write_file_atomic(path, bytes);
}

bool is_quantized(const WeightStore& w) { return w.meta("qf.act.input").has_value(); }

/// Shared bookkeeping: every subcommand writes manifest.json into its
/// output directory, even when only reports are produced.
struct Run {
  explicit Run(std::string name) : command(std::move(name)) {}

  std::string command;
  Json config = Json::object();
  Json inputs = Json::object();
  Json outputs = Json::object();
  std::optional<std::uint64_t> seed;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

  void write(const fs::path& dir) const {
    Json m;
    m["subcommand"] = command;
    m["config"] = config;
    m["inputs"] = inputs;
    m["outputs"] = outputs;
    if (seed) m["seed"] = *seed;
    else m["seed"] = nullptr;
    m["tool_version"] = kToolVersion;
    m["wall_time_ms"] =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    detail::write_file_atomic(dir / "manifest.json", m.dump(2) + "\n");
  }
};

struct GridOptions {
  Index patch = 128;
  Index rows = 3;
  Index cols = 6;
  int workers = default_workers();
  std::string config;

  void add_to(CLI::App* app, bool with_workers) {
    app->add_option("--grid-config", config, "JSON with keys patch, rows, cols, workers");
    app->add_option("--patch", patch, "Square patch size");
    app->add_option("--grid-rows", rows, "Patches per column");
    app->add_option("--grid-cols", cols, "Patches per row");
    if (with_workers) app->add_option("--workers", workers, "Patch-level worker threads");
  }

  // Values from the file apply unless the matching flag was given.
  void resolve(const CLI::App& app) {
    if (config.empty()) return;
    const Json doc = parse_json_file(config);
    if (!doc.is_object()) throw ConfigError("grid config must be a JSON object");
    try {
      for (const auto& [key, value] : doc.items()) {
        if (key == "patch") {
          if (app.count("--patch") == 0) patch = value.get<Index>();
        } else if (key == "rows") {
          if (app.count("--grid-rows") == 0) rows = value.get<Index>();
        } else if (key == "cols") {
          if (app.count("--grid-cols") == 0) cols = value.get<Index>();
        } else if (key == "workers") {
          if (app.get_option_no_throw("--workers") && app.count("--workers") == 0) workers = value.get<int>();
        } else {
          throw ConfigError("grid config: unknown key '" + key + "'");
        }
      }
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("grid config: ") + e.what());
    }
    if (workers < 1) throw ConfigError("--workers must be at least 1");
  }

  Json to_json() const { return {{"patch", patch}, {"rows", rows}, {"cols", cols}}; }
};

// ---- synth ----------------------------------------------------------------

struct SynthArgs {
  std::string spec, out;
  std::uint64_t seed = 0;
};

void cmd_synth(const SynthArgs& a, std::ostream& out) {
  Run run("synth");
  SceneSpec spec = a.spec.empty() ? SceneSpec::default_scene() : SceneSpec::from_json(read_text(a.spec));
  run.seed = a.seed;
  run.config = Json::parse(spec.to_json());
  if (!a.spec.empty()) run.inputs["spec"] = a.spec;
  const SynthScene scene = synth_scene(spec, a.seed);
  const fs::path dir = a.out;
  ensure_dir(dir);
  save_raw(scene.raw, dir / "raw.pgm");
  save_labels(scene.labels, dir / "labels.pgm");
  save_calibration(scene.calibration, dir / "calibration.json");
  save_cube({scene.reflectance.values, CubeStage::reflectance}, dir / "truth.hsc");
  run.outputs = {{"raw", "raw.pgm"},
                 {"labels", "labels.pgm"},
                 {"calibration", "calibration.json"},
                 {"truth", "truth.hsc"}};
  run.write(dir);
  out << "synthesised " << scene.raw.height << "x" << scene.raw.width << " frame into " << dir.string() << "\n";
}

// ---- preprocess -----------------------------------------------------------

struct PreprocessArgs {
  std::string raw, calib, config, out;
  std::optional<int> median_kernel;
  std::optional<std::string> normalization, alignment;
  std::optional<std::vector<Index>> crop_offset;
};

void cmd_preprocess(const PreprocessArgs& a, std::ostream& out) {
  Run run("preprocess");
  const RawMosaicFrame raw = load_raw(a.raw);
  const CalibrationSet calib = load_calibration(a.calib);
  // precedence: flags, then the config file, then the calibration's crop offset
  Json cfg = Json::parse(PreprocessConfig{}.to_json());
  cfg["crop_offset"] = {calib.crop_offset.row, calib.crop_offset.col};
  if (!a.config.empty()) {
    const Json file = parse_json_file(a.config);
    if (!file.is_object()) throw ConfigError("preprocess config must be a JSON object");
    for (const auto& [k, v] : file.items()) cfg[k] = v;
  }
  if (a.median_kernel) cfg["median_kernel"] = *a.median_kernel;
  if (a.normalization) cfg["normalization"] = *a.normalization;
  if (a.alignment) cfg["alignment"] = *a.alignment;
  if (a.crop_offset) cfg["crop_offset"] = *a.crop_offset;
  const PreprocessConfig config = PreprocessConfig::from_json(cfg.dump());

  const PreprocessResult result = run_pipeline(raw, calib, config);
  const fs::path dir = a.out;
  ensure_dir(dir);
  save_cube(result.cube, dir / "cube.hsc");
  run.config = Json::parse(config.to_json());
  run.inputs = {{"raw", a.raw}, {"calibration", a.calib}};
  if (!a.config.empty()) run.inputs["config"] = a.config;
  run.outputs = {{"cube", "cube.hsc"}};
  run.write(dir);
  out << "cube " << result.cube.height() << "x" << result.cube.width() << "x" << result.cube.bands() << " in "
      << result.timing.total_ms << " ms\n";
}

// ---- infer ----------------------------------------------------------------

struct InferArgs {
  std::string cube, weights, out;
  bool quantized = false;
  GridOptions grid;
};

void cmd_infer(InferArgs a, const CLI::App& app, std::ostream& out) {
  Run run("infer");
  a.grid.resolve(app);
  if (a.grid.workers < 1) throw ConfigError("--workers must be at least 1");
  const HyperCube cube = load_cube(a.cube);
  const WeightStore weights = load_weights(a.weights);
  if (is_quantized(weights) != a.quantized) {
    throw WeightError(a.quantized ? "--quantized given but the weights are float; run `quantize` first"
                                  : "weights are quantized; pass --quantized");
  }
  const LayerGraph graph = infer_graph(weights);
  if (cube.bands() != graph.in_channels) {
    throw DataError("cube has " + std::to_string(cube.bands()) + " bands, model expects " +
                    std::to_string(graph.in_channels));
  }

  ScoreMap scores;
  if (graph.model == ModelKind::mlp) {
    // per-pixel model: no tiling needed
    scores = a.quantized ? QuantNetwork(weights).forward(cube.values) : mlp_forward(weights, cube);
  } else {
    const PatchGrid grid = plan_grid(cube.height(), cube.width(), a.grid.patch, a.grid.rows, a.grid.cols);
    if (a.quantized) {
      const QuantNetwork net(weights);
      scores = segment(cube, grid, [&](const Tensor3<float>& p) { return net.forward(p); }, a.grid.workers);
    } else {
      const FloatNetwork net(graph, weights);
      scores = segment(cube, grid, [&](const Tensor3<float>& p) { return net.forward(p); }, a.grid.workers);
    }
    run.config["grid"] = a.grid.to_json();
  }
  const LabelMap labels = argmax_map(scores);
  const fs::path dir = a.out;
  ensure_dir(dir);
  save_labels(labels, dir / "labels.pgm");
  save_cube({scores, CubeStage::normalized}, dir / "probs.hsc");
  save_preview(labels, dir / "preview.ppm");
  run.config["model"] = graph.model == ModelKind::unet ? "unet" : "mlp";
  run.config["classes"] = graph.classes;
  run.config["quantized"] = a.quantized;
  run.config["workers"] = a.grid.workers;
  run.inputs = {{"cube", a.cube}, {"weights", a.weights}};
  run.outputs = {{"labels", "labels.pgm"}, {"probabilities", "probs.hsc"}, {"preview", "preview.ppm"}};
  run.write(dir);
  out << "segmented " << labels.height << "x" << labels.width << " into " << graph.classes << " classes\n";
}

// ---- quantize -------------------------------------------------------------

struct QuantizeArgs {
  std::string weights, calib_dir, out;
  GridOptions grid;
};

void cmd_quantize(QuantizeArgs a, const CLI::App& app, std::ostream& out) {
  Run run("quantize");
  a.grid.resolve(app);
  const WeightStore weights = load_weights(a.weights);
  if (is_quantized(weights)) throw WeightError("weights are already quantized");
  const LayerGraph graph = infer_graph(weights);
  std::vector<Tensor3<float>> patches;
  Json cubes = Json::array();
  for (const auto& path : files_with_extension(a.calib_dir, ".hsc")) {
    const HyperCube cube = load_cube(path);
    if (graph.model == ModelKind::mlp) {
      patches.push_back(cube.values);
    } else {
      for (auto& p : extract(cube, plan_grid(cube.height(), cube.width(), a.grid.patch, a.grid.rows, a.grid.cols))) {
        patches.push_back(std::move(p));
      }
    }
    cubes.push_back(path.filename().string());
  }
  const QuantizedModel q = quantize_model(graph, weights, patches);
  const fs::path dir = a.out;
  ensure_dir(dir);
  save_weights(q.weights, dir / "weights_int8.hswt");
  run.config["grid"] = a.grid.to_json();
  run.config["calibration_patches"] = patches.size();
  run.inputs = {{"weights", a.weights}, {"calibration_dir", a.calib_dir}, {"calibration_cubes", cubes}};
  run.outputs = {{"weights", "weights_int8.hswt"}};
  run.write(dir);
  out << "quantized " << q.params.tensors.size() << " tensors using " << patches.size() << " calibration inputs\n";
}

// ---- eval -----------------------------------------------------------------

struct EvalArgs {
  std::string pred, gt, scheme = "five_class", out, reference_labels;
  std::vector<double> reference_supports;
  bool gt_source = false;
};

std::vector<std::pair<fs::path, fs::path>> label_pairs(const fs::path& pred, const fs::path& gt) {
  if (!fs::is_directory(pred)) return {{pred, gt}};
  std::vector<std::pair<fs::path, fs::path>> pairs;
  for (const auto& p : files_with_extension(pred, ".pgm")) {
    const auto g = gt / p.filename();
    if (!fs::exists(g)) throw DataError("no ground truth for " + p.filename().string());
    pairs.emplace_back(p, g);
  }
  return pairs;
}

void cmd_eval(const EvalArgs& a, std::ostream& out) {
  Run run("eval");
  const ClassScheme scheme = ClassScheme::from_name(a.scheme);
  const int C = scheme.classes();
  auto load_gt = [&](const fs::path& p) {
    LabelMap l = load_labels(p);
    return a.gt_source ? remap_labels(l, scheme) : l;
  };
  ConfusionMatrix cm = ConfusionMatrix::Zero(C, C);
  Json pairs = Json::array();
  for (const auto& [p, g] : label_pairs(a.pred, a.gt)) {
    cm += confusion(load_labels(p), load_gt(g), C);
    pairs.push_back({p.string(), g.string()});
  }
  std::vector<double> reference;
  std::string reference_source;
  if (!a.reference_supports.empty()) {
    reference = a.reference_supports;
    reference_source = "flag";
  } else if (!a.reference_labels.empty()) {
    reference.assign(static_cast<std::size_t>(C), 0.0);
    const fs::path ref = a.reference_labels;
    const auto files = fs::is_directory(ref) ? files_with_extension(ref, ".pgm") : std::vector<fs::path>{ref};
    for (const auto& f : files) {
      const auto h = load_gt(f).histogram(C);
      for (int k = 0; k < C; ++k) reference[static_cast<std::size_t>(k)] += static_cast<double>(h[static_cast<std::size_t>(k)]);
    }
    reference_source = a.reference_labels;
  } else {
    for (Index k = 0; k < C; ++k) reference.push_back(static_cast<double>(cm.row(k).sum()));
    reference_source = "evaluated ground truth";
  }
  const MetricsReport report = metrics(cm, reference, scheme.class_names);
  const fs::path dir = a.out;
  ensure_dir(dir);
  detail::write_file_atomic(dir / "metrics.json", report.to_json() + "\n");
  detail::write_file_atomic(dir / "metrics.txt", report.to_table());
  run.config = {{"scheme", scheme.name()}, {"gt_source_ids", a.gt_source},
                {"reference_supports", reference}, {"reference_source", reference_source}};
  run.inputs = {{"pairs", pairs}};
  run.outputs = {{"json", "metrics.json"}, {"table", "metrics.txt"}};
  run.write(dir);
  out << report.to_table();
}

// ---- separability ---------------------------------------------------------

struct SeparabilityArgs {
  std::string cubes, labels, scheme = "five_class", out;
  bool labels_source = false;
};

void cmd_separability(const SeparabilityArgs& a, std::ostream& out) {
  Run run("separability");
  const ClassScheme scheme = ClassScheme::from_name(a.scheme);
  std::optional<ClassStatsAccumulator> acc;
  Json used = Json::array();
  for (const auto& cube_path : files_with_extension(a.cubes, ".hsc")) {
    const auto label_path = fs::path(a.labels) / (cube_path.stem().string() + ".pgm");
    if (!fs::exists(label_path)) throw DataError("no label map for " + cube_path.filename().string());
    const HyperCube cube = load_cube(cube_path);
    LabelMap labels = load_labels(label_path);
    if (a.labels_source) labels = remap_labels(labels, scheme);
    if (!acc) acc.emplace(scheme.classes(), cube.bands());
    acc->add(cube, labels);
    used.push_back({cube_path.string(), label_path.string()});
  }
  const ClassStats stats = acc->finish();
  const std::string csv = jm_csv(jm_matrix(stats), scheme.class_names);
  const fs::path dir = a.out;
  ensure_dir(dir);
  detail::write_file_atomic(dir / "jm.csv", csv);
  run.config = {{"scheme", scheme.name()}, {"labels_source_ids", a.labels_source}, {"class_pixels", stats.counts}};
  run.inputs = {{"pairs", used}};
  run.outputs = {{"jm", "jm.csv"}};
  run.write(dir);
  out << csv;
}

// ---- bench ----------------------------------------------------------------

struct BenchArgs {
  std::string workload, out;
  BenchOptions options;
};

void cmd_bench(const BenchArgs& a, std::ostream& out) {
  Run run("bench");
  run.seed = a.options.seed;
  const BenchReport report = run_bench(a.workload, a.options);
  const fs::path dir = a.out;
  ensure_dir(dir);
  detail::write_file_atomic(dir / "bench.json", report.to_json() + "\n");
  detail::write_file_atomic(dir / "bench.txt", report.to_text());
  run.config = {{"workload", a.workload},
                {"iterations", a.options.iterations},
                {"warmup", a.options.warmup},
                {"workers", a.options.workers}};
  run.outputs = {{"json", "bench.json"}, {"table", "bench.txt"}};
  run.write(dir);
  out << report.to_text();
}

// ---- init-weights ---------------------------------------------------------

struct InitArgs {
  std::string model = "unet", out;
  int classes = 3;
  Index bands = kMosaicBands;
  UNetConfig unet;
  std::uint64_t seed = 0;
};

void cmd_init(const InitArgs& a, std::ostream& out) {
  Run run("init-weights");
  run.seed = a.seed;
  LayerGraph graph;
  if (a.model == "unet") {
    UNetConfig cfg = a.unet;
    cfg.in_bands = a.bands;
    cfg.classes = a.classes;
    cfg.validate();
    graph = build_unet(cfg);
    run.config = {{"model", "unet"}, {"bands", a.bands}, {"classes", a.classes}, {"depth", cfg.depth},
                  {"filters", cfg.filters}};
  } else if (a.model == "mlp") {
    if (a.classes < 2 || a.bands < 1) throw ConfigError("mlp needs at least one band and two classes");
    graph = build_mlp(mlp_sizes(a.bands, a.classes));
    run.config = {{"model", "mlp"}, {"bands", a.bands}, {"classes", a.classes}};
  } else {
    throw ConfigError("unknown model '" + a.model + "'");
  }
  const WeightStore weights = init_weights(graph, a.seed);
  const fs::path dir = a.out;
  ensure_dir(dir);
  save_weights(weights, dir / "weights.hswt");
  run.outputs = {{"weights", "weights.hswt"}};
  run.write(dir);
  const auto params = param_count(graph);
  out << a.model << " with " << params.total() << " parameters\n";
}

int report(std::ostream& err, int code, const std::exception& e) {
  err << "error: " << e.what() << "\n";
  return code;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Hyperspectral driving-scene segmentation toolkit", "hsdrive"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  std::uint64_t seed = 0;
  try {
    seed = default_seed();
  } catch (const ConfigError& e) {
    return report(err, kExitUsage, e);
  }

  SynthArgs synth;
  synth.seed = seed;
  auto* s = app.add_subcommand("synth", "Generate a synthetic raw frame, labels and calibration");
  s->add_option("--spec", synth.spec, "Scene spec JSON")->check(CLI::ExistingFile);
  s->add_option("--seed", synth.seed, "Random seed (default: SPECDRIVE_SEED or 0)");
  s->add_option("--out", synth.out, "Output directory")->required();

  PreprocessArgs pre;
  auto* p = app.add_subcommand("preprocess", "Raw mosaic frame to normalised cube");
  p->add_option("--raw", pre.raw, "Raw 16-bit PGM")->required();
  p->add_option("--calib", pre.calib, "Calibration JSON")->required();
  p->add_option("--config", pre.config, "Preprocess config JSON")->check(CLI::ExistingFile);
  p->add_option("--median-kernel", pre.median_kernel, "Odd median kernel size");
  p->add_option("--normalization", pre.normalization, "per_band_minmax | per_pixel_max");
  p->add_option("--alignment", pre.alignment, "bilinear | off");
  p->add_option("--crop-offset", pre.crop_offset, "Crop origin ROW COL")->expected(2);
  p->add_option("--out", pre.out, "Output directory")->required();

  InferArgs inf;
  auto* i = app.add_subcommand("infer", "Segment a cube with a U-Net or MLP");
  i->add_option("--cube", inf.cube, "Input HSC cube")->required();
  i->add_option("--weights", inf.weights, "HSWT weights")->required();
  i->add_flag("--quantized", inf.quantized, "Run the integer network (weights from `quantize`)");
  inf.grid.add_to(i, true);
  i->add_option("--out", inf.out, "Output directory")->required();

  QuantizeArgs qa;
  auto* q = app.add_subcommand("quantize", "Post-training INT8 quantisation");
  q->add_option("--weights", qa.weights, "Float HSWT weights")->required();
  q->add_option("--calib-dir", qa.calib_dir, "Directory of HSC cubes for activation ranges")->required();
  qa.grid.add_to(q, false);
  q->add_option("--out", qa.out, "Output directory")->required();

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Confusion-matrix metrics of predicted labels");
  e->add_option("--pred", ev.pred, "Predicted label PGM or directory")->required();
  e->add_option("--gt", ev.gt, "Ground-truth label PGM or directory")->required();
  e->add_option("--scheme", ev.scheme, "three_class | five_class");
  e->add_flag("--gt-source", ev.gt_source, "Ground truth holds source class ids (1-10) to be remapped");
  auto* ref_s = e->add_option("--reference-supports", ev.reference_supports,
                              "Class frequencies for the weighted aggregate")->delimiter(',');
  e->add_option("--reference-labels", ev.reference_labels, "Label PGM or directory giving class frequencies")
      ->excludes(ref_s);
  e->add_option("--out", ev.out, "Output directory")->required();

  SeparabilityArgs sep;
  auto* j = app.add_subcommand("separability", "Pairwise Jeffries-Matusita distances");
  j->add_option("--cubes", sep.cubes, "Directory of HSC cubes")->required();
  j->add_option("--labels", sep.labels, "Directory of label PGMs named after the cubes")->required();
  j->add_option("--scheme", sep.scheme, "three_class | five_class");
  j->add_flag("--labels-source", sep.labels_source, "Labels hold source class ids (1-10) to be remapped");
  j->add_option("--out", sep.out, "Output directory")->required();

  BenchArgs bn;
  bn.options.seed = seed;
  bn.options.workers = default_workers();
  auto* b = app.add_subcommand("bench", "Latency and throughput");
  b->add_option("--workload", bn.workload, "preprocess | unet_float | unet_quant | mlp | end_to_end")->required();
  b->add_option("--iters", bn.options.iterations, "Measured iterations");
  b->add_option("--warmup", bn.options.warmup, "Unmeasured warmup iterations");
  b->add_option("--workers", bn.options.workers, "Patch-level worker threads");
  b->add_option("--seed", bn.options.seed, "Seed of the synthetic inputs");
  b->add_option("--out", bn.out, "Output directory")->required();

  InitArgs ini;
  ini.seed = seed;
  auto* w = app.add_subcommand("init-weights", "Random He-initialised weights");
  w->add_option("--model", ini.model, "unet | mlp");
  w->add_option("--classes", ini.classes, "Output classes");
  w->add_option("--bands", ini.bands, "Input bands");
  w->add_option("--depth", ini.unet.depth, "U-Net depth");
  w->add_option("--filters", ini.unet.filters, "U-Net base filters");
  w->add_option("--seed", ini.seed, "Random seed (default: SPECDRIVE_SEED or 0)");
  w->add_option("--out", ini.out, "Output directory")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::Success& ok) {
    app.exit(ok, out, err);
    return kExitOk;
  } catch (const CLI::ParseError& pe) {
    app.exit(pe, out, err);
    return kExitUsage;
  }

  try {
    if (*s) cmd_synth(synth, out);
    else if (*p) cmd_preprocess(pre, out);
    else if (*i) cmd_infer(inf, *i, out);
    else if (*q) cmd_quantize(qa, *q, out);
    else if (*e) cmd_eval(ev, out);
    else if (*j) cmd_separability(sep, out);
    else if (*b) cmd_bench(bn, out);
    else if (*w) cmd_init(ini, out);
  } catch (const ConfigError& ex) {
    return report(err, kExitUsage, ex);
  } catch (const NumericError& ex) {
    return report(err, kExitNumeric, ex);
  } catch (const Error& ex) {
    return report(err, kExitData, ex);
  } catch (const fs::filesystem_error& ex) {
    return report(err, kExitData, ex);
  } catch (const nlohmann::json::exception& ex) {
    return report(err, kExitUsage, ex);
  } catch (const std::bad_alloc& ex) {
    return report(err, kExitData, ex);
  }
  return kExitOk;
}

int run_cli(int argc, const char* const* argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace hsd
