#include "hsdrive/fcn.hpp"

#include <cmath>

#include "hsdrive/random.hpp"

namespace hsd {
namespace {

using Dims = std::vector<std::uint32_t>;

Dims d(std::initializer_list<Index> v) {
  Dims out;
  for (auto x : v) out.push_back(static_cast<std::uint32_t>(x));
  return out;
}

void add_block(std::vector<LayerDesc>& layers, const std::string& prefix, Index in, Index out) {
  layers.push_back({LayerKind::conv, prefix + ".conv1", in, out, 3});
  layers.push_back({LayerKind::batchnorm, prefix + ".bn1", out, out, 0});
  layers.push_back({LayerKind::relu, "", out, out, 0});
  layers.push_back({LayerKind::conv, prefix + ".conv2", out, out, 3});
  layers.push_back({LayerKind::batchnorm, prefix + ".bn2", out, out, 0});
  layers.push_back({LayerKind::relu, "", out, out, 0});
}

Dims weight_dims(const LayerGraph& g, const LayerDesc& l) {
  if (l.kind == LayerKind::upconv) return d({l.in_channels, l.out_channels, l.kernel, l.kernel});
  if (g.model == ModelKind::mlp) return d({l.out_channels, l.in_channels});
  return d({l.out_channels, l.in_channels, l.kernel, l.kernel});
}

template <typename T>
std::span<const T> span_of(const std::vector<T>& v) {
  return {v.data(), v.size()};
}

}  // namespace

void UNetConfig::validate() const {
  if (in_bands < 1 || classes < 1) throw ConfigError("U-Net needs at least one input band and one class");
  if (depth < 1) throw ConfigError("U-Net encoder depth must be >= 1");
  if (filters < 1) throw ConfigError("U-Net initial filters must be >= 1");
  if (patch < 1 || patch % (Index{1} << depth) != 0) {
    throw ConfigError("patch side " + std::to_string(patch) + " is not divisible by 2^" + std::to_string(depth));
  }
  if (!(bn_epsilon > 0.0)) throw ConfigError("bn_epsilon must be positive");
}

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::conv: return "conv";
    case LayerKind::batchnorm: return "batchnorm";
    case LayerKind::relu: return "relu";
    case LayerKind::maxpool: return "maxpool";
    case LayerKind::upconv: return "upconv";
    case LayerKind::concat: return "concat";
    case LayerKind::softmax: return "softmax";
  }
  return "?";
}

bool LayerGraph::has_batchnorm() const { return count(LayerKind::batchnorm) > 0; }

Index LayerGraph::weighted_layers() const { return count(LayerKind::conv) + count(LayerKind::upconv); }

Index LayerGraph::count(LayerKind kind) const {
  Index n = 0;
  for (const auto& l : layers) n += (l.kind == kind);
  return n;
}

LayerGraph build_unet(const UNetConfig& config) {
  config.validate();
  LayerGraph g;
  g.model = ModelKind::unet;
  g.in_channels = config.in_bands;
  g.classes = config.classes;
  g.depth = config.depth;
  g.bn_epsilon = config.bn_epsilon;

  Index channels = config.in_bands;
  for (Index level = 1; level <= config.depth; ++level) {
    const Index width = config.filters << (level - 1);
    add_block(g.layers, "enc" + std::to_string(level), channels, width);
    g.layers.push_back({LayerKind::maxpool, "enc" + std::to_string(level) + ".pool", width, width, 2});
    channels = width;
  }
  const Index bridge = config.filters << config.depth;
  add_block(g.layers, "bridge", channels, bridge);
  channels = bridge;
  for (Index level = config.depth; level >= 1; --level) {
    const Index width = config.filters << (level - 1);
    const auto prefix = "dec" + std::to_string(level);
    g.layers.push_back({LayerKind::upconv, prefix + ".up", channels, width, 2});
    g.layers.push_back({LayerKind::concat, prefix + ".concat", width, 2 * width, 0});
    add_block(g.layers, prefix, 2 * width, width);
    channels = width;
  }
  g.layers.push_back({LayerKind::conv, "final", channels, config.classes, 1});
  g.layers.push_back({LayerKind::softmax, "", config.classes, config.classes, 0});
  return g;
}

LayerGraph build_mlp(const std::vector<Index>& sizes) {
  if (sizes.size() < 3) throw ConfigError("MLP needs input, at least one hidden layer and an output layer");
  for (auto s : sizes) {
    if (s < 1) throw ConfigError("MLP layer sizes must be positive");
  }
  LayerGraph g;
  g.model = ModelKind::mlp;
  g.in_channels = sizes.front();
  g.classes = sizes.back();
  for (std::size_t i = 1; i < sizes.size(); ++i) {
    g.layers.push_back({LayerKind::conv, "fc" + std::to_string(i), sizes[i - 1], sizes[i], 1});
    if (i + 1 < sizes.size()) g.layers.push_back({LayerKind::relu, "", sizes[i], sizes[i], 0});
  }
  g.layers.push_back({LayerKind::softmax, "", g.classes, g.classes, 0});
  return g;
}

ParamCount param_count(const LayerGraph& graph) {
  ParamCount p;
  for (const auto& l : graph.layers) {
    switch (l.kind) {
      case LayerKind::conv:
      case LayerKind::upconv:
        p.trainable += l.kernel * l.kernel * l.in_channels * l.out_channels + l.out_channels;
        break;
      case LayerKind::batchnorm:
        p.trainable += 2 * l.out_channels;      // gamma, beta
        p.non_trainable += 2 * l.out_channels;  // running mean, variance
        break;
      default: break;
    }
  }
  return p;
}

std::int64_t mac_count(const LayerGraph& graph, Index height, Index width) {
  std::int64_t macs = 0;
  Index h = height;
  Index w = width;
  for (const auto& l : graph.layers) {
    switch (l.kind) {
      case LayerKind::conv:
        macs += l.kernel * l.kernel * l.in_channels * l.out_channels * h * w;
        break;
      case LayerKind::upconv:
        h *= 2;
        w *= 2;
        macs += l.kernel * l.kernel * l.in_channels * l.out_channels * h * w;
        break;
      case LayerKind::maxpool:
        h /= 2;
        w /= 2;
        break;
      default: break;
    }
  }
  return macs;
}

std::vector<std::pair<std::string, std::vector<std::uint32_t>>> expected_tensors(const LayerGraph& graph) {
  std::vector<std::pair<std::string, Dims>> out;
  for (const auto& l : graph.layers) {
    if (l.kind == LayerKind::conv || l.kind == LayerKind::upconv) {
      out.emplace_back(l.name + ".w", weight_dims(graph, l));
      out.emplace_back(l.name + ".b", d({l.out_channels}));
    } else if (l.kind == LayerKind::batchnorm) {
      for (const char* p : {".gamma", ".beta", ".mean", ".var"}) out.emplace_back(l.name + p, d({l.out_channels}));
    }
  }
  return out;
}

WeightStore init_weights(const LayerGraph& graph, std::uint64_t seed) {
  Rng rng(seed);
  WeightStore store;
  for (const auto& l : graph.layers) {
    if (l.kind == LayerKind::conv || l.kind == LayerKind::upconv) {
      const auto dims = weight_dims(graph, l);
      std::size_t n = 1;
      for (auto x : dims) n *= x;
      const double fan_in = static_cast<double>(l.in_channels * l.kernel * l.kernel);
      const double bound = std::sqrt(6.0 / fan_in);
      std::vector<float> w(n);
      for (auto& v : w) v = static_cast<float>(rng.uniform(-bound, bound));
      std::vector<float> b(static_cast<std::size_t>(l.out_channels));
      for (auto& v : b) v = static_cast<float>(rng.uniform(-0.05, 0.05));
      store.add(l.name + ".w", dims, std::move(w));
      store.add(l.name + ".b", d({l.out_channels}), std::move(b));
    } else if (l.kind == LayerKind::batchnorm) {
      const auto C = static_cast<std::size_t>(l.out_channels);
      std::vector<float> gamma(C), beta(C), mean(C), var(C);
      for (std::size_t i = 0; i < C; ++i) {
        gamma[i] = static_cast<float>(rng.uniform(0.9, 1.1));
        beta[i] = static_cast<float>(rng.uniform(-0.05, 0.05));
        mean[i] = static_cast<float>(rng.uniform(-0.05, 0.05));
        var[i] = static_cast<float>(rng.uniform(0.8, 1.2));
      }
      store.add(l.name + ".gamma", d({l.out_channels}), std::move(gamma));
      store.add(l.name + ".beta", d({l.out_channels}), std::move(beta));
      store.add(l.name + ".mean", d({l.out_channels}), std::move(mean));
      store.add(l.name + ".var", d({l.out_channels}), std::move(var));
    }
  }
  store.set_meta("model", graph.model == ModelKind::unet ? "unet" : "mlp");
  store.set_meta("activation", "relu");
  if (graph.has_batchnorm()) store.set_meta("bn_epsilon", std::to_string(graph.bn_epsilon));
  return store;
}

LayerGraph infer_graph(const WeightStore& weights) {
  if (weights.contains("fc1.w")) {
    std::vector<Index> sizes;
    for (int i = 1;; ++i) {
      const auto* t = weights.find("fc" + std::to_string(i) + ".w");
      if (t == nullptr) break;
      if (t->dims.size() != 2) throw WeightError(t->name + " must be 2-D");
      if (i == 1) sizes.push_back(t->dims[1]);
      sizes.push_back(t->dims[0]);
    }
    if (auto act = weights.meta("activation"); act && *act != "relu") {
      throw WeightError("unsupported MLP activation '" + *act + "'");
    }
    return build_mlp(sizes);
  }
  const auto& first = weights.get("enc1.conv1.w");
  const auto& last = weights.get("final.w");
  if (first.dims.size() != 4 || last.dims.empty()) throw WeightError("unexpected U-Net tensor rank");
  UNetConfig cfg;
  cfg.in_bands = first.dims[1];
  cfg.filters = first.dims[0];
  cfg.classes = last.dims[0];
  cfg.depth = 0;
  while (weights.contains("enc" + std::to_string(cfg.depth + 1) + ".conv1.w")) ++cfg.depth;
  cfg.patch = Index{1} << cfg.depth;
  if (auto eps = weights.meta("bn_epsilon")) cfg.bn_epsilon = std::stod(*eps);
  auto graph = build_unet(cfg);
  if (!weights.contains("enc1.bn1.gamma")) {
    std::erase_if(graph.layers, [](const LayerDesc& l) { return l.kind == LayerKind::batchnorm; });
  }
  return graph;
}

FoldedModel fold_batchnorm(const LayerGraph& graph, const WeightStore& weights) {
  FoldedModel out;
  out.graph = graph;
  std::erase_if(out.graph.layers, [](const LayerDesc& l) { return l.kind == LayerKind::batchnorm; });
  for (std::size_t i = 0; i < graph.layers.size(); ++i) {
    const auto& l = graph.layers[i];
    if (l.kind != LayerKind::conv && l.kind != LayerKind::upconv) continue;
    const auto& wt = weights.get(l.name + ".w", weight_dims(graph, l));
    const auto& bt = weights.get(l.name + ".b", d({l.out_channels}));
    auto w = wt.values<float>();
    auto b = bt.values<float>();
    const bool bn_follows = i + 1 < graph.layers.size() && graph.layers[i + 1].kind == LayerKind::batchnorm;
    if (bn_follows) {
      if (l.kind != LayerKind::conv) throw WeightError("batchnorm after an up-convolution is not supported");
      const auto& bn = graph.layers[i + 1].name;
      const auto C = d({l.out_channels});
      const auto& gamma = weights.get(bn + ".gamma", C).values<float>();
      const auto& beta = weights.get(bn + ".beta", C).values<float>();
      const auto& mean = weights.get(bn + ".mean", C).values<float>();
      const auto& var = weights.get(bn + ".var", C).values<float>();
      const std::size_t per_out = w.size() / static_cast<std::size_t>(l.out_channels);
      for (std::size_t o = 0; o < static_cast<std::size_t>(l.out_channels); ++o) {
        const double scale = gamma[o] / std::sqrt(static_cast<double>(var[o]) + graph.bn_epsilon);
        for (std::size_t k = 0; k < per_out; ++k) w[o * per_out + k] = static_cast<float>(w[o * per_out + k] * scale);
        b[o] = static_cast<float>((b[o] - static_cast<double>(mean[o])) * scale + beta[o]);
      }
    }
    out.weights.add(l.name + ".w", wt.dims, std::move(w));
    out.weights.add(l.name + ".b", bt.dims, std::move(b));
  }
  for (const auto& [k, v] : weights.metadata()) {
    if (k != "bn_epsilon") out.weights.set_meta(k, v);
  }
  return out;
}

FloatNetwork::FloatNetwork(LayerGraph graph, const WeightStore& weights) : graph_(std::move(graph)) {
  bound_.resize(graph_.layers.size());
  for (std::size_t i = 0; i < graph_.layers.size(); ++i) {
    const auto& l = graph_.layers[i];
    auto& b = bound_[i];
    if (l.kind == LayerKind::conv || l.kind == LayerKind::upconv) {
      const auto& w = weights.get(l.name + ".w", weight_dims(graph_, l)).values<float>();
      const auto& bias = weights.get(l.name + ".b", d({l.out_channels})).values<float>();
      b.kernel = l.kind == LayerKind::conv
                     ? ConvKernel<float>::from_oihw(l.out_channels, l.in_channels, l.kernel, l.kernel, span_of(w))
                     : ConvKernel<float>::from_iohw(l.in_channels, l.out_channels, l.kernel, l.kernel, span_of(w));
      b.bias.assign(bias.begin(), bias.end());
    } else if (l.kind == LayerKind::batchnorm) {
      const auto C = d({l.out_channels});
      const auto& gamma = weights.get(l.name + ".gamma", C).values<float>();
      const auto& beta = weights.get(l.name + ".beta", C).values<float>();
      const auto& mean = weights.get(l.name + ".mean", C).values<float>();
      const auto& var = weights.get(l.name + ".var", C).values<float>();
      b.gamma.assign(gamma.begin(), gamma.end());
      b.beta.assign(beta.begin(), beta.end());
      b.mean.assign(mean.begin(), mean.end());
      for (float v : var) b.stddev.push_back(std::sqrt(static_cast<double>(v) + graph_.bn_epsilon));
    }
  }
}

Tensor3<float> FloatNetwork::run(const Tensor3<float>& input, const Observer& observe) const {
  if (input.channels() != graph_.in_channels) {
    throw DataError("network expects " + std::to_string(graph_.in_channels) + " input channels, got " +
                    std::to_string(input.channels()));
  }
  const Index stride = Index{1} << graph_.depth;
  if (input.height() % stride != 0 || input.width() % stride != 0) {
    throw DataError("input spatial dims must be divisible by " + std::to_string(stride));
  }
  Tensor3<float> x = input;
  std::vector<Tensor3<float>> skips;
  for (std::size_t i = 0; i < graph_.layers.size(); ++i) {
    const auto& l = graph_.layers[i];
    const auto& b = bound_[i];
    switch (l.kind) {
      case LayerKind::conv:
        x = conv2d_accumulate<double>(x, b.kernel, span_of(b.bias), l.kernel / 2).cast<float>();
        break;
      case LayerKind::upconv:
        x = upconv2x2_accumulate<double>(x, b.kernel, span_of(b.bias)).cast<float>();
        break;
      case LayerKind::batchnorm: {
        const auto C = static_cast<std::size_t>(x.channels());
        auto v = x.values();
        for (std::size_t n = 0; n < v.size(); ++n) {
          const auto k = n % C;
          v[n] = static_cast<float>(b.gamma[k] * (v[n] - b.mean[k]) / b.stddev[k] + b.beta[k]);
        }
        break;
      }
      case LayerKind::relu:
        relu_inplace(x);
        break;
      case LayerKind::maxpool:
        skips.push_back(x);
        x = maxpool2x2(x);
        break;
      case LayerKind::concat:
        if (skips.empty()) throw DataError("concat without a matching encoder level");
        x = concat_channels(skips.back(), x);
        skips.pop_back();
        break;
      case LayerKind::softmax:
        if (i + 1 != graph_.layers.size()) throw DataError("softmax must be the last layer");
        return x;
    }
    if (observe) observe(i, x);
  }
  return x;
}

ScoreMap FloatNetwork::forward(const Tensor3<float>& input) const {
  auto logits = run(input);
  if (!graph_.layers.empty() && graph_.layers.back().kind == LayerKind::softmax) return softmax(logits);
  return logits;
}

ScoreMap forward(const LayerGraph& graph, const WeightStore& weights, const Tensor3<float>& input) {
  return FloatNetwork(graph, weights).forward(input);
}

}  // namespace hsd
