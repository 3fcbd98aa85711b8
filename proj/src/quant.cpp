#include "hsdrive/quant.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace hsd {
namespace {

std::string fraction_key(std::string_view tensor) { return "qf." + std::string(tensor); }
std::string activation_key(std::string_view layer) { return "qf.act." + std::string(layer); }

bool is_weighted(const LayerDesc& l) { return l.kind == LayerKind::conv || l.kind == LayerKind::upconv; }

// Index of the last weighted layer: its accumulator is dequantized directly.
std::size_t last_weighted(const LayerGraph& g) {
  std::size_t last = g.layers.size();
  for (std::size_t i = 0; i < g.layers.size(); ++i) {
    if (is_weighted(g.layers[i])) last = i;
  }
  if (last == g.layers.size()) throw WeightError("graph has no weighted layers");
  return last;
}

// Walks the graph with activation fractions, reporting for each weighted
// layer the fraction of its input and for each concat the common fraction.
template <typename OnWeighted, typename OnConcat>
void walk_fractions(const LayerGraph& g, int input_f, const std::function<int(const std::string&)>& act_f,
                    OnWeighted&& on_weighted, OnConcat&& on_concat) {
  const auto last = last_weighted(g);
  int current = input_f;
  std::vector<int> skips;
  for (std::size_t i = 0; i < g.layers.size(); ++i) {
    const auto& l = g.layers[i];
    switch (l.kind) {
      case LayerKind::conv:
      case LayerKind::upconv: {
        on_weighted(i, current);
        if (i != last) current = act_f(l.name);
        break;
      }
      case LayerKind::maxpool: skips.push_back(current); break;
      case LayerKind::concat: {
        if (skips.empty()) throw DataError("concat without a matching encoder level");
        current = std::min(current, skips.back());
        skips.pop_back();
        on_concat(i, current);
        break;
      }
      default: break;
    }
  }
}

std::int8_t saturate8(std::int64_t v, QuantStats* stats) {
  if (stats) ++stats->requantized;
  if (v > 127 || v < -128) {
    if (stats) ++stats->saturated;
    return static_cast<std::int8_t>(std::clamp<std::int64_t>(v, -128, 127));
  }
  return static_cast<std::int8_t>(v);
}

}  // namespace

int QuantParams::tensor(std::string_view name) const {
  for (const auto& [k, f] : tensors) {
    if (k == name) return f;
  }
  throw ConfigError("no fraction bits for tensor '" + std::string(name) + "'");
}

int QuantParams::activation(std::string_view name) const {
  for (const auto& [k, f] : activations) {
    if (k == name) return f;
  }
  throw ConfigError("no fraction bits for activation '" + std::string(name) + "'");
}

void QuantParams::set_tensor(std::string name, int f) {
  for (auto& [k, v] : tensors) {
    if (k == name) {
      v = f;
      return;
    }
  }
  tensors.emplace_back(std::move(name), f);
}

void QuantParams::set_activation(std::string name, int f) {
  for (auto& [k, v] : activations) {
    if (k == name) {
      v = f;
      return;
    }
  }
  activations.emplace_back(std::move(name), f);
}

int fraction_bits(double maxabs) {
  if (!std::isfinite(maxabs)) throw NumericError("non-finite calibration range");
  if (maxabs <= 0.0) return 7;
  int f = static_cast<int>(std::floor(std::log2(127.0 / maxabs)));
  // guard log2 rounding at exact powers of two
  while (f > kMinFraction && std::ldexp(127.0, -f) < maxabs) --f;
  while (f < kMaxFraction && std::ldexp(127.0, -(f + 1)) >= maxabs) ++f;
  return std::clamp(f, kMinFraction, kMaxFraction);
}

std::int8_t quantize_value(double x, int f) {
  const double q = std::round(std::ldexp(x, f));
  return static_cast<std::int8_t>(std::clamp(q, -128.0, 127.0));
}

std::int32_t quantize_bias(double x, int f) {
  const double q = std::round(std::ldexp(x, f));
  return static_cast<std::int32_t>(std::clamp(q, static_cast<double>(std::numeric_limits<std::int32_t>::min()),
                                              static_cast<double>(std::numeric_limits<std::int32_t>::max())));
}

double dequantize(std::int64_t q, int f) { return std::ldexp(static_cast<double>(q), -f); }

std::int64_t rounding_shift(std::int64_t v, int s) {
  if (s <= 0) {
    if (v == 0) return 0;
    if (-s >= 40) return v > 0 ? std::numeric_limits<std::int32_t>::max() : std::numeric_limits<std::int32_t>::min();
    return v * (std::int64_t{1} << -s);
  }
  if (s >= 62) return 0;
  const std::int64_t half = std::int64_t{1} << (s - 1);
  return v >= 0 ? (v + half) >> s : -((-v + half) >> s);
}

QuantParams calibrate(const LayerGraph& graph, const WeightStore& weights,
                      const std::vector<Tensor3<float>>& calib_patches) {
  if (calib_patches.empty()) throw ConfigError("calibration needs at least one patch");
  const FoldedModel folded = graph.has_batchnorm() ? fold_batchnorm(graph, weights)
                                                   : FoldedModel{graph, weights};
  const auto& g = folded.graph;
  QuantParams params;

  for (const auto& l : g.layers) {
    if (!is_weighted(l)) continue;
    const auto& w = folded.weights.get(l.name + ".w").values<float>();
    double maxabs = 0.0;
    for (float v : w) maxabs = std::max(maxabs, std::abs(static_cast<double>(v)));
    params.set_tensor(l.name + ".w", fraction_bits(maxabs));
  }

  // activation ranges: a weighted layer's output is measured after the ReLU
  // that follows it, if any
  const auto last = last_weighted(g);
  std::vector<double> maxabs(g.layers.size(), 0.0);
  double input_max = 0.0;
  const FloatNetwork net(g, folded.weights);
  for (const auto& patch : calib_patches) {
    for (float v : patch.values()) input_max = std::max(input_max, std::abs(static_cast<double>(v)));
    net.run(patch, [&](std::size_t i, const Tensor3<float>& out) {
      const bool relu_follows = i + 1 < g.layers.size() && g.layers[i + 1].kind == LayerKind::relu;
      std::size_t owner = 0;
      if (is_weighted(g.layers[i]) && !relu_follows) owner = i;
      else if (g.layers[i].kind == LayerKind::relu && i > 0 && is_weighted(g.layers[i - 1])) owner = i - 1;
      else return;
      for (float v : out.values()) maxabs[owner] = std::max(maxabs[owner], std::abs(static_cast<double>(v)));
    });
  }
  params.set_activation("input", fraction_bits(input_max));
  for (std::size_t i = 0; i < g.layers.size(); ++i) {
    if (is_weighted(g.layers[i]) && i != last) params.set_activation(g.layers[i].name, fraction_bits(maxabs[i]));
  }

  walk_fractions(
      g, params.activation("input"), [&](const std::string& n) { return params.activation(n); },
      [&](std::size_t i, int in_f) {
        const auto& name = g.layers[i].name;
        params.set_tensor(name + ".b", params.tensor(name + ".w") + in_f);
      },
      [](std::size_t, int) {});
  return params;
}

WeightStore quantize_weights(const WeightStore& folded, const QuantParams& params) {
  WeightStore out;
  for (const auto& t : folded.tensors()) {
    if (t.name.ends_with(".gamma") || t.name.ends_with(".beta") || t.name.ends_with(".mean") ||
        t.name.ends_with(".var")) {
      throw ConfigError("quantize_weights expects BN-folded weights, found '" + t.name + "'");
    }
    const int f = params.tensor(t.name);
    const auto& values = t.values<float>();
    if (t.name.ends_with(".b")) {
      std::vector<std::int32_t> q(values.size());
      std::transform(values.begin(), values.end(), q.begin(), [f](float v) { return quantize_bias(v, f); });
      out.add(t.name, t.dims, std::move(q));
    } else {
      std::vector<std::int8_t> q(values.size());
      std::transform(values.begin(), values.end(), q.begin(), [f](float v) { return quantize_value(v, f); });
      out.add(t.name, t.dims, std::move(q));
    }
  }
  for (const auto& [k, v] : folded.metadata()) out.set_meta(k, v);
  for (const auto& [name, f] : params.tensors) out.set_meta(fraction_key(name), std::to_string(f));
  for (const auto& [name, f] : params.activations) out.set_meta(activation_key(name), std::to_string(f));
  return out;
}

QuantizedModel quantize_model(const LayerGraph& graph, const WeightStore& weights,
                              const std::vector<Tensor3<float>>& calib_patches) {
  QuantizedModel m;
  m.folded = graph.has_batchnorm() ? fold_batchnorm(graph, weights) : FoldedModel{graph, weights};
  m.params = calibrate(m.folded.graph, m.folded.weights, calib_patches);
  m.weights = quantize_weights(m.folded.weights, m.params);
  return m;
}

QuantNetwork::QuantNetwork(const WeightStore& qweights) : QuantNetwork(infer_graph(qweights), qweights) {}

QuantNetwork::QuantNetwork(LayerGraph graph, const WeightStore& qweights) : graph_(std::move(graph)) {
  std::erase_if(graph_.layers, [](const LayerDesc& l) { return l.kind == LayerKind::batchnorm; });
  auto meta_int = [&](const std::string& key) {
    const auto v = qweights.meta(key);
    if (!v) throw WeightError("quantized weights lack metadata '" + key + "'");
    try {
      return std::stoi(*v);
    } catch (const std::exception&) {
      throw WeightError("metadata '" + key + "' is not an integer");
    }
  };
  input_f_ = meta_int(activation_key("input"));
  bound_.resize(graph_.layers.size());
  concat_f_.assign(graph_.layers.size(), 0);
  const auto last = last_weighted(graph_);
  const auto expected = expected_tensors(graph_);
  auto dims_of = [&](const std::string& name) {
    for (const auto& [n, d] : expected) {
      if (n == name) return d;
    }
    throw WeightError("no tensor layout for '" + name + "'");
  };
  walk_fractions(
      graph_, input_f_, [&](const std::string& n) { return meta_int(activation_key(n)); },
      [&](std::size_t i, int in_f) {
        const auto& l = graph_.layers[i];
        auto& b = bound_[i];
        const auto& w = qweights.get(l.name + ".w", dims_of(l.name + ".w")).values<std::int8_t>();
        const auto& bias = qweights.get(l.name + ".b", dims_of(l.name + ".b")).values<std::int32_t>();
        const std::span<const std::int8_t> ws(w.data(), w.size());
        b.kernel = l.kind == LayerKind::conv
                       ? ConvKernel<std::int8_t>::from_oihw(l.out_channels, l.in_channels, l.kernel, l.kernel, ws)
                       : ConvKernel<std::int8_t>::from_iohw(l.in_channels, l.out_channels, l.kernel, l.kernel, ws);
        b.bias = bias;
        b.acc_f = meta_int(fraction_key(l.name + ".w")) + in_f;
        if (meta_int(fraction_key(l.name + ".b")) != b.acc_f) {
          throw WeightError("bias fraction of '" + l.name + "' does not match weight + input fraction");
        }
        b.out_f = i == last ? b.acc_f : meta_int(activation_key(l.name));
      },
      [&](std::size_t i, int f) { concat_f_[i] = f; });
}

Tensor3<std::int8_t> QuantNetwork::quantize_input(const Tensor3<float>& input) const {
  Tensor3<std::int8_t> q(input.height(), input.width(), input.channels());
  auto dst = q.values();
  const auto src = input.values();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = quantize_value(src[i], input_f_);
  return q;
}

Tensor3<float> QuantNetwork::logits(const Tensor3<float>& input, QuantStats* stats) const {
  if (input.channels() != graph_.in_channels) throw DataError("quantized network input channel mismatch");
  const Index stride = Index{1} << graph_.depth;
  if (input.height() % stride != 0 || input.width() % stride != 0) {
    throw DataError("input spatial dims must be divisible by " + std::to_string(stride));
  }
  const auto last = last_weighted(graph_);
  Tensor3<std::int8_t> x = quantize_input(input);
  int fx = input_f_;
  std::vector<std::pair<Tensor3<std::int8_t>, int>> skips;

  auto requantize = [&](const Tensor3<std::int32_t>& acc, int shift) {
    Tensor3<std::int8_t> out(acc.height(), acc.width(), acc.channels());
    auto dst = out.values();
    const auto src = acc.values();
    for (std::size_t n = 0; n < src.size(); ++n) dst[n] = saturate8(rounding_shift(src[n], shift), stats);
    return out;
  };

  for (std::size_t i = 0; i < graph_.layers.size(); ++i) {
    const auto& l = graph_.layers[i];
    const auto& b = bound_[i];
    switch (l.kind) {
      case LayerKind::conv:
      case LayerKind::upconv: {
        const std::span<const std::int32_t> bias(b.bias.data(), b.bias.size());
        const auto acc = l.kind == LayerKind::conv
                             ? conv2d_accumulate<std::int32_t>(x, b.kernel, bias, l.kernel / 2)
                             : upconv2x2_accumulate<std::int32_t>(x, b.kernel, bias);
        if (i == last) {
          Tensor3<float> out(acc.height(), acc.width(), acc.channels());
          auto dst = out.values();
          const auto src = acc.values();
          for (std::size_t n = 0; n < src.size(); ++n) dst[n] = static_cast<float>(dequantize(src[n], b.acc_f));
          return out;
        }
        x = requantize(acc, b.acc_f - b.out_f);
        fx = b.out_f;
        break;
      }
      case LayerKind::relu:
        relu_inplace(x);
        break;
      case LayerKind::maxpool:
        skips.emplace_back(x, fx);
        x = maxpool2x2(x);
        break;
      case LayerKind::concat: {
        auto [skip, fs] = std::move(skips.back());
        skips.pop_back();
        const int target = concat_f_[i];
        auto align = [&](Tensor3<std::int8_t>& t, int f) {
          if (f == target) return;
          for (auto& v : t.values()) v = saturate8(rounding_shift(v, f - target), stats);
        };
        align(skip, fs);
        align(x, fx);
        x = concat_channels(skip, x);
        fx = target;
        break;
      }
      case LayerKind::softmax:
      case LayerKind::batchnorm:
        break;
    }
  }
  throw WeightError("graph ended without a final weighted layer");
}

ScoreMap QuantNetwork::forward(const Tensor3<float>& input, QuantStats* stats) const {
  return softmax(logits(input, stats));
}

ScoreMap forward_quantized(const LayerGraph& graph, const WeightStore& qweights, const Tensor3<float>& patch) {
  return QuantNetwork(graph, qweights).forward(patch);
}

double agreement(const LabelMap& a, const LabelMap& b) {
  if (a.height != b.height || a.width != b.width) throw DataError("agreement: label maps differ in size");
  std::int64_t counted = 0;
  std::int64_t equal = 0;
  for (std::size_t i = 0; i < a.labels.size(); ++i) {
    if (a.labels[i] == kIgnoreLabel || b.labels[i] == kIgnoreLabel) continue;
    ++counted;
    equal += (a.labels[i] == b.labels[i]);
  }
  return counted == 0 ? 1.0 : static_cast<double>(equal) / static_cast<double>(counted);
}

}  // namespace hsd
