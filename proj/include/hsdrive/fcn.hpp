#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "hsdrive/nn.hpp"
#include "hsdrive/patchwork.hpp"
#include "hsdrive/weights.hpp"

namespace hsd {

struct UNetConfig {
  Index in_bands = 25;
  Index classes = 3;
  Index depth = 2;
  Index filters = 8;
  Index patch = 128;
  double bn_epsilon = 1e-5;

  void validate() const;
};

enum class LayerKind { conv, batchnorm, relu, maxpool, upconv, concat, softmax };

std::string_view to_string(LayerKind kind);

/// One node of a sequential graph. Skip connections are implicit: every
/// maxpool pushes its input onto a stack and every concat pops it, placing
/// the saved encoder features before the current ones.
struct LayerDesc {
  LayerKind kind = LayerKind::relu;
  std::string name;  // weight prefix for conv/upconv/batchnorm
  Index in_channels = 0;
  Index out_channels = 0;
  Index kernel = 0;  // conv/upconv only

  friend bool operator==(const LayerDesc&, const LayerDesc&) = default;
};

enum class ModelKind { unet, mlp };

struct LayerGraph {
  ModelKind model = ModelKind::unet;
  std::vector<LayerDesc> layers;
  Index in_channels = 0;
  Index classes = 0;
  Index depth = 0;  // number of 2x down-samplings
  double bn_epsilon = 1e-5;

  bool has_batchnorm() const;
  /// Number of conv + upconv layers.
  Index weighted_layers() const;
  Index count(LayerKind kind) const;
};

/// conv3x3+BN+ReLU twice per level, 2x2 max-pooling down, 2x2 stride-2
/// transposed convolution up, skip concatenation, final 1x1 conv + softmax.
LayerGraph build_unet(const UNetConfig& config);

/// Fully connected spectral classifier expressed as 1x1 convolutions
/// (tensors fc1..fcN, hidden ReLU, softmax output).
LayerGraph build_mlp(const std::vector<Index>& sizes);

struct ParamCount {
  std::int64_t trainable = 0;
  std::int64_t non_trainable = 0;
  std::int64_t total() const { return trainable + non_trainable; }
};

ParamCount param_count(const LayerGraph& graph);

/// Multiply-accumulates of convolution layers (k*k*Cin*Cout per output pixel).
std::int64_t mac_count(const LayerGraph& graph, Index height, Index width);

/// Expected dims of the tensors named `<layer>.w` etc. for a graph.
std::vector<std::pair<std::string, std::vector<std::uint32_t>>> expected_tensors(const LayerGraph& graph);

/// Seeded He-uniform initialisation with plausible BN statistics.
WeightStore init_weights(const LayerGraph& graph, std::uint64_t seed);

/// Rebuilds the graph a weight store was written for (U-Net or MLP, with or
/// without BN tensors).
LayerGraph infer_graph(const WeightStore& weights);

/// Folds every BN layer into the preceding convolution:
/// w' = w * g / sqrt(v + eps), b' = (b - m) * g / sqrt(v + eps) + beta.
struct FoldedModel {
  LayerGraph graph;
  WeightStore weights;
};
FoldedModel fold_batchnorm(const LayerGraph& graph, const WeightStore& weights);

/// Graph bound to float weights, converted once for repeated inference.
class FloatNetwork {
 public:
  FloatNetwork(LayerGraph graph, const WeightStore& weights);

  const LayerGraph& graph() const { return graph_; }

  /// H x W x C probabilities.
  ScoreMap forward(const Tensor3<float>& input) const;

  using Observer = std::function<void(std::size_t layer, const Tensor3<float>& output)>;

  /// Runs every layer except the trailing softmax and returns the logits.
  /// `observe` (optional) sees the output of each layer.
  Tensor3<float> run(const Tensor3<float>& input, const Observer& observe = {}) const;

 private:
  struct Bound {
    ConvKernel<float> kernel;
    std::vector<double> bias;
    std::vector<double> gamma, beta, mean, stddev;  // batchnorm
  };
  LayerGraph graph_;
  std::vector<Bound> bound_;
};

ScoreMap forward(const LayerGraph& graph, const WeightStore& weights, const Tensor3<float>& input);

}  // namespace hsd
