#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hsdrive/fcn.hpp"

namespace hsd {

/// Power-of-two fixed-point formats: a value x is stored as
/// round(x * 2^f) in a signed integer, zero point 0.
struct QuantParams {
  std::vector<std::pair<std::string, int>> tensors;      // "<layer>.w" / "<layer>.b" -> f
  std::vector<std::pair<std::string, int>> activations;  // "input" / "<layer>" -> f

  int tensor(std::string_view name) const;
  int activation(std::string_view name) const;
  void set_tensor(std::string name, int f);
  void set_activation(std::string name, int f);
};

inline constexpr int kMinFraction = -32;
inline constexpr int kMaxFraction = 32;

/// Largest f with 127 * 2^-f >= maxabs; 7 for an all-zero tensor.
int fraction_bits(double maxabs);

std::int8_t quantize_value(double x, int f);
std::int32_t quantize_bias(double x, int f);
double dequantize(std::int64_t q, int f);

/// Arithmetic right shift by s with round-half-away-from-zero (s <= 0 shifts left).
std::int64_t rounding_shift(std::int64_t v, int s);

/// Measures weight ranges exactly and activation ranges over the
/// calibration patches (BN is folded first when present).
QuantParams calibrate(const LayerGraph& graph, const WeightStore& weights,
                      const std::vector<Tensor3<float>>& calib_patches);

/// i8 weights and i32 biases (at weight f + input activation f) with every
/// fraction recorded as `qf.<tensor>` / `qf.act.<layer>` metadata. Expects
/// BN-free (folded) float weights.
WeightStore quantize_weights(const WeightStore& folded, const QuantParams& params);

struct QuantizedModel {
  FoldedModel folded;
  QuantParams params;
  WeightStore weights;
};

/// fold -> calibrate -> quantize.
QuantizedModel quantize_model(const LayerGraph& graph, const WeightStore& weights,
                              const std::vector<Tensor3<float>>& calib_patches);

struct QuantStats {
  std::int64_t saturated = 0;
  std::int64_t requantized = 0;
  double saturation_rate() const {
    return requantized == 0 ? 0.0 : static_cast<double>(saturated) / static_cast<double>(requantized);
  }
};

/// Integer-only inference over a quantized store.
class QuantNetwork {
 public:
  /// `graph` may still contain BN layers; they are treated as folded.
  QuantNetwork(LayerGraph graph, const WeightStore& qweights);
  explicit QuantNetwork(const WeightStore& qweights);

  const LayerGraph& graph() const { return graph_; }
  int input_fraction() const { return input_f_; }

  Tensor3<std::int8_t> quantize_input(const Tensor3<float>& input) const;
  /// Dequantized logits of the last layer.
  Tensor3<float> logits(const Tensor3<float>& input, QuantStats* stats = nullptr) const;
  ScoreMap forward(const Tensor3<float>& input, QuantStats* stats = nullptr) const;

 private:
  struct Bound {
    ConvKernel<std::int8_t> kernel;
    std::vector<std::int32_t> bias;
    int acc_f = 0;  // fraction of the accumulator (= bias fraction)
    int out_f = 0;  // activation fraction after requantization
  };
  LayerGraph graph_;
  std::vector<Bound> bound_;
  std::vector<int> concat_f_;  // per layer, target fraction of concat inputs
  int input_f_ = 0;
};

ScoreMap forward_quantized(const LayerGraph& graph, const WeightStore& qweights, const Tensor3<float>& patch);

/// Fraction of pixels (ignore excluded in either map) with equal labels.
double agreement(const LabelMap& a, const LabelMap& b);

}  // namespace hsd
