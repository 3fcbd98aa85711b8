#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "hsdrive/tensor.hpp"

namespace hsd {

/// Convolution kernel stored output-major with the input channel fastest
/// (O x KH x KW x I) so the inner product runs over contiguous memory.
template <typename Scalar>
struct ConvKernel {
  Index out = 0;
  Index in = 0;
  Index kh = 0;
  Index kw = 0;
  std::vector<Scalar> data;

  ConvKernel() = default;
  ConvKernel(Index out_channels, Index in_channels, Index height, Index width)
      : out(out_channels), in(in_channels), kh(height), kw(width),
        data(static_cast<std::size_t>(out_channels * in_channels * height * width), Scalar(0)) {}

  Scalar& operator()(Index o, Index i, Index y, Index x) {
    return data[static_cast<std::size_t>(((o * kh + y) * kw + x) * in + i)];
  }
  const Scalar& operator()(Index o, Index i, Index y, Index x) const {
    return data[static_cast<std::size_t>(((o * kh + y) * kw + x) * in + i)];
  }

  /// From the file layout [out, in, kh, kw].
  template <typename Source>
  static ConvKernel from_oihw(Index o_n, Index i_n, Index h, Index w, std::span<const Source> src) {
    if (static_cast<Index>(src.size()) != o_n * i_n * h * w) throw DataError("kernel payload length mismatch");
    ConvKernel k(o_n, i_n, h, w);
    std::size_t n = 0;
    for (Index o = 0; o < o_n; ++o)
      for (Index i = 0; i < i_n; ++i)
        for (Index y = 0; y < h; ++y)
          for (Index x = 0; x < w; ++x) k(o, i, y, x) = static_cast<Scalar>(src[n++]);
    return k;
  }

  /// From the transposed-convolution file layout [in, out, kh, kw].
  template <typename Source>
  static ConvKernel from_iohw(Index i_n, Index o_n, Index h, Index w, std::span<const Source> src) {
    if (static_cast<Index>(src.size()) != o_n * i_n * h * w) throw DataError("kernel payload length mismatch");
    ConvKernel k(o_n, i_n, h, w);
    std::size_t n = 0;
    for (Index i = 0; i < i_n; ++i)
      for (Index o = 0; o < o_n; ++o)
        for (Index y = 0; y < h; ++y)
          for (Index x = 0; x < w; ++x) k(o, i, y, x) = static_cast<Scalar>(src[n++]);
    return k;
  }
};

/// Cross-correlation with zero padding, accumulated in Acc in the order
/// (ky, kx, input channel) starting from the bias.
template <typename Acc, typename Scalar>
Tensor3<Acc> conv2d_accumulate(const Tensor3<Scalar>& input, const ConvKernel<Scalar>& kernel,
                               std::span<const Acc> bias, Index padding) {
  if (input.channels() != kernel.in) throw DataError("conv2d: input channels do not match kernel");
  if (!bias.empty() && static_cast<Index>(bias.size()) != kernel.out) throw DataError("conv2d: bias length mismatch");
  if (padding < 0) throw DataError("conv2d: negative padding");
  const Index H = input.height();
  const Index W = input.width();
  const Index Ho = H + 2 * padding - kernel.kh + 1;
  const Index Wo = W + 2 * padding - kernel.kw + 1;
  if (Ho < 1 || Wo < 1) throw DataError("conv2d: kernel larger than padded input");
  const Index Ci = kernel.in;
  Tensor3<Acc> out(Ho, Wo, kernel.out);
  for (Index r = 0; r < Ho; ++r) {
    for (Index c = 0; c < Wo; ++c) {
      auto dst = out.pixel(r, c);
      for (Index o = 0; o < kernel.out; ++o) {
        Acc acc = bias.empty() ? Acc(0) : bias[static_cast<std::size_t>(o)];
        const Scalar* wrow = &kernel(o, 0, 0, 0);
        for (Index ky = 0; ky < kernel.kh; ++ky) {
          const Index y = r + ky - padding;
          if (y < 0 || y >= H) continue;
          for (Index kx = 0; kx < kernel.kw; ++kx) {
            const Index x = c + kx - padding;
            if (x < 0 || x >= W) continue;
            const Scalar* src = input.pixel(y, x).data();
            const Scalar* w = wrow + (ky * kernel.kw + kx) * Ci;
            for (Index i = 0; i < Ci; ++i) acc += static_cast<Acc>(src[i]) * static_cast<Acc>(w[i]);
          }
        }
        dst[static_cast<std::size_t>(o)] = acc;
      }
    }
  }
  return out;
}

/// Floating-point convolution with double accumulation.
template <typename Scalar>
Tensor3<Scalar> conv2d(const Tensor3<Scalar>& input, const ConvKernel<Scalar>& kernel,
                       std::span<const Scalar> bias, Index padding) {
  static_assert(std::is_floating_point_v<Scalar>);
  std::vector<double> b(bias.begin(), bias.end());
  return conv2d_accumulate<double>(input, kernel, std::span<const double>(b), padding).template cast<Scalar>();
}

/// 2x2 stride-2 transposed convolution: out(2i+a, 2j+b, o) = bias[o] +
/// sum_c in(i, j, c) * K(o, c, a, b).
template <typename Acc, typename Scalar>
Tensor3<Acc> upconv2x2_accumulate(const Tensor3<Scalar>& input, const ConvKernel<Scalar>& kernel,
                                  std::span<const Acc> bias) {
  if (kernel.kh != 2 || kernel.kw != 2) throw DataError("upconv: kernel must be 2x2");
  if (input.channels() != kernel.in) throw DataError("upconv: input channels do not match kernel");
  if (!bias.empty() && static_cast<Index>(bias.size()) != kernel.out) throw DataError("upconv: bias length mismatch");
  const Index Ci = kernel.in;
  Tensor3<Acc> out(2 * input.height(), 2 * input.width(), kernel.out);
  for (Index r = 0; r < input.height(); ++r) {
    for (Index c = 0; c < input.width(); ++c) {
      const Scalar* src = input.pixel(r, c).data();
      for (Index a = 0; a < 2; ++a) {
        for (Index b = 0; b < 2; ++b) {
          auto dst = out.pixel(2 * r + a, 2 * c + b);
          for (Index o = 0; o < kernel.out; ++o) {
            Acc acc = bias.empty() ? Acc(0) : bias[static_cast<std::size_t>(o)];
            const Scalar* w = &kernel(o, 0, a, b);
            for (Index i = 0; i < Ci; ++i) acc += static_cast<Acc>(src[i]) * static_cast<Acc>(w[i]);
            dst[static_cast<std::size_t>(o)] = acc;
          }
        }
      }
    }
  }
  return out;
}

template <typename Scalar>
Tensor3<Scalar> maxpool2x2(const Tensor3<Scalar>& input) {
  if (input.height() % 2 != 0 || input.width() % 2 != 0) throw DataError("maxpool: odd spatial dimension");
  Tensor3<Scalar> out(input.height() / 2, input.width() / 2, input.channels());
  for (Index r = 0; r < out.height(); ++r) {
    for (Index c = 0; c < out.width(); ++c) {
      for (Index k = 0; k < input.channels(); ++k) {
        out(r, c, k) = std::max({input(2 * r, 2 * c, k), input(2 * r, 2 * c + 1, k), input(2 * r + 1, 2 * c, k),
                                 input(2 * r + 1, 2 * c + 1, k)});
      }
    }
  }
  return out;
}

/// Channel concatenation, first operand's channels first.
template <typename Scalar>
Tensor3<Scalar> concat_channels(const Tensor3<Scalar>& first, const Tensor3<Scalar>& second) {
  if (first.height() != second.height() || first.width() != second.width()) {
    throw DataError("concat: spatial dimensions differ");
  }
  const Index C1 = first.channels();
  const Index C2 = second.channels();
  Tensor3<Scalar> out(first.height(), first.width(), C1 + C2);
  for (Index r = 0; r < out.height(); ++r) {
    for (Index c = 0; c < out.width(); ++c) {
      auto dst = out.pixel(r, c);
      std::copy_n(first.pixel(r, c).data(), C1, dst.data());
      std::copy_n(second.pixel(r, c).data(), C2, dst.data() + C1);
    }
  }
  return out;
}

template <typename Scalar>
void relu_inplace(Tensor3<Scalar>& t) {
  for (auto& v : t.values()) v = std::max(v, Scalar(0));
}

/// Numerically stable per-pixel softmax evaluated in double.
template <typename Scalar>
Tensor3<float> softmax(const Tensor3<Scalar>& logits) {
  Tensor3<float> out(logits.height(), logits.width(), logits.channels());
  std::vector<double> e(static_cast<std::size_t>(logits.channels()));
  for (Index r = 0; r < logits.height(); ++r) {
    for (Index c = 0; c < logits.width(); ++c) {
      const auto src = logits.pixel(r, c);
      double peak = -std::numeric_limits<double>::infinity();
      for (auto v : src) peak = std::max(peak, static_cast<double>(v));
      double sum = 0.0;
      for (std::size_t k = 0; k < e.size(); ++k) {
        e[k] = std::exp(static_cast<double>(src[k]) - peak);
        sum += e[k];
      }
      auto dst = out.pixel(r, c);
      for (std::size_t k = 0; k < e.size(); ++k) dst[k] = static_cast<float>(e[k] / sum);
    }
  }
  return out;
}

}  // namespace hsd
