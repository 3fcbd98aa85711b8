#pragma once

// Shared fixtures and independent reference implementations for the tests.
// The oracles deliberately avoid the library's kernels and containers.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "hsdrive/random.hpp"
#include "hsdrive/tensor.hpp"

namespace hsd::test {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("hsdrive_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

template <typename Scalar>
Tensor3<Scalar> random_tensor(Index h, Index w, Index c, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor3<Scalar> t(h, w, c);
  for (auto& v : t.values()) v = static_cast<Scalar>(rng.uniform(lo, hi));
  return t;
}

/// Textbook zero-padded cross-correlation on plain arrays.
/// in[h][w][ci] flattened row-major, weights[o][i][ky][kx], result[ho][wo][o].
inline std::vector<double> brute_conv2d(const std::vector<double>& in, int H, int W, int Ci,
                                        const std::vector<double>& weights, int Co, int K,
                                        const std::vector<double>& bias, int pad, int& Ho, int& Wo) {
  Ho = H + 2 * pad - K + 1;
  Wo = W + 2 * pad - K + 1;
  std::vector<double> out(static_cast<std::size_t>(Ho * Wo * Co), 0.0);
  for (int y = 0; y < Ho; ++y)
    for (int x = 0; x < Wo; ++x)
      for (int o = 0; o < Co; ++o) {
        double s = bias.empty() ? 0.0 : bias[static_cast<std::size_t>(o)];
        for (int i = 0; i < Ci; ++i)
          for (int ky = 0; ky < K; ++ky)
            for (int kx = 0; kx < K; ++kx) {
              const int sy = y + ky - pad;
              const int sx = x + kx - pad;
              if (sy < 0 || sx < 0 || sy >= H || sx >= W) continue;
              s += in[static_cast<std::size_t>((sy * W + sx) * Ci + i)] *
                   weights[static_cast<std::size_t>(((o * Ci + i) * K + ky) * K + kx)];
            }
        out[static_cast<std::size_t>((y * Wo + x) * Co + o)] = s;
      }
  return out;
}

struct Gauss2 {
  double m[2];
  double S[2][2];
};

inline double gauss2_pdf(const Gauss2& g, double x, double y) {
  const double det = g.S[0][0] * g.S[1][1] - g.S[0][1] * g.S[1][0];
  const double dx = x - g.m[0];
  const double dy = y - g.m[1];
  const double q = (g.S[1][1] * dx * dx - 2.0 * g.S[0][1] * dx * dy + g.S[0][0] * dy * dy) / det;
  return std::exp(-0.5 * q) / (2.0 * M_PI * std::sqrt(det));
}

/// Monte-Carlo estimate of 2 (1 - integral sqrt(p q)) by importance sampling
/// from the equal mixture of p and q, using the standard library generator.
inline double monte_carlo_jm(const Gauss2& p, const Gauss2& q, int samples, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> n01;
  std::bernoulli_distribution coin(0.5);
  auto chol = [](const Gauss2& g, double z0, double z1, double& x, double& y) {
    const double l00 = std::sqrt(g.S[0][0]);
    const double l10 = g.S[1][0] / l00;
    const double l11 = std::sqrt(g.S[1][1] - l10 * l10);
    x = g.m[0] + l00 * z0;
    y = g.m[1] + l10 * z0 + l11 * z1;
  };
  double acc = 0.0;
  for (int i = 0; i < samples; ++i) {
    double x = 0, y = 0;
    const double z0 = n01(gen), z1 = n01(gen);
    chol(coin(gen) ? p : q, z0, z1, x, y);
    const double a = gauss2_pdf(p, x, y);
    const double b = gauss2_pdf(q, x, y);
    acc += std::sqrt(a * b) / (0.5 * (a + b));
  }
  return 2.0 * (1.0 - acc / samples);
}

}  // namespace hsd::test
