#include "hsdrive/patchwork.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <string>
#include <thread>

namespace hsd {
namespace {

std::vector<Index> even_starts(Index dim, Index patch, Index n, const char* axis) {
  if (patch < 1 || n < 1) throw ConfigError("patch size and patch count must be positive");
  if (patch > dim) throw ConfigError(std::string("patch larger than image ") + axis);
  if (n * patch < dim) throw ConfigError(std::string("too few patches to cover image ") + axis);
  if (n == 1) {
    if (patch != dim) throw ConfigError(std::string("a single patch must match image ") + axis + " exactly");
    return {0};
  }
  if (n - 1 > dim - patch) throw ConfigError(std::string("too many patches for distinct starts along ") + axis);
  std::vector<Index> starts(static_cast<std::size_t>(n));
  const Index span = dim - patch;
  for (Index i = 0; i < n; ++i) {
    // round half up of i * span / (n - 1)
    starts[static_cast<std::size_t>(i)] = (2 * i * span + (n - 1)) / (2 * (n - 1));
  }
  return starts;
}

}  // namespace

int PatchGrid::coverage(Index r, Index c) const {
  int rows = 0;
  int cols = 0;
  for (Index s : row_starts) rows += (r >= s && r < s + patch);
  for (Index s : col_starts) cols += (c >= s && c < s + patch);
  return rows * cols;
}

PatchGrid plan_grid(Index height, Index width, Index patch, Index n_rows, Index n_cols) {
  PatchGrid g;
  g.patch = patch;
  g.height = height;
  g.width = width;
  g.row_starts = even_starts(height, patch, n_rows, "height");
  g.col_starts = even_starts(width, patch, n_cols, "width");
  return g;
}

ScoreMap stitch(const std::vector<ScoreMap>& patch_scores, const PatchGrid& grid) {
  if (static_cast<Index>(patch_scores.size()) != grid.count()) {
    throw DataError("stitch: expected " + std::to_string(grid.count()) + " patch score maps, got " +
                    std::to_string(patch_scores.size()));
  }
  if (patch_scores.empty()) throw DataError("stitch: empty grid");
  const Index C = patch_scores.front().channels();
  for (const auto& p : patch_scores) {
    if (p.height() != grid.patch || p.width() != grid.patch || p.channels() != C) {
      throw DataError("stitch: patch score map has the wrong shape");
    }
  }
  Tensor3<double> sum(grid.height, grid.width, C);
  std::vector<int> hits(static_cast<std::size_t>(grid.height * grid.width), 0);
  std::size_t idx = 0;
  for (Index r0 : grid.row_starts) {
    for (Index c0 : grid.col_starts) {
      const auto& p = patch_scores[idx++];
      for (Index r = 0; r < grid.patch; ++r) {
        for (Index c = 0; c < grid.patch; ++c) {
          auto acc = sum.pixel(r0 + r, c0 + c);
          const auto src = p.pixel(r, c);
          for (Index k = 0; k < C; ++k) acc[static_cast<std::size_t>(k)] += src[static_cast<std::size_t>(k)];
          ++hits[static_cast<std::size_t>((r0 + r) * grid.width + c0 + c)];
        }
      }
    }
  }
  ScoreMap out(grid.height, grid.width, C);
  for (Index r = 0; r < grid.height; ++r) {
    for (Index c = 0; c < grid.width; ++c) {
      const int n = hits[static_cast<std::size_t>(r * grid.width + c)];
      if (n == 0) throw DataError("stitch: grid leaves a pixel uncovered");
      const auto acc = sum.pixel(r, c);
      double total = 0.0;
      for (double v : acc) total += v / n;
      auto dst = out.pixel(r, c);
      for (Index k = 0; k < C; ++k) {
        const double mean = acc[static_cast<std::size_t>(k)] / n;
        dst[static_cast<std::size_t>(k)] = static_cast<float>(total > 0.0 ? mean / total : 1.0 / C);
      }
    }
  }
  return out;
}

LabelMap argmax_map(const ScoreMap& scores) {
  if (scores.channels() > 255) throw DataError("argmax_map: too many classes for an 8-bit label map");
  LabelMap out(scores.height(), scores.width());
  for (Index r = 0; r < scores.height(); ++r) {
    for (Index c = 0; c < scores.width(); ++c) {
      const auto px = scores.pixel(r, c);
      std::size_t best = 0;
      for (std::size_t k = 1; k < px.size(); ++k) {
        if (px[k] > px[best]) best = k;
      }
      out.at(r, c) = static_cast<std::uint8_t>(best);
    }
  }
  return out;
}

int default_workers() {
  return std::max(1, static_cast<int>(std::thread::hardware_concurrency()));
}

ScoreMap segment(const HyperCube& cube, const PatchGrid& grid, const PatchModel& model, int workers) {
  if (workers < 1) throw ConfigError("worker count must be at least 1");
  const auto patches = extract(cube, grid);
  std::vector<ScoreMap> scores(patches.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    for (std::size_t i = next++; i < patches.size(); i = next++) {
      try {
        scores[i] = model(patches[i]);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = patches.size();
      }
    }
  };
  const auto n = std::min<std::size_t>(static_cast<std::size_t>(workers), patches.size());
  if (n <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < n; ++t) pool.emplace_back(work);
  }
  if (failure) std::rethrow_exception(failure);
  return stitch(scores, grid);
}

}  // namespace hsd
