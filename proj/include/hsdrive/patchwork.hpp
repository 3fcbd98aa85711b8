#pragma once

#include <functional>
#include <vector>

#include "hsdrive/hypercube.hpp"

namespace hsd {

/// Per-pixel class probabilities, H x W x C.
using ScoreMap = Tensor3<float>;

/// Overlapping square-patch tiling of an H x W image.
struct PatchGrid {
  Index patch = 128;
  Index height = 0;
  Index width = 0;
  std::vector<Index> row_starts;
  std::vector<Index> col_starts;

  Index count() const { return static_cast<Index>(row_starts.size() * col_starts.size()); }
  /// Number of patches covering pixel (r, c).
  int coverage(Index r, Index c) const;
};

/// Evenly spaced starts: round_half_up(i * (dim - P) / (n - 1)).
PatchGrid plan_grid(Index height, Index width, Index patch, Index n_rows, Index n_cols);

/// Patches in row-major grid order.
template <typename Scalar>
std::vector<Tensor3<Scalar>> extract(const Tensor3<Scalar>& image, const PatchGrid& grid) {
  if (image.height() != grid.height || image.width() != grid.width) {
    throw DataError("extract: image dimensions do not match the patch grid");
  }
  std::vector<Tensor3<Scalar>> patches;
  patches.reserve(static_cast<std::size_t>(grid.count()));
  const Index C = image.channels();
  for (Index r0 : grid.row_starts) {
    for (Index c0 : grid.col_starts) {
      Tensor3<Scalar> p(grid.patch, grid.patch, C);
      for (Index r = 0; r < grid.patch; ++r) {
        const auto src = image.pixel(r0 + r, c0);
        std::copy(src.data(), src.data() + grid.patch * C, p.pixel(r, 0).data());
      }
      patches.push_back(std::move(p));
    }
  }
  return patches;
}

inline std::vector<Tensor3<float>> extract(const HyperCube& cube, const PatchGrid& grid) {
  return extract(cube.values, grid);
}

/// Mean of the covering patches' scores, renormalized to sum to one.
ScoreMap stitch(const std::vector<ScoreMap>& patch_scores, const PatchGrid& grid);

using PatchModel = std::function<ScoreMap(const Tensor3<float>&)>;

/// extract -> model on every patch -> stitch. Patches are spread over
/// `workers` threads; the result does not depend on the worker count.
/// The model must be safe to call concurrently.
ScoreMap segment(const HyperCube& cube, const PatchGrid& grid, const PatchModel& model, int workers = 1);

/// std::thread::hardware_concurrency(), at least 1.
int default_workers();

/// Per-pixel argmax; ties go to the lowest class index.
LabelMap argmax_map(const ScoreMap& scores);

}  // namespace hsd
