#pragma once

#include <Eigen/Core>

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hsdrive/hypercube.hpp"

namespace hsd {

inline constexpr Index kCropHeight = 1080;
inline constexpr Index kCropWidth = 2045;

/// Per-pixel reflectance of a cropped mosaic frame.
using ReflectanceFrame = Eigen::Array<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class NormalizationMode { per_band_minmax, per_pixel_max };
enum class AlignmentMode { off, bilinear };

struct PreprocessConfig {
  PixelOffset crop_offset{4, 1};
  int median_kernel = 3;
  NormalizationMode normalization = NormalizationMode::per_band_minmax;
  AlignmentMode alignment = AlignmentMode::bilinear;
  // Fraction of the 16-bit full scale below which W - D counts as a dead cell.
  double epsilon_ref = 1e-6;

  void validate() const;
  /// Accepts exactly the keys crop_offset, median_kernel, normalization,
  /// alignment and epsilon_ref; missing keys keep their defaults.
  static PreprocessConfig from_json(std::string_view text);
  std::string to_json() const;
};

struct StageTiming {
  std::vector<std::pair<std::string, double>> stages;  // name, milliseconds
  double total_ms = 0.0;

  void add(std::string name, double ms) {
    stages.emplace_back(std::move(name), ms);
    total_ms += ms;
  }
};

/// Stage names in pipeline order.
const std::vector<std::string>& preprocess_stage_names();

RawMosaicFrame crop(const RawMosaicFrame& frame, PixelOffset offset, Index height = kCropHeight,
                    Index width = kCropWidth);

/// R = clamp((I - D) / (W - D), 0, 1); cells with W - D below the guard give 0.
ReflectanceFrame reflectance_correct(const RawMosaicFrame& frame, const RawMosaicFrame& dark,
                                     const RawMosaicFrame& white, double epsilon_ref = 1e-6);

/// One sample per band per macropixel; output is (H/5) x (W/5) x 25.
HyperCube demosaic(const ReflectanceFrame& frame, const MosaicLayout& layout);

/// Shifts every band by its sub-macropixel offset towards the macropixel
/// centre (bilinear, replicated borders).
HyperCube align_bands(const HyperCube& cube, const MosaicLayout& layout);

/// Per-band k x k median with replicated borders.
HyperCube median_filter(const HyperCube& cube, int k);

HyperCube normalize(const HyperCube& cube, NormalizationMode mode);

struct PreprocessResult {
  HyperCube cube;
  StageTiming timing;
};

PreprocessResult run_pipeline(const RawMosaicFrame& raw, const CalibrationSet& calib,
                              const PreprocessConfig& config);

}  // namespace hsd
