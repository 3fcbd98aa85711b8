#include "hsdrive/preprocess.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <set>

#include "json.hpp"

namespace hsd {
namespace {

double elapsed_ms(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
}

std::string_view name_of(NormalizationMode m) {
  return m == NormalizationMode::per_band_minmax ? "per_band_minmax" : "per_pixel_max";
}
std::string_view name_of(AlignmentMode m) { return m == AlignmentMode::off ? "off" : "bilinear"; }

}  // namespace

void PreprocessConfig::validate() const {
  if (median_kernel < 1 || median_kernel % 2 == 0) throw ConfigError("median_kernel must be an odd integer >= 1");
  if (crop_offset.row < 0 || crop_offset.col < 0) throw ConfigError("crop_offset must be non-negative");
  if (!(epsilon_ref > 0.0)) throw ConfigError("epsilon_ref must be positive");
}

PreprocessConfig PreprocessConfig::from_json(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("preprocess config: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("preprocess config must be a JSON object");
  static const std::set<std::string> known = {"crop_offset", "median_kernel", "normalization", "alignment",
                                              "epsilon_ref"};
  PreprocessConfig cfg;
  try {
    for (const auto& [key, value] : doc.items()) {
      if (!known.contains(key)) throw ConfigError("preprocess config: unknown key '" + key + "'");
      if (key == "crop_offset") {
        const auto off = value.get<std::array<Index, 2>>();
        cfg.crop_offset = {off[0], off[1]};
      } else if (key == "median_kernel") {
        cfg.median_kernel = value.get<int>();
      } else if (key == "normalization") {
        const auto s = value.get<std::string>();
        if (s == "per_band_minmax") cfg.normalization = NormalizationMode::per_band_minmax;
        else if (s == "per_pixel_max") cfg.normalization = NormalizationMode::per_pixel_max;
        else throw ConfigError("unknown normalization '" + s + "'");
      } else if (key == "alignment") {
        const auto s = value.get<std::string>();
        if (s == "off") cfg.alignment = AlignmentMode::off;
        else if (s == "bilinear") cfg.alignment = AlignmentMode::bilinear;
        else throw ConfigError("unknown alignment '" + s + "'");
      } else {
        cfg.epsilon_ref = value.get<double>();
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("preprocess config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

std::string PreprocessConfig::to_json() const {
  nlohmann::ordered_json doc;
  doc["crop_offset"] = {crop_offset.row, crop_offset.col};
  doc["median_kernel"] = median_kernel;
  doc["normalization"] = name_of(normalization);
  doc["alignment"] = name_of(alignment);
  doc["epsilon_ref"] = epsilon_ref;
  return doc.dump(2);
}

const std::vector<std::string>& preprocess_stage_names() {
  static const std::vector<std::string> names = {"Image cropping",      "Reflectance correction",
                                                 "Partial demosaicing", "Band alignment",
                                                 "Spatial filtering",   "Band normalization"};
  return names;
}

RawMosaicFrame crop(const RawMosaicFrame& frame, PixelOffset offset, Index height, Index width) {
  if (offset.row < 0 || offset.col < 0 || offset.row + height > frame.height || offset.col + width > frame.width) {
    throw ConfigError("crop window (" + std::to_string(offset.row) + "," + std::to_string(offset.col) + ")+" +
                      std::to_string(height) + "x" + std::to_string(width) + " exceeds " +
                      std::to_string(frame.height) + "x" + std::to_string(frame.width));
  }
  RawMosaicFrame out(height, width, 0, frame.exposure_tag);
  for (Index r = 0; r < height; ++r) {
    const auto* src = frame.data.data() + (offset.row + r) * frame.width + offset.col;
    std::copy(src, src + width, out.data.data() + r * width);
  }
  return out;
}

ReflectanceFrame reflectance_correct(const RawMosaicFrame& frame, const RawMosaicFrame& dark,
                                     const RawMosaicFrame& white, double epsilon_ref) {
  if (frame.height != dark.height || frame.width != dark.width || frame.height != white.height ||
      frame.width != white.width) {
    throw DataError("reflectance correction needs equally sized raw, dark and white frames");
  }
  const double guard = epsilon_ref * 65535.0;
  ReflectanceFrame out(frame.height, frame.width);
  float* dst = out.data();
  for (std::size_t i = 0; i < frame.data.size(); ++i) {
    const double span = static_cast<double>(white.data[i]) - dark.data[i];
    if (span < guard) {
      dst[i] = 0.0f;
      continue;
    }
    const double v = (static_cast<double>(frame.data[i]) - dark.data[i]) / span;
    dst[i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
  }
  return out;
}

HyperCube demosaic(const ReflectanceFrame& frame, const MosaicLayout& layout) {
  if (frame.rows() % kMosaicSide != 0 || frame.cols() % kMosaicSide != 0) {
    throw DataError("demosaic input dimensions must be multiples of 5");
  }
  const Index H = frame.rows() / kMosaicSide;
  const Index W = frame.cols() / kMosaicSide;
  Tensor3<float> cube(H, W, kMosaicBands);
  for (Index r = 0; r < H; ++r) {
    for (Index c = 0; c < W; ++c) {
      auto px = cube.pixel(r, c);
      for (int dr = 0; dr < kMosaicSide; ++dr) {
        for (int dc = 0; dc < kMosaicSide; ++dc) {
          px[static_cast<std::size_t>(layout.band(dr, dc))] = frame(kMosaicSide * r + dr, kMosaicSide * c + dc);
        }
      }
    }
  }
  return HyperCube(std::move(cube), CubeStage::reflectance);
}

HyperCube align_bands(const HyperCube& cube, const MosaicLayout& layout) {
  if (cube.stage != CubeStage::reflectance) throw DataError("band alignment expects a reflectance cube");
  const Index H = cube.height();
  const Index W = cube.width();
  const Index B = cube.bands();
  if (B != kMosaicBands) throw DataError("band alignment expects 25 bands");
  Tensor3<float> out(H, W, B);
  const int centre = kMosaicSide / 2;
  for (int b = 0; b < B; ++b) {
    const auto off = layout.offset_of(b);
    const double sy = static_cast<double>(centre - off.row) / kMosaicSide;
    const double sx = static_cast<double>(centre - off.col) / kMosaicSide;
    for (Index r = 0; r < H; ++r) {
      const double y = std::clamp(r + sy, 0.0, static_cast<double>(H - 1));
      const auto y0 = static_cast<Index>(std::floor(y));
      const Index y1 = std::min(y0 + 1, H - 1);
      const double wy = y - y0;
      for (Index c = 0; c < W; ++c) {
        const double x = std::clamp(c + sx, 0.0, static_cast<double>(W - 1));
        const auto x0 = static_cast<Index>(std::floor(x));
        const Index x1 = std::min(x0 + 1, W - 1);
        const double wx = x - x0;
        const double top = (1.0 - wx) * cube.values(y0, x0, b) + wx * cube.values(y0, x1, b);
        const double bottom = (1.0 - wx) * cube.values(y1, x0, b) + wx * cube.values(y1, x1, b);
        out(r, c, b) = static_cast<float>((1.0 - wy) * top + wy * bottom);
      }
    }
  }
  return HyperCube(std::move(out), CubeStage::aligned);
}

HyperCube median_filter(const HyperCube& cube, int k) {
  if (k < 1 || k % 2 == 0) throw ConfigError("median kernel must be odd and >= 1");
  if (cube.stage != CubeStage::reflectance && cube.stage != CubeStage::aligned) {
    throw DataError("median filter expects a reflectance or aligned cube");
  }
  if (k == 1) return HyperCube(cube.values, CubeStage::filtered);
  const Index H = cube.height();
  const Index W = cube.width();
  const Index B = cube.bands();
  const int half = k / 2;
  Tensor3<float> out(H, W, B);
  std::vector<float> window(static_cast<std::size_t>(k * k));
  const auto mid = window.begin() + (k * k) / 2;
  for (Index r = 0; r < H; ++r) {
    for (Index c = 0; c < W; ++c) {
      for (Index b = 0; b < B; ++b) {
        std::size_t n = 0;
        for (int dy = -half; dy <= half; ++dy) {
          const Index rr = std::clamp<Index>(r + dy, 0, H - 1);
          for (int dx = -half; dx <= half; ++dx) {
            window[n++] = cube.values(rr, std::clamp<Index>(c + dx, 0, W - 1), b);
          }
        }
        std::nth_element(window.begin(), mid, window.end());
        out(r, c, b) = *mid;
      }
    }
  }
  return HyperCube(std::move(out), CubeStage::filtered);
}

HyperCube normalize(const HyperCube& cube, NormalizationMode mode) {
  if (cube.stage != CubeStage::filtered) throw DataError("normalization expects a filtered cube");
  Tensor3<float> out(cube.height(), cube.width(), cube.bands());
  const auto in = cube.values.as_matrix();
  auto dst = out.as_matrix();
  if (mode == NormalizationMode::per_band_minmax) {
    for (Index b = 0; b < cube.bands(); ++b) {
      const double lo = in.col(b).minCoeff();
      const double hi = in.col(b).maxCoeff();
      const double span = hi - lo;
      for (Index i = 0; i < in.rows(); ++i) {
        dst(i, b) = span > 0.0 ? static_cast<float>(std::clamp((in(i, b) - lo) / span, 0.0, 1.0)) : 0.0f;
      }
    }
  } else {
    for (Index i = 0; i < in.rows(); ++i) {
      const double peak = in.row(i).maxCoeff();
      for (Index b = 0; b < cube.bands(); ++b) {
        dst(i, b) = peak > 0.0 ? static_cast<float>(std::clamp(in(i, b) / peak, 0.0, 1.0)) : 0.0f;
      }
    }
  }
  return HyperCube(std::move(out), CubeStage::normalized);
}

PreprocessResult run_pipeline(const RawMosaicFrame& raw, const CalibrationSet& calib,
                              const PreprocessConfig& config) {
  config.validate();
  calib.validate_against(raw);
  const auto& names = preprocess_stage_names();
  PreprocessResult result;

  auto t = std::chrono::steady_clock::now();
  const auto frame = crop(raw, config.crop_offset);
  const auto dark = crop(calib.dark, config.crop_offset);
  const auto white = crop(calib.white, config.crop_offset);
  result.timing.add(names[0], elapsed_ms(t));

  t = std::chrono::steady_clock::now();
  const auto refl = reflectance_correct(frame, dark, white, config.epsilon_ref);
  result.timing.add(names[1], elapsed_ms(t));

  t = std::chrono::steady_clock::now();
  auto cube = demosaic(refl, calib.layout);
  result.timing.add(names[2], elapsed_ms(t));

  t = std::chrono::steady_clock::now();
  if (config.alignment == AlignmentMode::bilinear) cube = align_bands(cube, calib.layout);
  result.timing.add(names[3], elapsed_ms(t));

  t = std::chrono::steady_clock::now();
  cube = median_filter(cube, config.median_kernel);
  result.timing.add(names[4], elapsed_ms(t));

  t = std::chrono::steady_clock::now();
  result.cube = normalize(cube, config.normalization);
  result.timing.add(names[5], elapsed_ms(t));
  return result;
}

}  // namespace hsd
