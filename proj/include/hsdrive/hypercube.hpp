#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hsdrive/tensor.hpp"

namespace hsd {

inline constexpr int kMosaicSide = 5;
inline constexpr int kMosaicBands = kMosaicSide * kMosaicSide;
inline constexpr std::uint8_t kIgnoreLabel = 255;

/// Single-plane 16-bit sensor frame carrying the 5x5 spectral mosaic.
struct RawMosaicFrame {
  Index height = 0;
  Index width = 0;
  std::vector<std::uint16_t> data;
  std::string exposure_tag;

  RawMosaicFrame() = default;
  RawMosaicFrame(Index h, Index w, std::uint16_t fill = 0, std::string tag = {});
  RawMosaicFrame(Index h, Index w, std::vector<std::uint16_t> samples, std::string tag = {});

  std::uint16_t& at(Index r, Index c) { return data[static_cast<std::size_t>(r * width + c)]; }
  std::uint16_t at(Index r, Index c) const { return data[static_cast<std::size_t>(r * width + c)]; }

  friend bool operator==(const RawMosaicFrame&, const RawMosaicFrame&) = default;
};

struct PixelOffset {
  Index row = 0;
  Index col = 0;
  friend bool operator==(const PixelOffset&, const PixelOffset&) = default;
};

/// Band assignment inside a macropixel: band_at[dr * 5 + dc] is the band
/// sampled at intra-macropixel offset (dr, dc).
class MosaicLayout {
 public:
  /// Row-major default: band = 5 * dr + dc.
  MosaicLayout();
  explicit MosaicLayout(const std::array<int, kMosaicBands>& band_at);

  int band(int dr, int dc) const { return band_at_[static_cast<std::size_t>(dr * kMosaicSide + dc)]; }
  /// Intra-macropixel offset holding band b.
  PixelOffset offset_of(int band) const;
  const std::array<int, kMosaicBands>& bands() const { return band_at_; }

  friend bool operator==(const MosaicLayout&, const MosaicLayout&) = default;

 private:
  std::array<int, kMosaicBands> band_at_{};
  std::array<PixelOffset, kMosaicBands> offset_of_{};
};

struct CalibrationSet {
  RawMosaicFrame dark;
  RawMosaicFrame white;
  MosaicLayout layout;
  PixelOffset crop_offset{4, 1};

  void validate_against(const RawMosaicFrame& raw) const;
};

enum class CubeStage : std::uint8_t { reflectance = 0, aligned = 1, filtered = 2, normalized = 3 };

std::string_view to_string(CubeStage stage);
CubeStage cube_stage_from_string(std::string_view name);

/// H x W x B real-valued cube tagged with the pipeline stage that produced it.
struct HyperCube {
  Tensor3<float> values;
  CubeStage stage = CubeStage::reflectance;

  HyperCube() = default;
  HyperCube(Tensor3<float> v, CubeStage s) : values(std::move(v)), stage(s) {}

  Index height() const { return values.height(); }
  Index width() const { return values.width(); }
  Index bands() const { return values.channels(); }

  /// Throws DataError when values are non-finite, or outside [0, 1] for a
  /// normalized cube.
  void validate() const;

  friend bool operator==(const HyperCube&, const HyperCube&) = default;
};

/// Per-pixel class indices; kIgnoreLabel marks weakly labelled pixels.
struct LabelMap {
  Index height = 0;
  Index width = 0;
  std::vector<std::uint8_t> labels;

  LabelMap() = default;
  LabelMap(Index h, Index w, std::uint8_t fill = 0);
  LabelMap(Index h, Index w, std::vector<std::uint8_t> values);

  std::uint8_t& at(Index r, Index c) { return labels[static_cast<std::size_t>(r * width + c)]; }
  std::uint8_t at(Index r, Index c) const { return labels[static_cast<std::size_t>(r * width + c)]; }
  Index pixels() const { return height * width; }

  /// Throws DataError if any non-ignore label is >= classes.
  void validate(int classes) const;
  /// Pixel count per class (ignore excluded).
  std::vector<std::int64_t> histogram(int classes) const;

  friend bool operator==(const LabelMap&, const LabelMap&) = default;
};

// Source annotation classes, numbered 1..10.
enum class SourceClass : std::uint8_t {
  road = 1,
  road_marks = 2,
  vegetation = 3,
  painted_metal = 4,
  sky = 5,
  concrete = 6,
  pedestrian = 7,
  water = 8,
  unpainted_metal = 9,
  glass = 10,
};
inline constexpr int kSourceClasses = 10;

std::string_view source_class_name(int id);

enum class SchemeKind { three_class, five_class };

struct ClassScheme {
  SchemeKind kind = SchemeKind::three_class;
  std::array<std::uint8_t, kSourceClasses> mapping{};  // source id - 1 -> target id
  std::vector<std::string> class_names;

  int classes() const { return static_cast<int>(class_names.size()); }
  std::string_view name() const;

  static ClassScheme three_class();
  static ClassScheme five_class();
  static ClassScheme from_name(std::string_view name);
};

LabelMap remap_labels(const LabelMap& labels, const ClassScheme& scheme);

// ---- file I/O -------------------------------------------------------------

RawMosaicFrame load_raw(const std::filesystem::path& path);
void save_raw(const RawMosaicFrame& frame, const std::filesystem::path& path);

HyperCube load_cube(const std::filesystem::path& path);
void save_cube(const HyperCube& cube, const std::filesystem::path& path);

LabelMap load_labels(const std::filesystem::path& path);
void save_labels(const LabelMap& labels, const std::filesystem::path& path);

/// Calibration bundle: a JSON document naming the dark/white frames
/// (relative to the JSON's directory), the mosaic layout and the crop offset.
CalibrationSet load_calibration(const std::filesystem::path& json_path);
void save_calibration(const CalibrationSet& calib, const std::filesystem::path& json_path);

// ---- synthetic scenes -------------------------------------------------------

struct SceneClass {
  int source_id = 1;
  std::optional<std::array<double, kMosaicBands>> signature;
};

struct SceneSpec {
  Index raw_height = 1088;
  Index raw_width = 2048;
  PixelOffset crop_offset{4, 1};
  Index cube_height = 216;
  Index cube_width = 409;
  std::vector<SceneClass> classes;
  double noise_sigma = 0.01;
  double illumination_gradient = 0.1;
  // Scales the per-class departure from the shared base spectrum.
  double signature_spread = 1.0;
  double dark_level = 2000.0;
  double white_level = 60000.0;

  /// Road, road marks, vegetation, sky and concrete.
  static SceneSpec default_scene();
  static SceneSpec from_json(std::string_view text);
  std::string to_json() const;
};

struct SynthScene {
  RawMosaicFrame raw;
  LabelMap labels;  // source ids, cube resolution
  CalibrationSet calibration;
  HyperCube reflectance;  // ground-truth scene before mosaicking
  std::vector<std::array<double, kMosaicBands>> signatures;  // per spec class
};

SynthScene synth_scene(const SceneSpec& spec, std::uint64_t seed);

}  // namespace hsd
