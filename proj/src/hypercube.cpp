#include "hsdrive/hypercube.hpp"

#include <cmath>
#include <string>

namespace hsd {

RawMosaicFrame::RawMosaicFrame(Index h, Index w, std::uint16_t fill, std::string tag)
    : RawMosaicFrame(h, w, std::vector<std::uint16_t>(static_cast<std::size_t>(std::max<Index>(h * w, 0)), fill),
                     std::move(tag)) {}

RawMosaicFrame::RawMosaicFrame(Index h, Index w, std::vector<std::uint16_t> samples, std::string tag)
    : height(h), width(w), data(std::move(samples)), exposure_tag(std::move(tag)) {
  if (h < kMosaicSide || w < kMosaicSide) {
    throw DataError("raw frame must be at least 5x5, got " + std::to_string(h) + "x" + std::to_string(w));
  }
  if (static_cast<Index>(data.size()) != h * w) throw DataError("raw frame payload length mismatch");
}

MosaicLayout::MosaicLayout() {
  std::array<int, kMosaicBands> identity{};
  for (int i = 0; i < kMosaicBands; ++i) identity[static_cast<std::size_t>(i)] = i;
  *this = MosaicLayout(identity);
}

MosaicLayout::MosaicLayout(const std::array<int, kMosaicBands>& band_at) : band_at_(band_at) {
  std::array<bool, kMosaicBands> seen{};
  for (int i = 0; i < kMosaicBands; ++i) {
    const int b = band_at[static_cast<std::size_t>(i)];
    if (b < 0 || b >= kMosaicBands || seen[static_cast<std::size_t>(b)]) {
      throw ConfigError("mosaic layout is not a bijection onto bands 0..24");
    }
    seen[static_cast<std::size_t>(b)] = true;
    offset_of_[static_cast<std::size_t>(b)] = {i / kMosaicSide, i % kMosaicSide};
  }
}

PixelOffset MosaicLayout::offset_of(int band) const {
  if (band < 0 || band >= kMosaicBands) throw DataError("band index out of range");
  return offset_of_[static_cast<std::size_t>(band)];
}

void CalibrationSet::validate_against(const RawMosaicFrame& raw) const {
  if (dark.height != raw.height || dark.width != raw.width || white.height != raw.height ||
      white.width != raw.width) {
    throw DataError("dark/white reference dimensions differ from the raw frame");
  }
}

std::string_view to_string(CubeStage stage) {
  switch (stage) {
    case CubeStage::reflectance: return "reflectance";
    case CubeStage::aligned: return "aligned";
    case CubeStage::filtered: return "filtered";
    case CubeStage::normalized: return "normalized";
  }
  return "unknown";
}

CubeStage cube_stage_from_string(std::string_view name) {
  for (auto s : {CubeStage::reflectance, CubeStage::aligned, CubeStage::filtered, CubeStage::normalized}) {
    if (to_string(s) == name) return s;
  }
  throw ConfigError("unknown cube stage '" + std::string(name) + "'");
}

void HyperCube::validate() const {
  const bool bounded = stage == CubeStage::normalized;
  for (float v : values.values()) {
    if (!std::isfinite(v)) throw DataError("cube contains non-finite values");
    if (bounded && (v < 0.0f || v > 1.0f)) throw DataError("normalized cube value outside [0, 1]");
  }
}

LabelMap::LabelMap(Index h, Index w, std::uint8_t fill)
    : height(h), width(w), labels(static_cast<std::size_t>(h * w), fill) {}

LabelMap::LabelMap(Index h, Index w, std::vector<std::uint8_t> values)
    : height(h), width(w), labels(std::move(values)) {
  if (static_cast<Index>(labels.size()) != h * w) throw DataError("label map payload length mismatch");
}

void LabelMap::validate(int classes) const {
  for (auto l : labels) {
    if (l != kIgnoreLabel && l >= classes) {
      throw DataError("label " + std::to_string(l) + " outside 0.." + std::to_string(classes - 1));
    }
  }
}

std::vector<std::int64_t> LabelMap::histogram(int classes) const {
  std::vector<std::int64_t> counts(static_cast<std::size_t>(classes), 0);
  for (auto l : labels) {
    if (l == kIgnoreLabel) continue;
    if (l >= classes) throw DataError("label outside class range");
    ++counts[l];
  }
  return counts;
}

std::string_view source_class_name(int id) {
  static constexpr std::array<std::string_view, kSourceClasses> names = {
      "Road", "Road Marks", "Vegetation", "Painted Metal", "Sky",
      "Concrete/Stone/Brick", "Pedestrian/Cyclist", "Water", "Unpainted Metal",
      "Glass/Transparent Plastic"};
  if (id < 1 || id > kSourceClasses) throw DataError("source class id out of range");
  return names[static_cast<std::size_t>(id - 1)];
}

std::string_view ClassScheme::name() const {
  return kind == SchemeKind::three_class ? "three_class" : "five_class";
}

ClassScheme ClassScheme::three_class() {
  ClassScheme s;
  s.kind = SchemeKind::three_class;
  s.mapping.fill(2);
  s.mapping[0] = 0;  // road
  s.mapping[1] = 1;  // road marks
  s.class_names = {"Road", "Road Marks", "No Drivable"};
  return s;
}

ClassScheme ClassScheme::five_class() {
  ClassScheme s;
  s.kind = SchemeKind::five_class;
  s.mapping.fill(4);
  s.mapping[0] = 0;
  s.mapping[1] = 1;
  s.mapping[2] = 2;  // vegetation
  s.mapping[4] = 3;  // sky
  s.class_names = {"Road", "Road Marks", "Vegetation", "Sky", "Other"};
  return s;
}

ClassScheme ClassScheme::from_name(std::string_view name) {
  if (name == "three_class" || name == "3") return three_class();
  if (name == "five_class" || name == "5") return five_class();
  throw ConfigError("unknown class scheme '" + std::string(name) + "'");
}

LabelMap remap_labels(const LabelMap& labels, const ClassScheme& scheme) {
  LabelMap out(labels.height, labels.width, kIgnoreLabel);
  for (std::size_t i = 0; i < labels.labels.size(); ++i) {
    const auto l = labels.labels[i];
    if (l == kIgnoreLabel) continue;
    if (l < 1 || l > kSourceClasses) {
      throw DataError("source label " + std::to_string(l) + " is neither 1..10 nor ignore");
    }
    out.labels[i] = scheme.mapping[l - 1u];
  }
  return out;
}

}  // namespace hsd
