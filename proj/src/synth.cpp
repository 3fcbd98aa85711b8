#include <algorithm>
#include <cmath>
#include <set>

#include "hsdrive/hypercube.hpp"
#include "hsdrive/random.hpp"
#include "json.hpp"

namespace hsd {
namespace {

constexpr std::array<int, 5> kKnotBands = {0, 6, 12, 18, 24};

std::array<double, kMosaicBands> interpolate_knots(const std::array<double, 5>& knots) {
  std::array<double, kMosaicBands> s{};
  for (int b = 0; b < kMosaicBands; ++b) {
    std::size_t k = 0;
    while (k + 2 < kKnotBands.size() && b > kKnotBands[k + 1]) ++k;
    const double t = static_cast<double>(b - kKnotBands[k]) / (kKnotBands[k + 1] - kKnotBands[k]);
    s[static_cast<std::size_t>(b)] = knots[k] + t * (knots[k + 1] - knots[k]);
  }
  return s;
}

struct Ellipse {
  double r0, c0, ry, rx;
  bool contains(double r, double c) const {
    const double dy = (r - r0) / ry;
    const double dx = (c - c0) / rx;
    return dy * dy + dx * dx <= 1.0;
  }
};

// Scene layout in cube coordinates. Returns source ids (no ignore yet).
LabelMap paint_scene(const SceneSpec& spec, Rng& rng) {
  const Index H = spec.cube_height;
  const Index W = spec.cube_width;
  auto index_of = [&](int id) -> int {
    for (std::size_t i = 0; i < spec.classes.size(); ++i) {
      if (spec.classes[i].source_id == id) return static_cast<int>(i);
    }
    return -1;
  };
  const bool has_road = index_of(1) >= 0;
  const bool has_marks = index_of(2) >= 0;
  const bool has_veg = index_of(3) >= 0;
  const bool has_sky = index_of(5) >= 0;

  std::vector<int> background;
  for (const auto& c : spec.classes) {
    if (c.source_id != 1 && c.source_id != 2 && c.source_id != 3 && c.source_id != 5) {
      background.push_back(c.source_id);
    }
  }
  if (background.empty()) background.push_back(spec.classes.front().source_id);

  std::vector<Ellipse> blobs;
  if (has_veg) {
    for (int i = 0; i < 6; ++i) {
      const bool left = (i % 2) == 0;
      const double c0 = left ? rng.uniform(0.02, 0.28) * W : rng.uniform(0.72, 0.98) * W;
      blobs.push_back({rng.uniform(0.32, 0.55) * H, c0, rng.uniform(0.06, 0.12) * H,
                       rng.uniform(0.04, 0.10) * W});
    }
  }

  const double horizon = 0.45 * H;
  const double center = 0.5 * (W - 1);
  LabelMap map(H, W);
  for (Index r = 0; r < H; ++r) {
    for (Index c = 0; c < W; ++c) {
      const auto sector = std::min<std::size_t>(background.size() - 1,
                                                static_cast<std::size_t>(c * static_cast<Index>(background.size()) / W));
      int label = background[sector];
      if (has_sky && r < static_cast<Index>(0.3 * H)) label = 5;
      if (has_veg) {
        for (const auto& e : blobs) {
          if (e.contains(static_cast<double>(r), static_cast<double>(c))) label = 3;
        }
      }
      if (has_road && r >= horizon) {
        const double t = (r - horizon) / std::max(1.0, H - 1 - horizon);
        const double half = 0.05 * W + t * 0.45 * W;
        const double dx = c - center;
        if (std::abs(dx) <= half) {
          label = 1;
          if (has_marks) {
            const bool lane = std::abs(std::abs(dx) - 0.7 * half) < 3.0;
            const bool dash = std::abs(dx) < 3.0 && (r / 8) % 2 == 0;
            if (lane || dash) label = 2;
          }
        }
      } else if (has_marks && !has_road && r >= static_cast<Index>(0.8 * H) && (r / 6) % 2 == 0) {
        label = 2;
      }
      map.at(r, c) = static_cast<std::uint8_t>(label);
    }
  }
  return map;
}

// Pixels with any 8-neighbour of another class are left unlabelled.
LabelMap weaken(const LabelMap& dense) {
  LabelMap out = dense;
  for (Index r = 0; r < dense.height; ++r) {
    for (Index c = 0; c < dense.width; ++c) {
      const auto v = dense.at(r, c);
      bool boundary = false;
      for (Index dr = -1; dr <= 1 && !boundary; ++dr) {
        for (Index dc = -1; dc <= 1; ++dc) {
          const Index rr = r + dr, cc = c + dc;
          if (rr < 0 || cc < 0 || rr >= dense.height || cc >= dense.width) continue;
          if (dense.at(rr, cc) != v) {
            boundary = true;
            break;
          }
        }
      }
      if (boundary) out.at(r, c) = kIgnoreLabel;
    }
  }
  return out;
}

std::uint16_t to_u16(double v) {
  return static_cast<std::uint16_t>(std::clamp(std::round(v), 0.0, 65535.0));
}

}  // namespace

SceneSpec SceneSpec::default_scene() {
  SceneSpec s;
  for (int id : {1, 2, 3, 5, 6}) s.classes.push_back({id, std::nullopt});
  return s;
}

SceneSpec SceneSpec::from_json(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("scene spec: ") + e.what());
  }
  static const std::set<std::string> known = {
      "raw_height", "raw_width", "crop_offset", "cube_height", "cube_width", "classes",
      "noise_sigma", "illumination_gradient", "signature_spread", "dark_level", "white_level"};
  for (const auto& [key, _] : doc.items()) {
    if (!known.contains(key)) throw ConfigError("scene spec: unknown key '" + key + "'");
  }
  SceneSpec s = default_scene();
  try {
    s.raw_height = doc.value("raw_height", s.raw_height);
    s.raw_width = doc.value("raw_width", s.raw_width);
    s.cube_height = doc.value("cube_height", s.cube_height);
    s.cube_width = doc.value("cube_width", s.cube_width);
    if (doc.contains("crop_offset")) {
      const auto off = doc["crop_offset"].get<std::array<Index, 2>>();
      s.crop_offset = {off[0], off[1]};
    }
    s.noise_sigma = doc.value("noise_sigma", s.noise_sigma);
    s.illumination_gradient = doc.value("illumination_gradient", s.illumination_gradient);
    s.signature_spread = doc.value("signature_spread", s.signature_spread);
    s.dark_level = doc.value("dark_level", s.dark_level);
    s.white_level = doc.value("white_level", s.white_level);
    if (doc.contains("classes")) {
      s.classes.clear();
      for (const auto& c : doc["classes"]) {
        SceneClass sc;
        if (c.is_number_integer()) {
          sc.source_id = c.get<int>();
        } else {
          sc.source_id = c.at("id").get<int>();
          if (c.contains("signature")) sc.signature = c["signature"].get<std::array<double, kMosaicBands>>();
        }
        s.classes.push_back(sc);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("scene spec: ") + e.what());
  }
  return s;
}

std::string SceneSpec::to_json() const {
  nlohmann::ordered_json doc;
  doc["raw_height"] = raw_height;
  doc["raw_width"] = raw_width;
  doc["crop_offset"] = {crop_offset.row, crop_offset.col};
  doc["cube_height"] = cube_height;
  doc["cube_width"] = cube_width;
  auto entries = nlohmann::ordered_json::array();
  for (const auto& c : this->classes) {
    nlohmann::ordered_json entry;
    entry["id"] = c.source_id;
    if (c.signature) entry["signature"] = *c.signature;
    entries.push_back(entry);
  }
  doc["classes"] = entries;
  doc["noise_sigma"] = noise_sigma;
  doc["illumination_gradient"] = illumination_gradient;
  doc["signature_spread"] = signature_spread;
  doc["dark_level"] = dark_level;
  doc["white_level"] = white_level;
  return doc.dump(2);
}

SynthScene synth_scene(const SceneSpec& spec, std::uint64_t seed) {
  if (spec.classes.size() < 2) throw ConfigError("scene spec needs at least two classes");
  std::set<int> ids;
  for (const auto& c : spec.classes) {
    if (c.source_id < 1 || c.source_id > kSourceClasses) throw ConfigError("scene class id must be 1..10");
    if (!ids.insert(c.source_id).second) throw ConfigError("duplicate scene class id");
  }
  if (spec.cube_height < 1 || spec.cube_width < 1 || spec.crop_offset.row < 0 || spec.crop_offset.col < 0 ||
      spec.crop_offset.row + kMosaicSide * spec.cube_height > spec.raw_height ||
      spec.crop_offset.col + kMosaicSide * spec.cube_width > spec.raw_width) {
    throw ConfigError("scene cube footprint does not fit inside the raw frame");
  }
  if (spec.noise_sigma < 0.0 || !(spec.white_level > spec.dark_level)) {
    throw ConfigError("scene noise must be non-negative and white level above dark level");
  }

  Rng rng(seed);
  SynthScene scene;

  std::array<double, 5> base{};
  for (auto& k : base) k = rng.uniform(0.2, 0.6);
  for (const auto& c : spec.classes) {
    std::array<double, 5> knots{};
    for (std::size_t k = 0; k < knots.size(); ++k) {
      knots[k] = std::clamp(base[k] + spec.signature_spread * rng.uniform(-0.3, 0.3), 0.02, 0.98);
    }
    scene.signatures.push_back(c.signature ? *c.signature : interpolate_knots(knots));
  }

  const LabelMap dense = paint_scene(spec, rng);
  scene.labels = weaken(dense);

  const Index H = spec.cube_height;
  const Index W = spec.cube_width;
  Tensor3<float> refl(H, W, kMosaicBands);
  std::array<int, kSourceClasses + 1> slot{};
  for (std::size_t i = 0; i < spec.classes.size(); ++i) slot[static_cast<std::size_t>(spec.classes[i].source_id)] = static_cast<int>(i);
  for (Index r = 0; r < H; ++r) {
    for (Index c = 0; c < W; ++c) {
      const auto& sig = scene.signatures[static_cast<std::size_t>(slot[dense.at(r, c)])];
      const double illum = 1.0 - spec.illumination_gradient * (W > 1 ? static_cast<double>(c) / (W - 1) : 0.0);
      for (int b = 0; b < kMosaicBands; ++b) {
        double v = sig[static_cast<std::size_t>(b)] * illum;
        if (spec.noise_sigma > 0.0) v += spec.noise_sigma * rng.normal();
        refl(r, c, b) = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  }

  CalibrationSet calib;
  calib.crop_offset = spec.crop_offset;
  calib.dark = RawMosaicFrame(spec.raw_height, spec.raw_width, 0, "dark reference");
  calib.white = RawMosaicFrame(spec.raw_height, spec.raw_width, 0, "white reference");
  for (auto& v : calib.dark.data) v = to_u16(spec.dark_level + rng.uniform(-20.0, 20.0));
  for (auto& v : calib.white.data) v = to_u16(spec.white_level + rng.uniform(-400.0, 400.0));

  RawMosaicFrame raw(spec.raw_height, spec.raw_width, 0, "synthetic seed=" + std::to_string(seed));
  for (Index R = 0; R < spec.raw_height; ++R) {
    const Index local_r = R - spec.crop_offset.row;
    const Index r = std::clamp<Index>(local_r >= 0 ? local_r / kMosaicSide : 0, 0, H - 1);
    const int dr = static_cast<int>(((local_r % kMosaicSide) + kMosaicSide) % kMosaicSide);
    for (Index C = 0; C < spec.raw_width; ++C) {
      const Index local_c = C - spec.crop_offset.col;
      const Index c = std::clamp<Index>(local_c >= 0 ? local_c / kMosaicSide : 0, 0, W - 1);
      const int dc = static_cast<int>(((local_c % kMosaicSide) + kMosaicSide) % kMosaicSide);
      const double d = calib.dark.at(R, C);
      const double w = calib.white.at(R, C);
      raw.at(R, C) = to_u16(d + refl(r, c, calib.layout.band(dr, dc)) * (w - d));
    }
  }

  scene.raw = std::move(raw);
  scene.calibration = std::move(calib);
  scene.reflectance = HyperCube(std::move(refl), CubeStage::reflectance);
  return scene;
}

}  // namespace hsd
