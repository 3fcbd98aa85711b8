#include <cctype>
#include <limits>
#include <string>

#include "binary_io.hpp"
#include "hsdrive/hypercube.hpp"
#include "json.hpp"

namespace hsd {
namespace {

using detail::ByteReader;
using detail::ByteWriter;

constexpr std::string_view kTagPrefix = "exposure_tag: ";
constexpr Index kMaxDim = 1 << 20;

struct PgmHeader {
  Index width = 0;
  Index height = 0;
  int maxval = 0;
  std::string tag;
  std::size_t data_offset = 0;
};

PgmHeader parse_pgm_header(std::string_view bytes, const std::string& ctx) {
  if (bytes.size() < 2 || bytes.substr(0, 2) != "P5") throw FormatError(ctx + ": not a binary PGM (P5)");
  PgmHeader h;
  std::size_t pos = 2;
  long long fields[3] = {0, 0, 0};
  for (int f = 0; f < 3; ++f) {
    // whitespace and comments
    for (;;) {
      if (pos >= bytes.size()) throw FormatError(ctx + ": truncated PGM header");
      const char ch = bytes[pos];
      if (ch == '#') {
        const auto eol = bytes.find('\n', pos);
        if (eol == std::string_view::npos) throw FormatError(ctx + ": truncated PGM comment");
        auto comment = bytes.substr(pos + 1, eol - pos - 1);
        while (!comment.empty() && comment.front() == ' ') comment.remove_prefix(1);
        if (comment.starts_with(kTagPrefix)) h.tag = std::string(comment.substr(kTagPrefix.size()));
        pos = eol + 1;
      } else if (std::isspace(static_cast<unsigned char>(ch))) {
        ++pos;
      } else {
        break;
      }
    }
    if (!std::isdigit(static_cast<unsigned char>(bytes[pos]))) throw FormatError(ctx + ": malformed PGM header");
    long long v = 0;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      v = v * 10 + (bytes[pos] - '0');
      if (v > kMaxDim * 16) throw FormatError(ctx + ": PGM header value too large");
      ++pos;
    }
    fields[f] = v;
  }
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
    throw FormatError(ctx + ": malformed PGM header terminator");
  }
  h.width = fields[0];
  h.height = fields[1];
  h.maxval = static_cast<int>(fields[2]);
  h.data_offset = pos + 1;
  if (h.width <= 0 || h.height <= 0 || h.width > kMaxDim || h.height > kMaxDim) {
    throw FormatError(ctx + ": invalid PGM dimensions");
  }
  return h;
}

std::string pgm_header(Index width, Index height, int maxval, const std::string& tag) {
  std::string out = "P5\n";
  if (!tag.empty()) {
    if (tag.find('\n') != std::string::npos) throw DataError("exposure tag must be a single line");
    out += "# ";
    out += kTagPrefix;
    out += tag;
    out += '\n';
  }
  out += std::to_string(width) + " " + std::to_string(height) + "\n" + std::to_string(maxval) + "\n";
  return out;
}

}  // namespace

RawMosaicFrame load_raw(const std::filesystem::path& path) {
  const auto bytes = detail::read_file(path);
  const auto ctx = path.string();
  const auto h = parse_pgm_header(bytes, ctx);
  if (h.maxval != 65535) throw FormatError(ctx + ": raw frames must be 16-bit PGM (maxval 65535)");
  const auto n = static_cast<std::size_t>(h.width * h.height);
  if (bytes.size() - h.data_offset != 2 * n) throw FormatError(ctx + ": PGM payload length mismatch");
  std::vector<std::uint16_t> data(n);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + h.data_offset);
  for (std::size_t i = 0; i < n; ++i) {
    data[i] = static_cast<std::uint16_t>((p[2 * i] << 8) | p[2 * i + 1]);  // PGM is big-endian
  }
  try {
    return RawMosaicFrame(h.height, h.width, std::move(data), h.tag);
  } catch (const DataError& e) {
    throw FormatError(ctx + ": " + e.what());
  }
}

void save_raw(const RawMosaicFrame& frame, const std::filesystem::path& path) {
  std::string out = pgm_header(frame.width, frame.height, 65535, frame.exposure_tag);
  out.reserve(out.size() + 2 * frame.data.size());
  for (auto v : frame.data) {
    out.push_back(static_cast<char>(v >> 8));
    out.push_back(static_cast<char>(v & 0xFF));
  }
  detail::write_file_atomic(path, out);
}

LabelMap load_labels(const std::filesystem::path& path) {
  const auto bytes = detail::read_file(path);
  const auto ctx = path.string();
  const auto h = parse_pgm_header(bytes, ctx);
  if (h.maxval != 255) throw FormatError(ctx + ": label maps must be 8-bit PGM (maxval 255)");
  const auto n = static_cast<std::size_t>(h.width * h.height);
  if (bytes.size() - h.data_offset != n) throw FormatError(ctx + ": PGM payload length mismatch");
  std::vector<std::uint8_t> data(bytes.begin() + static_cast<std::ptrdiff_t>(h.data_offset), bytes.end());
  return LabelMap(h.height, h.width, std::move(data));
}

void save_labels(const LabelMap& labels, const std::filesystem::path& path) {
  std::string out = pgm_header(labels.width, labels.height, 255, {});
  out.append(reinterpret_cast<const char*>(labels.labels.data()), labels.labels.size());
  detail::write_file_atomic(path, out);
}

// HSC: "HSC1" | u8 stage | u8 reserved | u16 bands | u32 height | u32 width |
// float32 payload, band-major then row-major. All little-endian.
HyperCube load_cube(const std::filesystem::path& path) {
  const auto bytes = detail::read_file(path);
  ByteReader in(bytes, path.string());
  if (in.get_bytes(4) != "HSC1") throw FormatError(path.string() + ": bad HSC magic");
  const auto stage_code = in.get<std::uint8_t>();
  in.get<std::uint8_t>();
  const auto bands = in.get<std::uint16_t>();
  const auto height = in.get<std::uint32_t>();
  const auto width = in.get<std::uint32_t>();
  if (stage_code > 3) throw FormatError(path.string() + ": unknown stage code");
  if (height > kMaxDim || width > kMaxDim) throw FormatError(path.string() + ": dimension overflow");
  const std::uint64_t count = std::uint64_t{height} * width * bands;
  if (count * 4 != in.remaining()) throw FormatError(path.string() + ": HSC payload length mismatch");

  Tensor3<float> values(height, width, bands);
  for (Index b = 0; b < bands; ++b) {
    for (Index r = 0; r < static_cast<Index>(height); ++r) {
      for (Index c = 0; c < static_cast<Index>(width); ++c) values(r, c, b) = in.get<float>();
    }
  }
  return HyperCube(std::move(values), static_cast<CubeStage>(stage_code));
}

void save_cube(const HyperCube& cube, const std::filesystem::path& path) {
  if (cube.bands() > std::numeric_limits<std::uint16_t>::max()) throw DataError("too many bands for HSC");
  ByteWriter out;
  out.reserve(16 + static_cast<std::size_t>(cube.values.size()) * 4);
  out.put_bytes("HSC1");
  out.put(static_cast<std::uint8_t>(cube.stage));
  out.put(std::uint8_t{0});
  out.put(static_cast<std::uint16_t>(cube.bands()));
  out.put(static_cast<std::uint32_t>(cube.height()));
  out.put(static_cast<std::uint32_t>(cube.width()));
  for (Index b = 0; b < cube.bands(); ++b) {
    for (Index r = 0; r < cube.height(); ++r) {
      for (Index c = 0; c < cube.width(); ++c) out.put(cube.values(r, c, b));
    }
  }
  detail::write_file_atomic(path, out.bytes());
}

CalibrationSet load_calibration(const std::filesystem::path& json_path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(detail::read_file(json_path));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(json_path.string() + ": " + e.what());
  }
  const auto dir = json_path.parent_path();
  CalibrationSet calib;
  try {
    calib.dark = load_raw(dir / doc.at("dark").get<std::string>());
    calib.white = load_raw(dir / doc.at("white").get<std::string>());
    if (doc.contains("layout")) {
      calib.layout = MosaicLayout(doc.at("layout").get<std::array<int, kMosaicBands>>());
    }
    if (doc.contains("crop_offset")) {
      const auto off = doc.at("crop_offset").get<std::array<Index, 2>>();
      calib.crop_offset = {off[0], off[1]};
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(json_path.string() + ": " + e.what());
  }
  return calib;
}

void save_calibration(const CalibrationSet& calib, const std::filesystem::path& json_path) {
  const auto dir = json_path.parent_path();
  const auto stem = json_path.stem().string();
  const auto dark_name = stem + "_dark.pgm";
  const auto white_name = stem + "_white.pgm";
  save_raw(calib.dark, dir / dark_name);
  save_raw(calib.white, dir / white_name);
  nlohmann::ordered_json doc;
  doc["dark"] = dark_name;
  doc["white"] = white_name;
  doc["layout"] = calib.layout.bands();
  doc["crop_offset"] = {calib.crop_offset.row, calib.crop_offset.col};
  detail::write_file_atomic(json_path, doc.dump(2) + "\n");
}

}  // namespace hsd
