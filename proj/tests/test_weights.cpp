#include <cstring>
#include <fstream>

#include "doctest.h"
#include "hsdrive/fcn.hpp"
#include "hsdrive/weights.hpp"
#include "support.hpp"

using namespace hsd;

namespace {

// Minimal independent HSWT encoder, written from the format description.
struct Hand {
  std::string b;
  void u8(unsigned v) { b.push_back(static_cast<char>(v)); }
  void u16(unsigned v) {
    u8(v & 0xFF);
    u8((v >> 8) & 0xFF);
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8((v >> (8 * i)) & 0xFF);
  }
  void str(const std::string& s) {
    u16(static_cast<unsigned>(s.size()));
    b += s;
  }
  void f32(float f) {
    std::uint32_t u = 0;
    std::memcpy(&u, &f, 4);
    u32(u);
  }
};

std::string hand_file(bool duplicate) {
  Hand h;
  h.b = "HSWT";
  h.u16(1);
  h.u16(3);
  h.str("a.w");
  h.u8(0);
  h.u8(2);
  h.u32(2);
  h.u32(1);
  h.f32(1.5f);
  h.f32(-0.25f);
  h.str(duplicate ? "a.w" : "a.q");
  h.u8(1);
  h.u8(1);
  h.u32(3);
  h.u8(0x80);
  h.u8(0x00);
  h.u8(0x7F);
  h.str("a.b");
  h.u8(2);
  h.u8(1);
  h.u32(1);
  h.u32(0xFFFFFFFEu);
  h.u16(2);
  h.str("model");
  h.str("unet");
  h.str("qf.a.w");
  h.str("-3");
  return h.b;
}

}  // namespace

TEST_CASE("parse a hand-assembled HSWT file") {
  const auto bytes = hand_file(false);
  const auto store = parse_weights(bytes);
  REQUIRE(store.tensors().size() == 3);
  CHECK(store.get("a.w").dims == std::vector<std::uint32_t>{2, 1});
  CHECK(store.get("a.w").values<float>() == std::vector<float>{1.5f, -0.25f});
  CHECK(store.get("a.q").values<std::int8_t>() == std::vector<std::int8_t>{-128, 0, 127});
  CHECK(store.get("a.b").values<std::int32_t>() == std::vector<std::int32_t>{-2});
  CHECK(store.meta("model") == "unet");
  CHECK(store.meta("qf.a.w") == "-3");
  CHECK_FALSE(store.meta("absent").has_value());
  // the reader and writer agree byte for byte
  CHECK(serialize_weights(store) == bytes);
}

TEST_CASE("malformed HSWT files") {
  const auto good = hand_file(false);
  CHECK_THROWS_AS(parse_weights(hand_file(true)), FormatError);
  auto bad = good;
  bad[0] = 'X';
  CHECK_THROWS_AS(parse_weights(bad), FormatError);
  bad = good;
  bad[4] = 2;
  CHECK_THROWS_AS(parse_weights(bad), FormatError);
  CHECK_THROWS_AS(parse_weights(good.substr(0, good.size() - 1)), FormatError);
  CHECK_THROWS_AS(parse_weights(good + "x"), FormatError);
  bad = good;
  bad[8 + 2 + 3] = 7;  // dtype of the first tensor
  CHECK_THROWS_AS(parse_weights(bad), FormatError);
  CHECK_THROWS_AS(parse_weights(""), FormatError);
}

TEST_CASE("weight store access") {
  const auto store = parse_weights(hand_file(false));
  CHECK_THROWS_AS(store.get("nope"), WeightError);
  CHECK_THROWS_AS(store.get("a.w", {1, 2}), WeightError);
  CHECK_THROWS_AS(store.get("a.w").values<std::int8_t>(), WeightError);
  WeightStore s;
  s.add("x", {2}, std::vector<float>{1, 2});
  CHECK_THROWS_AS(s.add("x", {1}, std::vector<float>{1}), WeightError);
  CHECK_THROWS_AS(s.add("y", {3}, std::vector<float>{1}), DataError);
  s.set_meta("k", "1");
  s.set_meta("k", "2");
  CHECK(s.metadata().size() == 1);
  CHECK(s.meta("k") == "2");
}

TEST_CASE("save and load") {
  test::TempDir dir("hswt");
  const auto g = build_unet(UNetConfig{});
  const auto w = init_weights(g, 33);
  save_weights(w, dir / "w.hswt");
  const auto back = load_weights(dir / "w.hswt");
  CHECK(back == w);
  save_weights(back, dir / "w2.hswt");
  std::ifstream a(dir / "w.hswt", std::ios::binary), b(dir / "w2.hswt", std::ios::binary);
  const std::string sa{std::istreambuf_iterator<char>(a), {}};
  const std::string sb{std::istreambuf_iterator<char>(b), {}};
  CHECK(sa == sb);
  CHECK_THROWS_AS(load_weights(dir / "missing.hswt"), FormatError);
  CHECK_FALSE(std::filesystem::exists(dir / "w.hswt.tmp"));
}
