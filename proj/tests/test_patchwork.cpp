#include "doctest.h"
#include "hsdrive/patchwork.hpp"
#include "support.hpp"

using namespace hsd;

TEST_CASE("grid planning") {
  SUBCASE("canonical 3 x 6 grid") {
    const auto g = plan_grid(216, 409, 128, 3, 6);
    CHECK(g.count() == 18);
    CHECK(g.row_starts == std::vector<Index>{0, 44, 88});
    CHECK(g.col_starts == std::vector<Index>{0, 56, 112, 169, 225, 281});
    CHECK(g.row_starts[1] - g.row_starts[0] == 128 - 84);
  }
  SUBCASE("exact fit") {
    const auto g = plan_grid(128, 128, 128, 1, 1);
    CHECK(g.row_starts == std::vector<Index>{0});
    CHECK(g.col_starts == std::vector<Index>{0});
  }
  SUBCASE("invalid grids") {
    CHECK_THROWS_AS(plan_grid(216, 409, 128, 1, 6), ConfigError);
    CHECK_THROWS_AS(plan_grid(100, 409, 128, 3, 6), ConfigError);
    CHECK_THROWS_AS(plan_grid(216, 409, 128, 100, 6), ConfigError);
    CHECK_THROWS_AS(plan_grid(216, 409, 0, 3, 6), ConfigError);
  }
  SUBCASE("coverage of random valid grids") {
    Rng rng(8);
    for (int trial = 0; trial < 200; ++trial) {
      const Index P = 1 + static_cast<Index>(rng.below(40));
      const Index H = P + static_cast<Index>(rng.below(60));
      const Index W = P + static_cast<Index>(rng.below(60));
      const Index nr = (H + P - 1) / P + static_cast<Index>(rng.below(3));
      const Index nc = (W + P - 1) / P + static_cast<Index>(rng.below(3));
      PatchGrid g;
      try {
        g = plan_grid(H, W, P, nr, nc);
      } catch (const ConfigError&) {
        continue;  // more patches than distinct starts
      }
      CHECK(g.row_starts.back() + P == H);
      CHECK(g.col_starts.back() + P == W);
      for (Index r = 0; r < H; ++r)
        for (Index c = 0; c < W; ++c) REQUIRE(g.coverage(r, c) >= 1);
      CHECK(g.coverage(0, 0) == 1);
      CHECK(g.coverage(H - 1, W - 1) == 1);
      CHECK(g.coverage(0, W - 1) == 1);
      CHECK(g.coverage(H - 1, 0) == 1);
    }
  }
}

TEST_CASE("patch extraction") {
  const auto g = plan_grid(216, 409, 128, 3, 6);
  Tensor3<float> t(216, 409, 25);
  for (Index r = 0; r < 216; ++r)
    for (Index c = 0; c < 409; ++c)
      for (Index b = 0; b < 25; ++b) t(r, c, b) = static_cast<float>(r * 1000 + c) + 0.001f * b;
  const auto patches = extract(HyperCube{t, CubeStage::normalized}, g);
  REQUIRE(patches.size() == 18);
  for (const auto& p : patches) {
    CHECK(p.height() == 128);
    CHECK(p.width() == 128);
    CHECK(p.channels() == 25);
  }
  // patch (1, 2): origin (44, 112)
  CHECK(patches[8](0, 0, 0) == t(44, 112, 0));
  CHECK(patches[8](127, 127, 24) == t(171, 239, 24));
  // vertically adjacent patches share 84 rows
  for (Index r = 0; r < 84; ++r) REQUIRE(patches[0](44 + r, 5, 3) == patches[6](r, 5, 3));

  const auto flat = extract(Tensor3<float>(216, 409, 2, 0.5f), g);
  for (const auto& p : flat)
    for (float v : p.values()) REQUIRE(v == 0.5f);
  CHECK_THROWS_AS(extract(Tensor3<float>(200, 409, 2), g), DataError);
}

TEST_CASE("stitching") {
  SUBCASE("non-overlapping grid concatenates") {
    const auto g = plan_grid(4, 6, 2, 2, 3);
    std::vector<ScoreMap> scores;
    for (int i = 0; i < 6; ++i) {
      ScoreMap s(2, 2, 2, 0.0f);
      for (Index r = 0; r < 2; ++r)
        for (Index c = 0; c < 2; ++c) s(r, c, i % 2) = 1.0f;
      scores.push_back(s);
    }
    const auto m = stitch(scores, g);
    CHECK(m(0, 0, 0) == 1.0f);
    CHECK(m(0, 2, 1) == 1.0f);
    CHECK(m(3, 5, 1) == 1.0f);
  }
  SUBCASE("overlap averages probabilities") {
    const auto g2 = plan_grid(2, 3, 2, 1, 2);  // cols [0, 1] overlap on column 1
    ScoreMap a(2, 2, 2, 0.0f), b(2, 2, 2, 0.0f);
    for (Index r = 0; r < 2; ++r)
      for (Index c = 0; c < 2; ++c) {
        a(r, c, 0) = 1.0f;
        b(r, c, 1) = 1.0f;
      }
    const auto m = stitch({a, b}, g2);
    CHECK(m(0, 0, 0) == 1.0f);
    CHECK(m(0, 1, 0) == 0.5f);
    CHECK(m(0, 1, 1) == 0.5f);
    CHECK(m(1, 2, 1) == 1.0f);
  }
  SUBCASE("constant scores survive stitching") {
    const auto g = plan_grid(216, 409, 128, 3, 6);
    ScoreMap s(128, 128, 3);
    for (Index r = 0; r < 128; ++r)
      for (Index c = 0; c < 128; ++c) {
        s(r, c, 0) = 0.2f;
        s(r, c, 1) = 0.5f;
        s(r, c, 2) = 0.3f;
      }
    const auto m = stitch(std::vector<ScoreMap>(18, s), g);
    for (Index r = 0; r < 216; ++r)
      for (Index c = 0; c < 409; ++c) {
        REQUIRE(m(r, c, 0) == doctest::Approx(0.2f));
        REQUIRE(m(r, c, 1) == doctest::Approx(0.5f));
      }
  }
  SUBCASE("wrong patch count") {
    const auto g = plan_grid(216, 409, 128, 3, 6);
    CHECK_THROWS_AS(stitch(std::vector<ScoreMap>(17, ScoreMap(128, 128, 3)), g), DataError);
  }
}

TEST_CASE("argmax") {
  ScoreMap s(1, 4, 3);
  const float rows[4][3] = {{0.2f, 0.5f, 0.3f}, {0.5f, 0.5f, 0.0f}, {0.0f, 0.0f, 1.0f}, {0.3f, 0.3f, 0.3f}};
  for (Index c = 0; c < 4; ++c)
    for (Index k = 0; k < 3; ++k) s(0, c, k) = rows[c][k];
  const auto l = argmax_map(s);
  CHECK(l.labels == std::vector<std::uint8_t>{1, 0, 2, 0});

  Rng rng(4);
  auto r = test::random_tensor<float>(10, 10, 5, rng, 0.01, 1.0);
  auto scaled = r;
  for (Index y = 0; y < 10; ++y)
    for (Index x = 0; x < 10; ++x) {
      const float k = static_cast<float>(rng.uniform(0.5, 4.0));
      for (auto& v : scaled.pixel(y, x)) v *= k;
    }
  CHECK(argmax_map(r).labels == argmax_map(scaled).labels);
}

TEST_CASE("segment is independent of the worker count") {
  Rng rng(12);
  HyperCube cube{test::random_tensor<float>(216, 409, 4, rng, 0, 1), CubeStage::normalized};
  const auto g = plan_grid(216, 409, 128, 3, 6);
  PatchModel model = [](const Tensor3<float>& p) {
    ScoreMap s(p.height(), p.width(), 2);
    for (Index r = 0; r < p.height(); ++r)
      for (Index c = 0; c < p.width(); ++c) {
        s(r, c, 0) = p(r, c, 0);
        s(r, c, 1) = 1.0f - p(r, c, 0);
      }
    return s;
  };
  const auto one = segment(cube, g, model, 1);
  const auto four = segment(cube, g, model, 4);
  CHECK(one == four);
  CHECK_THROWS_AS(segment(cube, g, model, 0), ConfigError);
  PatchModel failing = [](const Tensor3<float>&) -> ScoreMap { throw NumericError("boom"); };
  CHECK_THROWS_AS(segment(cube, g, failing, 3), NumericError);
}
