#include "doctest.h"
#include "hsdrive/preprocess.hpp"
#include "support.hpp"

using namespace hsd;

namespace {

HyperCube band_cube(Index h, Index w, Index b, CubeStage stage, float (*f)(Index, Index, Index)) {
  Tensor3<float> t(h, w, b);
  for (Index r = 0; r < h; ++r)
    for (Index c = 0; c < w; ++c)
      for (Index k = 0; k < b; ++k) t(r, c, k) = f(r, c, k);
  return {t, stage};
}

}  // namespace

TEST_CASE("crop") {
  RawMosaicFrame f(1088, 2048, 777);
  f.at(4, 1) = 1;
  f.at(4 + 1079, 1 + 2044) = 2;
  const auto out = crop(f, {4, 1});
  CHECK(out.height == 1080);
  CHECK(out.width == 2045);
  CHECK(out.at(0, 0) == 1);
  CHECK(out.at(1079, 2044) == 2);
  CHECK(std::count(out.data.begin(), out.data.end(), 777) == 1080 * 2045 - 2);
  CHECK_THROWS_AS(crop(f, {9, 0}), ConfigError);
  CHECK_THROWS_AS(crop(f, {0, 4}), ConfigError);
  CHECK_NOTHROW(crop(f, {8, 3}));
}

TEST_CASE("reflectance correction") {
  RawMosaicFrame dark(5, 10, 1000);
  RawMosaicFrame white(5, 10, 51000);
  SUBCASE("white target") {
    const auto R = reflectance_correct(white, dark, white);
    CHECK((R == 1.0f).all());
  }
  SUBCASE("dark target") {
    const auto R = reflectance_correct(dark, dark, white);
    CHECK((R == 0.0f).all());
  }
  SUBCASE("midpoint") {
    const auto R = reflectance_correct(RawMosaicFrame(5, 10, 26000), dark, white);
    CHECK((R - 0.5f).abs().maxCoeff() < 1e-7f);
  }
  SUBCASE("clamped and guarded") {
    RawMosaicFrame I(5, 10, 60000);
    I.at(0, 0) = 10;
    RawMosaicFrame w = white;
    w.at(1, 1) = 1000;  // dead cell: W == D
    const auto R = reflectance_correct(I, dark, w);
    CHECK(R(0, 1) == 1.0f);
    CHECK(R(0, 0) == 0.0f);
    CHECK(R(1, 1) == 0.0f);
  }
  SUBCASE("shape mismatch") {
    CHECK_THROWS_AS(reflectance_correct(RawMosaicFrame(5, 5), dark, white), DataError);
  }
}

TEST_CASE("partial demosaicing") {
  SUBCASE("canonical size") {
    ReflectanceFrame f = ReflectanceFrame::Constant(1080, 2045, 0.25f);
    const auto cube = demosaic(f, MosaicLayout{});
    CHECK(cube.height() == 216);
    CHECK(cube.width() == 409);
    CHECK(cube.bands() == 25);
    CHECK(cube.stage == CubeStage::reflectance);
    for (float v : cube.values.values()) REQUIRE(v == 0.25f);
  }
  SUBCASE("cell (dr, dc) lands in band 5 dr + dc") {
    ReflectanceFrame f(20, 15);
    for (Index r = 0; r < 20; ++r)
      for (Index c = 0; c < 15; ++c) f(r, c) = static_cast<float>(5 * (r % 5) + c % 5);
    const auto cube = demosaic(f, MosaicLayout{});
    for (Index r = 0; r < 4; ++r)
      for (Index c = 0; c < 3; ++c)
        for (Index b = 0; b < 25; ++b) REQUIRE(cube.values(r, c, b) == static_cast<float>(b));
  }
  SUBCASE("non-identity layout") {
    std::array<int, kMosaicBands> order{};
    for (int i = 0; i < kMosaicBands; ++i) order[static_cast<std::size_t>(i)] = (i * 7) % 25;
    ReflectanceFrame f(5, 5);
    for (Index r = 0; r < 5; ++r)
      for (Index c = 0; c < 5; ++c) f(r, c) = static_cast<float>(5 * r + c);
    const auto cube = demosaic(f, MosaicLayout(order));
    for (int cell = 0; cell < 25; ++cell) CHECK(cube.values(0, 0, order[static_cast<std::size_t>(cell)]) == cell);
  }
  SUBCASE("frame not a whole number of macropixels") {
    CHECK_THROWS_AS(demosaic(ReflectanceFrame::Zero(12, 10), MosaicLayout{}), DataError);
  }
}

TEST_CASE("band alignment") {
  const auto ramp = band_cube(12, 20, 25, CubeStage::reflectance,
                              [](Index, Index c, Index) { return static_cast<float>(c); });
  const auto out = align_bands(ramp, MosaicLayout{});
  CHECK(out.stage == CubeStage::aligned);
  SUBCASE("centre cell is untouched") {
    for (Index r = 0; r < 12; ++r)
      for (Index c = 0; c < 20; ++c) REQUIRE(out.values(r, c, 12) == ramp.values(r, c, 12));
  }
  SUBCASE("ramp shifts by the sub-macropixel offset") {
    // band 10 sits at offset (2, 0): shifted 0.4 macropixels along columns
    for (Index r = 0; r < 12; ++r)
      for (Index c = 1; c < 18; ++c) REQUIRE(out.values(r, c, 10) == doctest::Approx(c + 0.4).epsilon(1e-6));
    // band 14 at (2, 4): shifted the other way
    for (Index c = 1; c < 18; ++c) REQUIRE(out.values(3, c, 14) == doctest::Approx(c - 0.4).epsilon(1e-6));
  }
  SUBCASE("constants are invariant") {
    const auto flat = band_cube(6, 6, 25, CubeStage::reflectance, [](Index, Index, Index b) { return 0.1f * b; });
    const auto a = align_bands(flat, MosaicLayout{});
    for (Index r = 0; r < 6; ++r)
      for (Index c = 0; c < 6; ++c)
        for (Index b = 0; b < 25; ++b) REQUIRE(a.values(r, c, b) == doctest::Approx(0.1f * b));
  }
  SUBCASE("wrong stage") {
    CHECK_THROWS_AS(align_bands(out, MosaicLayout{}), DataError);
  }
}

TEST_CASE("median filter") {
  SUBCASE("k = 1 is the identity") {
    Rng rng(2);
    HyperCube c{test::random_tensor<float>(7, 9, 3, rng, 0, 1), CubeStage::aligned};
    CHECK(median_filter(c, 1).values == c.values);
  }
  SUBCASE("isolated spike") {
    HyperCube c{Tensor3<float>(3, 3, 1, 0.0f), CubeStage::aligned};
    c.values(1, 1, 0) = 9.0f;
    CHECK(median_filter(c, 3).values(1, 1, 0) == 0.0f);
  }
  SUBCASE("constant band") {
    HyperCube c{Tensor3<float>(5, 4, 2, 0.3f), CubeStage::reflectance};
    const auto m = median_filter(c, 5);
    CHECK(m.values == c.values);
    CHECK(m.stage == CubeStage::filtered);
  }
  SUBCASE("idempotent on piecewise-constant images away from edges") {
    const auto c = band_cube(20, 20, 1, CubeStage::aligned,
                             [](Index r, Index col, Index) { return (r < 10) != (col < 7) ? 1.0f : 0.0f; });
    const auto once = median_filter(c, 3);
    const auto twice = median_filter({once.values, CubeStage::aligned}, 3);
    CHECK(once.values == twice.values);
  }
  SUBCASE("bad kernel and stage") {
    HyperCube c{Tensor3<float>(3, 3, 1), CubeStage::aligned};
    CHECK_THROWS_AS(median_filter(c, 2), ConfigError);
    CHECK_THROWS_AS(median_filter({c.values, CubeStage::normalized}, 3), DataError);
  }
}

TEST_CASE("band normalisation") {
  SUBCASE("per band min-max") {
    Tensor3<float> t(1, 3, 2);
    t(0, 0, 0) = 0.2f;
    t(0, 1, 0) = 0.7f;
    t(0, 2, 0) = 0.45f;
    for (Index c = 0; c < 3; ++c) t(0, c, 1) = 0.6f;
    const auto n = normalize({t, CubeStage::filtered}, NormalizationMode::per_band_minmax);
    CHECK(n.stage == CubeStage::normalized);
    CHECK(n.values(0, 2, 0) == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(n.values(0, 0, 0) == 0.0f);
    CHECK(n.values(0, 1, 0) == 1.0f);
    for (Index c = 0; c < 3; ++c) CHECK(n.values(0, c, 1) == 0.0f);
  }
  SUBCASE("per pixel max") {
    Tensor3<float> t(1, 1, 5, std::vector<float>{0.1f, 0.2f, 0.5f, 0.3f, 0.4f});
    const auto n = normalize({t, CubeStage::filtered}, NormalizationMode::per_pixel_max);
    CHECK(n.values(0, 0, 2) == 1.0f);
    CHECK(n.values(0, 0, 0) == doctest::Approx(0.2));
    Tensor3<float> z(1, 1, 3, 0.0f);
    CHECK(normalize({z, CubeStage::filtered}, NormalizationMode::per_pixel_max).values == z);
  }
  SUBCASE("requires a filtered cube") {
    CHECK_THROWS_AS(normalize({Tensor3<float>(1, 1, 1), CubeStage::aligned}, NormalizationMode::per_band_minmax),
                    DataError);
  }
}

TEST_CASE("preprocess config JSON") {
  PreprocessConfig c;
  c.median_kernel = 5;
  c.alignment = AlignmentMode::off;
  const auto back = PreprocessConfig::from_json(c.to_json());
  CHECK(back.to_json() == c.to_json());
  CHECK(PreprocessConfig::from_json("{}").median_kernel == 3);
  CHECK_THROWS_AS(PreprocessConfig::from_json(R"({"median": 3})"), ConfigError);
  CHECK_THROWS_AS(PreprocessConfig::from_json(R"({"median_kernel": 4})"), ConfigError);
  CHECK_THROWS_AS(PreprocessConfig::from_json(R"({"normalization": "zscore"})"), ConfigError);
  CHECK_THROWS_AS(PreprocessConfig::from_json(R"({"median_kernel": "3"})"), ConfigError);
}

TEST_CASE("full pipeline") {
  const auto scene = synth_scene(SceneSpec::default_scene(), 5);
  const auto result = run_pipeline(scene.raw, scene.calibration, PreprocessConfig{});
  const auto& cube = result.cube;

  SUBCASE("shape and stage") {
    CHECK(cube.height() == 216);
    CHECK(cube.width() == 409);
    CHECK(cube.bands() == 25);
    CHECK(cube.stage == CubeStage::normalized);
    CHECK_NOTHROW(cube.validate());
  }
  SUBCASE("stage timing accounts for six named stages") {
    const auto& t = result.timing;
    REQUIRE(t.stages.size() == 6);
    double sum = 0.0;
    for (std::size_t i = 0; i < 6; ++i) {
      CHECK(t.stages[i].first == preprocess_stage_names()[i]);
      CHECK(t.stages[i].second >= 0.0);
      sum += t.stages[i].second;
    }
    CHECK(t.total_ms == doctest::Approx(sum).epsilon(1e-12));
    CHECK(preprocess_stage_names().front() == "Image cropping");
    CHECK(preprocess_stage_names().back() == "Band normalization");
  }
  SUBCASE("deterministic") {
    const auto again = run_pipeline(scene.raw, scene.calibration, PreprocessConfig{});
    CHECK(again.cube.values == cube.values);
  }
  SUBCASE("alignment off still reports the stage") {
    PreprocessConfig c;
    c.alignment = AlignmentMode::off;
    const auto r = run_pipeline(scene.raw, scene.calibration, c);
    CHECK(r.timing.stages.size() == 6);
    CHECK(r.cube.stage == CubeStage::normalized);
  }
  SUBCASE("mismatched calibration") {
    CalibrationSet bad = scene.calibration;
    bad.dark = RawMosaicFrame(1088, 2047);
    CHECK_THROWS_AS(run_pipeline(scene.raw, bad, PreprocessConfig{}), DataError);
  }
}

TEST_CASE("demosaicing inverts the synthetic mosaic") {
  SceneSpec spec = SceneSpec::default_scene();
  spec.noise_sigma = 0.0;
  const auto scene = synth_scene(spec, 17);
  const auto& cal = scene.calibration;
  const auto off = cal.crop_offset;
  const auto R = reflectance_correct(crop(scene.raw, off), crop(cal.dark, off), crop(cal.white, off));
  const auto cube = demosaic(R, cal.layout);
  REQUIRE(cube.values.same_shape(scene.reflectance.values));
  double worst = 0.0;
  for (std::size_t i = 0; i < cube.values.storage().size(); ++i) {
    worst = std::max(worst, static_cast<double>(std::abs(cube.values.storage()[i] -
                                                         scene.reflectance.values.storage()[i])));
  }
  // only 16-bit quantisation of the raw frame separates the two
  CHECK(worst < 1e-4);
}

TEST_CASE("pipeline output stays in [0, 1] for arbitrary 16-bit input") {
  Rng rng(99);
  for (int trial = 0; trial < 3; ++trial) {
    CalibrationSet cal;
    RawMosaicFrame raw(1088, 2048), dark(1088, 2048), white(1088, 2048);
    for (std::size_t i = 0; i < raw.data.size(); ++i) {
      raw.data[i] = static_cast<std::uint16_t>(rng.below(65536));
      dark.data[i] = static_cast<std::uint16_t>(rng.below(65536));
      white.data[i] = static_cast<std::uint16_t>(rng.below(65536));
    }
    cal.dark = dark;
    cal.white = white;
    PreprocessConfig cfg;
    cfg.normalization = trial % 2 == 0 ? NormalizationMode::per_band_minmax : NormalizationMode::per_pixel_max;
    const auto cube = run_pipeline(raw, cal, cfg).cube;
    for (float v : cube.values.values()) {
      REQUIRE(std::isfinite(v));
      REQUIRE(v >= 0.0f);
      REQUIRE(v <= 1.0f);
    }
  }
}
