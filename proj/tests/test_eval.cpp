#include <numeric>
#include <tuple>

#include "doctest.h"
#include "hsdrive/eval.hpp"
#include "hsdrive/preprocess.hpp"
#include "hsdrive/spectral.hpp"
#include "support.hpp"

using namespace hsd;

namespace {

ConfusionMatrix cm_of(std::initializer_list<std::initializer_list<std::int64_t>> rows) {
  ConfusionMatrix cm(static_cast<Index>(rows.size()), static_cast<Index>(rows.begin()->size()));
  Index r = 0;
  for (const auto& row : rows) {
    Index c = 0;
    for (auto v : row) cm(r, c++) = v;
    ++r;
  }
  return cm;
}

std::vector<double> ones(std::size_t n) { return std::vector<double>(n, 1.0); }

Gaussian<double> gauss1(double mean, double var) {
  Gaussian<double> g;
  g.mean = Eigen::VectorXd::Constant(1, mean);
  g.covariance = Eigen::MatrixXd::Constant(1, 1, var);
  return g;
}

}  // namespace

TEST_CASE("confusion matrix") {
  SUBCASE("hand enumeration") {
    LabelMap gt(1, 3, std::vector<std::uint8_t>{0, 0, 1});
    LabelMap pred(1, 3, std::vector<std::uint8_t>{0, 1, 1});
    CHECK(confusion(pred, gt, 2) == cm_of({{1, 1}, {0, 1}}));
  }
  SUBCASE("perfect prediction is diagonal") {
    Rng rng(1);
    LabelMap l(20, 20);
    for (auto& v : l.labels) v = static_cast<std::uint8_t>(rng.below(4));
    const auto cm = confusion(l, l, 4);
    CHECK(cm.sum() == 400);
    CHECK(cm.diagonal().sum() == 400);
  }
  SUBCASE("ignored ground truth is skipped") {
    LabelMap gt(3, 3, kIgnoreLabel);
    LabelMap pred(3, 3, 200);
    CHECK(confusion(pred, gt, 2).isZero());
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(confusion(LabelMap(2, 2, 5), LabelMap(2, 2, 0), 3), DataError);
    CHECK_THROWS_AS(confusion(LabelMap(2, 3), LabelMap(2, 2), 3), DataError);
  }
}

TEST_CASE("per-class metrics") {
  const auto r = metrics(cm_of({{8, 2}, {1, 9}}), ones(2));
  CHECK(r.per_class[0].accuracy == doctest::Approx(0.8));
  CHECK(r.per_class[0].precision == doctest::Approx(8.0 / 9.0));
  CHECK(r.per_class[0].iou == doctest::Approx(8.0 / 11.0));
  CHECK(std::abs(r.per_class[0].precision - 0.8889) < 1e-4);
  CHECK(std::abs(r.per_class[0].iou - 0.7273) < 1e-4);
  CHECK(r.per_class[1].accuracy == doctest::Approx(0.9));
  CHECK(r.supports == std::vector<std::int64_t>{10, 10});
  CHECK(r.overall.accuracy == doctest::Approx(17.0 / 20.0));
  CHECK(r.mean.iou == doctest::Approx(0.5 * (8.0 / 11.0 + 9.0 / 12.0)));

  const auto perfect = metrics(cm_of({{5, 0, 0}, {0, 7, 0}, {0, 0, 1}}), ones(3));
  for (const auto& m : {perfect.overall, perfect.mean, perfect.weighted}) {
    CHECK(m.accuracy == 1.0);
    CHECK(m.precision == 1.0);
    CHECK(m.iou == 1.0);
  }
}

TEST_CASE("empty-class conventions") {
  // class 2 never occurs and is never predicted; class 1 never occurs but is predicted
  const auto r = metrics(cm_of({{5, 1, 0}, {0, 0, 0}, {0, 0, 0}}), ones(3));
  CHECK(r.per_class[2].accuracy == 1.0);
  CHECK(r.per_class[2].precision == 1.0);
  CHECK(r.per_class[2].iou == 1.0);
  CHECK(r.per_class[1].accuracy == 0.0);
  CHECK(r.per_class[1].precision == 0.0);
  CHECK(r.per_class[1].iou == 0.0);
  CHECK(r.overall.accuracy == doctest::Approx(5.0 / 6.0));
}

TEST_CASE("aggregation identities") {
  Rng rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    const Index C = 2 + static_cast<Index>(rng.below(5));
    ConfusionMatrix cm(C, C);
    for (Index i = 0; i < cm.size(); ++i) cm.data()[i] = static_cast<std::int64_t>(rng.below(1000));
    cm(0, 0) += 1;
    const auto r = metrics(cm, ones(static_cast<std::size_t>(C)));
    const double global = static_cast<double>(cm.trace()) / static_cast<double>(cm.sum());
    REQUIRE(std::abs(r.overall.accuracy - global) < 1e-12);

    const ConfusionMatrix scaled = cm * 10;
    const auto s = metrics(scaled, ones(static_cast<std::size_t>(C)));
    for (std::size_t k = 0; k < r.per_class.size(); ++k) {
      REQUIRE(s.per_class[k].accuracy == doctest::Approx(r.per_class[k].accuracy).epsilon(1e-12));
      REQUIRE(s.per_class[k].precision == doctest::Approx(r.per_class[k].precision).epsilon(1e-12));
      REQUIRE(s.per_class[k].iou == doctest::Approx(r.per_class[k].iou).epsilon(1e-12));
    }
    REQUIRE(s.weighted.iou == doctest::Approx(r.weighted.iou).epsilon(1e-12));
  }
}

TEST_CASE("inverse-frequency weights") {
  const std::vector<double> supports{2067379, 99426, 820804, 163127, 363345};
  const auto w = inverse_frequency_weights(supports);
  CHECK(std::max_element(w.begin(), w.end()) - w.begin() == 1);
  CHECK(std::accumulate(w.begin(), w.end(), 0.0) == doctest::Approx(1.0));
  CHECK(inverse_frequency_weights(std::vector<double>{90, 10})[1] == doctest::Approx(0.9));
  CHECK(inverse_frequency_weights(std::vector<double>{5, 5})[0] == doctest::Approx(0.5));
  const auto z = inverse_frequency_weights(std::vector<double>{0, 3, 1});
  CHECK(z[0] == 0.0);
  CHECK(z[2] == doctest::Approx(0.75));
  CHECK_THROWS_AS(inverse_frequency_weights(std::vector<double>{0, 0}), ConfigError);
  CHECK_THROWS_AS(inverse_frequency_weights(std::vector<double>{-1, 2}), ConfigError);
  CHECK_THROWS_AS(metrics(cm_of({{1, 0}, {0, 1}}), ones(3)), ConfigError);

  // weighted aggregate follows the reference weights
  const auto r = metrics(cm_of({{10, 0}, {5, 5}}), std::vector<double>{90, 10});
  CHECK(r.weighted.accuracy == doctest::Approx(0.1 * 1.0 + 0.9 * 0.5));
}

TEST_CASE("report rendering") {
  const auto r = metrics(cm_of({{8, 2}, {1, 9}}), ones(2), {"Road", "Other"});
  const auto table = r.to_table();
  CHECK(table.find("Road") != std::string::npos);
  CHECK(table.find("80.00") != std::string::npos);
  CHECK(table.find("Weighted") != std::string::npos);
  const auto json = r.to_json();
  CHECK(json.find("\"iou\"") != std::string::npos);
  CHECK(json.find("\"Other\"") != std::string::npos);
}

TEST_CASE("JM distance closed form") {
  const auto a = gauss1(0.0, 1.0);
  CHECK(jm_distance(a, a, 1e-12) == 0.0);
  const double jm = jm_distance(a, gauss1(2.0, 1.0), 1e-12);
  CHECK(std::abs(jm - 2.0 * (1.0 - std::exp(-0.5))) < 1e-9);
  CHECK(std::abs(jm - 0.7869) < 1e-4);
  CHECK(std::abs(jm_distance(a, gauss1(100.0, 1.0), 1e-12) - 2.0) < 1e-6);
  CHECK(bhattacharyya(a, gauss1(2.0, 1.0), 1e-12) == doctest::Approx(0.5));
  // equal means, variances s1 and s2: B = ln((s1/s2 + s2/s1 + 2) / 4) / 4
  const double s1 = 1.0, s2 = 4.0;
  const double expect = 0.25 * std::log(0.25 * (s1 / s2 + s2 / s1 + 2.0));
  CHECK(bhattacharyya(a, gauss1(0.0, s2), 1e-14) == doctest::Approx(expect).epsilon(1e-9));
  CHECK_THROWS_AS(jm_distance(a, a, 0.0), ConfigError);
  Gaussian<double> two;
  two.mean = Eigen::Vector2d(0, 0);
  two.covariance = Eigen::Matrix2d::Identity();
  CHECK_THROWS_AS(jm_distance(a, two, 1e-6), DataError);
}

TEST_CASE("JM distance symmetry and range") {
  Rng rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    const Index n = 1 + static_cast<Index>(rng.below(6));
    auto random_gauss = [&] {
      Gaussian<double> g;
      g.mean = Eigen::VectorXd(n);
      for (Index i = 0; i < n; ++i) g.mean(i) = rng.uniform(-3, 3) * std::pow(10.0, rng.uniform(-2, 1));
      Eigen::MatrixXd A(n, n);
      for (Index i = 0; i < A.size(); ++i) A.data()[i] = rng.uniform(-1, 1);
      g.covariance = A * A.transpose() * std::pow(10.0, rng.uniform(-4, 1));
      return g;
    };
    const auto a = random_gauss();
    const auto b = random_gauss();
    const double eps = 1e-6;
    const double ab = jm_distance(a, b, eps);
    const double ba = jm_distance(b, a, eps);
    REQUIRE(ab == ba);
    REQUIRE(ab >= 0.0);
    REQUIRE(ab <= 2.0);
  }
}

TEST_CASE("JM distance agrees with a Monte-Carlo estimate") {
  Rng rng(21);
  for (int trial = 0; trial < 4; ++trial) {
    test::Gauss2 p{}, q{};
    auto fill = [&](test::Gauss2& g) {
      g.m[0] = rng.uniform(-1.5, 1.5);
      g.m[1] = rng.uniform(-1.5, 1.5);
      const double a = rng.uniform(0.3, 1.5), b = rng.uniform(0.3, 1.5), rho = rng.uniform(-0.7, 0.7);
      g.S[0][0] = a * a;
      g.S[1][1] = b * b;
      g.S[0][1] = g.S[1][0] = rho * a * b;
    };
    fill(p);
    fill(q);
    auto to_gauss = [](const test::Gauss2& g) {
      Gaussian<double> out;
      out.mean = Eigen::Vector2d(g.m[0], g.m[1]);
      out.covariance.resize(2, 2);
      out.covariance << g.S[0][0], g.S[0][1], g.S[1][0], g.S[1][1];
      return out;
    };
    const double closed = jm_distance(to_gauss(p), to_gauss(q), 1e-12);
    const double mc = test::monte_carlo_jm(p, q, 1'000'000, 100 + static_cast<std::uint64_t>(trial));
    MESSAGE("closed " << closed << " monte carlo " << mc);
    CHECK(std::abs(closed - mc) < 0.02);
  }
}

TEST_CASE("class statistics") {
  Rng rng(4);
  Tensor3<float> t(30, 40, 3);
  LabelMap l(30, 40);
  for (Index r = 0; r < 30; ++r)
    for (Index c = 0; c < 40; ++c) {
      const int k = c < 20 ? 0 : 1;
      l.at(r, c) = static_cast<std::uint8_t>(k);
      for (Index b = 0; b < 3; ++b) t(r, c, b) = static_cast<float>(10.0 * k + b + rng.normal());
    }
  l.at(0, 0) = kIgnoreLabel;
  t(0, 0, 0) = 1e6f;
  const auto s = class_stats({{HyperCube{t, CubeStage::normalized}, l}}, 2);
  CHECK(s.counts == std::vector<std::int64_t>{599, 600});

  // two-pass reference
  for (int k = 0; k < 2; ++k) {
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(3);
    std::vector<Eigen::VectorXd> xs;
    for (Index r = 0; r < 30; ++r)
      for (Index c = 0; c < 40; ++c)
        if (l.at(r, c) == k) {
          Eigen::VectorXd x(3);
          for (Index b = 0; b < 3; ++b) x(b) = t(r, c, b);
          xs.push_back(x);
          mean += x;
        }
    mean /= static_cast<double>(xs.size());
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(3, 3);
    for (const auto& x : xs) cov += (x - mean) * (x - mean).transpose();
    cov /= static_cast<double>(xs.size() - 1);
    CHECK((s.classes[static_cast<std::size_t>(k)].mean - mean).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((s.classes[static_cast<std::size_t>(k)].covariance - cov).cwiseAbs().maxCoeff() < 1e-9);
  }
  CHECK_THROWS_AS(class_stats({{HyperCube{t, CubeStage::normalized}, l}}, 3), DataError);

  const auto jm = jm_matrix(s);
  CHECK(jm(0, 0) == 0.0);
  CHECK(jm(0, 1) == jm(1, 0));
  CHECK(jm(0, 1) > 1.99);
  const auto csv = jm_csv(jm, {"A", "B"});
  CHECK(csv.starts_with(",A,B\nA,,"));
  CHECK(csv.find("\nMean,") != std::string::npos);
}

TEST_CASE("separable scenes classify better than confusable ones") {
  const auto scheme = ClassScheme::five_class();
  auto run = [&](double spread, std::uint64_t seed) {
    SceneSpec spec = SceneSpec::default_scene();
    spec.signature_spread = spread;
    spec.noise_sigma = 0.02;
    const auto scene = synth_scene(spec, seed);
    const auto cube = run_pipeline(scene.raw, scene.calibration, PreprocessConfig{}).cube;
    const auto labels = remap_labels(scene.labels, scheme);
    const auto jm = jm_matrix(class_stats({{cube, labels}}, scheme.classes()));
    double lo = 2.0, hi = 0.0;
    for (Index i = 0; i < jm.rows(); ++i)
      for (Index j = i + 1; j < jm.cols(); ++j) {
        lo = std::min(lo, jm(i, j));
        hi = std::max(hi, jm(i, j));
      }
    const auto train = gather_samples(cube, labels, 5);
    const auto model = elm_train(train.X, train.y, 50, 1e-3, seed);
    const auto test = gather_samples(cube, labels, 3);
    return std::tuple{lo, hi, accuracy(elm_predict(model, test.X), test.y)};
  };
  const auto [sep_lo, sep_hi, sep_acc] = run(1.0, 3);
  const auto [con_lo, con_hi, con_acc] = run(0.01, 3);
  MESSAGE("separable JM >= " << sep_lo << " accuracy " << sep_acc << "; confusable JM <= " << con_hi
                             << " accuracy " << con_acc);
  REQUIRE(sep_lo >= 1.9);
  REQUIRE(con_hi <= 1.0);
  CHECK(sep_acc > con_acc);
}
