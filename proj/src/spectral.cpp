#include "hsdrive/spectral.hpp"

#include <cmath>
#include <set>

#include "hsdrive/random.hpp"

namespace hsd {

std::vector<Index> mlp_sizes(Index bands, Index classes) { return {bands, 25, 100, 100, classes}; }

ScoreMap mlp_forward(const WeightStore& weights, const HyperCube& cube) {
  using RowMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  if (!weights.contains("fc1.w")) throw WeightError("MLP weights need fc1.w");
  const auto graph = infer_graph(weights);
  if (graph.in_channels != cube.bands()) {
    throw WeightError("MLP expects " + std::to_string(graph.in_channels) + " bands, cube has " +
                      std::to_string(cube.bands()));
  }
  RowMatrix act = cube.values.as_matrix();
  const auto layers = expected_tensors(graph);
  for (std::size_t i = 0; i < layers.size(); i += 2) {
    const auto& w = weights.get(layers[i].first, layers[i].second);
    const auto& b = weights.get(layers[i + 1].first, layers[i + 1].second);
    const auto out = static_cast<Index>(w.dims[0]);
    const auto in = static_cast<Index>(w.dims[1]);
    Eigen::Map<const RowMatrix> W(w.values<float>().data(), out, in);
    Eigen::Map<const Eigen::RowVectorXf> bias(b.values<float>().data(), out);
    RowMatrix next = (act.cast<double>() * W.transpose().cast<double>()).cast<float>();
    next.rowwise() += bias;
    if (i + 2 < layers.size()) next = next.cwiseMax(0.0f);
    act = std::move(next);
  }
  Tensor3<float> logits(cube.height(), cube.width(), act.cols());
  logits.as_matrix() = act;
  return softmax(logits);
}

namespace {

Eigen::MatrixXd one_hot(const std::vector<int>& y, Index classes) {
  Eigen::MatrixXd Y = Eigen::MatrixXd::Zero(static_cast<Index>(y.size()), classes);
  for (std::size_t i = 0; i < y.size(); ++i) Y(static_cast<Index>(i), y[i]) = 1.0;
  return Y;
}

}  // namespace

Eigen::MatrixXd elm_hidden(const Elm& model, const Eigen::MatrixXd& X) {
  if (X.cols() != model.input_weights.rows()) throw DataError("ELM input width mismatch");
  Eigen::MatrixXd Z = X * model.input_weights;
  Z.rowwise() += model.hidden_bias.transpose();
  return (1.0 / (1.0 + (-Z.array()).exp())).matrix();
}

Elm elm_train(const Eigen::MatrixXd& X, const std::vector<int>& y, Index hidden, double ridge,
              std::uint64_t seed) {
  if (static_cast<Index>(y.size()) != X.rows()) throw DataError("ELM: label count differs from sample count");
  if (hidden < 1) throw ConfigError("ELM hidden size must be positive");
  if (ridge < 0.0) throw ConfigError("ELM ridge must be non-negative");
  int classes = 0;
  for (int v : y) {
    if (v < 0) throw DataError("ELM: negative label");
    classes = std::max(classes, v + 1);
  }
  if (X.rows() < classes) throw DataError("ELM: fewer samples than classes");

  Rng rng(seed);
  Elm m;
  m.ridge = ridge;
  m.input_weights.resize(X.cols(), hidden);
  m.hidden_bias.resize(hidden);
  // one unit at a time, so a smaller model's units are a prefix of a larger one's
  for (Index j = 0; j < hidden; ++j) {
    for (Index i = 0; i < X.cols(); ++i) m.input_weights(i, j) = rng.uniform(-1.0, 1.0);
    m.hidden_bias(j) = rng.uniform(-1.0, 1.0);
  }

  const Eigen::MatrixXd H = elm_hidden(m, X);
  const Eigen::MatrixXd Y = one_hot(y, classes);
  Eigen::MatrixXd gram = H.transpose() * H;
  gram.diagonal().array() += ridge;
  if (ridge == 0.0) {
    Eigen::FullPivLU<Eigen::MatrixXd> lu(gram);
    if (lu.rank() < hidden) throw NumericError("ELM normal equations are singular; use a positive ridge");
    m.output_weights = lu.solve(H.transpose() * Y);
  } else {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
    if (ldlt.info() != Eigen::Success) throw NumericError("ELM normal equations could not be factorised");
    m.output_weights = ldlt.solve(H.transpose() * Y);
  }
  if (!m.output_weights.allFinite()) throw NumericError("ELM solve produced non-finite weights");
  return m;
}

std::vector<int> elm_predict(const Elm& model, const Eigen::MatrixXd& X) {
  const Eigen::MatrixXd scores = elm_hidden(model, X) * model.output_weights;
  std::vector<int> out(static_cast<std::size_t>(X.rows()));
  for (Index i = 0; i < scores.rows(); ++i) {
    Index best = 0;
    for (Index k = 1; k < scores.cols(); ++k) {
      if (scores(i, k) > scores(i, best)) best = k;
    }
    out[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

HyperCube select_bands(const HyperCube& cube, const std::vector<int>& indices) {
  if (indices.empty()) throw ConfigError("band selection is empty");
  std::set<int> seen;
  for (int b : indices) {
    if (b < 0 || b >= cube.bands()) throw ConfigError("band index " + std::to_string(b) + " out of range");
    if (!seen.insert(b).second) throw ConfigError("duplicate band index " + std::to_string(b));
  }
  Tensor3<float> out(cube.height(), cube.width(), static_cast<Index>(indices.size()));
  for (Index r = 0; r < cube.height(); ++r) {
    for (Index c = 0; c < cube.width(); ++c) {
      for (std::size_t k = 0; k < indices.size(); ++k) out(r, c, static_cast<Index>(k)) = cube.values(r, c, indices[k]);
    }
  }
  return HyperCube(std::move(out), cube.stage);
}

PcaBasis pca_fit(const Eigen::MatrixXd& X) {
  if (X.rows() < 2) throw DataError("PCA needs at least two samples");
  PcaBasis basis;
  basis.mean = X.colwise().mean().transpose();
  const Eigen::MatrixXd centred = X.rowwise() - basis.mean.transpose();
  const Eigen::MatrixXd cov = (centred.transpose() * centred) / static_cast<double>(X.rows() - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) throw NumericError("PCA eigendecomposition failed");
  const Index B = X.cols();
  basis.components.resize(B, B);
  basis.variances.resize(B);
  for (Index k = 0; k < B; ++k) {
    // eigenvalues come back ascending
    Eigen::VectorXd v = eig.eigenvectors().col(B - 1 - k);
    Index peak = 0;
    v.cwiseAbs().maxCoeff(&peak);
    if (v(peak) < 0.0) v = -v;
    basis.components.col(k) = v;
    basis.variances(k) = std::max(0.0, eig.eigenvalues()(B - 1 - k));
  }
  return basis;
}

Eigen::MatrixXd pca_transform(const PcaBasis& basis, const Eigen::MatrixXd& X, Index k) {
  if (k < 1 || k > basis.components.cols()) throw ConfigError("PCA component count out of range");
  if (X.cols() != basis.mean.size()) throw DataError("PCA input width mismatch");
  return (X.rowwise() - basis.mean.transpose()) * basis.components.leftCols(k);
}

Eigen::MatrixXd pca_reconstruct(const PcaBasis& basis, const Eigen::MatrixXd& scores) {
  const Index k = scores.cols();
  Eigen::MatrixXd X = scores * basis.components.leftCols(k).transpose();
  X.rowwise() += basis.mean.transpose();
  return X;
}

HyperCube pca_project(const HyperCube& cube, const PcaBasis& basis, Index k) {
  const Eigen::MatrixXd X = cube.values.as_matrix().cast<double>();
  const Eigen::MatrixXd scores = pca_transform(basis, X, k);
  Tensor3<float> out(cube.height(), cube.width(), k);
  out.as_matrix() = scores.cast<float>();
  return HyperCube(std::move(out), CubeStage::filtered);
}

SpectralSamples gather_samples(const HyperCube& cube, const LabelMap& labels, Index stride) {
  if (labels.height != cube.height() || labels.width != cube.width()) {
    throw DataError("label map and cube dimensions differ");
  }
  if (stride < 1) throw ConfigError("sample stride must be positive");
  std::vector<Index> rows;
  for (Index i = 0; i < labels.pixels(); i += stride) {
    if (labels.labels[static_cast<std::size_t>(i)] != kIgnoreLabel) rows.push_back(i);
  }
  SpectralSamples s;
  s.X.resize(static_cast<Index>(rows.size()), cube.bands());
  const auto M = cube.values.as_matrix();
  for (std::size_t n = 0; n < rows.size(); ++n) {
    s.X.row(static_cast<Index>(n)) = M.row(rows[n]).cast<double>();
    s.y.push_back(labels.labels[static_cast<std::size_t>(rows[n])]);
  }
  return s;
}

double accuracy(const std::vector<int>& predicted, const std::vector<int>& truth) {
  if (predicted.size() != truth.size()) throw DataError("accuracy: length mismatch");
  if (truth.empty()) return 1.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += (predicted[i] == truth[i]);
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

std::vector<BandStudyEntry> band_reduction_study(const SpectralSamples& train, const SpectralSamples& test,
                                                 const std::vector<Index>& channel_counts, Index hidden,
                                                 double ridge, std::uint64_t seed) {
  const auto basis = pca_fit(train.X);
  const Index B = train.X.cols();
  std::vector<BandStudyEntry> out;
  for (Index k : channel_counts) {
    if (k < 1 || k > B) throw ConfigError("band study channel count out of range");
    const auto pca_train = pca_transform(basis, train.X, k);
    const auto pca_test = pca_transform(basis, test.X, k);
    const auto pca_model = elm_train(pca_train, train.y, hidden, ridge, seed);
    out.push_back({"pca", k, accuracy(elm_predict(pca_model, pca_test), test.y)});

    // evenly spread raw bands
    std::vector<Index> bands;
    for (Index i = 0; i < k; ++i) bands.push_back(k == 1 ? 0 : i * (B - 1) / (k - 1));
    Eigen::MatrixXd raw_train(train.X.rows(), k), raw_test(test.X.rows(), k);
    for (Index i = 0; i < k; ++i) {
      raw_train.col(i) = train.X.col(bands[static_cast<std::size_t>(i)]);
      raw_test.col(i) = test.X.col(bands[static_cast<std::size_t>(i)]);
    }
    const auto raw_model = elm_train(raw_train, train.y, hidden, ridge, seed);
    out.push_back({"bands", k, accuracy(elm_predict(raw_model, raw_test), test.y)});
  }
  return out;
}

}  // namespace hsd
