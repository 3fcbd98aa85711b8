#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

#include "hsdrive/fcn.hpp"
#include "hsdrive/hypercube.hpp"
#include "hsdrive/patchwork.hpp"

namespace hsd {

/// Canonical spectral MLP layer sizes for `classes` outputs.
std::vector<Index> mlp_sizes(Index bands, Index classes);

/// Pixel-wise dense forward of fc1..fcN (ReLU hidden, softmax output).
ScoreMap mlp_forward(const WeightStore& weights, const HyperCube& cube);

/// Extreme learning machine: fixed random sigmoid hidden layer, ridge
/// regression output layer.
template <typename Scalar>
struct ElmModel {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Matrix input_weights;   // bands x hidden
  Vector hidden_bias;     // hidden
  Matrix output_weights;  // hidden x classes
  Scalar ridge = Scalar(1e-3);

  Index hidden() const { return input_weights.cols(); }
  Index classes() const { return output_weights.cols(); }
};

using Elm = ElmModel<double>;

/// X: N x B spectra, y: class per row (0..C-1).
Elm elm_train(const Eigen::MatrixXd& X, const std::vector<int>& y, Index hidden, double ridge,
              std::uint64_t seed);
/// Hidden-layer activations, N x hidden.
Eigen::MatrixXd elm_hidden(const Elm& model, const Eigen::MatrixXd& X);
std::vector<int> elm_predict(const Elm& model, const Eigen::MatrixXd& X);

HyperCube select_bands(const HyperCube& cube, const std::vector<int>& indices);

struct PcaBasis {
  Eigen::VectorXd mean;        // per band
  Eigen::MatrixXd components;  // bands x bands, one component per column
  Eigen::VectorXd variances;   // non-increasing
};

/// Principal axes of the band covariance (divisor N - 1). Each component's
/// largest-magnitude coefficient is positive.
PcaBasis pca_fit(const Eigen::MatrixXd& X);
Eigen::MatrixXd pca_transform(const PcaBasis& basis, const Eigen::MatrixXd& X, Index k);
Eigen::MatrixXd pca_reconstruct(const PcaBasis& basis, const Eigen::MatrixXd& scores);
/// k-channel cube of component scores (stage: filtered, values unbounded).
HyperCube pca_project(const HyperCube& cube, const PcaBasis& basis, Index k);

/// Labelled spectra (ignore pixels dropped), optionally subsampled by stride.
struct SpectralSamples {
  Eigen::MatrixXd X;
  std::vector<int> y;
};
SpectralSamples gather_samples(const HyperCube& cube, const LabelMap& labels, Index stride = 1);

double accuracy(const std::vector<int>& predicted, const std::vector<int>& truth);

/// ELM overall accuracy for a reduced input: either the first `channels`
/// principal components or the listed raw bands.
struct BandStudyEntry {
  std::string input;  // "pca" or "bands"
  Index channels = 0;
  double overall_accuracy = 0.0;
};
std::vector<BandStudyEntry> band_reduction_study(const SpectralSamples& train, const SpectralSamples& test,
                                                 const std::vector<Index>& channel_counts, Index hidden,
                                                 double ridge, std::uint64_t seed);

}  // namespace hsd
