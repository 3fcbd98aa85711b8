#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hsdrive/hypercube.hpp"

namespace hsd {

/// Entry (i, j): pixels of ground-truth class i predicted as j.
using ConfusionMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

/// Counts every pixel whose ground truth is not ignored.
ConfusionMatrix confusion(const LabelMap& pred, const LabelMap& gt, int classes);

struct ClassMetrics {
  double accuracy = 0.0;   // TP / (TP + FN)
  double precision = 0.0;  // TP / (TP + FP)
  double iou = 0.0;        // TP / (TP + FN + FP)
};

struct MetricsReport {
  std::vector<std::string> class_names;
  std::vector<ClassMetrics> per_class;
  std::vector<std::int64_t> supports;   // ground-truth pixels per class
  std::vector<double> class_weights;    // normalised inverse reference frequency
  ClassMetrics overall;   // support-weighted
  ClassMetrics mean;      // unweighted
  ClassMetrics weighted;  // inverse-frequency weighted

  std::string to_json() const;
  /// Rows per class then Overall / Mean / Weighted, values in percent.
  std::string to_table() const;
};

/// w_i = (1 / s_i) / sum_j (1 / s_j); classes with zero support get 0.
std::vector<double> inverse_frequency_weights(std::span<const double> supports);

/// `reference_supports` are the class frequencies the weighted aggregate is
/// derived from (typically the training split).
MetricsReport metrics(const ConfusionMatrix& cm, std::span<const double> reference_supports,
                      std::vector<std::string> class_names = {});

template <typename Scalar>
struct Gaussian {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> mean;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> covariance;
};

/// Per class pixel count, mean spectrum and sample covariance.
struct ClassStats {
  std::vector<std::int64_t> counts;
  std::vector<Gaussian<double>> classes;
};

class ClassStatsAccumulator {
 public:
  ClassStatsAccumulator(int classes, Index bands);
  void add(const HyperCube& cube, const LabelMap& labels);
  /// DataError if any class has fewer than two pixels.
  ClassStats finish() const;

 private:
  int classes_;
  Index bands_;
  std::vector<std::int64_t> counts_;
  std::vector<Eigen::VectorXd> shift_, sum_;
  std::vector<Eigen::MatrixXd> outer_;
};

ClassStats class_stats(const std::vector<std::pair<HyperCube, LabelMap>>& samples, int classes);

namespace detail {

template <typename Matrix>
double log_det_spd(const Matrix& m) {
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success) return std::numeric_limits<double>::quiet_NaN();
  return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

}  // namespace detail

/// Gaussian Bhattacharyya distance with covariance regularisation eps * I.
template <typename Scalar>
double bhattacharyya(const Gaussian<Scalar>& a, const Gaussian<Scalar>& b, double eps) {
  using Matrix = Eigen::MatrixXd;
  if (a.mean.size() != b.mean.size() || a.covariance.rows() != a.mean.size() ||
      b.covariance.rows() != b.mean.size()) {
    throw DataError("bhattacharyya: dimension mismatch");
  }
  const Index n = a.mean.size();
  const Matrix I = Matrix::Identity(n, n);
  const Matrix sa = a.covariance.template cast<double>() + eps * I;
  const Matrix sb = b.covariance.template cast<double>() + eps * I;
  const Matrix avg = 0.5 * (a.covariance.template cast<double>() + b.covariance.template cast<double>()) + eps * I;
  const Eigen::VectorXd diff = (a.mean - b.mean).template cast<double>();
  Eigen::LDLT<Matrix> ldlt(avg);
  const double mahal = diff.dot(ldlt.solve(diff));
  const double ld_avg = detail::log_det_spd(avg);
  const double ld_a = detail::log_det_spd(sa);
  const double ld_b = detail::log_det_spd(sb);
  const double dist = mahal / 8.0 + 0.5 * (ld_avg - 0.5 * (ld_a + ld_b));
  if (!std::isfinite(dist)) throw NumericError("Bhattacharyya distance is not finite");
  return std::max(0.0, dist);
}

/// Jeffries-Matusita distance 2 (1 - exp(-B)), in [0, 2]. Symmetric: the
/// arguments are ordered before evaluation so jm(a, b) == jm(b, a) exactly.
template <typename Scalar>
double jm_distance(const Gaussian<Scalar>& a, const Gaussian<Scalar>& b, double eps) {
  if (!(eps > 0.0)) throw ConfigError("JM regularisation must be positive");
  const bool swap = std::lexicographical_compare(b.mean.data(), b.mean.data() + b.mean.size(), a.mean.data(),
                                                 a.mean.data() + a.mean.size());
  const double B = swap ? bhattacharyya(b, a, eps) : bhattacharyya(a, b, eps);
  return 2.0 * (1.0 - std::exp(-B));
}

/// 1e-6 of the mean per-band variance of the two classes.
double default_jm_epsilon(const Gaussian<double>& a, const Gaussian<double>& b);

/// Symmetric C x C JM matrix (zero diagonal).
Eigen::MatrixXd jm_matrix(const ClassStats& stats);

/// CSV with a header row of class names, empty diagonal and a trailing
/// "Mean" row of per-class mean off-diagonal distances.
std::string jm_csv(const Eigen::MatrixXd& jm, const std::vector<std::string>& class_names);

}  // namespace hsd
