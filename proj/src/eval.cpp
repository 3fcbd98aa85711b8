#include "hsdrive/eval.hpp"

#include <cstdio>
#include <iomanip>
#include <sstream>

#include "json.hpp"

namespace hsd {
namespace {

// An absent class scores 1 only if it is also never predicted, for every metric.
double ratio(std::int64_t tp, std::int64_t misses, std::int64_t errors) {
  if (tp == 0) return errors == 0 ? 1.0 : 0.0;
  return static_cast<double>(tp) / static_cast<double>(tp + misses);
}

ClassMetrics combine(const std::vector<ClassMetrics>& per_class, const std::vector<double>& w) {
  ClassMetrics out;
  for (std::size_t i = 0; i < per_class.size(); ++i) {
    out.accuracy += w[i] * per_class[i].accuracy;
    out.precision += w[i] * per_class[i].precision;
    out.iou += w[i] * per_class[i].iou;
  }
  return out;
}

}  // namespace

ConfusionMatrix confusion(const LabelMap& pred, const LabelMap& gt, int classes) {
  if (pred.height != gt.height || pred.width != gt.width) throw DataError("confusion: label maps differ in size");
  if (classes < 1) throw ConfigError("confusion: class count must be positive");
  ConfusionMatrix cm = ConfusionMatrix::Zero(classes, classes);
  for (std::size_t i = 0; i < gt.labels.size(); ++i) {
    const auto t = gt.labels[i];
    if (t == kIgnoreLabel) continue;
    const auto p = pred.labels[i];
    if (t >= classes || p >= classes) {
      throw DataError("confusion: label out of range (gt " + std::to_string(t) + ", pred " + std::to_string(p) + ")");
    }
    ++cm(t, p);
  }
  return cm;
}

std::vector<double> inverse_frequency_weights(std::span<const double> supports) {
  std::vector<double> w(supports.size(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < supports.size(); ++i) {
    if (supports[i] < 0.0 || !std::isfinite(supports[i])) throw ConfigError("class supports must be non-negative");
    if (supports[i] > 0.0) {
      w[i] = 1.0 / supports[i];
      total += w[i];
    }
  }
  if (total <= 0.0) throw ConfigError("reference class supports are all zero");
  for (auto& v : w) v /= total;
  return w;
}

MetricsReport metrics(const ConfusionMatrix& cm, std::span<const double> reference_supports,
                      std::vector<std::string> class_names) {
  const auto C = static_cast<std::size_t>(cm.rows());
  if (cm.rows() != cm.cols() || C == 0) throw DataError("confusion matrix must be square and non-empty");
  if (reference_supports.size() != C) throw ConfigError("reference supports length differs from class count");
  if ((cm.array() < 0).any()) throw DataError("confusion matrix has negative entries");

  MetricsReport r;
  if (class_names.empty()) {
    for (std::size_t i = 0; i < C; ++i) class_names.push_back("class " + std::to_string(i));
  }
  if (class_names.size() != C) throw ConfigError("class name count differs from class count");
  r.class_names = std::move(class_names);
  r.class_weights = inverse_frequency_weights(reference_supports);

  std::int64_t total = 0;
  for (std::size_t i = 0; i < C; ++i) {
    const auto k = static_cast<Index>(i);
    const std::int64_t tp = cm(k, k);
    const std::int64_t fn = cm.row(k).sum() - tp;
    const std::int64_t fp = cm.col(k).sum() - tp;
    r.supports.push_back(tp + fn);
    total += tp + fn;
    r.per_class.push_back({ratio(tp, fn, fn + fp), ratio(tp, fp, fn + fp), ratio(tp, fn + fp, fn + fp)});
  }
  std::vector<double> uniform(C, 1.0 / static_cast<double>(C));
  std::vector<double> by_support(C);
  for (std::size_t i = 0; i < C; ++i) {
    by_support[i] = total > 0 ? static_cast<double>(r.supports[i]) / static_cast<double>(total) : uniform[i];
  }
  r.overall = combine(r.per_class, by_support);
  r.mean = combine(r.per_class, uniform);
  r.weighted = combine(r.per_class, r.class_weights);
  return r;
}

std::string MetricsReport::to_json() const {
  auto entry = [](const ClassMetrics& m) {
    nlohmann::ordered_json j;
    j["accuracy"] = m.accuracy;
    j["precision"] = m.precision;
    j["iou"] = m.iou;
    return j;
  };
  nlohmann::ordered_json doc;
  auto classes = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < per_class.size(); ++i) {
    auto j = entry(per_class[i]);
    j["name"] = class_names[i];
    j["support"] = supports[i];
    j["weight"] = class_weights[i];
    classes.push_back(j);
  }
  doc["classes"] = classes;
  doc["overall"] = entry(overall);
  doc["mean"] = entry(mean);
  doc["weighted"] = entry(weighted);
  return doc.dump(2);
}

std::string MetricsReport::to_table() const {
  std::size_t width = 8;
  for (const auto& n : class_names) width = std::max(width, n.size());
  std::ostringstream out;
  out << std::fixed << std::setprecision(2);
  out << std::left << std::setw(static_cast<int>(width)) << "" << std::right << std::setw(11) << "Accuracy"
      << std::setw(11) << "Precision" << std::setw(11) << "IoU" << '\n';
  auto row = [&](const std::string& name, const ClassMetrics& m) {
    out << std::left << std::setw(static_cast<int>(width)) << name << std::right << std::setw(11)
        << 100.0 * m.accuracy << std::setw(11) << 100.0 * m.precision << std::setw(11) << 100.0 * m.iou << '\n';
  };
  for (std::size_t i = 0; i < per_class.size(); ++i) row(class_names[i], per_class[i]);
  row("Overall", overall);
  row("Mean", mean);
  row("Weighted", weighted);
  return out.str();
}

ClassStatsAccumulator::ClassStatsAccumulator(int classes, Index bands)
    : classes_(classes), bands_(bands), counts_(static_cast<std::size_t>(classes), 0),
      shift_(static_cast<std::size_t>(classes)), sum_(static_cast<std::size_t>(classes), Eigen::VectorXd::Zero(bands)),
      outer_(static_cast<std::size_t>(classes), Eigen::MatrixXd::Zero(bands, bands)) {
  if (classes < 1 || bands < 1) throw ConfigError("class statistics need classes and bands");
}

void ClassStatsAccumulator::add(const HyperCube& cube, const LabelMap& labels) {
  if (cube.bands() != bands_) throw DataError("class statistics: band count mismatch");
  if (labels.height != cube.height() || labels.width != cube.width()) {
    throw DataError("class statistics: label map and cube dimensions differ");
  }
  const auto M = cube.values.as_matrix();
  for (Index i = 0; i < labels.pixels(); ++i) {
    const auto l = labels.labels[static_cast<std::size_t>(i)];
    if (l == kIgnoreLabel) continue;
    if (l >= classes_) throw DataError("class statistics: label out of range");
    // sums are taken about the first sample of each class for stability
    if (counts_[l] == 0) shift_[l] = M.row(i).transpose().cast<double>();
    const Eigen::VectorXd x = M.row(i).transpose().cast<double>() - shift_[l];
    sum_[l] += x;
    outer_[l].selfadjointView<Eigen::Lower>().rankUpdate(x);
    ++counts_[l];
  }
}

ClassStats ClassStatsAccumulator::finish() const {
  ClassStats s;
  s.counts = counts_;
  for (int k = 0; k < classes_; ++k) {
    const auto n = counts_[static_cast<std::size_t>(k)];
    if (n < 2) throw DataError("class " + std::to_string(k) + " has fewer than two pixels");
    const Eigen::VectorXd m = sum_[static_cast<std::size_t>(k)] / static_cast<double>(n);
    Eigen::MatrixXd outer = outer_[static_cast<std::size_t>(k)].selfadjointView<Eigen::Lower>();
    Gaussian<double> g;
    g.mean = m + shift_[static_cast<std::size_t>(k)];
    g.covariance = (outer - static_cast<double>(n) * m * m.transpose()) / static_cast<double>(n - 1);
    s.classes.push_back(std::move(g));
  }
  return s;
}

ClassStats class_stats(const std::vector<std::pair<HyperCube, LabelMap>>& samples, int classes) {
  if (samples.empty()) throw DataError("class statistics need at least one cube");
  ClassStatsAccumulator acc(classes, samples.front().first.bands());
  for (const auto& [cube, labels] : samples) acc.add(cube, labels);
  return acc.finish();
}

double default_jm_epsilon(const Gaussian<double>& a, const Gaussian<double>& b) {
  const double n = static_cast<double>(a.mean.size());
  const double eps = 1e-6 * 0.5 * (a.covariance.trace() + b.covariance.trace()) / n;
  return eps > 0.0 ? eps : 1e-12;
}

Eigen::MatrixXd jm_matrix(const ClassStats& stats) {
  const auto C = static_cast<Index>(stats.classes.size());
  Eigen::MatrixXd jm = Eigen::MatrixXd::Zero(C, C);
  for (Index i = 0; i < C; ++i) {
    for (Index j = i + 1; j < C; ++j) {
      const auto& a = stats.classes[static_cast<std::size_t>(i)];
      const auto& b = stats.classes[static_cast<std::size_t>(j)];
      jm(i, j) = jm(j, i) = jm_distance(a, b, default_jm_epsilon(a, b));
    }
  }
  return jm;
}

std::string jm_csv(const Eigen::MatrixXd& jm, const std::vector<std::string>& class_names) {
  const auto C = jm.rows();
  if (jm.cols() != C || static_cast<Index>(class_names.size()) != C) throw DataError("jm_csv: shape mismatch");
  std::ostringstream out;
  out << std::fixed << std::setprecision(4);
  for (const auto& n : class_names) out << ',' << n;
  out << '\n';
  for (Index i = 0; i < C; ++i) {
    out << class_names[static_cast<std::size_t>(i)];
    for (Index j = 0; j < C; ++j) {
      out << ',';
      if (i != j) out << jm(i, j);
    }
    out << '\n';
  }
  out << "Mean";
  for (Index j = 0; j < C; ++j) {
    out << ',' << (C > 1 ? jm.col(j).sum() / static_cast<double>(C - 1) : 0.0);
  }
  out << '\n';
  return out.str();
}

}  // namespace hsd
