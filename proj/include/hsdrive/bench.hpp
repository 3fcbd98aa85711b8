#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hsdrive/preprocess.hpp"

namespace hsd {

struct FpsStats {
  double mean = 0.0;
  double median = 0.0;
  double max = 0.0;
  double min = 0.0;
};

/// FPS is taken per iteration (1000 / ms) and then aggregated; the median of
/// an even count is the lower middle value.
FpsStats fps_stats(std::span<const double> times_ms);

struct BenchReport {
  std::string workload;
  int iterations = 0;
  int warmup = 0;
  int workers = 1;
  std::vector<double> times_ms;
  FpsStats fps;
  double mean_ms = 0.0;
  /// Mean per-stage preprocessing times, pipeline order.
  std::optional<StageTiming> stages;

  std::string to_text() const;
  std::string to_json() const;
};

struct BenchOptions {
  int iterations = 1000;
  int warmup = 3;
  int workers = 1;
  std::uint64_t seed = 0;
};

const std::vector<std::string>& bench_workloads();

/// One of bench_workloads(), on a synthetic scene built from `seed`.
BenchReport run_bench(std::string_view workload, const BenchOptions& options);

/// Times an arbitrary callable; the returned milliseconds, when positive,
/// replace the wall time of that iteration.
using BenchBody = std::function<double()>;
BenchReport run_bench(std::string name, const BenchBody& body, const BenchOptions& options);

}  // namespace hsd
