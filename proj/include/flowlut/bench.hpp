#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "flowlut/accounting.hpp"
#include "flowlut/pipeline.hpp"

namespace flowlut {

struct BenchOptions {
  std::size_t width = 1920;
  std::size_t height = 1080;
  std::size_t iters = 10;
  std::size_t warmup = 3;
  std::string stage = "all";  // all | lut | flow | weights
  std::uint64_t seed = 0;
};

struct StageTiming {
  std::string stage;
  std::vector<double> samples_ms;
  double median_ms = 0.0;
};

struct BenchReport {
  BenchOptions options;
  std::size_t threads = 1;
  std::vector<StageTiming> timings;  // requested stages, then "total" for all
  FlopReport flops;
  ParamBreakdown params;

  const StageTiming* find(const std::string& stage) const;
};

/// Times the pipeline stages separately on a synthetic image: the weight
/// generator (including the analysis downsample), the LUT blend, and the
/// refinement loop with the output clamp. Medians exclude warmup runs.
BenchReport run_bench(const FlowLutModel& model, const BenchOptions& options);

std::string format_bench_text(const BenchReport& r);
/// Rows of `section,name,value`; sections are timing_ms, flops, params, run.
std::string format_bench_csv(const BenchReport& r);

double median(std::vector<double> v);

}  // namespace flowlut
