#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "flowlut/config.hpp"

namespace flowlut {

struct FlowLutModel;

struct ParamBreakdown {
  std::size_t luts = 0;
  std::size_t weight_net = 0;
  std::size_t flow_net = 0;
  std::size_t total = 0;
};

/// Exact scalar counts from the configured shapes.
ParamBreakdown count_params(const PipelineConfig& cfg);
/// Counts the tensors actually held by a model.
ParamBreakdown count_params(const FlowLutModel& model);

struct FlopEntry {
  std::string stage;  // "weights", "lut", "flow", "output"
  std::string item;   // e.g. "conv2", "step1.conv1", "blend"
  std::uint64_t flops = 0;
};

struct FlopReport {
  std::vector<FlopEntry> entries;
  std::uint64_t weights = 0;
  std::uint64_t lut = 0;
  std::uint64_t flow = 0;
  std::uint64_t output = 0;
  std::uint64_t total = 0;

  double gflops() const { return static_cast<double>(total) * 1e-9; }
  /// One multiply-accumulate counted as two FLOPs.
  double gmacs() const { return gflops() / 2.0; }
  std::uint64_t find(const std::string& stage, const std::string& item) const;
};

// Counting conventions, per element unless stated:
//   conv 3x3:      2 * C_in * C_out * 9 * H * W (bias listed separately, 1 per output)
//   relu, tanh:    1;  maxpool: 3 compares per output;  resize: 9 per output
//   global pool:   C*H*W adds + C divides;  linear: 2*in*out + out;  softmax: 3N
//   LUT stage:     22 per pixel (cell location and corner weights) plus 54 per
//                  pixel per LUT (8-corner interpolation of 3 channels, blend)
//   refine step:   3 (residual) + flow net + 6 (scale and add) per pixel
//   output clamp:  2 per element
/// Analytic cost of one enhance call on an h x w image.
FlopReport count_flops(const PipelineConfig& cfg, std::size_t h, std::size_t w);

/// Cost of a single 3x3 convolution layer.
constexpr std::uint64_t conv3x3_flops(std::uint64_t cin, std::uint64_t cout, std::uint64_t h,
                                      std::uint64_t w) {
  return 2 * cin * cout * 9 * h * w;
}

}  // namespace flowlut
