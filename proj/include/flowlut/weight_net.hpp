#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "flowlut/graph.hpp"
#include "flowlut/layers.hpp"
#include "flowlut/tensor.hpp"

namespace flowlut {

struct WeightNetShape {
  std::size_t c1 = 64;
  std::size_t c2 = 128;
  std::size_t c3 = 256;
  std::size_t hidden = 128;
  std::size_t num_luts = 8;
};

/// Content-aware fusion-weight generator: three blocks of two 3x3 conv+ReLU
/// (max-pool after the first two blocks), global average pooling, then
/// linear+ReLU and linear+softmax.
struct WeightGeneratorParams {
  WeightNetShape shape;
  std::array<ConvLayer, 6> convs;
  LinearLayer head_hidden;
  LinearLayer head_out;

  WeightGeneratorParams() : WeightGeneratorParams(WeightNetShape{}) {}
  explicit WeightGeneratorParams(const WeightNetShape& s);

  /// Conv and first head layer uniform in +-1/sqrt(fan_in); output layer
  /// zero so the initial fusion weights are uniform.
  static WeightGeneratorParams initialized(const WeightNetShape& s, std::uint64_t seed);

  std::vector<NamedTensor> tensors(const std::string& prefix = "weightgen.");
};

std::size_t weightgen_param_count(const WeightGeneratorParams& params);

/// Output feature map of the third block (taken before any third pool):
/// c3 x H/4 x W/4. Throws SizeError for inputs below 8x8.
Tensor weightgen_backbone(const WeightGeneratorParams& params, const Tensor& image);
/// Global pooling and the softmax head applied to a backbone feature map.
Tensor weightgen_head(const WeightGeneratorParams& params, const Tensor& features);
/// Fusion weights (length num_luts, nonnegative, summing to 1) for an image
/// already at analysis resolution.
Tensor weightgen_forward(const WeightGeneratorParams& params, const Tensor& image);

struct WeightGeneratorVars {
  std::array<ConvVars, 6> convs;
  LinearVars head_hidden;
  LinearVars head_out;
};

WeightGeneratorVars bind(Graph& g, WeightGeneratorParams& params);
Var weightgen_forward(Graph& g, const WeightGeneratorVars& params, Var image);

}  // namespace flowlut
