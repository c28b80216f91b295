#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include "flowlut/graph.hpp"
#include "flowlut/layers.hpp"
#include "flowlut/tensor.hpp"

namespace flowlut {

/// Flow prediction network: conv(6->W) ReLU conv(W->W) ReLU conv(W->3) tanh.
struct FlowNetParams {
  std::size_t width = 64;
  ConvLayer conv1, conv2, conv3;

  FlowNetParams() : FlowNetParams(64) {}
  explicit FlowNetParams(std::size_t w);

  /// conv1/conv2 uniform in +-1/sqrt(fan_in); conv3 zero, so the initial
  /// correction field is identically zero.
  static FlowNetParams initialized(std::size_t width, std::uint64_t seed);

  std::vector<NamedTensor> tensors(const std::string& prefix = "flownet.");
};

std::size_t flownet_param_count(const FlowNetParams& params);

/// Correction field in (-1, 1) for a 6 x H x W input (image, residual).
Tensor flownet_forward(const FlowNetParams& params, const Tensor& x);

struct FlowNetVars {
  ConvVars conv1, conv2, conv3;
};
FlowNetVars bind(Graph& g, FlowNetParams& params);
Var flownet_forward(Graph& g, const FlowNetVars& params, Var x);

struct RefinementStep {
  double residual_rms = 0.0;  // RMS of R = I_in - I^(k-1)
  double mean_abs_flow = 0.0;
  Tensor image;               // I^(k); empty unless images were kept
};

struct RefinementTrace {
  std::vector<RefinementStep> steps;
};

/// Field predictors map the 6-channel concat(image, residual) to a 3-channel
/// field. The flow network is the usual one; tests substitute stubs.
using FieldFn = std::function<Tensor(const Tensor&)>;
using GraphFieldFn = std::function<Var(Graph&, Var)>;

/// K-step residual alignment:
///   I^0 = i_lut;  R = i_in - I^(k-1);  I^k = I^(k-1) + F(concat(I^(k-1), R)) / K.
/// No clamping between steps. Throws UsageError for K = 0.
Tensor refine(const FieldFn& field, const Tensor& i_lut, const Tensor& i_in, std::size_t k,
              RefinementTrace* trace = nullptr, bool keep_images = false);
Tensor refine(const FlowNetParams& params, const Tensor& i_lut, const Tensor& i_in,
              std::size_t k, RefinementTrace* trace = nullptr, bool keep_images = false);

Var refine(Graph& g, const GraphFieldFn& field, Var i_lut, Var i_in, std::size_t k);
Var refine(Graph& g, const FlowNetVars& params, Var i_lut, Var i_in, std::size_t k);

}  // namespace flowlut
