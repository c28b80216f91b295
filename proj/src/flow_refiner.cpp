#include "flowlut/flow_refiner.hpp"

#include <cmath>
#include <string>

#include "flowlut/errors.hpp"
#include "flowlut/ops.hpp"

namespace flowlut {

FlowNetParams::FlowNetParams(std::size_t w)
    : width(w), conv1(6, w), conv2(w, w), conv3(w, 3) {}

FlowNetParams FlowNetParams::initialized(std::size_t width, std::uint64_t seed) {
  FlowNetParams p(width);
  Rng rng(seed);
  init_uniform_fan_in(p.conv1.weight, 6 * 9, rng);
  init_uniform_fan_in(p.conv1.bias, 6 * 9, rng);
  init_uniform_fan_in(p.conv2.weight, width * 9, rng);
  init_uniform_fan_in(p.conv2.bias, width * 9, rng);
  return p;
}

std::vector<NamedTensor> FlowNetParams::tensors(const std::string& prefix) {
  return {{prefix + "conv1.weight", &conv1.weight}, {prefix + "conv1.bias", &conv1.bias},
          {prefix + "conv2.weight", &conv2.weight}, {prefix + "conv2.bias", &conv2.bias},
          {prefix + "conv3.weight", &conv3.weight}, {prefix + "conv3.bias", &conv3.bias}};
}

std::size_t flownet_param_count(const FlowNetParams& p) {
  return p.conv1.param_count() + p.conv2.param_count() + p.conv3.param_count();
}

namespace {

void require_flow_input(const Tensor& x) {
  if (x.rank() != 3 || x.dim(0) != 6) {
    throw ShapeError("flow network expects 6 x H x W input, got " + shape_str(x.shape()));
  }
}

void require_pair(const Tensor& a, const Tensor& b) {
  if (a.rank() != 3 || a.dim(0) != 3 || a.shape() != b.shape()) {
    throw ShapeError("refine: LUT output " + shape_str(a.shape()) + " and input " +
                     shape_str(b.shape()) + " must both be 3 x H x W");
  }
}

void require_steps(std::size_t k) {
  if (k == 0) throw UsageError("refine: flow steps must be at least 1");
}

double rms(const Tensor& t) {
  double s = 0.0;
  for (float v : t.data()) s += static_cast<double>(v) * v;
  return std::sqrt(s / static_cast<double>(t.numel()));
}

double mean_abs(const Tensor& t) {
  double s = 0.0;
  for (float v : t.data()) s += std::fabs(v);
  return s / static_cast<double>(t.numel());
}

}  // namespace

Tensor flownet_forward(const FlowNetParams& p, const Tensor& x) {
  require_flow_input(x);
  Tensor h = apply_activation(conv2d(x, p.conv1.weight, p.conv1.bias), Activation::relu);
  h = apply_activation(conv2d(h, p.conv2.weight, p.conv2.bias), Activation::relu);
  return apply_activation(conv2d(h, p.conv3.weight, p.conv3.bias), Activation::tanh);
}

FlowNetVars bind(Graph& g, FlowNetParams& params) {
  return {bind(g, params.conv1), bind(g, params.conv2), bind(g, params.conv3)};
}

Var flownet_forward(Graph& g, const FlowNetVars& p, Var x) {
  require_flow_input(g.value(x));
  Var h = apply_activation(g, conv2d(g, x, p.conv1.weight, p.conv1.bias), Activation::relu);
  h = apply_activation(g, conv2d(g, h, p.conv2.weight, p.conv2.bias), Activation::relu);
  return apply_activation(g, conv2d(g, h, p.conv3.weight, p.conv3.bias), Activation::tanh);
}

namespace {

// base + d where |d| <= 1, nudged one ulp toward base if rounding the sum
// would push the displacement past 1.
float bounded_add(float base, float d) {
  float v = base + d;
  if (std::fabs(double(v) - double(base)) > 1.0) v = std::nextafter(v, base);
  return v;
}

}  // namespace

Tensor refine(const FieldFn& field, const Tensor& i_lut, const Tensor& i_in, std::size_t k,
              RefinementTrace* trace, bool keep_images) {
  require_steps(k);
  require_pair(i_lut, i_in);
  if (trace) trace->steps.clear();
  // I_s = I_LUT + (1/K) * sum of the first s fields. Keeping the sum in
  // double and dividing once per step makes a constant field c land on
  // exactly I_LUT + c, which repeated += c/K in float does not.
  const double kd = static_cast<double>(k);
  std::vector<double> acc(i_lut.numel(), 0.0);
  Tensor current = i_lut;
  for (std::size_t s = 0; s < k; ++s) {
    Tensor residual = sub(i_in, current);
    const double r_rms = trace ? rms(residual) : 0.0;
    Tensor flow = field(concat_channels(current, residual));
    expect_shape(flow, current.shape(), "refine: correction field");
    for (std::size_t i = 0; i < current.numel(); ++i) {
      acc[i] += flow[i];
      current[i] = bounded_add(i_lut[i], static_cast<float>(acc[i] / kd));
    }
    if (trace) {
      trace->steps.push_back({r_rms, mean_abs(flow), keep_images ? current : Tensor()});
    }
  }
  return current;
}

Tensor refine(const FlowNetParams& params, const Tensor& i_lut, const Tensor& i_in,
              std::size_t k, RefinementTrace* trace, bool keep_images) {
  return refine([&params](const Tensor& x) { return flownet_forward(params, x); }, i_lut, i_in,
                k, trace, keep_images);
}

Var refine(Graph& g, const GraphFieldFn& field, Var i_lut, Var i_in, std::size_t k) {
  require_steps(k);
  require_pair(g.value(i_lut), g.value(i_in));
  const float step = 1.0f / static_cast<float>(k);
  Var current = i_lut;
  Var total;
  for (std::size_t s = 0; s < k; ++s) {
    Var residual = sub(g, i_in, current);
    Var flow = field(g, concat_channels(g, current, residual));
    total = s == 0 ? flow : add(g, total, flow);
    current = add(g, i_lut, scale(g, total, step));
  }
  return current;
}

Var refine(Graph& g, const FlowNetVars& params, Var i_lut, Var i_in, std::size_t k) {
  return refine(
      g, [&params](Graph& gg, Var x) { return flownet_forward(gg, params, x); }, i_lut, i_in, k);
}

}  // namespace flowlut
