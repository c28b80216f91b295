#include "flowlut/weight_net.hpp"

#include <string>

#include "flowlut/errors.hpp"
#include "flowlut/ops.hpp"

namespace flowlut {

WeightGeneratorParams::WeightGeneratorParams(const WeightNetShape& s)
    : shape(s),
      convs{ConvLayer(3, s.c1),    ConvLayer(s.c1, s.c1), ConvLayer(s.c1, s.c2),
            ConvLayer(s.c2, s.c2), ConvLayer(s.c2, s.c3), ConvLayer(s.c3, s.c3)},
      head_hidden(s.c3, s.hidden),
      head_out(s.hidden, s.num_luts) {}

WeightGeneratorParams WeightGeneratorParams::initialized(const WeightNetShape& s,
                                                         std::uint64_t seed) {
  WeightGeneratorParams p(s);
  Rng rng(seed);
  for (auto& c : p.convs) {
    const std::size_t fan_in = c.weight.dim(1) * 9;
    init_uniform_fan_in(c.weight, fan_in, rng);
    init_uniform_fan_in(c.bias, fan_in, rng);
  }
  init_uniform_fan_in(p.head_hidden.weight, s.c3, rng);
  init_uniform_fan_in(p.head_hidden.bias, s.c3, rng);
  return p;
}

std::vector<NamedTensor> WeightGeneratorParams::tensors(const std::string& prefix) {
  std::vector<NamedTensor> out;
  for (std::size_t i = 0; i < convs.size(); ++i) {
    const std::string base = prefix + "conv" + std::to_string(i + 1);
    out.push_back({base + ".weight", &convs[i].weight});
    out.push_back({base + ".bias", &convs[i].bias});
  }
  out.push_back({prefix + "head_hidden.weight", &head_hidden.weight});
  out.push_back({prefix + "head_hidden.bias", &head_hidden.bias});
  out.push_back({prefix + "head_out.weight", &head_out.weight});
  out.push_back({prefix + "head_out.bias", &head_out.bias});
  return out;
}

std::size_t weightgen_param_count(const WeightGeneratorParams& params) {
  std::size_t n = params.head_hidden.param_count() + params.head_out.param_count();
  for (const auto& c : params.convs) n += c.param_count();
  return n;
}

namespace {

void require_analysis_input(const Tensor& image) {
  if (image.rank() != 3 || image.dim(0) != 3) {
    throw ShapeError("weight generator expects a 3 x H x W image, got " +
                     shape_str(image.shape()));
  }
  if (image.dim(1) < 8 || image.dim(2) < 8) {
    throw SizeError("weight generator needs at least 8x8 input, got " +
                    std::to_string(image.dim(1)) + "x" + std::to_string(image.dim(2)));
  }
}

Tensor conv_relu(const Tensor& x, const ConvLayer& l) {
  Tensor y = conv2d(x, l.weight, l.bias);
  for (float& v : y.data()) v = v > 0.0f ? v : 0.0f;
  return y;
}

Var conv_relu(Graph& g, Var x, const ConvVars& l) {
  return apply_activation(g, conv2d(g, x, l.weight, l.bias), Activation::relu);
}

}  // namespace

Tensor weightgen_backbone(const WeightGeneratorParams& p, const Tensor& image) {
  require_analysis_input(image);
  Tensor x = conv_relu(conv_relu(image, p.convs[0]), p.convs[1]);
  x = maxpool2x2(x);
  x = conv_relu(conv_relu(x, p.convs[2]), p.convs[3]);
  x = maxpool2x2(x);
  return conv_relu(conv_relu(x, p.convs[4]), p.convs[5]);
}

Tensor weightgen_head(const WeightGeneratorParams& p, const Tensor& features) {
  Tensor v = global_avg_pool(features);
  v = apply_activation(linear(v, p.head_hidden.weight, p.head_hidden.bias), Activation::relu);
  return softmax(linear(v, p.head_out.weight, p.head_out.bias));
}

Tensor weightgen_forward(const WeightGeneratorParams& params, const Tensor& image) {
  return weightgen_head(params, weightgen_backbone(params, image));
}

WeightGeneratorVars bind(Graph& g, WeightGeneratorParams& params) {
  WeightGeneratorVars v;
  for (std::size_t i = 0; i < params.convs.size(); ++i) v.convs[i] = bind(g, params.convs[i]);
  v.head_hidden = bind(g, params.head_hidden);
  v.head_out = bind(g, params.head_out);
  return v;
}

Var weightgen_forward(Graph& g, const WeightGeneratorVars& p, Var image) {
  require_analysis_input(g.value(image));
  Var x = conv_relu(g, conv_relu(g, image, p.convs[0]), p.convs[1]);
  x = maxpool2x2(g, x);
  x = conv_relu(g, conv_relu(g, x, p.convs[2]), p.convs[3]);
  x = maxpool2x2(g, x);
  x = conv_relu(g, conv_relu(g, x, p.convs[4]), p.convs[5]);
  Var v = global_avg_pool(g, x);
  v = apply_activation(g, linear(g, v, p.head_hidden.weight, p.head_hidden.bias),
                       Activation::relu);
  return softmax(g, linear(g, v, p.head_out.weight, p.head_out.bias));
}

}  // namespace flowlut
