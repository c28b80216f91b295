#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "flowlut/graph.hpp"
#include "flowlut/tensor.hpp"

namespace flowlut {

/// 3x3 convolution parameters: weight C_out x C_in x 3 x 3, bias C_out.
struct ConvLayer {
  Tensor weight;
  Tensor bias;

  ConvLayer() = default;
  ConvLayer(std::size_t cin, std::size_t cout)
      : weight(Shape{cout, cin, 3, 3}), bias(Shape{cout}) {}
  std::size_t param_count() const { return weight.numel() + bias.numel(); }
};

/// Fully connected layer: weight N x M, bias N.
struct LinearLayer {
  Tensor weight;
  Tensor bias;

  LinearLayer() = default;
  LinearLayer(std::size_t in, std::size_t out) : weight(Shape{out, in}), bias(Shape{out}) {}
  std::size_t param_count() const { return weight.numel() + bias.numel(); }
};

struct ConvVars {
  Var weight, bias;
};
struct LinearVars {
  Var weight, bias;
};

inline ConvVars bind(Graph& g, ConvLayer& l) { return {g.leaf(l.weight), g.leaf(l.bias)}; }
inline LinearVars bind(Graph& g, LinearLayer& l) { return {g.leaf(l.weight), g.leaf(l.bias)}; }

/// Reference to one trainable tensor, named by its position in the model.
struct NamedTensor {
  std::string name;
  Tensor* tensor;
};

/// Deterministic uniform draws; the bit manipulation keeps streams identical
/// across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::uint64_t next() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

/// Uniform in +-1/sqrt(fan_in) for weight and bias.
void init_uniform_fan_in(Tensor& t, std::size_t fan_in, Rng& rng);

}  // namespace flowlut
