#pragma once

#include <cstddef>

#include "flowlut/graph.hpp"
#include "flowlut/tensor.hpp"

// Operator set for the enhancement networks. Each operator has an eager
// overload on Tensors (no tape, intermediates freed as they go) and a
// recording overload on a Graph. Both overloads share the same kernels.
//
// Conventions: images and feature maps are C x H x W, vectors are rank 1,
// scalars are shape {1}.

namespace flowlut {

enum class Activation { relu, tanh };

// 3x3 cross-correlation, stride 1, zero padding 1.
// weights: C_out x C_in x 3 x 3, bias: C_out.
Tensor conv2d(const Tensor& x, const Tensor& weights, const Tensor& bias);
Var conv2d(Graph& g, Var x, Var weights, Var bias);

Tensor apply_activation(const Tensor& x, Activation kind);
Var apply_activation(Graph& g, Var x, Activation kind);

// 2x2 window, stride 2; an odd trailing row/column is dropped.
Tensor maxpool2x2(const Tensor& x);
Var maxpool2x2(Graph& g, Var x);

Tensor global_avg_pool(const Tensor& x);
Var global_avg_pool(Graph& g, Var x);

// y = W x + b with W: N x M.
Tensor linear(const Tensor& x, const Tensor& weights, const Tensor& bias);
Var linear(Graph& g, Var x, Var weights, Var bias);

Tensor softmax(const Tensor& x);
Var softmax(Graph& g, Var x);

Tensor concat_channels(const Tensor& a, const Tensor& b);
Var concat_channels(Graph& g, Var a, Var b);

/// Mean of squared differences over all elements (1/CHW normalization).
float mse(const Tensor& out, const Tensor& gt);
Var mse(Graph& g, Var out, Var gt);

// Elementwise helpers used to assemble the refinement loop and losses.
Tensor add(const Tensor& a, const Tensor& b);
Var add(Graph& g, Var a, Var b);
Tensor sub(const Tensor& a, const Tensor& b);
Var sub(Graph& g, Var a, Var b);
Tensor scale(const Tensor& a, float s);
Var scale(Graph& g, Var a, float s);
/// Clamp to [lo, hi]; the gradient passes only where lo < x < hi.
Tensor clamp(const Tensor& a, float lo, float hi);
Var clamp(Graph& g, Var a, float lo, float hi);

/// Bilinear resampling of a C x H x W tensor with half-pixel centers.
/// Identity when the size is unchanged.
Tensor resize_bilinear(const Tensor& x, std::size_t h, std::size_t w);
Var resize_bilinear(Graph& g, Var x, std::size_t h, std::size_t w);

}  // namespace flowlut
