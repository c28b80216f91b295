#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "flowlut/layers.hpp"
#include "flowlut/tensor.hpp"

namespace flowlut {

/// AdamW moments, one pair per parameter in registration order.
struct OptimizerState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::uint64_t step = 0;

  bool empty() const noexcept { return m.empty(); }
};

struct AdamWHyper {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

/// One AdamW update using each tensor's gradient buffer:
///   theta *= 1 - lr * wd
///   m = b1 m + (1 - b1) g,  v = b2 v + (1 - b2) g^2
///   theta -= lr * m_hat / (sqrt(v_hat) + eps)
/// Moments are created on the first call. All gradients are checked before
/// anything is modified; a non-finite one throws TrainingError naming the
/// parameter.
void adamw_step(std::span<const NamedTensor> params, OptimizerState& state, const AdamWHyper& h);

}  // namespace flowlut
