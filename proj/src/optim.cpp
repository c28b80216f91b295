#include "flowlut/optim.hpp"

#include <cmath>
#include <string>

#include "flowlut/errors.hpp"

namespace flowlut {

void adamw_step(std::span<const NamedTensor> params, OptimizerState& state,
                const AdamWHyper& h) {
  if (state.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.tensor->shape());
      state.v.emplace_back(p.tensor->shape());
    }
  }
  if (state.m.size() != params.size()) {
    throw UsageError("optimizer state tracks " + std::to_string(state.m.size()) +
                     " parameters, model has " + std::to_string(params.size()));
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    const Tensor& t = *params[k].tensor;
    if (state.m[k].shape() != t.shape()) {
      throw UsageError("optimizer state shape mismatch for " + params[k].name);
    }
    for (float g : t.grad()) {
      if (!std::isfinite(g)) throw TrainingError("non-finite gradient in " + params[k].name);
    }
  }

  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(h.beta1, t);
  const double bc2 = 1.0 - std::pow(h.beta2, t);
  const double decay = 1.0 - h.lr * h.weight_decay;

  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& p = *params[k].tensor;
    auto theta = p.data();
    auto grad = p.grad();
    auto m = state.m[k].data();
    auto v = state.v[k].data();
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double g = grad[i];
      const double mi = h.beta1 * m[i] + (1.0 - h.beta1) * g;
      const double vi = h.beta2 * v[i] + (1.0 - h.beta2) * g * g;
      m[i] = static_cast<float>(mi);
      v[i] = static_cast<float>(vi);
      const double update = h.lr * (mi / bc1) / (std::sqrt(vi / bc2) + h.eps);
      theta[i] = static_cast<float>(theta[i] * decay - update);
    }
  }
}

}  // namespace flowlut
