#include "flowlut/train.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "flowlut/errors.hpp"
#include "flowlut/graph.hpp"
#include "flowlut/ops.hpp"

namespace flowlut {

AdamWHyper adamw_hyper(const PipelineConfig& cfg) {
  return {cfg.lr, cfg.beta1, cfg.beta2, cfg.eps, cfg.weight_decay};
}

TrainResult train(FlowLutModel& model, std::span<const Sample> data, OptimizerState& state,
                  const TrainOptions& options) {
  if (data.empty()) throw TrainingError("training dataset is empty");
  const PipelineConfig& cfg = model.config;
  cfg.validate();

  auto params = model.parameters();
  const AdamWHyper hyper = adamw_hyper(cfg);
  Rng shuffle_rng(cfg.seed);
  std::vector<std::size_t> order(data.size());
  TrainResult result;
  std::size_t step = 0;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[shuffle_rng.next() % i]);
    }
    double epoch_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += cfg.batch_size) {
      const std::size_t b1 = std::min(order.size(), b0 + cfg.batch_size);
      const auto inv_batch = static_cast<float>(1.0 / static_cast<double>(b1 - b0));
      for (auto& p : params) p.tensor->zero_grad();

      double batch_loss = 0.0;
      for (std::size_t s = b0; s < b1; ++s) {
        const Sample& sample = data[order[s]];
        Graph g;
        ModelVars vars = bind(g, model);
        Var image = g.constant_ref(sample.input);
        Var out = enhance(g, vars, cfg, image).output;
        Var loss = total_loss(g, out, g.constant_ref(sample.target), options.perceptual,
                              cfg.lambda_perceptual);
        const double value = g.value(loss)[0];
        if (!std::isfinite(value)) {
          throw TrainingError("non-finite loss at step " + std::to_string(step + 1) +
                              " (sample " + std::to_string(order[s]) + ")");
        }
        batch_loss += value;
        g.backward(scale(g, loss, inv_batch));
      }
      batch_loss /= static_cast<double>(b1 - b0);
      adamw_step(params, state, hyper);
      ++step;
      ++batches;
      epoch_sum += batch_loss;
      result.step_losses.push_back(batch_loss);
      if (options.on_step) options.on_step({step, epoch, batch_loss});
    }
    result.epoch_losses.push_back(epoch_sum / static_cast<double>(batches));
    if (options.on_epoch) options.on_epoch(epoch, result.epoch_losses.back());
  }
  for (auto& p : params) p.tensor->drop_grad();
  return result;
}

double evaluate_mse(const FlowLutModel& model, std::span<const Sample> data) {
  double s = 0.0;
  for (const auto& d : data) s += mse(enhance(model, d.input), d.target);
  return data.empty() ? 0.0 : s / static_cast<double>(data.size());
}

// ------------------------------------------------------------ synthetic data

Distortion random_distortion(std::uint64_t seed) {
  Rng rng(seed ^ 0xd1b54a32d192ed03ULL);
  Distortion d;
  for (int c = 0; c < 3; ++c) {
    d.gamma[c] = static_cast<float>(rng.uniform(0.8, 1.25));
    d.gain[c] = static_cast<float>(rng.uniform(0.85, 1.15));
  }
  d.brightness = static_cast<float>(rng.uniform(-0.06, 0.06));
  d.vignette = static_cast<float>(rng.uniform(0.1, 0.3));
  return d;
}

Tensor apply_distortion(const Tensor& clean, const Distortion& d) {
  if (clean.rank() != 3 || clean.dim(0) != 3) {
    throw ShapeError("apply_distortion expects 3 x H x W, got " + shape_str(clean.shape()));
  }
  const std::size_t h = clean.dim(1), w = clean.dim(2);
  const double cy = 0.5 * static_cast<double>(h - 1);
  const double cx = 0.5 * static_cast<double>(w - 1);
  const double norm = std::max(cy * cy + cx * cx, 1e-12);
  Tensor out(clean.shape());
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < h; ++i) {
      for (std::size_t j = 0; j < w; ++j) {
        float v = clean.at(c, i, j);
        if (d.gamma[c] != 1.0f) v = std::pow(v, d.gamma[c]);
        v = std::min(1.0f, std::max(0.0f, d.gain[c] * v + d.brightness));
        if (d.vignette != 0.0f) {
          const double dy = static_cast<double>(i) - cy, dx = static_cast<double>(j) - cx;
          v *= static_cast<float>(1.0 - d.vignette * (dy * dy + dx * dx) / norm);
        }
        out.at(c, i, j) = v;
      }
    }
  }
  return out;
}

Tensor smooth_color_field(std::uint64_t seed, std::size_t h, std::size_t w) {
  Rng rng(seed ^ 0x8cb92ba72f3d8dd7ULL);
  Tensor out(Shape{3, h, w});
  constexpr double two_pi = 2.0 * std::numbers::pi;
  for (std::size_t c = 0; c < 3; ++c) {
    struct Wave {
      double amp, fy, fx, phase;
    } waves[3];
    for (auto& wv : waves) {
      wv.amp = rng.uniform(0.05, 0.15);
      wv.fy = rng.uniform(-1.5, 1.5);
      wv.fx = rng.uniform(-1.5, 1.5);
      wv.phase = rng.uniform(0.0, two_pi);
    }
    for (std::size_t i = 0; i < h; ++i) {
      const double y = static_cast<double>(i) / static_cast<double>(h);
      for (std::size_t j = 0; j < w; ++j) {
        const double x = static_cast<double>(j) / static_cast<double>(w);
        double v = 0.5;
        for (const auto& wv : waves) v += wv.amp * std::sin(two_pi * (wv.fy * y + wv.fx * x) + wv.phase);
        out.at(c, i, j) = static_cast<float>(v);
      }
    }
  }
  return out;
}

std::pair<Tensor, Tensor> make_synthetic_pair(std::uint64_t seed, std::size_t h, std::size_t w) {
  if (h < 8 || w < 8) {
    throw SizeError("synthetic pairs need at least 8x8, got " + std::to_string(h) + "x" +
                    std::to_string(w));
  }
  Tensor clean = smooth_color_field(seed, h, w);
  Tensor degraded = apply_distortion(clean, random_distortion(seed));
  return {std::move(degraded), std::move(clean)};
}

std::vector<Sample> make_synthetic_dataset(std::size_t count, std::uint64_t seed, std::size_t h,
                                           std::size_t w) {
  std::vector<Sample> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    auto [in, gt] = make_synthetic_pair(seed * 1000003ULL + i, h, w);
    out.push_back({std::move(in), std::move(gt)});
  }
  return out;
}

}  // namespace flowlut
