#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "flowlut/lut.hpp"
#include "flowlut/optim.hpp"
#include "flowlut/pipeline.hpp"
#include "flowlut/tensor.hpp"

namespace flowlut {

struct Sample {
  Tensor input;
  Tensor target;
};

struct StepReport {
  std::size_t step;   // 1-based optimizer step
  std::size_t epoch;  // 0-based
  double loss;        // batch-mean total loss before the update
};

struct TrainOptions {
  PerceptualLoss perceptual;
  std::function<void(const StepReport&)> on_step;
  std::function<void(std::size_t epoch, double mean_loss)> on_epoch;
};

struct TrainResult {
  std::vector<double> step_losses;
  std::vector<double> epoch_losses;
};

/// Runs config.epochs passes over `data` in batches of config.batch_size.
/// Each batch: zero gradients, per-sample enhance + total loss scaled by
/// 1/batch, backward, one AdamW step on every trainable. Sample order is
/// shuffled per epoch from config.seed. Throws TrainingError on an empty
/// dataset or a non-finite loss (message carries the step index).
TrainResult train(FlowLutModel& model, std::span<const Sample> data, OptimizerState& state,
                  const TrainOptions& options = {});

AdamWHyper adamw_hyper(const PipelineConfig& cfg);

/// Mean MSE of the enhanced inputs against their targets.
double evaluate_mse(const FlowLutModel& model, std::span<const Sample> data);

// ------------------------------------------------------------ synthetic data

/// Global color distortion plus a radial vignette:
///   out_c = clamp(gain_c * in_c^gamma_c + brightness, 0, 1) * (1 - vignette * r^2)
/// with r = 0 at the image center and 1 at the corners.
struct Distortion {
  Rgb gamma{1.0f, 1.0f, 1.0f};
  Rgb gain{1.0f, 1.0f, 1.0f};
  float brightness = 0.0f;
  float vignette = 0.0f;
};

Distortion random_distortion(std::uint64_t seed);
Tensor apply_distortion(const Tensor& clean, const Distortion& d);
/// Smooth color field in [0.05, 0.95]: per channel, 0.5 plus three
/// low-frequency sinusoids.
Tensor smooth_color_field(std::uint64_t seed, std::size_t h, std::size_t w);

/// Returns (degraded, clean). Deterministic per seed. Throws SizeError below
/// 8x8.
std::pair<Tensor, Tensor> make_synthetic_pair(std::uint64_t seed, std::size_t h, std::size_t w);

std::vector<Sample> make_synthetic_dataset(std::size_t count, std::uint64_t seed, std::size_t h,
                                           std::size_t w);

}  // namespace flowlut
