#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "flowlut/config.hpp"
#include "flowlut/flow_refiner.hpp"
#include "flowlut/graph.hpp"
#include "flowlut/lut.hpp"
#include "flowlut/tensor.hpp"
#include "flowlut/weight_net.hpp"

namespace flowlut {

/// The full enhancement model: LUT bank, fusion-weight generator, flow
/// refiner. Plain value type; copying duplicates all parameters.
struct FlowLutModel {
  PipelineConfig config;
  LutBank bank;
  WeightGeneratorParams weightgen;
  FlowNetParams flownet;

  FlowLutModel() : FlowLutModel(PipelineConfig{}) {}
  /// Fresh model: prior (or identity) LUTs, randomly initialized networks
  /// with zeroed output layers, seeded from config.seed.
  explicit FlowLutModel(const PipelineConfig& cfg);

  /// Model whose every network parameter is zero and whose LUTs are built
  /// per config; the shape template used when loading checkpoints.
  static FlowLutModel zeroed(const PipelineConfig& cfg);

  /// Trainables in a fixed order: LUT lattices, weight generator, flow net.
  std::vector<NamedTensor> parameters();
  std::vector<const Tensor*> parameter_values() const;
};

WeightNetShape weightnet_shape(const PipelineConfig& cfg);

/// Analysis size the weight generator sees for an h x w input.
std::pair<std::size_t, std::size_t> analysis_size(const PipelineConfig& cfg, std::size_t h,
                                                  std::size_t w);

struct EnhanceResult {
  Tensor output;       // clamped to [0, 1]
  Tensor weights;      // fusion weights
  Tensor lut_output;   // I_LUT
  RefinementTrace trace;
};

/// weights = G(downsample(image)); I_LUT = blend; out = clamp(refine(I_LUT, image)).
EnhanceResult enhance_detailed(const FlowLutModel& model, const Tensor& image,
                               bool keep_step_images = false);
Tensor enhance(const FlowLutModel& model, const Tensor& image);

struct ModelVars {
  std::vector<Var> luts;
  WeightGeneratorVars weightgen;
  FlowNetVars flownet;
};
ModelVars bind(Graph& g, FlowLutModel& model);

struct EnhanceVars {
  Var output;
  Var weights;
  Var lut_output;
};
EnhanceVars enhance(Graph& g, const ModelVars& vars, const PipelineConfig& cfg, Var image);

/// Differentiable image x image -> scalar distance.
using PerceptualLoss = std::function<Var(Graph&, Var out, Var gt)>;

/// L = MSE(out, gt) + lambda * perceptual(out, gt); the perceptual term is
/// zero when no plug-in is given.
Var total_loss(Graph& g, Var out, Var gt, const PerceptualLoss& perceptual = {},
               double lambda = 0.1);
double total_loss(const Tensor& out, const Tensor& gt, const PerceptualLoss& perceptual = {},
                  double lambda = 0.1);

}  // namespace flowlut
