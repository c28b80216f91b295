#include "flowlut/pipeline.hpp"

#include <algorithm>

#include "flowlut/errors.hpp"
#include "flowlut/ops.hpp"

namespace flowlut {

WeightNetShape weightnet_shape(const PipelineConfig& cfg) {
  return {cfg.wg_c1, cfg.wg_c2, cfg.wg_c3, cfg.head_hidden, cfg.num_luts};
}

namespace {

LutBank make_bank(const PipelineConfig& cfg) {
  cfg.validate();  // runs before any member is built
  return cfg.specialized_init ? init_specialized_luts(cfg.num_luts, cfg.lattice_size)
                              : init_identity_luts(cfg.num_luts, cfg.lattice_size);
}

// Independent streams for the two networks.
constexpr std::uint64_t kWeightgenStream = 0x9e3779b97f4a7c15ULL;
constexpr std::uint64_t kFlownetStream = 0xc2b2ae3d27d4eb4fULL;

bool refine_downscaled(const PipelineConfig& cfg, std::size_t h, std::size_t w) {
  return cfg.processing_height && (cfg.processing_height < h || cfg.processing_width < w);
}

}  // namespace

FlowLutModel::FlowLutModel(const PipelineConfig& cfg)
    : config(cfg),
      bank(make_bank(cfg)),
      weightgen(WeightGeneratorParams::initialized(weightnet_shape(cfg),
                                                   cfg.seed ^ kWeightgenStream)),
      flownet(FlowNetParams::initialized(cfg.flow_width, cfg.seed ^ kFlownetStream)) {}

FlowLutModel FlowLutModel::zeroed(const PipelineConfig& cfg) {
  FlowLutModel m(cfg);
  for (auto& p : m.weightgen.tensors()) p.tensor->fill(0.0f);
  for (auto& p : m.flownet.tensors()) p.tensor->fill(0.0f);
  return m;
}

std::vector<NamedTensor> FlowLutModel::parameters() {
  std::vector<NamedTensor> out;
  for (std::size_t i = 0; i < bank.luts.size(); ++i) {
    out.push_back({"lut." + std::to_string(i), &bank.luts[i].table});
  }
  for (auto& p : weightgen.tensors()) out.push_back(p);
  for (auto& p : flownet.tensors()) out.push_back(p);
  return out;
}

std::vector<const Tensor*> FlowLutModel::parameter_values() const {
  std::vector<const Tensor*> out;
  for (auto& p : const_cast<FlowLutModel*>(this)->parameters()) out.push_back(p.tensor);
  return out;
}

std::pair<std::size_t, std::size_t> analysis_size(const PipelineConfig& cfg, std::size_t h,
                                                  std::size_t w) {
  return {std::min(cfg.analysis_height, h), std::min(cfg.analysis_width, w)};
}

EnhanceResult enhance_detailed(const FlowLutModel& model, const Tensor& image,
                               bool keep_step_images) {
  if (image.rank() != 3 || image.dim(0) != 3) {
    throw ShapeError("enhance expects a 3 x H x W image, got " + shape_str(image.shape()));
  }
  const auto& cfg = model.config;
  const std::size_t h = image.dim(1), w = image.dim(2);
  const auto [ah, aw] = analysis_size(cfg, h, w);

  EnhanceResult r;
  r.weights = weightgen_forward(model.weightgen, resize_bilinear(image, ah, aw));
  r.lut_output = blend_apply(model.bank, r.weights, image);

  Tensor refined;
  if (refine_downscaled(cfg, h, w)) {
    const std::size_t ph = std::min(cfg.processing_height, h);
    const std::size_t pw = std::min(cfg.processing_width, w);
    Tensor lut_small = resize_bilinear(r.lut_output, ph, pw);
    Tensor refined_small = refine(model.flownet, lut_small, resize_bilinear(image, ph, pw),
                                  cfg.flow_steps, &r.trace, keep_step_images);
    refined = add(r.lut_output, resize_bilinear(sub(refined_small, lut_small), h, w));
  } else {
    refined = refine(model.flownet, r.lut_output, image, cfg.flow_steps, &r.trace,
                     keep_step_images);
  }
  r.output = clamp(refined, 0.0f, 1.0f);
  return r;
}

Tensor enhance(const FlowLutModel& model, const Tensor& image) {
  return enhance_detailed(model, image).output;
}

ModelVars bind(Graph& g, FlowLutModel& model) {
  ModelVars v;
  for (auto& l : model.bank.luts) {
    v.luts.push_back(l.trainable ? g.leaf(l.table) : g.constant_ref(l.table));
  }
  v.weightgen = bind(g, model.weightgen);
  v.flownet = bind(g, model.flownet);
  return v;
}

EnhanceVars enhance(Graph& g, const ModelVars& vars, const PipelineConfig& cfg, Var image) {
  const Tensor& img = g.value(image);
  if (img.rank() != 3 || img.dim(0) != 3) {
    throw ShapeError("enhance expects a 3 x H x W image, got " + shape_str(img.shape()));
  }
  const std::size_t h = img.dim(1), w = img.dim(2);
  const auto [ah, aw] = analysis_size(cfg, h, w);

  EnhanceVars r;
  r.weights = weightgen_forward(g, vars.weightgen, resize_bilinear(g, image, ah, aw));
  r.lut_output = blend_apply(g, vars.luts, r.weights, image);

  Var refined;
  if (refine_downscaled(cfg, h, w)) {
    const std::size_t ph = std::min(cfg.processing_height, h);
    const std::size_t pw = std::min(cfg.processing_width, w);
    Var lut_small = resize_bilinear(g, r.lut_output, ph, pw);
    Var refined_small = refine(g, vars.flownet, lut_small, resize_bilinear(g, image, ph, pw),
                               cfg.flow_steps);
    refined = add(g, r.lut_output, resize_bilinear(g, sub(g, refined_small, lut_small), h, w));
  } else {
    refined = refine(g, vars.flownet, r.lut_output, image, cfg.flow_steps);
  }
  r.output = clamp(g, refined, 0.0f, 1.0f);
  return r;
}

Var total_loss(Graph& g, Var out, Var gt, const PerceptualLoss& perceptual, double lambda) {
  Var loss = mse(g, out, gt);
  if (perceptual) {
    loss = add(g, loss, scale(g, perceptual(g, out, gt), static_cast<float>(lambda)));
  }
  return loss;
}

double total_loss(const Tensor& out, const Tensor& gt, const PerceptualLoss& perceptual,
                  double lambda) {
  Graph g;
  return g.value(total_loss(g, g.constant_ref(out), g.constant_ref(gt), perceptual, lambda))[0];
}

}  // namespace flowlut
