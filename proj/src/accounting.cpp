#include "flowlut/accounting.hpp"

#include <algorithm>

#include "flowlut/flow_refiner.hpp"
#include "flowlut/pipeline.hpp"
#include "flowlut/weight_net.hpp"

namespace flowlut {

namespace {

std::size_t conv_params(std::size_t cin, std::size_t cout) { return cout * cin * 9 + cout; }
std::size_t linear_params(std::size_t in, std::size_t out) { return out * in + out; }

}  // namespace

ParamBreakdown count_params(const PipelineConfig& cfg) {
  ParamBreakdown p;
  p.luts = cfg.num_luts * cfg.lattice_size * cfg.lattice_size * cfg.lattice_size * 3;
  p.weight_net = conv_params(3, cfg.wg_c1) + conv_params(cfg.wg_c1, cfg.wg_c1) +
                 conv_params(cfg.wg_c1, cfg.wg_c2) + conv_params(cfg.wg_c2, cfg.wg_c2) +
                 conv_params(cfg.wg_c2, cfg.wg_c3) + conv_params(cfg.wg_c3, cfg.wg_c3) +
                 linear_params(cfg.wg_c3, cfg.head_hidden) +
                 linear_params(cfg.head_hidden, cfg.num_luts);
  p.flow_net = conv_params(6, cfg.flow_width) + conv_params(cfg.flow_width, cfg.flow_width) +
               conv_params(cfg.flow_width, 3);
  p.total = p.luts + p.weight_net + p.flow_net;
  return p;
}

ParamBreakdown count_params(const FlowLutModel& model) {
  ParamBreakdown p;
  p.luts = model.bank.param_count();
  p.weight_net = weightgen_param_count(model.weightgen);
  p.flow_net = flownet_param_count(model.flownet);
  p.total = p.luts + p.weight_net + p.flow_net;
  return p;
}

std::uint64_t FlopReport::find(const std::string& stage, const std::string& item) const {
  for (const auto& e : entries) {
    if (e.stage == stage && e.item == item) return e.flops;
  }
  return 0;
}

FlopReport count_flops(const PipelineConfig& cfg, std::size_t h, std::size_t w) {
  FlopReport r;
  auto add = [&r](const std::string& stage, const std::string& item, std::uint64_t flops,
                  std::uint64_t& bucket) {
    r.entries.push_back({stage, item, flops});
    bucket += flops;
  };

  // Weight generator at analysis resolution.
  {
    const auto [ah, aw] = analysis_size(cfg, h, w);
    if (ah != h || aw != w) add("weights", "resize", 9ULL * 3 * ah * aw, r.weights);
    const std::size_t widths[4] = {3, cfg.wg_c1, cfg.wg_c2, cfg.wg_c3};
    std::uint64_t fh = ah, fw = aw;
    int layer = 1;
    for (int block = 1; block <= 3; ++block) {
      const std::uint64_t cin = widths[block - 1], c = widths[block];
      for (int k = 0; k < 2; ++k, ++layer) {
        const std::string name = "conv" + std::to_string(layer);
        add("weights", name, conv3x3_flops(k == 0 ? cin : c, c, fh, fw), r.weights);
        add("weights", name + ".bias", c * fh * fw, r.weights);
        add("weights", name + ".relu", c * fh * fw, r.weights);
      }
      if (block < 3) {
        fh /= 2;
        fw /= 2;
        add("weights", "pool" + std::to_string(block), 3 * c * fh * fw, r.weights);
      }
    }
    add("weights", "global_pool", cfg.wg_c3 * fh * fw + cfg.wg_c3, r.weights);
    add("weights", "head_hidden",
        2ULL * cfg.wg_c3 * cfg.head_hidden + cfg.head_hidden + cfg.head_hidden, r.weights);
    add("weights", "head_out", 2ULL * cfg.head_hidden * cfg.num_luts + cfg.num_luts, r.weights);
    add("weights", "softmax", 3ULL * cfg.num_luts, r.weights);
  }

  const std::uint64_t px = static_cast<std::uint64_t>(h) * w;
  add("lut", "locate", 22 * px, r.lut);
  add("lut", "blend", 54ULL * cfg.num_luts * px, r.lut);

  // Refinement, optionally at a reduced processing resolution.
  {
    std::uint64_t ph = h, pw = w;
    const bool down = cfg.processing_height &&
                      (cfg.processing_height < h || cfg.processing_width < w);
    if (down) {
      ph = std::min<std::uint64_t>(cfg.processing_height, h);
      pw = std::min<std::uint64_t>(cfg.processing_width, w);
      add("flow", "resize_in", 2 * 9ULL * 3 * ph * pw, r.flow);
    }
    const std::uint64_t ppx = ph * pw;
    const std::uint64_t fw = cfg.flow_width;
    for (std::size_t k = 1; k <= cfg.flow_steps; ++k) {
      const std::string s = "step" + std::to_string(k) + ".";
      add("flow", s + "residual", 3 * ppx, r.flow);
      add("flow", s + "conv1", conv3x3_flops(6, fw, ph, pw), r.flow);
      add("flow", s + "conv2", conv3x3_flops(fw, fw, ph, pw), r.flow);
      add("flow", s + "conv3", conv3x3_flops(fw, 3, ph, pw), r.flow);
      add("flow", s + "bias", (2 * fw + 3) * ppx, r.flow);
      add("flow", s + "activation", (2 * fw + 3) * ppx, r.flow);
      add("flow", s + "update", 6 * ppx, r.flow);
    }
    if (down) add("flow", "resize_out", 3 * ppx + 9ULL * 3 * px + 3 * px, r.flow);
  }

  add("output", "clamp", 2 * 3 * px, r.output);
  r.total = r.weights + r.lut + r.flow + r.output;
  return r;
}

}  // namespace flowlut
