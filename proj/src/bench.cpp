#include "flowlut/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <sstream>

#include "flowlut/errors.hpp"
#include "flowlut/ops.hpp"
#include "flowlut/parallel.hpp"
#include "flowlut/train.hpp"

namespace flowlut {

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

const StageTiming* BenchReport::find(const std::string& stage) const {
  for (const auto& t : timings) {
    if (t.stage == stage) return &t;
  }
  return nullptr;
}

namespace {

double time_ms(const std::function<void()>& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  fn();
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
      .count();
}

Tensor flow_stage(const FlowLutModel& model, const Tensor& lut_out, const Tensor& image) {
  const auto& cfg = model.config;
  const std::size_t h = image.dim(1), w = image.dim(2);
  if (cfg.processing_height && (cfg.processing_height < h || cfg.processing_width < w)) {
    const std::size_t ph = std::min(cfg.processing_height, h);
    const std::size_t pw = std::min(cfg.processing_width, w);
    Tensor small = resize_bilinear(lut_out, ph, pw);
    Tensor refined = refine(model.flownet, small, resize_bilinear(image, ph, pw), cfg.flow_steps);
    return clamp(add(lut_out, resize_bilinear(sub(refined, small), h, w)), 0.0f, 1.0f);
  }
  return clamp(refine(model.flownet, lut_out, image, cfg.flow_steps), 0.0f, 1.0f);
}

}  // namespace

BenchReport run_bench(const FlowLutModel& model, const BenchOptions& o) {
  if (o.width == 0 || o.height == 0) throw UsageError("bench: width and height must be positive");
  if (o.iters == 0) throw UsageError("bench: iters must be >= 1");
  const bool all = o.stage == "all";
  if (!all && o.stage != "lut" && o.stage != "flow" && o.stage != "weights") {
    throw UsageError("bench: unknown stage '" + o.stage + "' (all|lut|flow|weights)");
  }

  BenchReport r;
  r.options = o;
  r.threads = num_threads();
  r.flops = count_flops(model.config, o.height, o.width);
  r.params = count_params(model);

  const Tensor image = smooth_color_field(o.seed, o.height, o.width);
  const auto [ah, aw] = analysis_size(model.config, o.height, o.width);

  // Inputs of later stages come from one untimed pass so each stage can be
  // timed alone.
  Tensor weights = weightgen_forward(model.weightgen, resize_bilinear(image, ah, aw));
  Tensor lut_out = blend_apply(model.bank, weights, image);

  StageTiming tw{"weights", {}, 0}, tl{"lut", {}, 0}, tf{"flow", {}, 0}, tt{"total", {}, 0};
  for (std::size_t it = 0; it < o.warmup + o.iters; ++it) {
    const bool keep = it >= o.warmup;
    double sum = 0.0;
    if (all || o.stage == "weights") {
      const double ms = time_ms(
          [&] { weights = weightgen_forward(model.weightgen, resize_bilinear(image, ah, aw)); });
      sum += ms;
      if (keep) tw.samples_ms.push_back(ms);
    }
    if (all || o.stage == "lut") {
      const double ms = time_ms([&] { lut_out = blend_apply(model.bank, weights, image); });
      sum += ms;
      if (keep) tl.samples_ms.push_back(ms);
    }
    if (all || o.stage == "flow") {
      Tensor out;
      const double ms = time_ms([&] { out = flow_stage(model, lut_out, image); });
      sum += ms;
      if (keep) tf.samples_ms.push_back(ms);
    }
    if (keep) tt.samples_ms.push_back(sum);
  }
  for (StageTiming* t : {&tw, &tl, &tf}) {
    if (t->samples_ms.empty()) continue;
    t->median_ms = median(t->samples_ms);
    r.timings.push_back(*t);
  }
  if (all) {
    tt.median_ms = median(tt.samples_ms);
    r.timings.push_back(tt);
  }
  return r;
}

std::string format_bench_text(const BenchReport& r) {
  std::ostringstream os;
  char buf[160];
  std::snprintf(buf, sizeof buf, "bench %zux%zu  iters %zu (+%zu warmup)  threads %zu\n",
                r.options.width, r.options.height, r.options.iters, r.options.warmup, r.threads);
  os << buf << "\ntiming (median ms)\n";
  for (const auto& t : r.timings) {
    std::snprintf(buf, sizeof buf, "  %-8s %12.3f\n", t.stage.c_str(), t.median_ms);
    os << buf;
  }
  os << "\nanalytic cost\n";
  const std::pair<const char*, std::uint64_t> stages[] = {{"weights", r.flops.weights},
                                                          {"lut", r.flops.lut},
                                                          {"flow", r.flops.flow},
                                                          {"output", r.flops.output},
                                                          {"total", r.flops.total}};
  for (const auto& [name, f] : stages) {
    std::snprintf(buf, sizeof buf, "  %-8s %16llu FLOPs  %10.3f GFLOPs\n", name,
                  static_cast<unsigned long long>(f), static_cast<double>(f) * 1e-9);
    os << buf;
  }
  std::snprintf(buf, sizeof buf, "  GMACs    %16.3f\n", r.flops.gmacs());
  os << buf << "\nparameters\n";
  const std::pair<const char*, std::size_t> params[] = {{"luts", r.params.luts},
                                                        {"weight_net", r.params.weight_net},
                                                        {"flow_net", r.params.flow_net},
                                                        {"total", r.params.total}};
  for (const auto& [name, n] : params) {
    std::snprintf(buf, sizeof buf, "  %-10s %10zu\n", name, n);
    os << buf;
  }
  std::snprintf(buf, sizeof buf, "  total (M)  %10.2f\n", static_cast<double>(r.params.total) * 1e-6);
  os << buf;
  return os.str();
}

std::string format_bench_csv(const BenchReport& r) {
  std::ostringstream os;
  os << "section,name,value\n";
  os << "run,width," << r.options.width << "\n";
  os << "run,height," << r.options.height << "\n";
  os << "run,iters," << r.options.iters << "\n";
  os << "run,warmup," << r.options.warmup << "\n";
  os << "run,threads," << r.threads << "\n";
  char buf[64];
  for (const auto& t : r.timings) {
    std::snprintf(buf, sizeof buf, "%.4f", t.median_ms);
    os << "timing_ms," << t.stage << "," << buf << "\n";
  }
  os << "flops,weights," << r.flops.weights << "\n";
  os << "flops,lut," << r.flops.lut << "\n";
  os << "flops,flow," << r.flops.flow << "\n";
  os << "flops,output," << r.flops.output << "\n";
  os << "flops,total," << r.flops.total << "\n";
  std::snprintf(buf, sizeof buf, "%.6f", r.flops.gmacs());
  os << "flops,gmacs," << buf << "\n";
  os << "params,luts," << r.params.luts << "\n";
  os << "params,weight_net," << r.params.weight_net << "\n";
  os << "params,flow_net," << r.params.flow_net << "\n";
  os << "params,total," << r.params.total << "\n";
  return os.str();
}

}  // namespace flowlut
