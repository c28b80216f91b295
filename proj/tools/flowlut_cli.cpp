// flowlut: enhance, train, bench, gradcheck, export-cube, info.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage error. Diagnostics go to
// stderr; reports and CSV to stdout or files.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "flowlut/accounting.hpp"
#include "flowlut/bench.hpp"
#include "flowlut/checkpoint.hpp"
#include "flowlut/errors.hpp"
#include "flowlut/gradcheck.hpp"
#include "flowlut/imageio.hpp"
#include "flowlut/lut.hpp"
#include "flowlut/ops.hpp"
#include "flowlut/parallel.hpp"
#include "flowlut/pipeline.hpp"
#include "flowlut/train.hpp"

namespace fs = std::filesystem;
using namespace flowlut;

namespace {

struct Globals {
  std::string config_path;
  std::size_t threads = 0;
};

PipelineConfig base_config(const Globals& g) {
  return g.config_path.empty() ? PipelineConfig{} : load_config_file(g.config_path);
}

// Checkpoint when given, else a fresh model from the config.
Checkpoint model_from(const Globals& g, const std::string& checkpoint) {
  if (!checkpoint.empty()) return load_checkpoint(checkpoint);
  PipelineConfig cfg = base_config(g);
  cfg.validate();
  return Checkpoint{FlowLutModel(cfg), {}};
}

// ------------------------------------------------------------------ enhance

struct EnhanceArgs {
  std::string input, output, checkpoint, dump_dir;
  std::optional<std::size_t> flow_steps, proc_h, proc_w;
};

int run_enhance(const Globals& g, const EnhanceArgs& a) {
  if (a.flow_steps && *a.flow_steps == 0) throw UsageError("--flow-steps must be >= 1");
  Tensor image = load_image(a.input);
  FlowLutModel model = model_from(g, a.checkpoint).model;
  if (a.flow_steps) model.config.flow_steps = *a.flow_steps;
  if (a.proc_h) model.config.processing_height = *a.proc_h;
  if (a.proc_w) model.config.processing_width = *a.proc_w;
  model.config.validate();

  const bool dump = !a.dump_dir.empty();
  EnhanceResult r = enhance_detailed(model, image, dump);
  save_image(r.output, a.output);

  if (dump) {
    fs::create_directories(a.dump_dir);
    char name[32];
    save_image(clamp(r.lut_output, 0.0f, 1.0f), fs::path(a.dump_dir) / "step_00.png");
    for (std::size_t k = 0; k < r.trace.steps.size(); ++k) {
      const auto& s = r.trace.steps[k];
      std::snprintf(name, sizeof name, "step_%02zu.png", k + 1);
      // Steps refined at a reduced processing size are dumped at that size.
      if (!s.image.empty()) save_image(clamp(s.image, 0.0f, 1.0f), fs::path(a.dump_dir) / name);
      std::cerr << "step " << k + 1 << ": residual_rms " << s.residual_rms << "  mean|flow| "
                << s.mean_abs_flow << "\n";
    }
  }
  return 0;
}

// -------------------------------------------------------------------- train

struct TrainArgs {
  std::string data_dir, out, loss_csv, resume;
  std::size_t synthetic = 0;
  std::size_t size = 64;
  std::optional<std::size_t> epochs, num_luts, flow_steps, batch_size;
  std::optional<double> lr, weight_decay;
  std::optional<std::uint64_t> seed;
  bool no_specialized_init = false;
};

// Pairs <name>_in.* with <name>_gt.*; any unmatched file is an error.
std::vector<Sample> load_pairs(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("data directory not found: " + dir.string());
  std::map<std::string, fs::path> ins, gts;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const std::string stem = e.path().stem().string();
    auto ends = [&](const std::string& suf) {
      return stem.size() > suf.size() && stem.compare(stem.size() - suf.size(), suf.size(), suf) == 0;
    };
    if (ends("_in")) ins[stem.substr(0, stem.size() - 3)] = e.path();
    else if (ends("_gt")) gts[stem.substr(0, stem.size() - 3)] = e.path();
  }
  std::vector<std::string> orphans;
  for (const auto& [name, p] : ins) if (!gts.count(name)) orphans.push_back(p.string());
  for (const auto& [name, p] : gts) if (!ins.count(name)) orphans.push_back(p.string());
  if (!orphans.empty()) {
    std::string msg = "unpaired training files:";
    for (const auto& o : orphans) msg += "\n  " + o;
    throw IoError(msg);
  }
  if (ins.empty()) throw IoError("no <name>_in / <name>_gt pairs in " + dir.string());

  std::vector<Sample> data;
  for (const auto& [name, p] : ins) {
    Sample s{load_image(p), load_image(gts[name])};
    if (s.input.shape() != s.target.shape()) {
      throw ShapeError("pair '" + name + "': input " + shape_str(s.input.shape()) +
                       " vs target " + shape_str(s.target.shape()));
    }
    data.push_back(std::move(s));
  }
  return data;
}

int run_train(const Globals& g, const TrainArgs& a) {
  if (a.data_dir.empty() == (a.synthetic == 0)) {
    throw UsageError("train needs exactly one of --data or --synthetic");
  }
  Checkpoint ck;
  if (!a.resume.empty()) {
    if (a.num_luts || a.no_specialized_init) {
      throw UsageError("--num-luts / --no-specialized-init cannot change a resumed model");
    }
    ck = load_checkpoint(a.resume);
  }
  PipelineConfig cfg = a.resume.empty() ? base_config(g) : ck.model.config;
  if (a.epochs) cfg.epochs = *a.epochs;
  if (a.lr) cfg.lr = *a.lr;
  if (a.seed) cfg.seed = *a.seed;
  if (a.num_luts) cfg.num_luts = *a.num_luts;
  if (a.flow_steps) cfg.flow_steps = *a.flow_steps;
  if (a.batch_size) cfg.batch_size = *a.batch_size;
  if (a.weight_decay) cfg.weight_decay = *a.weight_decay;
  if (a.no_specialized_init) cfg.specialized_init = false;
  cfg.validate();

  if (a.resume.empty()) ck.model = FlowLutModel(cfg);
  else ck.model.config = cfg;

  std::vector<Sample> data = a.synthetic
                                 ? make_synthetic_dataset(a.synthetic, cfg.seed, a.size, a.size)
                                 : load_pairs(a.data_dir);

  const fs::path csv_path =
      a.loss_csv.empty() ? fs::path(a.out).replace_extension(".loss.csv") : fs::path(a.loss_csv);
  std::ofstream csv(csv_path);
  if (!csv) throw IoError("cannot write " + csv_path.string());
  csv << "step,loss\n";
  csv.precision(9);
  std::cout.precision(6);

  TrainOptions opts;
  opts.on_step = [&](const StepReport& s) { csv << s.step << "," << s.loss << "\n"; };
  opts.on_epoch = [&](std::size_t epoch, double loss) {
    std::cout << "epoch " << epoch + 1 << " loss " << std::scientific << loss
              << std::defaultfloat << "\n";
  };
  train(ck.model, data, ck.optimizer, opts);
  csv.close();
  if (!csv) throw IoError("failed writing " + csv_path.string());

  save_checkpoint(ck.model, ck.optimizer, a.out);
  std::cout << "final mse " << std::scientific << evaluate_mse(ck.model, data) << "\n";
  return 0;
}

// -------------------------------------------------------------------- bench

struct BenchArgs {
  BenchOptions opts;
  std::string checkpoint;
  bool csv = false;
};

int run_bench_cmd(const Globals& g, const BenchArgs& a) {
  FlowLutModel model = model_from(g, a.checkpoint).model;
  BenchReport r = run_bench(model, a.opts);
  std::cout << (a.csv ? format_bench_csv(r) : format_bench_text(r));
  return 0;
}

// ---------------------------------------------------------------- gradcheck

int run_gradcheck_cmd(const GradcheckOptions& o) {
  GradcheckReport rep = run_gradcheck(o);
  std::printf("%-18s %12s %8s %8s  %s\n", "group", "worst", "checked", "skipped", "status");
  for (const auto& gr : rep.groups) {
    std::printf("%-18s %12.3e %8zu %8zu  %s\n", gr.name.c_str(), gr.worst, gr.checked,
                gr.skipped, gr.passed ? "ok" : "FAIL");
  }
  for (const auto& gr : rep.groups) {
    if (gr.passed) continue;
    if (gr.failures.empty()) {
      std::fprintf(stderr, "%s: too many coordinates skipped (%zu of %zu)\n", gr.name.c_str(),
                   gr.skipped, gr.checked + gr.skipped);
    }
    const std::size_t shown = std::min<std::size_t>(gr.failures.size(), 20);
    for (std::size_t i = 0; i < shown; ++i) {
      const auto& f = gr.failures[i];
      std::fprintf(stderr, "%s: %s[%zu] seed %llu analytic %.6e numeric %.6e rel %.3e\n",
                   gr.name.c_str(), f.param.c_str(), f.index,
                   static_cast<unsigned long long>(f.seed), f.analytic, f.numeric, f.rel_error);
    }
    if (gr.failures.size() > shown) {
      std::fprintf(stderr, "%s: ... %zu more\n", gr.name.c_str(), gr.failures.size() - shown);
    }
  }
  const bool ok = rep.passed();
  std::printf("%s\n", ok ? "gradcheck passed" : "gradcheck FAILED");
  return ok ? 0 : 1;
}

// ------------------------------------------------------- export-cube / info

int run_export(const Globals& g, const std::string& checkpoint, std::size_t index,
               const std::string& out) {
  FlowLutModel model = model_from(g, checkpoint).model;
  if (index >= model.bank.count()) {
    throw UsageError("--lut-index " + std::to_string(index) + " out of range (model has " +
                     std::to_string(model.bank.count()) + " LUTs)");
  }
  export_cube(model.bank.luts[index], out);
  return 0;
}

int run_info(const Globals& g, const std::string& checkpoint) {
  Checkpoint ck = model_from(g, checkpoint);
  const FlowLutModel& m = ck.model;
  std::cout << "config\n";
  for (const auto& [k, v] : m.config.to_map()) std::cout << "  " << k << " = " << v << "\n";
  const ParamBreakdown p = count_params(m);
  std::cout << "parameters\n"
            << "  luts       " << p.luts << "\n"
            << "  weight_net " << p.weight_net << "\n"
            << "  flow_net   " << p.flow_net << "\n"
            << "  total      " << p.total << "\n";
  std::cout << "luts\n";
  for (std::size_t i = 0; i < m.bank.count(); ++i) {
    std::cout << "  " << i << "  " << m.bank.names[i] << "  D=" << m.bank.luts[i].size
              << (m.bank.luts[i].trainable ? "" : "  (frozen)") << "\n";
  }
  std::cout << "optimizer steps " << ck.optimizer.step << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  tune_allocator();

  CLI::App app{"FlowLUT image enhancement"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_path, "Plain-text key = value config")
      ->check(CLI::ExistingFile);
  app.add_option("--threads", g.threads, "Worker threads (0 = all processors)")
      ->envname("FLOWLUT_THREADS");

  EnhanceArgs ea;
  auto* enh = app.add_subcommand("enhance", "Enhance one image");
  enh->add_option("--input", ea.input, "Input image (.ppm or .png)")->required();
  enh->add_option("--output", ea.output, "Output image (.ppm or .png)")->required();
  enh->add_option("--checkpoint", ea.checkpoint, "Model checkpoint (default: fresh model)");
  enh->add_option("--flow-steps", ea.flow_steps, "Refinement steps K");
  enh->add_option("--dump-steps", ea.dump_dir, "Write I_LUT and every step to this directory");
  enh->add_option("--processing-height", ea.proc_h, "Refine at this height (0 = native)");
  enh->add_option("--processing-width", ea.proc_w, "Refine at this width (0 = native)");

  TrainArgs ta;
  auto* tr = app.add_subcommand("train", "Train on image pairs or synthetic data");
  tr->add_option("--data", ta.data_dir, "Directory of <name>_in.* / <name>_gt.* pairs");
  tr->add_option("--synthetic", ta.synthetic, "Generate this many synthetic pairs");
  tr->add_option("--size", ta.size, "Synthetic image side length")->capture_default_str();
  tr->add_option("--epochs", ta.epochs, "Passes over the data");
  tr->add_option("--lr", ta.lr, "AdamW learning rate");
  tr->add_option("--weight-decay", ta.weight_decay, "Decoupled weight decay");
  tr->add_option("--batch-size", ta.batch_size, "Samples per optimizer step");
  tr->add_option("--seed", ta.seed, "Seed for init, shuffling, synthetic data");
  tr->add_option("--num-luts", ta.num_luts, "LUTs in the bank");
  tr->add_option("--flow-steps", ta.flow_steps, "Refinement steps K");
  tr->add_flag("--no-specialized-init", ta.no_specialized_init, "Start all LUTs at identity");
  tr->add_option("--resume", ta.resume, "Continue from this checkpoint");
  tr->add_option("--out", ta.out, "Checkpoint to write")->required();
  tr->add_option("--loss-csv", ta.loss_csv, "Per-step loss CSV (default: <out>.loss.csv)");

  BenchArgs ba;
  auto* be = app.add_subcommand("bench", "Time the pipeline stages");
  be->add_option("--width", ba.opts.width)->capture_default_str();
  be->add_option("--height", ba.opts.height)->capture_default_str();
  be->add_option("--iters", ba.opts.iters, "Timed iterations (median reported)")
      ->capture_default_str();
  be->add_option("--warmup", ba.opts.warmup, "Untimed iterations")->capture_default_str();
  be->add_option("--stage", ba.opts.stage)
      ->check(CLI::IsMember({"all", "lut", "flow", "weights"}))
      ->capture_default_str();
  be->add_option("--checkpoint", ba.checkpoint, "Model checkpoint (default: fresh model)");
  be->add_flag("--csv", ba.csv, "Emit section,name,value CSV");

  GradcheckOptions go;
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference gradient verification");
  gc->add_option("--seed", go.seed)->capture_default_str();
  gc->add_option("--tolerance", go.tolerance)->capture_default_str();
  gc->add_option("--seeds", go.seeds, "Random instances per group")->capture_default_str();
  gc->add_option("--group", go.only, "Restrict to these groups");
  gc->add_option("--corrupt", go.corrupt_group)->group("");  // test hook

  std::string ex_ck, ex_out;
  std::size_t ex_index = 0;
  auto* ex = app.add_subcommand("export-cube", "Write one LUT as a .cube file");
  ex->add_option("--checkpoint", ex_ck, "Model checkpoint (default: fresh model)");
  ex->add_option("--lut-index", ex_index)->capture_default_str();
  ex->add_option("--out", ex_out)->required();

  std::string info_ck;
  auto* in = app.add_subcommand("info", "Print config, parameter counts, LUT names");
  in->add_option("--checkpoint", info_ck, "Model checkpoint (default: fresh model)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e, std::cerr, std::cerr);
    return 2;
  }

  try {
    if (g.threads) set_num_threads(g.threads);
    if (*enh) return run_enhance(g, ea);
    if (*tr) return run_train(g, ta);
    if (*be) return run_bench_cmd(g, ba);
    if (*gc) return run_gradcheck_cmd(go);
    if (*ex) return run_export(g, ex_ck, ex_index, ex_out);
    if (*in) return run_info(g, info_ck);
  } catch (const UsageError& e) {
    std::cerr << "flowlut: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "flowlut: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
