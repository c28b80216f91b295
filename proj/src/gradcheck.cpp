#include "flowlut/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <numeric>

#include "flowlut/branch_probe.hpp"
#include "flowlut/errors.hpp"
#include "flowlut/flow_refiner.hpp"
#include "flowlut/layers.hpp"
#include "flowlut/lut.hpp"
#include "flowlut/ops.hpp"
#include "flowlut/pipeline.hpp"
#include "flowlut/weight_net.hpp"

namespace flowlut {

bool GradcheckReport::passed() const {
  return std::all_of(groups.begin(), groups.end(), [](const GroupReport& g) { return g.passed; });
}

namespace {

// One random instance: the tensors to check, and a builder that binds them
// (and anything else it needs) into a fresh graph. With a target the loss is
// the training loss; otherwise a random projection sum(out * R).
struct Case {
  std::vector<NamedTensor> params;
  std::function<Var(Graph&)> build;
  std::shared_ptr<void> keep;  // owns the tensors
  Tensor target;
  std::size_t per_tensor = 8;
  // Scalar-valued cases can supply a double-precision evaluation of the same
  // function; a float scalar output is too coarse to difference.
  std::function<double()> exact_value;
};

using Builder = std::function<Case(Rng&)>;

Tensor random_tensor(Shape s, Rng& rng, double lo, double hi) {
  Tensor t(std::move(s));
  for (float& v : t.data()) v = static_cast<float>(rng.uniform(lo, hi));
  return t;
}

void randomize(Tensor& t, Rng& rng, double lo, double hi) {
  for (float& v : t.data()) v = static_cast<float>(rng.uniform(lo, hi));
}

// He-uniform weights keep activations O(1) through the ReLU stacks, so the
// gradients of early layers stay well above the float noise of the probes.
void he_init(std::vector<NamedTensor> ts, Rng& rng) {
  for (auto& t : ts) {
    if (t.tensor->rank() == 1) {
      randomize(*t.tensor, rng, -0.1, 0.1);
    } else {
      const double fan_in = static_cast<double>(t.tensor->numel() / t.tensor->dim(0));
      const double a = std::sqrt(6.0 / fan_in);
      randomize(*t.tensor, rng, -a, a);
    }
  }
}

double mse_double(const Tensor& out, const Tensor& gt) {
  double s = 0.0;
  for (std::size_t i = 0; i < out.numel(); ++i) {
    const double d = static_cast<double>(out[i]) - gt[i];
    s += d * d;
  }
  return s / static_cast<double>(out.numel());
}

// Colors strictly inside LUT cells, away from the lattice planes.
Tensor cell_interior_image(std::size_t h, std::size_t w, std::size_t d, Rng& rng) {
  Tensor t(Shape{3, h, w});
  const double cells = static_cast<double>(d - 1);
  for (float& v : t.data()) {
    const double i = std::floor(rng.uniform() * cells);
    v = static_cast<float>((i + rng.uniform(0.1, 0.9)) / cells);
  }
  return t;
}

template <class State>
Case make_case(std::shared_ptr<State> st, std::vector<NamedTensor> params,
               std::function<Var(Graph&)> build) {
  Case c;
  c.params = std::move(params);
  c.build = std::move(build);
  c.keep = std::move(st);
  return c;
}

struct Tensors {
  std::vector<Tensor> t;
};

// Case over plain tensors: every tensor is a checked leaf.
Case leaf_case(std::vector<std::pair<std::string, Tensor>> named,
               std::function<Var(Graph&, const std::vector<Var>&)> body) {
  auto st = std::make_shared<Tensors>();
  std::vector<std::string> names;
  for (auto& [n, t] : named) {
    names.push_back(n);
    st->t.push_back(std::move(t));
  }
  std::vector<NamedTensor> params;
  for (std::size_t i = 0; i < names.size(); ++i) params.push_back({names[i], &st->t[i]});
  auto* raw = st.get();
  return make_case(st, params, [raw, body](Graph& g) {
    std::vector<Var> vs;
    for (auto& t : raw->t) vs.push_back(g.leaf(t));
    return body(g, vs);
  });
}

// ------------------------------------------------------------------ groups

struct GroupDef {
  const char* name;
  Builder make;
};

std::vector<GroupDef> group_defs() {
  std::vector<GroupDef> defs;

  defs.push_back({"conv2d", [](Rng& r) {
    // Alternate wide and narrow outputs; they take different input-gradient
    // paths.
    const bool narrow = r.uniform() < 0.5;
    const std::size_t cin = narrow ? 4 : 2, cout = narrow ? 2 : 3;
    return leaf_case({{"x", random_tensor({cin, 5, 6}, r, -1, 1)},
                      {"weight", random_tensor({cout, cin, 3, 3}, r, -0.5, 0.5)},
                      {"bias", random_tensor({cout}, r, -0.5, 0.5)}},
                     [](Graph& g, const std::vector<Var>& v) { return conv2d(g, v[0], v[1], v[2]); });
  }});

  defs.push_back({"linear", [](Rng& r) {
    return leaf_case({{"x", random_tensor({5}, r, -1, 1)},
                      {"weight", random_tensor({4, 5}, r, -1, 1)},
                      {"bias", random_tensor({4}, r, -1, 1)}},
                     [](Graph& g, const std::vector<Var>& v) { return linear(g, v[0], v[1], v[2]); });
  }});

  defs.push_back({"softmax", [](Rng& r) {
    return leaf_case({{"x", random_tensor({8}, r, -2, 2)}},
                     [](Graph& g, const std::vector<Var>& v) { return softmax(g, v[0]); });
  }});

  defs.push_back({"relu", [](Rng& r) {
    Tensor x({3, 4, 4});
    for (float& v : x.data()) {
      v = static_cast<float>(r.uniform(0.05, 1.0) * (r.uniform() < 0.5 ? -1 : 1));
    }
    return leaf_case({{"x", std::move(x)}}, [](Graph& g, const std::vector<Var>& v) {
      return apply_activation(g, v[0], Activation::relu);
    });
  }});

  defs.push_back({"tanh", [](Rng& r) {
    return leaf_case({{"x", random_tensor({3, 4, 4}, r, -2, 2)}},
                     [](Graph& g, const std::vector<Var>& v) {
                       return apply_activation(g, v[0], Activation::tanh);
                     });
  }});

  defs.push_back({"maxpool2x2", [](Rng& r) {
    // Distinct values spaced well beyond the step, so no window changes its
    // winner under the probes.
    Tensor x({2, 5, 5});
    std::vector<std::size_t> perm(x.numel());
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[r.next() % i]);
    for (std::size_t i = 0; i < perm.size(); ++i) x[i] = 0.02f * static_cast<float>(perm[i]) - 0.5f;
    return leaf_case({{"x", std::move(x)}},
                     [](Graph& g, const std::vector<Var>& v) { return maxpool2x2(g, v[0]); });
  }});

  defs.push_back({"global_avg_pool", [](Rng& r) {
    return leaf_case({{"x", random_tensor({4, 3, 5}, r, -1, 1)}},
                     [](Graph& g, const std::vector<Var>& v) { return global_avg_pool(g, v[0]); });
  }});

  defs.push_back({"mse", [](Rng& r) {
    Case c = leaf_case({{"out", random_tensor({3, 4, 4}, r, 0, 1)},
                        {"gt", random_tensor({3, 4, 4}, r, 0, 1)}},
                       [](Graph& g, const std::vector<Var>& v) { return mse(g, v[0], v[1]); });
    const Tensor* a = c.params[0].tensor;
    const Tensor* b = c.params[1].tensor;
    c.exact_value = [a, b] { return mse_double(*a, *b); };
    return c;
  }});

  defs.push_back({"concat_channels", [](Rng& r) {
    return leaf_case({{"a", random_tensor({2, 3, 3}, r, -1, 1)},
                      {"b", random_tensor({3, 3, 3}, r, -1, 1)}},
                     [](Graph& g, const std::vector<Var>& v) { return concat_channels(g, v[0], v[1]); });
  }});

  defs.push_back({"elementwise", [](Rng& r) {
    return leaf_case({{"a", random_tensor({2, 3, 3}, r, -1, 1)},
                      {"b", random_tensor({2, 3, 3}, r, -1, 1)}},
                     [](Graph& g, const std::vector<Var>& v) {
                       return add(g, scale(g, v[0], 0.7f), sub(g, v[1], v[0]));
                     });
  }});

  defs.push_back({"clamp", [](Rng& r) {
    Tensor x({3, 4, 4});
    for (float& v : x.data()) {
      do {
        v = static_cast<float>(r.uniform(-0.5, 1.5));
      } while (std::abs(v) < 0.01f || std::abs(v - 1.0f) < 0.01f);
    }
    return leaf_case({{"x", std::move(x)}},
                     [](Graph& g, const std::vector<Var>& v) { return clamp(g, v[0], 0.0f, 1.0f); });
  }});

  defs.push_back({"resize_bilinear", [](Rng& r) {
    const bool up = r.uniform() < 0.5;
    return leaf_case({{"x", random_tensor({3, 6, 7}, r, -1, 1)}},
                     [up](Graph& g, const std::vector<Var>& v) {
                       return up ? resize_bilinear(g, v[0], 9, 10) : resize_bilinear(g, v[0], 4, 5);
                     });
  }});

  defs.push_back({"trilinear_apply", [](Rng& r) {
    return leaf_case({{"lattice", random_tensor({4, 4, 4, 3}, r, 0, 1)},
                      {"image", cell_interior_image(3, 3, 4, r)}},
                     [](Graph& g, const std::vector<Var>& v) { return trilinear_apply(g, v[0], v[1]); });
  }});

  defs.push_back({"blend_apply", [](Rng& r) {
    return leaf_case({{"lattice0", random_tensor({3, 3, 3, 3}, r, 0, 1)},
                      {"lattice1", random_tensor({3, 3, 3, 3}, r, 0, 1)},
                      {"lattice2", random_tensor({3, 3, 3, 3}, r, 0, 1)},
                      {"weights", random_tensor({3}, r, 0.1, 1)},
                      {"image", cell_interior_image(3, 3, 3, r)}},
                     [](Graph& g, const std::vector<Var>& v) {
                       const Var tables[] = {v[0], v[1], v[2]};
                       return blend_apply(g, tables, v[3], v[4]);
                     });
  }});

  defs.push_back({"weightgen", [](Rng& r) {
    struct State {
      WeightGeneratorParams p;
      Tensor image;
    };
    auto st = std::make_shared<State>();
    st->p = WeightGeneratorParams({4, 8, 16, 8, 3});
    he_init(st->p.tensors(), r);
    st->image = random_tensor({3, 8, 8}, r, 0, 1);
    auto params = st->p.tensors();
    params.push_back({"image", &st->image});
    auto* s = st.get();
    Case c = make_case(st, params, [s](Graph& g) {
      return weightgen_forward(g, bind(g, s->p), g.leaf(s->image));
    });
    c.per_tensor = 4;
    return c;
  }});

  for (std::size_t k : {1u, 4u}) {
    defs.push_back({k == 1 ? "refine_k1" : "refine_k4", [k](Rng& r) {
      struct State {
        FlowNetParams p;
        Tensor i_lut, i_in;
      };
      auto st = std::make_shared<State>();
      st->p = FlowNetParams(4);
      he_init(st->p.tensors(), r);
      st->i_lut = random_tensor({3, 4, 4}, r, 0, 1);
      st->i_in = random_tensor({3, 4, 4}, r, 0, 1);
      auto params = st->p.tensors();
      params.push_back({"i_lut", &st->i_lut});
      params.push_back({"i_in", &st->i_in});
      auto* s = st.get();
      Case c = make_case(st, params, [s, k](Graph& g) {
        return refine(g, bind(g, s->p), g.leaf(s->i_lut), g.leaf(s->i_in), k);
      });
      c.per_tensor = 6;
      return c;
    }});
  }

  defs.push_back({"end_to_end", [](Rng& r) {
    PipelineConfig cfg;
    cfg.num_luts = 3;
    cfg.lattice_size = 5;
    cfg.flow_steps = 2;
    cfg.wg_c1 = 4;
    cfg.wg_c2 = 8;
    cfg.wg_c3 = 16;
    cfg.head_hidden = 8;
    cfg.flow_width = 4;
    cfg.analysis_height = 8;
    cfg.analysis_width = 8;
    cfg.seed = r.next();
    struct State {
      FlowLutModel m;
      Tensor image;
    };
    auto st = std::make_shared<State>(State{FlowLutModel(cfg), {}});
    for (auto& l : st->m.bank.luts) {
      for (float& v : l.table.data()) v += static_cast<float>(r.uniform(-0.05, 0.05));
    }
    he_init(st->m.weightgen.tensors(), r);
    he_init(st->m.flownet.tensors(), r);
    st->image = random_tensor({3, 8, 8}, r, 0.2, 0.8);
    auto* s = st.get();
    Case c = make_case(st, s->m.parameters(), [s](Graph& g) {
      ModelVars vars = bind(g, s->m);
      return enhance(g, vars, s->m.config, g.constant_ref(s->image)).output;
    });
    c.target = random_tensor({3, 8, 8}, r, 0.2, 0.8);
    c.per_tensor = 3;  // 25 tensors -> at least 50 coordinates
    return c;
  }});

  return defs;
}

// ------------------------------------------------------------------ driver

double projected(const Tensor& out, const Tensor& proj) {
  double s = 0.0;
  for (std::size_t i = 0; i < out.numel(); ++i) s += static_cast<double>(out[i]) * proj[i];
  return s;
}

struct Eval {
  double loss;
  std::uint64_t digest;
};

Eval evaluate(const Case& c, const Tensor& proj) {
  BranchProbe probe;
  ScopedBranchProbe scope(probe);
  Graph g;
  const Tensor& out = g.value(c.build(g));
  double loss;
  if (c.target.numel()) {
    loss = mse_double(out, c.target);
  } else if (c.exact_value) {
    loss = c.exact_value() * proj[0];
  } else {
    loss = projected(out, proj);
  }
  return {loss, probe.digest()};
}

std::uint64_t name_hash(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : s) h = (h ^ ch) * 1099511628211ULL;
  return h;
}

void check_instance(const GroupDef& def, std::uint64_t seed, const GradcheckOptions& opt,
                    GroupReport& rep) {
  Rng rng(seed ^ name_hash(def.name));
  Case c = def.make(rng);

  // Analytic pass.
  for (auto& p : c.params) p.tensor->drop_grad();
  Tensor proj;
  {
    Graph g;
    const Var out = c.build(g);
    Var loss;
    if (c.target.numel()) {
      loss = total_loss(g, out, g.constant_ref(c.target));
    } else {
      proj = random_tensor(g.value(out).shape(), rng, -1, 1);
      const double v = projected(g.value(out), proj);
      loss = g.record("project", Tensor(Shape{1}, static_cast<float>(v)), {out},
                      [&proj](const Tensor& gy, std::span<Tensor* const> in) {
                        if (!in[0]) return;
                        auto gx = in[0]->data();
                        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy[0] * proj[i];
                      });
    }
    g.backward(loss);
  }
  std::vector<Tensor> analytic;
  double scale = 0.0;
  for (auto& p : c.params) {
    analytic.emplace_back(p.tensor->shape());
    if (p.tensor->has_grad()) std::ranges::copy(p.tensor->grad(), analytic.back().data().begin());
    p.tensor->drop_grad();
    for (float v : analytic.back().data()) scale = std::max(scale, std::abs(static_cast<double>(v)));
  }
  const double floor = opt.abs_floor + opt.rel_floor * scale;
  const bool corrupt = opt.corrupt_group == def.name;

  const Eval base = evaluate(c, proj);
  for (std::size_t pi = 0; pi < c.params.size(); ++pi) {
    Tensor& t = *c.params[pi].tensor;
    std::vector<std::size_t> idx(t.numel());
    std::iota(idx.begin(), idx.end(), 0);
    const std::size_t take = std::min(idx.size(), c.per_tensor);
    for (std::size_t i = 0; i < take; ++i) std::swap(idx[i], idx[i + rng.next() % (idx.size() - i)]);

    for (std::size_t s = 0; s < take; ++s) {
      const std::size_t j = idx[s];
      const float orig = t[j];
      const float xp = static_cast<float>(orig + opt.step);
      const float xm = static_cast<float>(orig - opt.step);
      t[j] = xp;
      const Eval fp = evaluate(c, proj);
      t[j] = xm;
      const Eval fm = evaluate(c, proj);
      t[j] = orig;

      if (fp.digest != base.digest || fm.digest != base.digest) {
        ++rep.skipped;
        continue;
      }
      const double numeric = (fp.loss - fm.loss) / (static_cast<double>(xp) - xm);
      double a = analytic[pi][j];
      if (corrupt) a = a * 1.05 + 0.01 * (scale + 1.0);
      const double err = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
      ++rep.checked;
      GradFailure f{c.params[pi].name, j, seed, a, numeric, err};
      if (rep.checked == 1 || err > rep.worst) {
        rep.worst = err;
        rep.worst_at = f;
      }
      if (!(err < opt.tolerance)) rep.failures.push_back(f);
    }
  }
}

}  // namespace

std::vector<std::string> gradcheck_groups() {
  std::vector<std::string> out;
  for (const auto& d : group_defs()) out.push_back(d.name);
  return out;
}

GradcheckReport run_gradcheck(const GradcheckOptions& opt) {
  if (opt.seeds == 0) throw UsageError("gradcheck needs at least one seed");
  if (!(opt.step > 0.0)) throw UsageError("gradcheck step must be positive");
  if (!opt.corrupt_group.empty()) {
    const auto names = gradcheck_groups();
    if (std::find(names.begin(), names.end(), opt.corrupt_group) == names.end()) {
      throw UsageError("unknown gradcheck group '" + opt.corrupt_group + "'");
    }
  }
  GradcheckReport report;
  for (const auto& def : group_defs()) {
    if (!opt.only.empty() &&
        std::find(opt.only.begin(), opt.only.end(), def.name) == opt.only.end()) {
      continue;
    }
    GroupReport rep;
    rep.name = def.name;
    for (std::size_t s = 0; s < opt.seeds; ++s) check_instance(def, opt.seed + s, opt, rep);
    const std::size_t total = rep.checked + rep.skipped;
    rep.passed = rep.checked > 0 && rep.failures.empty() &&
                 static_cast<double>(rep.skipped) <= opt.max_skip_fraction * static_cast<double>(total);
    report.groups.push_back(std::move(rep));
  }
  return report;
}

}  // namespace flowlut
