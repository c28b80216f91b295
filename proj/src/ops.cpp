#include "flowlut/ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <string>

#include "flowlut/branch_probe.hpp"
#include "flowlut/errors.hpp"

namespace flowlut {
namespace {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using StridedMap = Eigen::Map<RowMat, 0, Eigen::OuterStride<>>;
using ConstStridedMap = Eigen::Map<const RowMat, 0, Eigen::OuterStride<>>;

// Upper bound on the im2col scratch buffer, in floats.
constexpr std::size_t kColBudget = std::size_t{1} << 22;

void require_chw(const Tensor& t, const char* what) {
  if (t.rank() != 3) {
    throw ShapeError(std::string(what) + ": expected C x H x W tensor, got " +
                     shape_str(t.shape()));
  }
}

void check_conv_shapes(const Tensor& x, const Tensor& w, const Tensor& b) {
  require_chw(x, "conv2d input");
  if (w.rank() != 4 || w.dim(2) != 3 || w.dim(3) != 3) {
    throw ShapeError("conv2d: weights must be C_out x C_in x 3 x 3, got " +
                     shape_str(w.shape()));
  }
  if (w.dim(1) != x.dim(0)) {
    throw ShapeError("conv2d: input has " + std::to_string(x.dim(0)) +
                     " channels but weights expect " + std::to_string(w.dim(1)));
  }
  if (b.rank() != 1 || b.dim(0) != w.dim(0)) {
    throw ShapeError("conv2d: bias shape " + shape_str(b.shape()) +
                     " does not match " + std::to_string(w.dim(0)) +
                     " output channels");
  }
}

// Grow-only per-thread scratch for the column matrices; contents are
// unspecified on return. Reusing it avoids faulting in fresh pages for
// every convolution.
float* scratch(int slot, std::size_t n) {
  thread_local std::unique_ptr<float[]> buf[2];
  thread_local std::size_t cap[2] = {0, 0};
  if (cap[slot] < n) {
    buf[slot].reset(new float[n]);
    cap[slot] = n;
  }
  return buf[slot].get();
}

struct ConvGeom {
  std::size_t cin, cout, h, w;
  std::size_t k() const { return cin * 9; }
  std::size_t rows_per_chunk() const {
    return std::max<std::size_t>(1, kColBudget / (k() * w));
  }
};

// Valid output columns [lo, hi) for horizontal tap kx: source column j + kx - 1
// must lie inside the row.
inline std::size_t tap_lo(int kx) { return kx == 0 ? 1 : 0; }
inline std::size_t tap_hi(int kx, std::size_t w) { return kx == 2 ? w - 1 : w; }

// Column matrix for output rows [r0, r1): (cin*9) x ((r1-r0)*w).
void im2col(const float* x, const ConvGeom& g, std::size_t r0, std::size_t r1,
            float* col) {
  const std::size_t n = (r1 - r0) * g.w;
  for (std::size_t ci = 0; ci < g.cin; ++ci) {
    const float* plane = x + ci * g.h * g.w;
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        float* dst = col + (ci * 9 + ky * 3 + kx) * n;
        const std::size_t lo = tap_lo(kx), hi = tap_hi(kx, g.w);
        for (std::size_t r = r0; r < r1; ++r) {
          const auto sr = static_cast<std::ptrdiff_t>(r) + ky - 1;
          float* drow = dst + (r - r0) * g.w;
          if (sr < 0 || sr >= static_cast<std::ptrdiff_t>(g.h) || lo >= hi) {
            std::fill(drow, drow + g.w, 0.0f);
            continue;
          }
          const float* srow = plane + sr * g.w + kx - 1;
          if (lo) drow[0] = 0.0f;
          if (hi < g.w) drow[g.w - 1] = 0.0f;
          std::copy(srow + lo, srow + hi, drow + lo);
        }
      }
    }
  }
}

void col2im_add(const float* col, const ConvGeom& g, std::size_t r0,
                std::size_t r1, float* gx) {
  const std::size_t n = (r1 - r0) * g.w;
  for (std::size_t ci = 0; ci < g.cin; ++ci) {
    float* plane = gx + ci * g.h * g.w;
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        const float* src = col + (ci * 9 + ky * 3 + kx) * n;
        const std::size_t lo = tap_lo(kx), hi = tap_hi(kx, g.w);
        if (lo >= hi) continue;
        for (std::size_t r = r0; r < r1; ++r) {
          const auto sr = static_cast<std::ptrdiff_t>(r) + ky - 1;
          if (sr < 0 || sr >= static_cast<std::ptrdiff_t>(g.h)) continue;
          const float* srow = src + (r - r0) * g.w;
          float* drow = plane + sr * g.w + kx - 1;
          for (std::size_t j = lo; j < hi; ++j) drow[j] += srow[j];
        }
      }
    }
  }
}

Tensor conv2d_forward(const Tensor& x, const Tensor& w, const Tensor& b) {
  check_conv_shapes(x, w, b);
  const ConvGeom g{x.dim(0), w.dim(0), x.dim(1), x.dim(2)};
  Tensor y(Shape{g.cout, g.h, g.w});
  const std::size_t hw = g.h * g.w;
  Eigen::Map<const RowMat> wm(w.data().data(), g.cout, g.k());
  const std::size_t step = g.rows_per_chunk();
  float* col = scratch(0, g.k() * std::min(g.h, step) * g.w);
  for (std::size_t r0 = 0; r0 < g.h; r0 += step) {
    const std::size_t r1 = std::min(g.h, r0 + step);
    const std::size_t n = (r1 - r0) * g.w;
    im2col(x.data().data(), g, r0, r1, col);
    Eigen::Map<const RowMat> cm(col, g.k(), n);
    StridedMap out(y.data().data() + r0 * g.w, g.cout, n, Eigen::OuterStride<>(hw));
    out.noalias() = wm * cm;
    for (std::size_t c = 0; c < g.cout; ++c) out.row(c).array() += b[c];
  }
  return y;
}

void conv2d_backward(const Tensor& x, const Tensor& w, const Tensor& gy,
                     Tensor* gx, Tensor* gw, Tensor* gb) {
  const ConvGeom g{x.dim(0), w.dim(0), x.dim(1), x.dim(2)};
  const std::size_t hw = g.h * g.w;
  if (gb) {
    for (std::size_t c = 0; c < g.cout; ++c) {
      double s = 0.0;
      const float* row = gy.data().data() + c * hw;
      for (std::size_t k = 0; k < hw; ++k) s += row[k];
      (*gb)[c] += static_cast<float>(s);
    }
  }
  if (gw) {
    Eigen::Map<RowMat> gwm(gw->data().data(), g.cout, g.k());
    const std::size_t step = g.rows_per_chunk();
    float* col = scratch(0, g.k() * std::min(g.h, step) * g.w);
    for (std::size_t r0 = 0; r0 < g.h; r0 += step) {
      const std::size_t r1 = std::min(g.h, r0 + step);
      const std::size_t n = (r1 - r0) * g.w;
      ConstStridedMap gm(gy.data().data() + r0 * g.w, g.cout, n, Eigen::OuterStride<>(hw));
      im2col(x.data().data(), g, r0, r1, col);
      Eigen::Map<const RowMat> cm(col, g.k(), n);
      gwm.noalias() += gm * cm.transpose();
    }
  }
  if (!gx) return;
  if (g.cout < g.cin) {
    // Narrow output: the input gradient is a convolution of gy with the
    // flipped, transposed kernel, whose column matrix is cin/cout times
    // smaller than the one scattered back by col2im.
    const ConvGeom t{g.cout, g.cin, g.h, g.w};
    RowMat wt(g.cin, t.k());
    const float* wd = w.data().data();
    for (std::size_t co = 0; co < g.cout; ++co) {
      for (std::size_t ci = 0; ci < g.cin; ++ci) {
        for (std::size_t k = 0; k < 9; ++k) wt(ci, co * 9 + k) = wd[(co * g.cin + ci) * 9 + 8 - k];
      }
    }
    const std::size_t step = t.rows_per_chunk();
    float* col = scratch(1, t.k() * std::min(g.h, step) * g.w);
    for (std::size_t r0 = 0; r0 < g.h; r0 += step) {
      const std::size_t r1 = std::min(g.h, r0 + step);
      const std::size_t n = (r1 - r0) * g.w;
      im2col(gy.data().data(), t, r0, r1, col);
      Eigen::Map<const RowMat> cm(col, t.k(), n);
      StridedMap out(gx->data().data() + r0 * g.w, g.cin, n, Eigen::OuterStride<>(hw));
      out.noalias() += wt * cm;
    }
    return;
  }
  Eigen::Map<const RowMat> wm(w.data().data(), g.cout, g.k());
  const std::size_t step = g.rows_per_chunk();
  float* gcol = scratch(1, g.k() * std::min(g.h, step) * g.w);
  for (std::size_t r0 = 0; r0 < g.h; r0 += step) {
    const std::size_t r1 = std::min(g.h, r0 + step);
    const std::size_t n = (r1 - r0) * g.w;
    ConstStridedMap gm(gy.data().data() + r0 * g.w, g.cout, n, Eigen::OuterStride<>(hw));
    Eigen::Map<RowMat> gcm(gcol, g.k(), n);
    gcm.noalias() = wm.transpose() * gm;
    col2im_add(gcol, g, r0, r1, gx->data().data());
  }
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(what) + ": shape mismatch " +
                     shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

void accumulate(Tensor* dst, const Tensor& src, float s = 1.0f) {
  if (!dst) return;
  auto d = dst->data();
  auto v = src.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s * v[i];
}

struct PoolResult {
  Tensor y;
  std::vector<std::uint32_t> argmax;
};

PoolResult maxpool_forward(const Tensor& x) {
  require_chw(x, "maxpool2x2");
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  if (h < 2 || w < 2) {
    throw SizeError("maxpool2x2: spatial extent " + std::to_string(h) + "x" +
                    std::to_string(w) + " is smaller than the 2x2 window");
  }
  const std::size_t oh = h / 2, ow = w / 2;
  PoolResult r{Tensor(Shape{c, oh, ow}), std::vector<std::uint32_t>(c * oh * ow)};
  const float* src = x.data().data();
  float* dst = r.y.data().data();
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t i = 0; i < oh; ++i) {
      for (std::size_t j = 0; j < ow; ++j) {
        std::size_t best = (ch * h + 2 * i) * w + 2 * j;
        for (std::size_t di = 0; di < 2; ++di) {
          for (std::size_t dj = 0; dj < 2; ++dj) {
            const std::size_t idx = (ch * h + 2 * i + di) * w + 2 * j + dj;
            if (src[idx] > src[best]) best = idx;
          }
        }
        const std::size_t o = (ch * oh + i) * ow + j;
        dst[o] = src[best];
        r.argmax[o] = static_cast<std::uint32_t>(best);
      }
    }
  }
  return r;
}

double clamp_unit_interval(double v, double lo, double hi) {
  return std::min(hi, std::max(lo, v));
}

// Source sampling positions for one output axis of a bilinear resize.
struct AxisTaps {
  std::vector<std::size_t> i0, i1;
  std::vector<float> f;
};

AxisTaps axis_taps(std::size_t in, std::size_t out) {
  AxisTaps t;
  t.i0.resize(out);
  t.i1.resize(out);
  t.f.resize(out);
  const double ratio = static_cast<double>(in) / static_cast<double>(out);
  for (std::size_t o = 0; o < out; ++o) {
    const double src = clamp_unit_interval((o + 0.5) * ratio - 0.5, 0.0,
                                           static_cast<double>(in - 1));
    const auto lo = static_cast<std::size_t>(std::floor(src));
    t.i0[o] = lo;
    t.i1[o] = std::min(lo + 1, in - 1);
    t.f[o] = static_cast<float>(src - static_cast<double>(lo));
  }
  return t;
}

}  // namespace

// ---------------------------------------------------------------- conv2d

Tensor conv2d(const Tensor& x, const Tensor& weights, const Tensor& bias) {
  return conv2d_forward(x, weights, bias);
}

Var conv2d(Graph& g, Var x, Var weights, Var bias) {
  const Tensor* xv = &g.value(x);
  const Tensor* wv = &g.value(weights);
  Tensor y = conv2d_forward(*xv, *wv, g.value(bias));
  return g.record("conv2d", std::move(y), {x, weights, bias},
                  [xv, wv](const Tensor& gy, std::span<Tensor* const> in) {
                    conv2d_backward(*xv, *wv, gy, in[0], in[1], in[2]);
                  });
}

// ------------------------------------------------------------ activation

Tensor apply_activation(const Tensor& x, Activation kind) {
  Tensor y = x;
  for (float& v : y.data()) {
    v = kind == Activation::relu ? (v > 0.0f ? v : 0.0f) : std::tanh(v);
  }
  return y;
}

Var apply_activation(Graph& g, Var x, Activation kind) {
  Tensor y = apply_activation(g.value(x), kind);
  if (kind == Activation::relu) {
    const Tensor* xv = &g.value(x);
    if (auto* probe = active_branch_probe()) {
      for (float v : xv->data()) probe->mix(v > 0.0f);
    }
    return g.record("relu", std::move(y), {x},
                    [xv](const Tensor& gy, std::span<Tensor* const> in) {
                      auto gx = in[0]->data();
                      auto xs = xv->data();
                      auto gs = gy.data();
                      for (std::size_t i = 0; i < gx.size(); ++i) {
                        if (xs[i] > 0.0f) gx[i] += gs[i];
                      }
                    });
  }
  Tensor saved = y;
  return g.record("tanh", std::move(y), {x},
                  [saved = std::move(saved)](const Tensor& gy,
                                             std::span<Tensor* const> in) {
                    auto gx = in[0]->data();
                    auto ys = saved.data();
                    auto gs = gy.data();
                    for (std::size_t i = 0; i < gx.size(); ++i) {
                      gx[i] += gs[i] * (1.0f - ys[i] * ys[i]);
                    }
                  });
}

// --------------------------------------------------------------- pooling

Tensor maxpool2x2(const Tensor& x) { return maxpool_forward(x).y; }

Var maxpool2x2(Graph& g, Var x) {
  PoolResult r = maxpool_forward(g.value(x));
  if (auto* probe = active_branch_probe()) {
    for (auto a : r.argmax) probe->mix(a);
  }
  return g.record("maxpool2x2", std::move(r.y), {x},
                  [argmax = std::move(r.argmax)](const Tensor& gy,
                                                 std::span<Tensor* const> in) {
                    auto gx = in[0]->data();
                    auto gs = gy.data();
                    for (std::size_t o = 0; o < argmax.size(); ++o) gx[argmax[o]] += gs[o];
                  });
}

Tensor global_avg_pool(const Tensor& x) {
  require_chw(x, "global_avg_pool");
  const std::size_t c = x.dim(0), hw = x.dim(1) * x.dim(2);
  if (hw == 0) throw SizeError("global_avg_pool: empty spatial extent");
  Tensor y(Shape{c});
  for (std::size_t ch = 0; ch < c; ++ch) {
    double s = 0.0;
    const float* p = x.data().data() + ch * hw;
    for (std::size_t k = 0; k < hw; ++k) s += p[k];
    y[ch] = static_cast<float>(s / static_cast<double>(hw));
  }
  return y;
}

Var global_avg_pool(Graph& g, Var x) {
  const std::size_t hw = g.value(x).dim(1) * g.value(x).dim(2);
  return g.record("global_avg_pool", global_avg_pool(g.value(x)), {x},
                  [hw](const Tensor& gy, std::span<Tensor* const> in) {
                    auto gx = in[0]->data();
                    const float inv = 1.0f / static_cast<float>(hw);
                    for (std::size_t ch = 0; ch < gy.numel(); ++ch) {
                      const float v = gy[ch] * inv;
                      float* p = gx.data() + ch * hw;
                      for (std::size_t k = 0; k < hw; ++k) p[k] += v;
                    }
                  });
}

// ---------------------------------------------------------------- linear

Tensor linear(const Tensor& x, const Tensor& weights, const Tensor& bias) {
  if (x.rank() != 1 || weights.rank() != 2 || weights.dim(1) != x.dim(0)) {
    throw ShapeError("linear: weights " + shape_str(weights.shape()) +
                     " incompatible with input " + shape_str(x.shape()));
  }
  const std::size_t n = weights.dim(0), m = weights.dim(1);
  if (bias.rank() != 1 || bias.dim(0) != n) {
    throw ShapeError("linear: bias shape " + shape_str(bias.shape()) +
                     " does not match " + std::to_string(n) + " outputs");
  }
  Tensor y(Shape{n});
  for (std::size_t r = 0; r < n; ++r) {
    double s = bias[r];
    const float* row = weights.data().data() + r * m;
    for (std::size_t k = 0; k < m; ++k) s += static_cast<double>(row[k]) * x[k];
    y[r] = static_cast<float>(s);
  }
  return y;
}

Var linear(Graph& g, Var x, Var weights, Var bias) {
  const Tensor* xv = &g.value(x);
  const Tensor* wv = &g.value(weights);
  Tensor y = linear(*xv, *wv, g.value(bias));
  return g.record("linear", std::move(y), {x, weights, bias},
                  [xv, wv](const Tensor& gy, std::span<Tensor* const> in) {
                    const std::size_t n = wv->dim(0), m = wv->dim(1);
                    if (in[0]) {
                      auto gx = in[0]->data();
                      for (std::size_t k = 0; k < m; ++k) {
                        double s = 0.0;
                        for (std::size_t r = 0; r < n; ++r) {
                          s += static_cast<double>((*wv)[r * m + k]) * gy[r];
                        }
                        gx[k] += static_cast<float>(s);
                      }
                    }
                    if (in[1]) {
                      auto gw = in[1]->data();
                      for (std::size_t r = 0; r < n; ++r) {
                        for (std::size_t k = 0; k < m; ++k) gw[r * m + k] += gy[r] * (*xv)[k];
                      }
                    }
                    if (in[2]) accumulate(in[2], gy);
                  });
}

// --------------------------------------------------------------- softmax

Tensor softmax(const Tensor& x) {
  if (x.rank() != 1 || x.numel() == 0) {
    throw ShapeError("softmax: expected a non-empty vector, got " + shape_str(x.shape()));
  }
  const float mx = *std::max_element(x.data().begin(), x.data().end());
  std::vector<double> e(x.numel());
  double total = 0.0;
  for (std::size_t i = 0; i < e.size(); ++i) {
    e[i] = std::exp(static_cast<double>(x[i]) - mx);
    total += e[i];
  }
  Tensor y(x.shape());
  for (std::size_t i = 0; i < e.size(); ++i) y[i] = static_cast<float>(e[i] / total);
  return y;
}

Var softmax(Graph& g, Var x) {
  Tensor y = softmax(g.value(x));
  Tensor saved = y;
  return g.record("softmax", std::move(y), {x},
                  [saved = std::move(saved)](const Tensor& gy,
                                             std::span<Tensor* const> in) {
                    double dot = 0.0;
                    for (std::size_t i = 0; i < saved.numel(); ++i) {
                      dot += static_cast<double>(gy[i]) * saved[i];
                    }
                    auto gx = in[0]->data();
                    for (std::size_t i = 0; i < saved.numel(); ++i) {
                      gx[i] += static_cast<float>(saved[i] * (gy[i] - dot));
                    }
                  });
}

// ---------------------------------------------------------------- concat

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  require_chw(a, "concat_channels");
  require_chw(b, "concat_channels");
  if (a.dim(1) != b.dim(1) || a.dim(2) != b.dim(2)) {
    throw ShapeError("concat_channels: spatial mismatch " + shape_str(a.shape()) +
                     " vs " + shape_str(b.shape()));
  }
  std::vector<float> data;
  data.reserve(a.numel() + b.numel());
  data.insert(data.end(), a.data().begin(), a.data().end());
  data.insert(data.end(), b.data().begin(), b.data().end());
  return Tensor(Shape{a.dim(0) + b.dim(0), a.dim(1), a.dim(2)}, std::move(data));
}

Var concat_channels(Graph& g, Var a, Var b) {
  const std::size_t na = g.value(a).numel();
  return g.record("concat_channels", concat_channels(g.value(a), g.value(b)), {a, b},
                  [na](const Tensor& gy, std::span<Tensor* const> in) {
                    auto gs = gy.data();
                    if (in[0]) {
                      auto ga = in[0]->data();
                      for (std::size_t i = 0; i < na; ++i) ga[i] += gs[i];
                    }
                    if (in[1]) {
                      auto gb = in[1]->data();
                      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += gs[na + i];
                    }
                  });
}

// ------------------------------------------------------------------- mse

float mse(const Tensor& out, const Tensor& gt) {
  check_same_shape(out, gt, "mse");
  if (out.numel() == 0) throw ShapeError("mse: empty tensors");
  double s = 0.0;
  for (std::size_t i = 0; i < out.numel(); ++i) {
    const double d = static_cast<double>(out[i]) - gt[i];
    s += d * d;
  }
  return static_cast<float>(s / static_cast<double>(out.numel()));
}

Var mse(Graph& g, Var out, Var gt) {
  const Tensor* ov = &g.value(out);
  const Tensor* tv = &g.value(gt);
  const float loss = mse(*ov, *tv);
  return g.record("mse", Tensor::scalar(loss), {out, gt},
                  [ov, tv](const Tensor& gy, std::span<Tensor* const> in) {
                    const double k = 2.0 * gy[0] / static_cast<double>(ov->numel());
                    for (std::size_t i = 0; i < ov->numel(); ++i) {
                      const auto d = static_cast<float>(k * ((*ov)[i] - (*tv)[i]));
                      if (in[0]) (*in[0])[i] += d;
                      if (in[1]) (*in[1])[i] -= d;
                    }
                  });
}

// ------------------------------------------------------------ elementwise

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  Tensor y = a;
  for (std::size_t i = 0; i < y.numel(); ++i) y[i] += b[i];
  return y;
}

Var add(Graph& g, Var a, Var b) {
  return g.record("add", add(g.value(a), g.value(b)), {a, b},
                  [](const Tensor& gy, std::span<Tensor* const> in) {
                    accumulate(in[0], gy);
                    accumulate(in[1], gy);
                  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  Tensor y = a;
  for (std::size_t i = 0; i < y.numel(); ++i) y[i] -= b[i];
  return y;
}

Var sub(Graph& g, Var a, Var b) {
  return g.record("sub", sub(g.value(a), g.value(b)), {a, b},
                  [](const Tensor& gy, std::span<Tensor* const> in) {
                    accumulate(in[0], gy);
                    accumulate(in[1], gy, -1.0f);
                  });
}

Tensor scale(const Tensor& a, float s) {
  Tensor y = a;
  for (float& v : y.data()) v *= s;
  return y;
}

Var scale(Graph& g, Var a, float s) {
  return g.record("scale", scale(g.value(a), s), {a},
                  [s](const Tensor& gy, std::span<Tensor* const> in) {
                    accumulate(in[0], gy, s);
                  });
}

Tensor clamp(const Tensor& a, float lo, float hi) {
  Tensor y = a;
  // NaN passes through so a poisoned output still reaches the loss check.
  for (float& v : y.data()) v = v < lo ? lo : v > hi ? hi : v;
  return y;
}

Var clamp(Graph& g, Var a, float lo, float hi) {
  const Tensor* av = &g.value(a);
  if (auto* probe = active_branch_probe()) {
    for (float v : av->data()) probe->mix(v <= lo ? 0 : v >= hi ? 2 : 1);
  }
  return g.record("clamp", clamp(*av, lo, hi), {a},
                  [av, lo, hi](const Tensor& gy, std::span<Tensor* const> in) {
                    auto gx = in[0]->data();
                    for (std::size_t i = 0; i < gx.size(); ++i) {
                      const float v = (*av)[i];
                      if (v > lo && v < hi) gx[i] += gy[i];
                    }
                  });
}

// ---------------------------------------------------------------- resize

namespace {

void resize_apply(const float* src, std::size_t c, std::size_t ih, std::size_t iw,
                  const AxisTaps& ty, const AxisTaps& tx, float* dst) {
  const std::size_t oh = ty.i0.size(), ow = tx.i0.size();
  for (std::size_t ch = 0; ch < c; ++ch) {
    const float* p = src + ch * ih * iw;
    for (std::size_t i = 0; i < oh; ++i) {
      const float* r0 = p + ty.i0[i] * iw;
      const float* r1 = p + ty.i1[i] * iw;
      const float fy = ty.f[i];
      for (std::size_t j = 0; j < ow; ++j) {
        const float fx = tx.f[j];
        const float top = r0[tx.i0[j]] + fx * (r0[tx.i1[j]] - r0[tx.i0[j]]);
        const float bot = r1[tx.i0[j]] + fx * (r1[tx.i1[j]] - r1[tx.i0[j]]);
        dst[(ch * oh + i) * ow + j] = top + fy * (bot - top);
      }
    }
  }
}

}  // namespace

Tensor resize_bilinear(const Tensor& x, std::size_t h, std::size_t w) {
  require_chw(x, "resize_bilinear");
  if (h == 0 || w == 0 || x.dim(1) == 0 || x.dim(2) == 0) {
    throw SizeError("resize_bilinear: empty extent");
  }
  if (h == x.dim(1) && w == x.dim(2)) return x;
  Tensor y(Shape{x.dim(0), h, w});
  resize_apply(x.data().data(), x.dim(0), x.dim(1), x.dim(2), axis_taps(x.dim(1), h),
               axis_taps(x.dim(2), w), y.data().data());
  return y;
}

Var resize_bilinear(Graph& g, Var x, std::size_t h, std::size_t w) {
  const Tensor& xv = g.value(x);
  const std::size_t c = xv.dim(0), ih = xv.dim(1), iw = xv.dim(2);
  Tensor y = resize_bilinear(xv, h, w);
  return g.record(
      "resize_bilinear", std::move(y), {x},
      [c, ih, iw, ty = axis_taps(ih, h), tx = axis_taps(iw, w)](
          const Tensor& gy, std::span<Tensor* const> in) {
        auto gx = in[0]->data();
        const std::size_t oh = ty.i0.size(), ow = tx.i0.size();
        for (std::size_t ch = 0; ch < c; ++ch) {
          float* p = gx.data() + ch * ih * iw;
          for (std::size_t i = 0; i < oh; ++i) {
            const float fy = ty.f[i];
            for (std::size_t j = 0; j < ow; ++j) {
              const float v = gy[(ch * oh + i) * ow + j];
              const float fx = tx.f[j];
              p[ty.i0[i] * iw + tx.i0[j]] += v * (1 - fy) * (1 - fx);
              p[ty.i0[i] * iw + tx.i1[j]] += v * (1 - fy) * fx;
              p[ty.i1[i] * iw + tx.i0[j]] += v * fy * (1 - fx);
              p[ty.i1[i] * iw + tx.i1[j]] += v * fy * fx;
            }
          }
        }
      });
}

}  // namespace flowlut
