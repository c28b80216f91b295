#pragma once

// Naive reference implementations for the test suites. Deliberately written
// as direct loops in double, independent of the library kernels.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "flowlut/flow_refiner.hpp"
#include "flowlut/tensor.hpp"
#include "flowlut/weight_net.hpp"

namespace oracle {

using flowlut::Shape;
using flowlut::Tensor;

inline Tensor random_tensor(const Shape& s, std::mt19937_64& rng, float lo = -1.0f,
                            float hi = 1.0f) {
  std::uniform_real_distribution<float> d(lo, hi);
  Tensor t(s);
  for (auto& v : t.data()) v = d(rng);
  return t;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  double m = a.shape() == b.shape() ? 0.0 : INFINITY;
  for (std::size_t i = 0; i < std::min(a.numel(), b.numel()); ++i) {
    m = std::max(m, std::fabs(double(a[i]) - double(b[i])));
  }
  return m;
}

inline Tensor conv3x3(const Tensor& x, const Tensor& w, const Tensor& b) {
  const std::size_t cin = x.dim(0), h = x.dim(1), wd = x.dim(2), cout = w.dim(0);
  Tensor y(Shape{cout, h, wd});
  for (std::size_t co = 0; co < cout; ++co)
    for (std::size_t i = 0; i < h; ++i)
      for (std::size_t j = 0; j < wd; ++j) {
        double s = b[co];
        for (std::size_t ci = 0; ci < cin; ++ci)
          for (int di = -1; di <= 1; ++di)
            for (int dj = -1; dj <= 1; ++dj) {
              const long ii = long(i) + di, jj = long(j) + dj;
              if (ii < 0 || jj < 0 || ii >= long(h) || jj >= long(wd)) continue;
              s += double(w[((co * cin + ci) * 3 + (di + 1)) * 3 + (dj + 1)]) *
                   x.at(ci, ii, jj);
            }
        y.at(co, i, j) = float(s);
      }
  return y;
}

inline Tensor maxpool2(const Tensor& x) {
  const std::size_t c = x.dim(0), h = x.dim(1) / 2, w = x.dim(2) / 2;
  Tensor y(Shape{c, h, w});
  for (std::size_t k = 0; k < c; ++k)
    for (std::size_t i = 0; i < h; ++i)
      for (std::size_t j = 0; j < w; ++j) {
        float m = x.at(k, 2 * i, 2 * j);
        for (std::size_t a = 0; a < 2; ++a)
          for (std::size_t b = 0; b < 2; ++b) m = std::max(m, x.at(k, 2 * i + a, 2 * j + b));
        y.at(k, i, j) = m;
      }
  return y;
}

inline Tensor avgpool(const Tensor& x) {
  Tensor y(Shape{x.dim(0)});
  for (std::size_t k = 0; k < x.dim(0); ++k) {
    double s = 0;
    for (std::size_t i = 0; i < x.dim(1); ++i)
      for (std::size_t j = 0; j < x.dim(2); ++j) s += x.at(k, i, j);
    y[k] = float(s / double(x.dim(1) * x.dim(2)));
  }
  return y;
}

inline Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  const std::size_t n = w.dim(0), m = w.dim(1);
  Tensor y(Shape{n});
  for (std::size_t r = 0; r < n; ++r) {
    double s = b[r];
    for (std::size_t c = 0; c < m; ++c) s += double(w[r * m + c]) * x[c];
    y[r] = float(s);
  }
  return y;
}

inline std::vector<long double> softmax(const std::vector<long double>& x) {
  std::vector<long double> e(x.size());
  long double s = 0;
  for (std::size_t i = 0; i < x.size(); ++i) s += e[i] = std::exp(x[i]);
  for (auto& v : e) v /= s;
  return e;
}

inline double mse(const Tensor& a, const Tensor& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.numel(); ++i) s += (double(a[i]) - b[i]) * (double(a[i]) - b[i]);
  return s / double(a.numel());
}

// Lattice stored (r, g, b, channel), point (i,j,k) at color (i,j,k)/(D-1).
inline std::array<double, 3> trilinear(const Tensor& table, std::size_t d, double r, double g,
                                       double b) {
  const double p[3] = {r, g, b};
  std::size_t lo[3];
  double f[3];
  for (int a = 0; a < 3; ++a) {
    const double x = std::clamp(p[a], 0.0, 1.0) * double(d - 1);
    lo[a] = std::min<std::size_t>(std::size_t(std::floor(x)), d - 2);
    f[a] = x - double(lo[a]);
  }
  std::array<double, 3> out{0, 0, 0};
  for (int corner = 0; corner < 8; ++corner) {
    const std::size_t i = lo[0] + (corner >> 2 & 1), j = lo[1] + (corner >> 1 & 1),
                      k = lo[2] + (corner & 1);
    const double wgt = ((corner >> 2 & 1) ? f[0] : 1 - f[0]) *
                       ((corner >> 1 & 1) ? f[1] : 1 - f[1]) * ((corner & 1) ? f[2] : 1 - f[2]);
    for (int c = 0; c < 3; ++c) out[c] += wgt * table[((i * d + j) * d + k) * 3 + c];
  }
  return out;
}

inline Tensor apply_lut(const Tensor& table, std::size_t d, const Tensor& img) {
  Tensor y(img.shape());
  for (std::size_t i = 0; i < img.dim(1); ++i)
    for (std::size_t j = 0; j < img.dim(2); ++j) {
      auto o = trilinear(table, d, img.at(0, i, j), img.at(1, i, j), img.at(2, i, j));
      for (int c = 0; c < 3; ++c) y.at(c, i, j) = float(o[c]);
    }
  return y;
}

// Half-pixel-center bilinear resampling with edge clamping.
inline Tensor resize(const Tensor& x, std::size_t oh, std::size_t ow) {
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  Tensor y(Shape{c, oh, ow});
  auto src = [](std::size_t o, std::size_t in, std::size_t out) {
    return std::clamp((double(o) + 0.5) * double(in) / double(out) - 0.5, 0.0, double(in - 1));
  };
  for (std::size_t k = 0; k < c; ++k)
    for (std::size_t i = 0; i < oh; ++i)
      for (std::size_t j = 0; j < ow; ++j) {
        const double sy = src(i, h, oh), sx = src(j, w, ow);
        const std::size_t y0 = std::size_t(sy), x0 = std::size_t(sx);
        const std::size_t y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
        const double fy = sy - double(y0), fx = sx - double(x0);
        y.at(k, i, j) = float((1 - fy) * ((1 - fx) * x.at(k, y0, x0) + fx * x.at(k, y0, x1)) +
                              fy * ((1 - fx) * x.at(k, y1, x0) + fx * x.at(k, y1, x1)));
      }
  return y;
}

inline Tensor relu(Tensor t) {
  for (auto& v : t.data()) v = std::max(v, 0.0f);
  return t;
}

// Weight generator chained from the loop oracles above.
inline Tensor weightgen(const flowlut::WeightGeneratorParams& p, const Tensor& img) {
  Tensor h = img;
  for (int i = 0; i < 6; ++i) {
    h = oracle::relu(oracle::conv3x3(h, p.convs[i].weight, p.convs[i].bias));
    if (i == 1 || i == 3) h = oracle::maxpool2(h);
  }
  Tensor z = oracle::relu(oracle::linear(oracle::avgpool(h), p.head_hidden.weight, p.head_hidden.bias));
  Tensor logits = oracle::linear(z, p.head_out.weight, p.head_out.bias);
  auto s = oracle::softmax(std::vector<long double>(logits.data().begin(), logits.data().end()));
  Tensor out(Shape{s.size()});
  for (std::size_t i = 0; i < s.size(); ++i) out[i] = float(s[i]);
  return out;
}

inline Tensor flownet(const flowlut::FlowNetParams& p, const Tensor& x) {
  Tensor h = oracle::relu(oracle::conv3x3(x, p.conv1.weight, p.conv1.bias));
  h = oracle::relu(oracle::conv3x3(h, p.conv2.weight, p.conv2.bias));
  Tensor y = oracle::conv3x3(h, p.conv3.weight, p.conv3.bias);
  for (auto& v : y.data()) v = float(std::tanh(double(v)));
  return y;
}

inline Tensor concat(const Tensor& a, const Tensor& b) {
  Tensor c(Shape{a.dim(0) + b.dim(0), a.dim(1), a.dim(2)});
  std::copy(a.data().begin(), a.data().end(), c.data().begin());
  std::copy(b.data().begin(), b.data().end(), c.data().begin() + long(a.numel()));
  return c;
}

inline Tensor refine(const flowlut::FlowNetParams& p, const Tensor& lut, const Tensor& in,
                     std::size_t k) {
  Tensor cur = lut;
  for (std::size_t s = 0; s < k; ++s) {
    Tensor r(cur.shape());
    for (std::size_t i = 0; i < r.numel(); ++i) r[i] = in[i] - cur[i];
    Tensor f = oracle::flownet(p, oracle::concat(cur, r));
    for (std::size_t i = 0; i < r.numel(); ++i) cur[i] += f[i] / float(k);
  }
  return cur;
}

}  // namespace oracle
