#include "flowlut/lut.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include "flowlut/branch_probe.hpp"
#include "flowlut/errors.hpp"
#include "flowlut/parallel.hpp"

namespace flowlut {

Lut3D::Lut3D(std::size_t d) : size(d), table(Shape{d, d, d, 3}) {
  if (d < 2) throw SizeError("LUT lattice size must be at least 2, got " + std::to_string(d));
}

Rgb Lut3D::at(std::size_t r, std::size_t g, std::size_t b) const {
  const std::size_t o = offset(r, g, b);
  return {table[o], table[o + 1], table[o + 2]};
}

void Lut3D::set(std::size_t r, std::size_t g, std::size_t b, const Rgb& v) {
  const std::size_t o = offset(r, g, b);
  table[o] = v[0];
  table[o + 1] = v[1];
  table[o + 2] = v[2];
}

const char* prior_name(Prior p) {
  switch (p) {
    case Prior::identity: return "identity";
    case Prior::gamma: return "gamma";
    case Prior::warm: return "warm";
    case Prior::cool: return "cool";
    case Prior::saturation: return "saturation";
    case Prior::brightness: return "brightness";
    case Prior::s_curve: return "s_curve";
    case Prior::inversion: return "inversion";
  }
  return "unknown";
}

namespace {

float clamp01(float v) { return std::min(1.0f, std::max(0.0f, v)); }

}  // namespace

// Hexcone model; when channels tie for the maximum, R wins over G over B.
Rgb rgb_to_hsv(const Rgb& p) {
  const float r = p[0], g = p[1], b = p[2];
  const float mx = std::max({r, g, b});
  const float mn = std::min({r, g, b});
  const float c = mx - mn;
  float h = 0.0f;
  if (c > 0.0f) {
    if (r >= g && r >= b) {
      h = std::fmod((g - b) / c + 6.0f, 6.0f);
    } else if (g >= b) {
      h = (b - r) / c + 2.0f;
    } else {
      h = (r - g) / c + 4.0f;
    }
  }
  const float s = mx > 0.0f ? c / mx : 0.0f;
  return {h, s, mx};
}

Rgb hsv_to_rgb(const Rgb& hsv) {
  const float h = hsv[0], s = hsv[1], v = hsv[2];
  const float c = v * s;
  const float x = c * (1.0f - std::fabs(std::fmod(h, 2.0f) - 1.0f));
  const float m = v - c;
  Rgb out{};
  switch (static_cast<int>(std::floor(h)) % 6) {
    case 0: out = {c, x, 0}; break;
    case 1: out = {x, c, 0}; break;
    case 2: out = {0, c, x}; break;
    case 3: out = {0, x, c}; break;
    case 4: out = {x, 0, c}; break;
    default: out = {c, 0, x}; break;
  }
  return {out[0] + m, out[1] + m, out[2] + m};
}

Rgb eval_prior(Prior prior, const Rgb& p, const PriorParams& params) {
  switch (prior) {
    case Prior::identity:
      return p;
    case Prior::gamma:
      return {std::pow(p[0], params.gamma), std::pow(p[1], params.gamma),
              std::pow(p[2], params.gamma)};
    case Prior::warm:
      return {clamp01(p[0] + params.temperature_shift), p[1],
              clamp01(p[2] - params.temperature_shift)};
    case Prior::cool:
      return {clamp01(p[0] - params.temperature_shift), p[1],
              clamp01(p[2] + params.temperature_shift)};
    case Prior::saturation: {
      Rgb hsv = rgb_to_hsv(p);
      hsv[1] = clamp01(hsv[1] * params.saturation_gain);
      const Rgb out = hsv_to_rgb(hsv);
      return {clamp01(out[0]), clamp01(out[1]), clamp01(out[2])};
    }
    case Prior::brightness:
      return {clamp01(p[0] + params.brightness_shift), clamp01(p[1] + params.brightness_shift),
              clamp01(p[2] + params.brightness_shift)};
    case Prior::s_curve: {
      auto s = [](float x) {
        return static_cast<float>(0.5 - 0.5 * std::cos(std::numbers::pi * x));
      };
      return {s(p[0]), s(p[1]), s(p[2])};
    }
    case Prior::inversion:
      return {1.0f - p[0], 1.0f - p[1], 1.0f - p[2]};
  }
  return p;
}

Lut3D make_prior_lut(Prior prior, std::size_t d, const PriorParams& params) {
  Lut3D lut(d);
  const float step = 1.0f / static_cast<float>(d - 1);
  for (std::size_t r = 0; r < d; ++r) {
    for (std::size_t g = 0; g < d; ++g) {
      for (std::size_t b = 0; b < d; ++b) {
        const Rgb p{static_cast<float>(r) * step, static_cast<float>(g) * step,
                    static_cast<float>(b) * step};
        lut.set(r, g, b, eval_prior(prior, p, params));
      }
    }
  }
  return lut;
}

std::size_t LutBank::param_count() const {
  std::size_t n = 0;
  for (const auto& l : luts) n += l.table.numel();
  return n;
}

LutBank init_specialized_luts(std::size_t n, std::size_t d, const PriorParams& params) {
  if (n < 1) throw SizeError("LUT bank needs at least one LUT");
  if (d < 2) throw SizeError("LUT lattice size must be at least 2, got " + std::to_string(d));
  constexpr Prior order[] = {Prior::identity,   Prior::gamma,      Prior::warm,
                             Prior::cool,       Prior::saturation, Prior::brightness,
                             Prior::s_curve,    Prior::inversion};
  LutBank bank;
  for (std::size_t i = 0; i < n; ++i) {
    const Prior p = i < 8 ? order[i] : Prior::identity;
    bank.luts.push_back(make_prior_lut(p, d, params));
    bank.names.emplace_back(prior_name(p));
  }
  return bank;
}

LutBank init_identity_luts(std::size_t n, std::size_t d) {
  if (n < 1) throw SizeError("LUT bank needs at least one LUT");
  LutBank bank;
  for (std::size_t i = 0; i < n; ++i) {
    bank.luts.push_back(make_prior_lut(Prior::identity, d));
    bank.names.emplace_back(prior_name(Prior::identity));
  }
  return bank;
}

// ------------------------------------------------------------ interpolation

namespace {

struct Cell {
  std::size_t corner[8];  // lattice offsets (times 3 already applied)
  float weight[8];
  float frac[3];
  bool inside[3];  // input component within [0,1] (clamp is inactive)
};

// Corner c uses bit 2 for r, bit 1 for g, bit 0 for b.
Cell locate(std::size_t d, float r, float g, float b) {
  Cell cell;
  std::size_t idx[3];
  const float in[3] = {r, g, b};
  const float scale = static_cast<float>(d - 1);
  for (int a = 0; a < 3; ++a) {
    cell.inside[a] = in[a] >= 0.0f && in[a] <= 1.0f;
    const float s = clamp01(in[a]) * scale;
    auto i = static_cast<std::size_t>(s);
    if (i > d - 2) i = d - 2;
    idx[a] = i;
    cell.frac[a] = s - static_cast<float>(i);
  }
  for (int c = 0; c < 8; ++c) {
    const std::size_t ir = idx[0] + ((c >> 2) & 1);
    const std::size_t ig = idx[1] + ((c >> 1) & 1);
    const std::size_t ib = idx[2] + (c & 1);
    cell.corner[c] = ((ir * d + ig) * d + ib) * 3;
    const float wr = (c & 4) ? cell.frac[0] : 1.0f - cell.frac[0];
    const float wg = (c & 2) ? cell.frac[1] : 1.0f - cell.frac[1];
    const float wb = (c & 1) ? cell.frac[2] : 1.0f - cell.frac[2];
    cell.weight[c] = wr * wg * wb;
  }
  return cell;
}

// Separable lerps (b, then g, then r) in the a + f*(b - a) form: equal
// endpoints pass through untouched, so lattices storing an affine map with
// power-of-two spacing reproduce it bit-exactly. Mathematically the same as
// the 8-corner weighted sum that the backward pass differentiates.
void interpolate(const Cell& cell, const float* table, float out[3]) {
  const auto lerp = [](float a, float b, float f) { return a + f * (b - a); };
  for (int ch = 0; ch < 3; ++ch) {
    float v[4];
    for (int c = 0; c < 4; ++c) {
      v[c] = lerp(table[cell.corner[2 * c] + ch], table[cell.corner[2 * c + 1] + ch], cell.frac[2]);
    }
    const float lo = lerp(v[0], v[1], cell.frac[1]);
    const float hi = lerp(v[2], v[3], cell.frac[1]);
    out[ch] = lerp(lo, hi, cell.frac[0]);
  }
}

void require_image(const Tensor& image, const char* what) {
  if (image.rank() != 3 || image.dim(0) != 3) {
    throw ShapeError(std::string(what) + ": expected a 3 x H x W image, got " +
                     shape_str(image.shape()));
  }
}

std::size_t lattice_extent(const Tensor& table) {
  if (table.rank() != 4 || table.dim(3) != 3 || table.dim(0) != table.dim(1) ||
      table.dim(1) != table.dim(2) || table.dim(0) < 2) {
    throw ShapeError("LUT table must be D x D x D x 3, got " + shape_str(table.shape()));
  }
  return table.dim(0);
}

Tensor blend_forward(std::span<const Tensor* const> tables, std::span<const float> w,
                     std::size_t d, const Tensor& image) {
  const std::size_t hw = image.dim(1) * image.dim(2);
  Tensor out(image.shape());
  const float* src = image.data().data();
  float* dst = out.data().data();
  parallel_for(hw, [&](std::size_t begin, std::size_t end) {
    for (std::size_t px = begin; px < end; ++px) {
      const Cell cell = locate(d, src[px], src[hw + px], src[2 * hw + px]);
      float acc[3] = {0, 0, 0};
      for (std::size_t i = 0; i < tables.size(); ++i) {
        float v[3];
        interpolate(cell, tables[i]->data().data(), v);
        acc[0] += w[i] * v[0];
        acc[1] += w[i] * v[1];
        acc[2] += w[i] * v[2];
      }
      dst[px] = acc[0];
      dst[hw + px] = acc[1];
      dst[2 * hw + px] = acc[2];
    }
  });
  return out;
}

// Gradients of sum_i w_i L_i(image) given the output gradient gy.
void blend_backward(std::span<const Tensor* const> tables, std::span<const float> w,
                    std::size_t d, const Tensor& image, const Tensor& gy,
                    std::span<Tensor* const> table_grads, Tensor* weight_grad,
                    Tensor* image_grad) {
  const std::size_t hw = image.dim(1) * image.dim(2);
  const float* src = image.data().data();
  const float* g = gy.data().data();
  const float scale = static_cast<float>(d - 1);
  std::vector<double> wsum(tables.size(), 0.0);
  for (std::size_t px = 0; px < hw; ++px) {
    const float gp[3] = {g[px], g[hw + px], g[2 * hw + px]};
    const Cell cell = locate(d, src[px], src[hw + px], src[2 * hw + px]);
    double dp[3] = {0, 0, 0};
    for (std::size_t i = 0; i < tables.size(); ++i) {
      const float* t = tables[i]->data().data();
      if (weight_grad) {
        float v[3];
        interpolate(cell, t, v);
        wsum[i] += static_cast<double>(gp[0]) * v[0] + static_cast<double>(gp[1]) * v[1] +
                   static_cast<double>(gp[2]) * v[2];
      }
      if (table_grads[i]) {
        float* gt = table_grads[i]->data().data();
        for (int c = 0; c < 8; ++c) {
          const float k = w[i] * cell.weight[c];
          float* dst = gt + cell.corner[c];
          dst[0] += k * gp[0];
          dst[1] += k * gp[1];
          dst[2] += k * gp[2];
        }
      }
      if (image_grad) {
        const float* f = cell.frac;
        for (int c = 0; c < 8; ++c) {
          const float* v = t + cell.corner[c];
          const float proj = gp[0] * v[0] + gp[1] * v[1] + gp[2] * v[2];
          const float wr = (c & 4) ? f[0] : 1.0f - f[0];
          const float wg = (c & 2) ? f[1] : 1.0f - f[1];
          const float wb = (c & 1) ? f[2] : 1.0f - f[2];
          const float sr = (c & 4) ? 1.0f : -1.0f;
          const float sg = (c & 2) ? 1.0f : -1.0f;
          const float sb = (c & 1) ? 1.0f : -1.0f;
          dp[0] += static_cast<double>(w[i]) * proj * sr * wg * wb;
          dp[1] += static_cast<double>(w[i]) * proj * wr * sg * wb;
          dp[2] += static_cast<double>(w[i]) * proj * wr * wg * sb;
        }
      }
    }
    if (image_grad) {
      float* gi = image_grad->data().data();
      for (int a = 0; a < 3; ++a) {
        if (cell.inside[a]) gi[a * hw + px] += static_cast<float>(dp[a] * scale);
      }
    }
  }
  if (weight_grad) {
    for (std::size_t i = 0; i < tables.size(); ++i) {
      (*weight_grad)[i] += static_cast<float>(wsum[i]);
    }
  }
}

}  // namespace

Rgb trilinear_lookup(const Lut3D& lut, const Rgb& p) {
  const Cell cell = locate(lut.size, p[0], p[1], p[2]);
  float v[3];
  interpolate(cell, lut.table.data().data(), v);
  return {v[0], v[1], v[2]};
}

Tensor trilinear_apply(const Lut3D& lut, const Tensor& image) {
  require_image(image, "trilinear_apply");
  const Tensor* tables[] = {&lut.table};
  const float w[] = {1.0f};
  return blend_forward(tables, w, lattice_extent(lut.table), image);
}

namespace {

void probe_cells(std::size_t d, const Tensor& image) {
  auto* probe = active_branch_probe();
  if (!probe) return;
  const std::size_t hw = image.dim(1) * image.dim(2);
  const float* src = image.data().data();
  for (std::size_t px = 0; px < hw; ++px) {
    const Cell cell = locate(d, src[px], src[hw + px], src[2 * hw + px]);
    probe->mix(cell.corner[0]);
    probe->mix(cell.inside[0] | (cell.inside[1] << 1) | (cell.inside[2] << 2));
  }
}

}  // namespace

Var trilinear_apply(Graph& g, Var table, Var image) {
  const Tensor* tv = &g.value(table);
  const Tensor* iv = &g.value(image);
  require_image(*iv, "trilinear_apply");
  const std::size_t d = lattice_extent(*tv);
  const Tensor* tables[] = {tv};
  const float w[] = {1.0f};
  Tensor out = blend_forward(tables, w, d, *iv);
  probe_cells(d, *iv);
  return g.record("trilinear_apply", std::move(out), {table, image},
                  [tv, iv, d](const Tensor& gy, std::span<Tensor* const> in) {
                    const Tensor* tables[] = {tv};
                    const float w[] = {1.0f};
                    Tensor* grads[] = {in[0]};
                    blend_backward(tables, w, d, *iv, gy, grads, nullptr, in[1]);
                  });
}

Tensor blend_apply(const LutBank& bank, const Tensor& weights, const Tensor& image) {
  require_image(image, "blend_apply");
  if (weights.rank() != 1 || weights.numel() != bank.count()) {
    throw ShapeError("blend_apply: " + std::to_string(bank.count()) +
                     " LUTs but weight vector has shape " + shape_str(weights.shape()));
  }
  std::vector<const Tensor*> tables;
  for (const auto& l : bank.luts) {
    if (l.size != bank.lattice_size()) throw ShapeError("blend_apply: LUT sizes differ");
    tables.push_back(&l.table);
  }
  return blend_forward(tables, weights.data(), bank.lattice_size(), image);
}

Var blend_apply(Graph& g, std::span<const Var> tables, Var weights, Var image) {
  const Tensor* wv = &g.value(weights);
  const Tensor* iv = &g.value(image);
  require_image(*iv, "blend_apply");
  if (wv->rank() != 1 || wv->numel() != tables.size()) {
    throw ShapeError("blend_apply: " + std::to_string(tables.size()) +
                     " LUTs but weight vector has shape " + shape_str(wv->shape()));
  }
  std::vector<const Tensor*> tvs;
  std::size_t d = 0;
  for (Var t : tables) {
    tvs.push_back(&g.value(t));
    const std::size_t di = lattice_extent(*tvs.back());
    if (d && di != d) throw ShapeError("blend_apply: LUT sizes differ");
    d = di;
  }
  Tensor out = blend_forward(tvs, wv->data(), d, *iv);
  probe_cells(d, *iv);
  std::vector<Var> inputs(tables.begin(), tables.end());
  inputs.push_back(weights);
  inputs.push_back(image);
  const std::size_t n = tables.size();
  return g.record("blend_apply", std::move(out), std::move(inputs),
                  [tvs, wv, iv, d, n](const Tensor& gy, std::span<Tensor* const> in) {
                    blend_backward(tvs, wv->data(), d, *iv, gy, in.first(n), in[n], in[n + 1]);
                  });
}

// ------------------------------------------------------------------ .cube

std::string format_cube(const Lut3D& lut) {
  std::string out = "LUT_3D_SIZE " + std::to_string(lut.size) + "\n";
  out.reserve(out.size() + lut.size * lut.size * lut.size * 30);
  char line[96];
  for (std::size_t b = 0; b < lut.size; ++b) {
    for (std::size_t g = 0; g < lut.size; ++g) {
      for (std::size_t r = 0; r < lut.size; ++r) {
        const Rgb v = lut.at(r, g, b);
        const int n = std::snprintf(line, sizeof line, "%.6f %.6f %.6f\n", v[0], v[1], v[2]);
        out.append(line, static_cast<std::size_t>(n));
      }
    }
  }
  return out;
}

void export_cube(const Lut3D& lut, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  const std::string text = format_cube(lut);
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!f) throw IoError("failed writing " + path.string());
}

namespace {

bool parse_float(std::string_view tok, float& out) {
  const char* end = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(tok.data(), end, out);
  return ec == std::errc() && ptr == end;
}

}  // namespace

Lut3D parse_cube(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  std::size_t d = 0;
  std::vector<float> values;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::vector<std::string> toks;
    for (std::string t; ls >> t;) toks.push_back(t);
    if (toks.empty() || toks[0][0] == '#' || toks[0] == "TITLE") continue;
    if (toks[0] == "LUT_3D_SIZE") {
      if (d) throw ParseError("line " + std::to_string(line_no) + ": duplicate LUT_3D_SIZE", line_no);
      if (toks.size() != 2) {
        throw ParseError("line " + std::to_string(line_no) + ": LUT_3D_SIZE takes one value", line_no);
      }
      std::size_t v = 0;
      auto [ptr, ec] = std::from_chars(toks[1].data(), toks[1].data() + toks[1].size(), v);
      if (ec != std::errc() || ptr != toks[1].data() + toks[1].size() || v < 2) {
        throw ParseError("line " + std::to_string(line_no) + ": invalid LUT_3D_SIZE '" +
                             toks[1] + "'",
                         line_no);
      }
      d = v;
      values.reserve(d * d * d * 3);
      continue;
    }
    if (!d) {
      throw ParseError("line " + std::to_string(line_no) + ": data before LUT_3D_SIZE header",
                       line_no);
    }
    if (toks.size() != 3) {
      throw ParseError("line " + std::to_string(line_no) + ": expected 3 values, found " +
                           std::to_string(toks.size()),
                       line_no);
    }
    for (const auto& t : toks) {
      float v = 0.0f;
      if (!parse_float(t, v)) {
        throw ParseError("line " + std::to_string(line_no) + ": non-numeric token '" + t + "'",
                         line_no);
      }
      values.push_back(v);
    }
    if (values.size() > d * d * d * 3) {
      throw ParseError("line " + std::to_string(line_no) + ": expected D³ entries (" +
                           std::to_string(d * d * d) + " for D=" + std::to_string(d) +
                           "), found more",
                       line_no);
    }
  }
  if (!d) throw ParseError("missing LUT_3D_SIZE header", line_no);
  if (values.size() != d * d * d * 3) {
    throw ParseError("line " + std::to_string(line_no) + ": expected D³ entries (" +
                         std::to_string(d * d * d) + " for D=" + std::to_string(d) +
                         "), found " + std::to_string(values.size() / 3),
                     line_no);
  }
  Lut3D lut(d);
  std::size_t k = 0;
  for (std::size_t b = 0; b < d; ++b) {
    for (std::size_t g = 0; g < d; ++g) {
      for (std::size_t r = 0; r < d; ++r, k += 3) {
        lut.set(r, g, b, {values[k], values[k + 1], values[k + 2]});
      }
    }
  }
  return lut;
}

Lut3D import_cube(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_cube(ss.str());
}

}  // namespace flowlut
