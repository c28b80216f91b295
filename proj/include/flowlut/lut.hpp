#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "flowlut/graph.hpp"
#include "flowlut/tensor.hpp"

namespace flowlut {

using Rgb = std::array<float, 3>;

/// D x D x D lattice of RGB outputs, indexed (r, g, b, channel). Lattice
/// point (i, j, k) sits at input color (i, j, k) / (D - 1).
struct Lut3D {
  std::size_t size = 0;
  Tensor table;
  bool trainable = true;

  Lut3D() = default;
  explicit Lut3D(std::size_t d);

  std::size_t offset(std::size_t r, std::size_t g, std::size_t b) const {
    return ((r * size + g) * size + b) * 3;
  }
  Rgb at(std::size_t r, std::size_t g, std::size_t b) const;
  void set(std::size_t r, std::size_t g, std::size_t b, const Rgb& v);
};

enum class Prior { identity, gamma, warm, cool, saturation, brightness, s_curve, inversion };

const char* prior_name(Prior p);

/// Constants of the analytic prior transforms.
struct PriorParams {
  float gamma = 0.75f;
  float temperature_shift = 0.1f;
  float saturation_gain = 1.3f;
  float brightness_shift = 0.1f;
};

/// Evaluates a prior transform at normalized color p.
Rgb eval_prior(Prior prior, const Rgb& p, const PriorParams& params = {});

Rgb rgb_to_hsv(const Rgb& p);
Rgb hsv_to_rgb(const Rgb& hsv);

Lut3D make_prior_lut(Prior prior, std::size_t d, const PriorParams& params = {});

struct LutBank {
  std::vector<Lut3D> luts;
  std::vector<std::string> names;

  std::size_t count() const noexcept { return luts.size(); }
  std::size_t lattice_size() const noexcept { return luts.empty() ? 0 : luts.front().size; }
  std::size_t param_count() const;
};

/// The first min(n, 8) LUTs follow the prior order identity, gamma, warm,
/// cool, saturation, brightness, s_curve, inversion; the rest are identity.
LutBank init_specialized_luts(std::size_t n, std::size_t d, const PriorParams& params = {});
/// n identity LUTs (the no-prior initialization ablation).
LutBank init_identity_luts(std::size_t n, std::size_t d);

/// Lookup of one color: clamp to [0,1], scale by D-1, cell index clamped to
/// [0, D-2] so p = 1 lands in the last cell with fraction 1.
Rgb trilinear_lookup(const Lut3D& lut, const Rgb& p);

Tensor trilinear_apply(const Lut3D& lut, const Tensor& image);
/// `table` is a D x D x D x 3 lattice node; differentiable in the lattice
/// and in the image.
Var trilinear_apply(Graph& g, Var table, Var image);

/// sum_i weights[i] * L_i(image).
Tensor blend_apply(const LutBank& bank, const Tensor& weights, const Tensor& image);
Var blend_apply(Graph& g, std::span<const Var> tables, Var weights, Var image);

/// Writes the text `.cube` format: `LUT_3D_SIZE D`, then D^3 rows of three
/// 6-decimal values with the red index varying fastest.
void export_cube(const Lut3D& lut, const std::filesystem::path& path);
std::string format_cube(const Lut3D& lut);
Lut3D import_cube(const std::filesystem::path& path);
Lut3D parse_cube(const std::string& text);

}  // namespace flowlut
