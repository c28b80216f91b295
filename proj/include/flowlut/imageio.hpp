#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "flowlut/tensor.hpp"

namespace flowlut {

/// Interleaved 8-bit RGB, row-major.
struct ImageBuffer {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;  // 3 * width * height
};

// Planar float <-> interleaved bytes. This is the only layout conversion
// point between files and tensors.
Tensor to_tensor(const ImageBuffer& img);
/// round(v * 255) with halves rounded up; throws UsageError for values
/// outside [0, 1] or non-finite values.
ImageBuffer to_buffer(const Tensor& t);

/// Binary PPM, maxval 255. Errors carry the byte offset.
ImageBuffer decode_ppm(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_ppm(const ImageBuffer& img);

/// 8-bit RGB or RGBA PNG (alpha dropped), non-interlaced.
ImageBuffer decode_png(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_png(const ImageBuffer& img);

/// Format chosen from the file signature.
Tensor load_image(const std::filesystem::path& path);
/// Format chosen from the extension (.ppm or .png).
void save_image(const Tensor& t, const std::filesystem::path& path);

}  // namespace flowlut
