#include "flowlut/imageio.hpp"

#include <zlib.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "flowlut/errors.hpp"

namespace flowlut {

Tensor to_tensor(const ImageBuffer& img) {
  const std::size_t hw = img.width * img.height;
  if (img.pixels.size() != 3 * hw) throw ShapeError("image buffer length does not match 3*W*H");
  Tensor t(Shape{3, img.height, img.width});
  for (std::size_t p = 0; p < hw; ++p) {
    for (std::size_t c = 0; c < 3; ++c) t[c * hw + p] = img.pixels[3 * p + c] / 255.0f;
  }
  return t;
}

ImageBuffer to_buffer(const Tensor& t) {
  if (t.rank() != 3 || t.dim(0) != 3) {
    throw ShapeError("expected a 3 x H x W image tensor, got " + shape_str(t.shape()));
  }
  ImageBuffer img{t.dim(2), t.dim(1), {}};
  const std::size_t hw = img.width * img.height;
  img.pixels.resize(3 * hw);
  for (std::size_t p = 0; p < hw; ++p) {
    for (std::size_t c = 0; c < 3; ++c) {
      const float v = t[c * hw + p];
      if (!(v >= 0.0f && v <= 1.0f)) {
        throw UsageError("pixel value " + std::to_string(v) + " outside [0,1]; clamp before saving");
      }
      img.pixels[3 * p + c] = static_cast<std::uint8_t>(std::floor(v * 255.0f + 0.5f));
    }
  }
  return img;
}

// ------------------------------------------------------------------- PPM

namespace {

class HeaderScanner {
 public:
  explicit HeaderScanner(std::span<const std::uint8_t> b) : b_(b) {}

  std::size_t number() {
    skip_space_and_comments();
    const std::size_t start = pos_;
    std::size_t v = 0;
    while (pos_ < b_.size() && std::isdigit(b_[pos_])) {
      v = v * 10 + (b_[pos_] - '0');
      if (v > (1u << 30)) throw ParseError("PPM header value too large at byte " + std::to_string(start), start);
      ++pos_;
    }
    if (pos_ == start) {
      throw ParseError("PPM header: expected a number at byte " + std::to_string(start), start);
    }
    return v;
  }
  void single_whitespace() {
    if (pos_ >= b_.size() || !std::isspace(b_[pos_])) {
      throw ParseError("PPM header: expected whitespace at byte " + std::to_string(pos_), pos_);
    }
    ++pos_;
  }
  std::size_t pos() const { return pos_; }
  void seek(std::size_t p) { pos_ = p; }

 private:
  void skip_space_and_comments() {
    while (pos_ < b_.size()) {
      if (std::isspace(b_[pos_])) {
        ++pos_;
      } else if (b_[pos_] == '#') {
        while (pos_ < b_.size() && b_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }
  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

}  // namespace

ImageBuffer decode_ppm(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6') {
    throw ParseError("not a binary PPM (missing P6 signature) at byte 0", 0);
  }
  HeaderScanner s(bytes);
  s.seek(2);
  ImageBuffer img;
  img.width = s.number();
  img.height = s.number();
  const std::size_t maxval_at = s.pos();
  const std::size_t maxval = s.number();
  if (maxval != 255) {
    throw ParseError("unsupported PPM maxval " + std::to_string(maxval) + " at byte " +
                         std::to_string(maxval_at) + " (only 255)",
                     maxval_at);
  }
  if (img.width == 0 || img.height == 0) throw ParseError("PPM with zero extent", maxval_at);
  s.single_whitespace();
  const std::size_t need = 3 * img.width * img.height;
  if (bytes.size() - s.pos() < need) {
    throw ParseError("PPM pixel data truncated at byte " + std::to_string(bytes.size()) +
                         ": need " + std::to_string(need) + " bytes from offset " +
                         std::to_string(s.pos()),
                     bytes.size());
  }
  img.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(s.pos()),
                    bytes.begin() + static_cast<std::ptrdiff_t>(s.pos() + need));
  return img;
}

std::vector<std::uint8_t> encode_ppm(const ImageBuffer& img) {
  const std::string header =
      "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), img.pixels.begin(), img.pixels.end());
  return out;
}

// ------------------------------------------------------------------- PNG

namespace {

constexpr std::uint8_t kPngSig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

std::uint32_t be32(const std::uint8_t* p) {
  return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) | p[3];
}

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

void put_chunk(std::vector<std::uint8_t>& out, const char type[4], const std::vector<std::uint8_t>& data) {
  put_be32(out, static_cast<std::uint32_t>(data.size()));
  const std::size_t crc_from = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), data.begin(), data.end());
  const uLong crc = crc32(0L, out.data() + crc_from, static_cast<uInt>(out.size() - crc_from));
  put_be32(out, static_cast<std::uint32_t>(crc));
}

std::uint8_t paeth(int a, int b, int c) {
  const int p = a + b - c;
  const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return static_cast<std::uint8_t>(a);
  if (pb <= pc) return static_cast<std::uint8_t>(b);
  return static_cast<std::uint8_t>(c);
}

}  // namespace

ImageBuffer decode_png(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kPngSig, 8) != 0) {
    throw ParseError("not a PNG (bad signature) at byte 0", 0);
  }
  std::size_t pos = 8;
  std::size_t width = 0, height = 0, channels = 0;
  bool have_header = false, have_end = false;
  std::vector<std::uint8_t> idat;
  while (pos < bytes.size() && !have_end) {
    if (bytes.size() - pos < 12) throw ParseError("PNG chunk header truncated at byte " + std::to_string(pos), pos);
    const std::uint32_t len = be32(&bytes[pos]);
    const std::size_t type_at = pos + 4;
    const std::string type(reinterpret_cast<const char*>(&bytes[type_at]), 4);
    if (bytes.size() - pos - 12 < len) {
      throw ParseError("PNG chunk " + type + " truncated at byte " + std::to_string(pos), pos);
    }
    const std::uint8_t* data = &bytes[pos + 8];
    const uLong crc = crc32(0L, &bytes[type_at], len + 4);
    if (crc != be32(data + len)) {
      throw ParseError("PNG chunk " + type + " CRC mismatch at byte " + std::to_string(pos), pos);
    }
    if (type == "IHDR") {
      if (len != 13) throw ParseError("PNG IHDR has wrong length at byte " + std::to_string(pos), pos);
      width = be32(data);
      height = be32(data + 4);
      const std::uint8_t depth = data[8], color = data[9], interlace = data[12];
      if (depth != 8) {
        throw ParseError("unsupported PNG bit depth " + std::to_string(depth) + " at byte " +
                             std::to_string(pos + 16) + " (only 8-bit)",
                         pos + 16);
      }
      if (color == 2) {
        channels = 3;
      } else if (color == 6) {
        channels = 4;
      } else {
        throw ParseError("unsupported PNG color type " + std::to_string(color) + " at byte " +
                             std::to_string(pos + 17) + " (only RGB/RGBA)",
                         pos + 17);
      }
      if (data[10] != 0 || data[11] != 0) {
        throw ParseError("unsupported PNG compression/filter method at byte " + std::to_string(pos + 18), pos + 18);
      }
      if (interlace != 0) {
        throw ParseError("interlaced PNG not supported at byte " + std::to_string(pos + 20), pos + 20);
      }
      if (width == 0 || height == 0 || width > (1u << 16) || height > (1u << 16)) {
        throw ParseError("PNG dimensions out of range at byte " + std::to_string(pos + 8), pos + 8);
      }
      have_header = true;
    } else if (type == "IDAT") {
      if (!have_header) throw ParseError("PNG IDAT before IHDR at byte " + std::to_string(pos), pos);
      idat.insert(idat.end(), data, data + len);
    } else if (type == "IEND") {
      have_end = true;
    }
    pos += 12 + len;
  }
  if (!have_header) throw ParseError("PNG missing IHDR", pos);
  if (!have_end) throw ParseError("PNG truncated: no IEND chunk before byte " + std::to_string(pos), pos);

  const std::size_t stride = width * channels;
  std::vector<std::uint8_t> raw((stride + 1) * height);
  uLongf raw_len = static_cast<uLongf>(raw.size());
  const int rc = uncompress(raw.data(), &raw_len, idat.data(), static_cast<uLong>(idat.size()));
  if (rc != Z_OK || raw_len != raw.size()) {
    throw ParseError("PNG image data corrupt or truncated (decompressed " + std::to_string(raw_len) +
                         " of " + std::to_string(raw.size()) + " bytes) before byte " +
                         std::to_string(pos),
                     pos);
  }

  std::vector<std::uint8_t> cur(stride), prev(stride, 0);
  ImageBuffer img{width, height, std::vector<std::uint8_t>(3 * width * height)};
  for (std::size_t y = 0; y < height; ++y) {
    const std::uint8_t filter = raw[y * (stride + 1)];
    const std::uint8_t* src = &raw[y * (stride + 1) + 1];
    for (std::size_t i = 0; i < stride; ++i) {
      const int a = i >= channels ? cur[i - channels] : 0;
      const int b = prev[i];
      const int c = i >= channels ? prev[i - channels] : 0;
      int v = src[i];
      switch (filter) {
        case 0: break;
        case 1: v += a; break;
        case 2: v += b; break;
        case 3: v += (a + b) / 2; break;
        case 4: v += paeth(a, b, c); break;
        default:
          throw ParseError("PNG row " + std::to_string(y) + " has invalid filter type " +
                               std::to_string(filter),
                           pos);
      }
      cur[i] = static_cast<std::uint8_t>(v & 0xff);
    }
    for (std::size_t x = 0; x < width; ++x) {
      for (std::size_t c = 0; c < 3; ++c) img.pixels[3 * (y * width + x) + c] = cur[x * channels + c];
    }
    std::swap(cur, prev);
  }
  return img;
}

std::vector<std::uint8_t> encode_png(const ImageBuffer& img) {
  std::vector<std::uint8_t> out(kPngSig, kPngSig + 8);
  std::vector<std::uint8_t> ihdr;
  put_be32(ihdr, static_cast<std::uint32_t>(img.width));
  put_be32(ihdr, static_cast<std::uint32_t>(img.height));
  ihdr.insert(ihdr.end(), {8, 2, 0, 0, 0});
  put_chunk(out, "IHDR", ihdr);

  const std::size_t stride = 3 * img.width;
  std::vector<std::uint8_t> raw;
  raw.reserve((stride + 1) * img.height);
  for (std::size_t y = 0; y < img.height; ++y) {
    raw.push_back(0);
    raw.insert(raw.end(), img.pixels.begin() + static_cast<std::ptrdiff_t>(y * stride),
               img.pixels.begin() + static_cast<std::ptrdiff_t>((y + 1) * stride));
  }
  uLongf zlen = compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> z(zlen);
  if (compress2(z.data(), &zlen, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK) {
    throw IoError("PNG compression failed");
  }
  z.resize(zlen);
  put_chunk(out, "IDAT", z);
  put_chunk(out, "IEND", {});
  return out;
}

// ------------------------------------------------------------------ files

Tensor load_image(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open image " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  try {
    if (bytes.size() >= 8 && std::memcmp(bytes.data(), kPngSig, 8) == 0) return to_tensor(decode_png(bytes));
    if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '6') return to_tensor(decode_ppm(bytes));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), e.location());
  }
  throw ParseError(path.string() + ": unsupported image format at byte 0 (expected P6 PPM or PNG)", 0);
}

void save_image(const Tensor& t, const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  std::vector<std::uint8_t> bytes;
  if (ext == ".ppm") {
    bytes = encode_ppm(to_buffer(t));
  } else if (ext == ".png") {
    bytes = encode_png(to_buffer(t));
  } else {
    throw UsageError("cannot infer image format from extension '" + ext + "' (use .ppm or .png)");
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("failed writing " + path.string());
}

}  // namespace flowlut
