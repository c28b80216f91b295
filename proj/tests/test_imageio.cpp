#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <zlib.h>

#include "flowlut/errors.hpp"
#include "flowlut/imageio.hpp"
#include "oracles.hpp"

using namespace flowlut;

namespace {

std::vector<std::uint8_t> bytes_of(const std::string& s) { return {s.begin(), s.end()}; }

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("flowlut_test_" + name);
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

// Minimal PNG assembled here from zlib primitives, independent of the
// library encoder.
void chunk(std::vector<std::uint8_t>& out, const char* type, const std::vector<std::uint8_t>& data) {
  auto be32 = [&](std::uint32_t v) {
    for (int s = 24; s >= 0; s -= 8) out.push_back(std::uint8_t(v >> s));
  };
  be32(std::uint32_t(data.size()));
  const std::size_t start = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), data.begin(), data.end());
  be32(std::uint32_t(crc32(0, out.data() + start, uInt(out.size() - start))));
}

std::vector<std::uint8_t> make_png(std::uint32_t w, std::uint32_t h, std::uint8_t color_type,
                                   std::uint8_t depth, const std::vector<std::uint8_t>& raw) {
  std::vector<std::uint8_t> png = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  std::vector<std::uint8_t> ihdr;
  for (std::uint32_t v : {w, h})
    for (int s = 24; s >= 0; s -= 8) ihdr.push_back(std::uint8_t(v >> s));
  ihdr.insert(ihdr.end(), {depth, color_type, 0, 0, 0});
  chunk(png, "IHDR", ihdr);
  uLongf n = compressBound(uLong(raw.size()));
  std::vector<std::uint8_t> z(n);
  compress(z.data(), &n, raw.data(), uLong(raw.size()));
  z.resize(n);
  chunk(png, "IDAT", z);
  chunk(png, "IEND", {});
  return png;
}

}  // namespace

TEST(Ppm, DecodeExamples) {
  const std::string red = std::string("P6\n1 1\n255\n") + char(255) + char(0) + char(0);
  Tensor t = to_tensor(decode_ppm(bytes_of(red)));
  ASSERT_EQ(t.shape(), (Shape{3, 1, 1}));
  EXPECT_EQ(t.storage(), (std::vector<float>{1, 0, 0}));

  std::string two = "P6\n2 1\n255\n";
  two += std::string(3, char(0)) + std::string(3, char(128));
  Tensor u = to_tensor(decode_ppm(bytes_of(two)));
  for (int c = 0; c < 3; ++c) {
    EXPECT_EQ(u.at(c, 0, 0), 0.0f);
    EXPECT_NEAR(u.at(c, 0, 1), 0.50196, 1e-5);
  }
  // Comments and arbitrary whitespace in the header are tolerated.
  const std::string commented = std::string("P6 # c\n1\t1 255\n") + char(1) + char(2) + char(3);
  EXPECT_EQ(decode_ppm(bytes_of(commented)).pixels, (std::vector<std::uint8_t>{1, 2, 3}));
}

TEST(Ppm, EncodeIsBitExact) {
  ImageBuffer b{2, 1, {1, 2, 3, 4, 5, 6}};
  const auto out = encode_ppm(b);
  EXPECT_EQ(std::string(out.begin(), out.end()),
            std::string("P6\n2 1\n255\n") + "\x01\x02\x03\x04\x05\x06");
}

TEST(Ppm, ErrorsCarryByteOffset) {
  try {
    decode_ppm(bytes_of("P6\n1 1\n65535\n\0\0\0\0\0\0"));
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("255"), std::string::npos);
  }
  try {
    decode_ppm(bytes_of(std::string("P6\n2 2\n255\n") + "abc"));
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.location(), 14u);  // end of the available data
  }
  EXPECT_THROW(decode_ppm(bytes_of("P3\n1 1\n255\n0 0 0\n")), ParseError);
  EXPECT_THROW(decode_ppm(bytes_of("")), ParseError);
}

TEST(Quantization, RoundHalfUpAndRange) {
  Tensor t(Shape{3, 1, 3}, {0.5f, 0.0f, 1.0f, 0.25f, 0.999f, 0.001f, 0.2f, 0.4f, 0.6f});
  ImageBuffer b = to_buffer(t);
  EXPECT_EQ(b.pixels[0], 128);  // r of pixel 0
  EXPECT_EQ(b.pixels[3], 0);
  EXPECT_EQ(b.pixels[6], 255);
  EXPECT_EQ(b.pixels[1], 64);   // 63.75 -> 64
  Tensor bad(Shape{3, 1, 1}, 1.01f);
  EXPECT_THROW(to_buffer(bad), UsageError);
  Tensor nan(Shape{3, 1, 1}, NAN);
  EXPECT_THROW(to_buffer(nan), UsageError);
}

TEST(Roundtrip, SaveLoadWithinQuantizationBound) {
  std::mt19937_64 rng(1);
  for (const char* ext : {".ppm", ".png"}) {
    Tensor t = oracle::random_tensor({3, 17, 23}, rng, 0, 1);
    const auto path = temp_file(std::string("rt") + ext);
    save_image(t, path);
    Tensor back = load_image(path);
    EXPECT_LE(oracle::max_abs_diff(t, back), 1.0 / 510 + 1e-7) << ext;
    // Deterministic bytes.
    const auto first = read_file(path);
    save_image(t, path);
    EXPECT_EQ(read_file(path), first);
    std::filesystem::remove(path);
  }
  Tensor black(Shape{3, 2, 2});
  const auto path = temp_file("black.ppm");
  save_image(black, path);
  const auto bytes = read_file(path);
  for (std::size_t i = bytes.size() - 12; i < bytes.size(); ++i) EXPECT_EQ(bytes[i], 0);
  std::filesystem::remove(path);
}

TEST(Png, DecodesIndependentlyBuiltFiles) {
  // 2x2 RGBA, filter types 0 and 1 (sub); alpha must be dropped.
  std::vector<std::uint8_t> raw = {
      0, 10, 20, 30, 255, 40, 50, 60, 0,      // row 0, no filter
      1, 5, 6, 7, 255, 1, 1, 1, 0,            // row 1, sub: second pixel = first + delta
  };
  ImageBuffer b = decode_png(make_png(2, 2, 6, 8, raw));
  EXPECT_EQ(b.width, 2u);
  EXPECT_EQ(b.height, 2u);
  EXPECT_EQ(b.pixels, (std::vector<std::uint8_t>{10, 20, 30, 40, 50, 60, 5, 6, 7, 6, 7, 8}));

  // RGB, up (2) and average (3) and paeth (4) filters against a hand decode.
  std::vector<std::uint8_t> rgb = {
      0, 100, 100, 100, 200, 200, 200,  // row 0
      2, 1, 2, 3, 4, 5, 6,              // up: row0 + delta
      3, 0, 0, 0, 0, 0, 0,              // average of left and up
      4, 0, 0, 0, 0, 0, 0,              // paeth
  };
  ImageBuffer c = decode_png(make_png(2, 4, 2, 8, rgb));
  std::vector<std::uint8_t> row1 = {101, 102, 103, 204, 205, 206};
  // avg: px0 = up/2 = (101/2, 102/2, 103/2); px1 = (left + up)/2
  std::vector<std::uint8_t> row2 = {50, 51, 51, 127, 128, 128};
  // paeth with all-zero deltas copies the predictor: px0 -> up, px1 -> nearest of left/up/upleft
  std::vector<std::uint8_t> row3 = {50, 51, 51};
  for (int k = 0; k < 3; ++k) {
    const int a = row3[k], bb = row2[3 + k], cc = row2[k];
    const int p = a + bb - cc, pa = std::abs(p - a), pb = std::abs(p - bb), pc = std::abs(p - cc);
    row3.push_back(std::uint8_t(pa <= pb && pa <= pc ? a : pb <= pc ? bb : cc));
  }
  std::vector<std::uint8_t> expect = {100, 100, 100, 200, 200, 200};
  for (const auto* r : {&row1, &row2, &row3}) expect.insert(expect.end(), r->begin(), r->end());
  EXPECT_EQ(c.pixels, expect);
}

TEST(Png, RejectsUnsupportedAndCorrupt) {
  std::vector<std::uint8_t> raw16(1 + 6, 0);
  EXPECT_THROW(decode_png(make_png(1, 1, 2, 16, raw16)), ParseError);
  auto good = make_png(1, 1, 2, 8, {0, 1, 2, 3});
  auto bad_crc = good;
  bad_crc[30] ^= 0xff;  // inside IHDR's CRC
  EXPECT_THROW(decode_png(bad_crc), ParseError);
  std::vector<std::uint8_t> truncated(good.begin(), good.begin() + 40);
  EXPECT_THROW(decode_png(truncated), ParseError);
}

TEST(Files, FormatAndPathErrors) {
  Tensor t(Shape{3, 1, 1}, 0.5f);
  EXPECT_THROW(save_image(t, temp_file("x.bmp")), UsageError);
  EXPECT_THROW(save_image(t, "/nonexistent_dir/x.ppm"), IoError);
  EXPECT_THROW(load_image(temp_file("missing.ppm")), IoError);
  const auto path = temp_file("garbage.png");
  std::ofstream(path) << "not an image";
  EXPECT_THROW(load_image(path), ParseError);
  std::filesystem::remove(path);
}
