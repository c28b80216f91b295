#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "flowlut/errors.hpp"
#include "flowlut/lut.hpp"
#include "oracles.hpp"

using namespace flowlut;

namespace {

Lut3D random_lut(std::size_t d, std::mt19937_64& rng) {
  Lut3D l(d);
  l.table = oracle::random_tensor({d, d, d, 3}, rng, 0.0f, 1.0f);
  return l;
}

Tensor random_image(std::size_t h, std::size_t w, std::mt19937_64& rng) {
  return oracle::random_tensor({3, h, w}, rng, 0.0f, 1.0f);
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("flowlut_test_" + name);
}

}  // namespace

// ---------------------------------------------------------- initialization

TEST(Priors, BankOrderAndNames) {
  LutBank bank = init_specialized_luts(10, 5);
  ASSERT_EQ(bank.count(), 10u);
  const char* expected[] = {"identity",   "gamma",      "warm",    "cool",      "saturation",
                            "brightness", "s_curve",    "inversion", "identity", "identity"};
  for (std::size_t i = 0; i < 10; ++i) {
    EXPECT_EQ(bank.names[i], expected[i]);
    EXPECT_EQ(bank.luts[i].size, 5u);
    EXPECT_EQ(bank.luts[i].table.numel(), 5u * 5 * 5 * 3);
    for (float v : bank.luts[i].table.data()) {
      EXPECT_GE(v, 0.0f);
      EXPECT_LE(v, 1.0f);
    }
  }
  EXPECT_THROW(init_specialized_luts(8, 1), SizeError);
}

TEST(Priors, LatticeValues) {
  LutBank bank = init_specialized_luts(8, 33);
  Rgb id = bank.luts[0].at(16, 16, 16);
  for (float v : id) EXPECT_FLOAT_EQ(v, 0.5f);
  Rgb inv = bank.luts[7].at(0, 0, 32);
  EXPECT_FLOAT_EQ(inv[0], 1.0f);
  EXPECT_FLOAT_EQ(inv[1], 1.0f);
  EXPECT_FLOAT_EQ(inv[2], 0.0f);
  Rgb gam = bank.luts[1].at(16, 16, 16);
  for (float v : gam) EXPECT_NEAR(v, std::pow(0.5, 0.75), 1e-6);
  EXPECT_NEAR(std::pow(0.5, 0.75), 0.5946, 1e-4);
}

TEST(Priors, ClosedForms) {
  const Rgb p{0.3f, 0.6f, 0.95f};
  auto near3 = [](const Rgb& a, const Rgb& b) {
    for (int c = 0; c < 3; ++c) EXPECT_NEAR(a[c], b[c], 1e-6) << c;
  };
  near3(eval_prior(Prior::warm, p), {0.4f, 0.6f, 0.85f});
  near3(eval_prior(Prior::cool, p), {0.2f, 0.6f, 1.0f});
  near3(eval_prior(Prior::brightness, p), {0.4f, 0.7f, 1.0f});
  const double pi = std::acos(-1.0);
  near3(eval_prior(Prior::s_curve, p),
        {float(0.5 - 0.5 * std::cos(pi * 0.3)), float(0.5 - 0.5 * std::cos(pi * 0.6)),
         float(0.5 - 0.5 * std::cos(pi * 0.95))});
  near3(eval_prior(Prior::inversion, p), {0.7f, 0.4f, 0.05f});
}

TEST(Priors, SaturationScalesHsvSaturation) {
  const Rgb p{0.8f, 0.5f, 0.4f};
  // Hexcone model by hand: V = max, S = (max - min) / max.
  const Rgb hsv = rgb_to_hsv(p);
  EXPECT_NEAR(hsv[2], 0.8, 1e-6);
  EXPECT_NEAR(hsv[1], 0.5, 1e-6);
  const Rgb out = eval_prior(Prior::saturation, p);
  const Rgb ohsv = rgb_to_hsv(out);
  EXPECT_NEAR(ohsv[0], hsv[0], 1e-5);
  EXPECT_NEAR(ohsv[1], 0.65, 1e-5);
  EXPECT_NEAR(ohsv[2], 0.8, 1e-6);
  // Already saturated past 1/1.3 clamps to 1.
  EXPECT_NEAR(rgb_to_hsv(eval_prior(Prior::saturation, {0.9f, 0.05f, 0.1f}))[1], 1.0, 1e-6);
  // Round trip.
  const Rgb back = hsv_to_rgb(hsv);
  for (int c = 0; c < 3; ++c) EXPECT_NEAR(back[c], p[c], 1e-6);
}

// --------------------------------------------------------------- trilinear

TEST(Trilinear, IdentityReproducesInput) {
  std::mt19937_64 rng(1);
  Lut3D id = make_prior_lut(Prior::identity, 33);
  Tensor img = random_image(9, 11, rng);
  img[0] = 1.0f;  // exercise the upper boundary
  img[1] = 0.0f;
  EXPECT_LT(oracle::max_abs_diff(trilinear_apply(id, img), img), 1e-6);
}

TEST(Trilinear, InversionTwiceIsIdentity) {
  std::mt19937_64 rng(2);
  Lut3D inv = make_prior_lut(Prior::inversion, 33);
  Tensor img = random_image(8, 8, rng);
  EXPECT_LT(oracle::max_abs_diff(trilinear_apply(inv, trilinear_apply(inv, img)), img), 2e-6);
}

TEST(Trilinear, AffineLatticeIsExact) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<float> u(-0.5f, 0.5f);
  float a[3][4];
  for (auto& row : a)
    for (auto& v : row) v = u(rng);
  const std::size_t d = 9;
  Lut3D l(d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j)
      for (std::size_t k = 0; k < d; ++k) {
        const double p[3] = {double(i) / (d - 1), double(j) / (d - 1), double(k) / (d - 1)};
        Rgb v;
        for (int c = 0; c < 3; ++c) v[c] = float(a[c][0] * p[0] + a[c][1] * p[1] + a[c][2] * p[2] + a[c][3]);
        l.set(i, j, k, v);
      }
  Tensor img = random_image(7, 7, rng);
  Tensor out = trilinear_apply(l, img);
  for (std::size_t i = 0; i < 7; ++i)
    for (std::size_t j = 0; j < 7; ++j)
      for (int c = 0; c < 3; ++c) {
        const double ref = a[c][0] * img.at(0, i, j) + a[c][1] * img.at(1, i, j) +
                           a[c][2] * img.at(2, i, j) + a[c][3];
        EXPECT_NEAR(out.at(c, i, j), ref, 1e-6);
      }
}

TEST(Trilinear, LatticePointsReturnStoredValues) {
  std::mt19937_64 rng(4);
  const std::size_t d = 5;
  Lut3D l = random_lut(d, rng);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j)
      for (std::size_t k = 0; k < d; ++k) {
        const Rgb got = trilinear_lookup(l, {float(i) / 4, float(j) / 4, float(k) / 4});
        const Rgb want = l.at(i, j, k);
        for (int c = 0; c < 3; ++c) EXPECT_NEAR(got[c], want[c], 1e-6);
      }
}

TEST(Trilinear, MatchesScalarOracle) {
  std::mt19937_64 rng(5);
  Lut3D l = random_lut(33, rng);
  const Rgb got = trilinear_lookup(l, {0.1f, 0.7f, 0.3f});
  const auto want = oracle::trilinear(l.table, 33, 0.1f, 0.7f, 0.3f);
  for (int c = 0; c < 3; ++c) EXPECT_NEAR(got[c], want[c], 1e-6);

  for (int n = 0; n < 60; ++n) {
    const std::size_t d = 2 + rng() % 8;
    Lut3D r = random_lut(d, rng);
    // Include out-of-range pixels: lookups clamp to the unit cube.
    Tensor img = oracle::random_tensor({3, 1 + rng() % 6, 1 + rng() % 6}, rng, -0.2f, 1.2f);
    EXPECT_LT(oracle::max_abs_diff(trilinear_apply(r, img), oracle::apply_lut(r.table, d, img)),
              1e-6)
        << "D=" << d;
  }
}

// ------------------------------------------------------------------- blend

TEST(Blend, Examples) {
  std::mt19937_64 rng(6);
  LutBank bank = init_specialized_luts(8, 33);
  Tensor img = random_image(6, 5, rng);

  Tensor onehot(Shape{8});
  onehot[0] = 1.0f;
  EXPECT_LT(oracle::max_abs_diff(blend_apply(bank, onehot, img), img), 1e-6);

  Tensor half(Shape{8});
  half[0] = half[7] = 0.5f;
  const Tensor mid = blend_apply(bank, half, img);
  for (float v : mid.data()) EXPECT_NEAR(v, 0.5f, 1e-6);

  EXPECT_THROW(blend_apply(bank, Tensor(Shape{7}), img), ShapeError);
}

TEST(Blend, MatchesCompositionalOracle) {
  std::mt19937_64 rng(7);
  for (int n = 0; n < 50; ++n) {
    const std::size_t count = 1 + rng() % 8, d = 2 + rng() % 6;
    LutBank bank;
    for (std::size_t i = 0; i < count; ++i) {
      bank.luts.push_back(random_lut(d, rng));
      bank.names.push_back("r");
    }
    Tensor w = oracle::random_tensor({count}, rng, 0.0f, 1.0f);
    Tensor img = random_image(1 + rng() % 6, 1 + rng() % 6, rng);
    Tensor ref(img.shape());
    for (std::size_t i = 0; i < count; ++i) {
      Tensor li = oracle::apply_lut(bank.luts[i].table, d, img);
      for (std::size_t k = 0; k < ref.numel(); ++k) ref[k] += w[i] * li[k];
    }
    EXPECT_LT(oracle::max_abs_diff(blend_apply(bank, w, img), ref), 1e-6);
  }
}

TEST(Blend, ConvexWeightsStayInUnitRange) {
  std::mt19937_64 rng(8);
  LutBank bank = init_specialized_luts(8, 9);
  Tensor w = oracle::random_tensor({8}, rng, 0.0f, 1.0f);
  float s = 0;
  for (float v : w.data()) s += v;
  for (auto& v : w.data()) v /= s;
  const Tensor out = blend_apply(bank, w, random_image(16, 16, rng));
  for (float v : out.data()) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 1.0f + 1e-6f);
  }
}

// -------------------------------------------------------------------- cube

TEST(Cube, IdentityD2Layout) {
  const std::string text = format_cube(make_prior_lut(Prior::identity, 2));
  EXPECT_EQ(text,
            "LUT_3D_SIZE 2\n"
            "0.000000 0.000000 0.000000\n"
            "1.000000 0.000000 0.000000\n"
            "0.000000 1.000000 0.000000\n"
            "1.000000 1.000000 0.000000\n"
            "0.000000 0.000000 1.000000\n"
            "1.000000 0.000000 1.000000\n"
            "0.000000 1.000000 1.000000\n"
            "1.000000 1.000000 1.000000\n");
}

TEST(Cube, DefaultHeaderAndRoundtrip) {
  std::mt19937_64 rng(9);
  Lut3D l = random_lut(33, rng);
  const auto path = temp_file("roundtrip.cube");
  export_cube(l, path);
  std::ifstream f(path);
  std::string first;
  std::getline(f, first);
  EXPECT_EQ(first, "LUT_3D_SIZE 33");
  Lut3D back = import_cube(path);
  ASSERT_EQ(back.size, 33u);
  EXPECT_LE(oracle::max_abs_diff(back.table, l.table), 1e-6);
  std::filesystem::remove(path);
}

// Written by hand: entry n (red fastest) holds (n/10, n/20, 1 - n/10).
TEST(Cube, HandWrittenFixture) {
  const std::string text =
      "# fixture\n"
      "TITLE \"hand\"\n"
      "LUT_3D_SIZE 2\n"
      "\n"
      "0.0 0.0 1.0\n"
      "0.1 0.05 0.9\n"
      "0.2 0.1 0.8\n"
      "0.3 0.15 0.7\n"
      "0.4 0.2 0.6\n"
      "0.5 0.25 0.5\n"
      "0.6 0.3 0.4\n"
      "0.7 0.35 0.3\n";
  Lut3D l = parse_cube(text);
  ASSERT_EQ(l.size, 2u);
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t g = 0; g < 2; ++g)
      for (std::size_t r = 0; r < 2; ++r) {
        const double n = double(r + 2 * g + 4 * b);
        const Rgb v = l.at(r, g, b);
        EXPECT_NEAR(v[0], n / 10, 1e-7);
        EXPECT_NEAR(v[1], n / 20, 1e-7);
        EXPECT_NEAR(v[2], 1 - n / 10, 1e-7);
      }
}

TEST(Cube, ParseErrorsNameLine) {
  std::string missing_row = format_cube(make_prior_lut(Prior::identity, 2));
  missing_row.erase(missing_row.rfind("1.000000 1.000000 1.000000"));
  try {
    parse_cube(missing_row);
    FAIL() << "short file accepted";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("expected D³ entries"), std::string::npos) << e.what();
  }
  try {
    parse_cube("LUT_3D_SIZE 2\n0 0 0\n1 x 0\n");
    FAIL() << "non-numeric accepted";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.location(), 3u);
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
  EXPECT_THROW(parse_cube("0 0 0\n"), ParseError);
  EXPECT_THROW(parse_cube("# nothing\n"), ParseError);
  std::string extra = format_cube(make_prior_lut(Prior::identity, 2)) + "0 0 0\n";
  EXPECT_THROW(parse_cube(extra), ParseError);
  EXPECT_THROW(import_cube(temp_file("does_not_exist.cube")), IoError);
  EXPECT_THROW(export_cube(make_prior_lut(Prior::identity, 2), "/nonexistent_dir/x.cube"),
               IoError);
}
