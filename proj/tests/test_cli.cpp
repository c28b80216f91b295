#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "flowlut/checkpoint.hpp"
#include "flowlut/imageio.hpp"
#include "flowlut/lut.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace flowlut;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("flowlut_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path path(const std::string& name) const { return dir_ / name; }

  Result run(const std::string& args) const {
    const std::string cmd = std::string(FLOWLUT_CLI) + " " + args + " >" + path("stdout").string() +
                            " 2>" + path("stderr").string();
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(path("stdout")),
            slurp(path("stderr"))};
  }

  static std::string slurp(const fs::path& p) {
    std::ifstream f(p);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
  }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("frobnicate").code, 2);
  EXPECT_EQ(run("info --bogus-flag").code, 2);
  Result r = run("enhance --input x.png --output y.png --flow-steps 0");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("flow-steps"), std::string::npos);
  EXPECT_TRUE(r.out.empty());
}

TEST_F(Cli, MissingInputIsRuntimeError) {
  Result r = run("enhance --input " + path("nope.ppm").string() + " --output " + path("o.ppm").string());
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("nope.ppm"), std::string::npos);
}

TEST_F(Cli, InfoReportsParameterBreakdownAndPriors) {
  Result r = run("info");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("total      2084003"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("flow_net   42179"), std::string::npos);
  for (const char* name : {"identity", "gamma", "warm", "cool", "saturation", "brightness",
                           "s_curve", "inversion"}) {
    EXPECT_NE(r.out.find(name), std::string::npos) << name;
  }
}

TEST_F(Cli, ExportCube) {
  ASSERT_EQ(run("export-cube --lut-index 0 --out " + path("id.cube").string()).code, 0);
  Lut3D id = import_cube(path("id.cube"));
  EXPECT_EQ(id.size, 33u);
  EXPECT_LE(oracle::max_abs_diff(id.table, make_prior_lut(Prior::identity, 33).table), 1e-6);

  ASSERT_EQ(run("export-cube --lut-index 7 --out " + path("inv.cube").string()).code, 0);
  Lut3D inv = import_cube(path("inv.cube"));
  for (std::size_t i = 0; i < 33; i += 8)
    for (std::size_t j = 0; j < 33; j += 8)
      for (std::size_t k = 0; k < 33; k += 8) {
        const Rgb v = inv.at(i, j, k);
        EXPECT_NEAR(v[0], 1.0 - i / 32.0, 1e-6);
        EXPECT_NEAR(v[1], 1.0 - j / 32.0, 1e-6);
        EXPECT_NEAR(v[2], 1.0 - k / 32.0, 1e-6);
      }
  EXPECT_EQ(run("export-cube --lut-index 8 --out " + path("x.cube").string()).code, 2);
}

TEST_F(Cli, GradcheckExitCodes) {
  EXPECT_EQ(run("gradcheck --seeds 2 --group conv2d --group linear").code, 0);
  EXPECT_EQ(run("gradcheck --seeds 2 --group conv2d --tolerance 0").code, 1);
  Result r = run("gradcheck --seeds 2 --corrupt softmax");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("softmax"), std::string::npos);
}

TEST_F(Cli, TrainWritesCheckpointAndLossCsv) {
  const auto ck = path("m.flut");
  Result r = run("train --synthetic 2 --size 16 --epochs 2 --batch-size 1 --seed 4 --num-luts 4 "
              "--flow-steps 2 --out " + ck.string());
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("epoch 1 loss"), std::string::npos);
  EXPECT_NE(r.out.find("epoch 2 loss"), std::string::npos);
  const std::string csv = slurp(path("m.loss.csv"));
  EXPECT_EQ(csv.rfind("step,loss\n", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);

  Checkpoint c = load_checkpoint(ck);
  EXPECT_EQ(c.model.config.num_luts, 4u);
  EXPECT_EQ(c.optimizer.step, 4u);
  Result info = run("info --checkpoint " + ck.string());
  EXPECT_NE(info.out.find("luts       431244"), std::string::npos) << info.out;

  // Same flags, same bytes.
  ASSERT_EQ(run("train --synthetic 2 --size 16 --epochs 2 --batch-size 1 --seed 4 --num-luts 4 "
                "--flow-steps 2 --out " + path("m2.flut").string()).code, 0);
  EXPECT_EQ(slurp(ck), slurp(path("m2.flut")));
}

TEST_F(Cli, TrainZeroLearningRateKeepsParameters) {
  ASSERT_EQ(run("train --synthetic 1 --size 16 --epochs 0 --out " + path("a.flut").string()).code, 0);
  ASSERT_EQ(run("train --synthetic 1 --size 16 --epochs 2 --lr 0 --weight-decay 0 --resume " +
                path("a.flut").string() + " --out " + path("b.flut").string()).code, 0);
  Checkpoint a = load_checkpoint(path("a.flut")), b = load_checkpoint(path("b.flut"));
  auto pa = a.model.parameters(), pb = b.model.parameters();
  ASSERT_EQ(pa.size(), pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_EQ(pa[i].tensor->storage(), pb[i].tensor->storage());
}

TEST_F(Cli, TrainReportsOrphans) {
  const auto data = path("data");
  fs::create_directories(data);
  Tensor img(Shape{3, 8, 8}, 0.5f);
  save_image(img, data / "a_in.ppm");
  save_image(img, data / "a_gt.ppm");
  save_image(img, data / "b_in.png");
  Result r = run("train --data " + data.string() + " --out " + path("m.flut").string());
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("b_in.png"), std::string::npos) << r.err;
  EXPECT_EQ(run("train --out x.flut").code, 2);
}

TEST_F(Cli, EnhanceIdentityStartAndStepDumps) {
  std::ofstream(path("id.cfg")) << "specialized_init = false\n";
  std::mt19937_64 rng(3);
  Tensor img = oracle::random_tensor({3, 12, 10}, rng, 0, 1);
  save_image(img, path("in.png"));
  Tensor quantized = load_image(path("in.png"));

  Result r = run("--config " + path("id.cfg").string() + " enhance --input " + path("in.png").string() +
              " --output " + path("out.ppm").string() + " --dump-steps " + path("steps").string());
  ASSERT_EQ(r.code, 0) << r.err;
  Tensor out = load_image(path("out.ppm"));
  EXPECT_LE(oracle::max_abs_diff(out, img), 1.0 / 510 + 1e-7);
  EXPECT_EQ(out.storage(), quantized.storage());
  for (const char* f : {"step_00.png", "step_01.png", "step_04.png"}) {
    EXPECT_TRUE(fs::exists(path("steps") / f)) << f;
  }
  EXPECT_FALSE(fs::exists(path("steps") / "step_05.png"));
}

TEST_F(Cli, BenchCsvReport) {
  Result r = run("bench --width 64 --height 48 --iters 2 --warmup 1 --csv");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.rfind("section,name,value\n", 0), 0u);
  for (const char* row : {"timing_ms,weights,", "timing_ms,lut,", "timing_ms,flow,",
                          "timing_ms,total,", "flops,total,", "flops,gmacs,",
                          "params,total,2084003"}) {
    EXPECT_NE(r.out.find(row), std::string::npos) << row;
  }
  Result lut = run("bench --width 64 --height 48 --iters 1 --warmup 0 --stage lut");
  ASSERT_EQ(lut.code, 0);
  EXPECT_NE(lut.out.find("lut"), std::string::npos);
  EXPECT_EQ(run("bench --stage nope").code, 2);
}
