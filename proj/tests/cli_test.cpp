/* Copyright 2026 The AnySR Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include <algorithm>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "anysr/cli.hpp"
#include "anysr/dispatch.hpp"
#include "anysr/io.hpp"
#include "anysr/supernet.hpp"
#include "synthetic_scenes.hpp"
#include "test_util.hpp"

namespace anysr {
namespace {

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun run(std::vector<std::string> args) {
  args.insert(args.begin(), "anysr");
  std::vector<const char*> argv;
  for (const std::string& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TEST(CliFlops, PrintsTheFullTable) {
  const CliRun r = run({"flops"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.out.find("bicubic   491520"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("0.29      130719744"), std::string::npos);
  EXPECT_NE(r.out.find("0.46      214315008"), std::string::npos);
  EXPECT_NE(r.out.find("1         467877888     467.9     100.00"), std::string::npos);
}

TEST(CliFlops, SingleWidthAndErrors) {
  const CliRun one = run({"flops", "--width", "0.46"});
  ASSERT_EQ(one.code, kExitOk);
  EXPECT_NE(one.out.find("214315008"), std::string::npos);
  EXPECT_EQ(one.out.find("bicubic"), std::string::npos);
  EXPECT_EQ(run({"flops", "--width", "0.5"}).code, kExitUsage);
  EXPECT_EQ(run({"flops", "--widths", "0.5,0.9"}).code, kExitUsage);
  const CliRun custom = run({"flops", "--widths", "0.5,1.0", "--patch", "16"});
  EXPECT_EQ(custom.code, kExitOk);
  EXPECT_NE(custom.out.find("LR patch 16x16"), std::string::npos);
}

TEST(CliUsage, ParseErrorsAndHelp) {
  EXPECT_EQ(run({}).code, kExitUsage);
  EXPECT_EQ(run({"bogus"}).code, kExitUsage);
  EXPECT_EQ(run({"train", "--out", "x"}).code, kExitUsage);  // --data missing
  EXPECT_EQ(run({"flops", "--scale", "-1"}).code, kExitUsage);
  const CliRun help = run({"--help"});
  EXPECT_EQ(help.code, kExitOk);
  EXPECT_NE(help.out.find("build-tables"), std::string::npos);
}

TEST(CliUsage, ConfigFileRejectsUnknownKeys) {
  testing::TempDir dir;
  std::ofstream(dir / "ok.toml") << "[flops]\npatch = 16\n";
  const CliRun ok = run({"--config", (dir / "ok.toml").string(), "flops"});
  EXPECT_EQ(ok.code, kExitOk) << ok.err;
  EXPECT_NE(ok.out.find("LR patch 16x16"), std::string::npos);
  std::ofstream(dir / "bad.toml") << "[flops]\nfrobnicate = 3\n";
  EXPECT_EQ(run({"--config", (dir / "bad.toml").string(), "flops"}).code, kExitUsage);
}

// train -> build-tables -> infer -> eval on a handful of tiny scenes.
class CliPipeline : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new testing::TempDir;
    testing::SceneOptions o;
    o.height = o.width = 64;
    std::filesystem::create_directories(*dir_ / "train");
    std::filesystem::create_directories(*dir_ / "val");
    const auto imgs = testing::synthetic_corpus(3, 5, o);
    for (std::size_t n = 0; n < imgs.size(); ++n)
      write_image(*dir_ / ("train/img" + std::to_string(n) + ".png"), imgs[n]);
    write_image(*dir_ / "val/v.png", testing::synthetic_scene(77, o));
    write_image(*dir_ / "lr.png", testing::synthetic_scene(78, lr_scene_options()));
    train_ = run({"--seed", "3", "train", "--data", (*dir_ / "train").string(), "--out", ckpt(), "--epochs", "2",
                  "--patch", "8", "--stride", "32", "--batch", "4", "--checkpoint-every", "1"});
  }
  static void TearDownTestSuite() {
    delete dir_;
    dir_ = nullptr;
  }
  static testing::SceneOptions lr_scene_options() {
    testing::SceneOptions o;
    o.height = 16;
    o.width = 24;
    return o;
  }
  static std::string ckpt() { return (*dir_ / "net.ckpt").string(); }
  static std::string tables() { return (*dir_ / "tables.json").string(); }

  static testing::TempDir* dir_;
  static CliRun train_;
};

testing::TempDir* CliPipeline::dir_ = nullptr;
CliRun CliPipeline::train_;

TEST_F(CliPipeline, TrainWritesCheckpointAndLog) {
  ASSERT_EQ(train_.code, kExitOk) << train_.err;
  EXPECT_NE(train_.out.find("images: 3, patches: 12"), std::string::npos) << train_.out;
  EXPECT_NO_THROW(load_checkpoint(ckpt()));
  EXPECT_TRUE(std::filesystem::exists(ckpt() + ".epoch1"));
  EXPECT_FALSE(std::filesystem::exists(ckpt() + ".epoch2"));
  const std::string log = slurp(ckpt() + ".log");
  EXPECT_EQ(log.rfind("iteration,epoch,branch,loss\n", 0), 0u);
  EXPECT_EQ(std::count(log.begin(), log.end(), '\n'), 1 + 2 * 3);
}

TEST_F(CliPipeline, TablesInferEval) {
  ASSERT_EQ(train_.code, kExitOk) << train_.err;
  const CliRun t = run({"build-tables", "--checkpoint", ckpt(), "--val", (*dir_ / "val").string(), "--out", tables(),
                     "--patch", "8", "--edge-op", "sobel"});
  ASSERT_EQ(t.code, kExitOk) << t.err;
  const TablesFile f = load_tables(tables());
  EXPECT_EQ(f.tables.bins, 30);
  EXPECT_EQ(f.tables.edge_op, EdgeOperator::kSobel);
  EXPECT_EQ(f.tables.lr_patch, 8);
  EXPECT_EQ(f.tables.checkpoint, store_fingerprint(load_checkpoint(ckpt())));

  const std::string sr = (*dir_ / "sr.png").string(), routing = (*dir_ / "routing.csv").string();
  const CliRun i = run({"infer", "--checkpoint", ckpt(), "--tables", tables(), "--input", (*dir_ / "lr.png").string(),
                     "--out", sr, "--eta", "1000000", "--routing-csv", routing});
  ASSERT_EQ(i.code, kExitOk) << i.err;
  EXPECT_EQ(read_image(sr).shape(), (std::vector<int>{3, 64, 96}));
  const std::string rcsv = slurp(routing);
  EXPECT_EQ(rcsv.rfind("y,x,edge_score,branch\n", 0), 0u);
  EXPECT_EQ(std::count(rcsv.begin(), rcsv.end(), '\n'), 1 + 2 * 3);
  EXPECT_EQ(run({"infer", "--checkpoint", ckpt(), "--tables", tables(), "--input", (*dir_ / "lr.png").string(),
                 "--out", sr, "--eta", "1", "--edge-op", "laplacian"})
                .code,
            kExitUsage);
  EXPECT_EQ(run({"infer", "--checkpoint", ckpt(), "--tables", tables(), "--input", (*dir_ / "lr.png").string(),
                 "--out", sr, "--eta", "-1"})
                .code,
            kExitUsage);

  const CliRun e = run({"eval", "--checkpoint", ckpt(), "--tables", tables(), "--val", (*dir_ / "val").string(),
                     "--etas", "0,1e6"});
  ASSERT_EQ(e.code, kExitOk) << e.err;
  EXPECT_EQ(e.out.rfind("eta,mean_psnr_db,mean_flops,frac_branch0,frac_branch1,frac_branch2,frac_branch3\n", 0), 0u)
      << e.out;
  EXPECT_NE(e.out.find("\n0,"), std::string::npos);
  EXPECT_NE(e.out.find(",1,0,0,0\n"), std::string::npos);  // eta 0 routes everything to bicubic
}

TEST_F(CliPipeline, MismatchesAreUsageErrors) {
  ASSERT_EQ(train_.code, kExitOk) << train_.err;
  EXPECT_EQ(run({"build-tables", "--checkpoint", ckpt(), "--val", (*dir_ / "val").string(), "--out",
                 (*dir_ / "t2.json").string(), "--widths", "0.5,1.0"})
                .code,
            kExitUsage);
  EXPECT_EQ(run({"build-tables", "--checkpoint", ckpt(), "--val", (*dir_ / "val").string(), "--out",
                 (*dir_ / "t3.json").string(), "--edge-op", "canny"})
                .code,
            kExitUsage);
  std::ofstream(*dir_ / "broken.ckpt") << "nope";
  EXPECT_EQ(run({"build-tables", "--checkpoint", (*dir_ / "broken.ckpt").string(), "--val",
                 (*dir_ / "val").string(), "--out", (*dir_ / "t4.json").string()})
                .code,
            kExitFailure);
}

}  // namespace
}  // namespace anysr
