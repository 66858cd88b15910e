#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>

#include <opencv2/imgcodecs.hpp>

#include "json.hpp"
#include "mtldesc/checkpoint.hpp"
#include "mtldesc/commands.hpp"
#include "mtldesc/feature_io.hpp"
#include "mtldesc/hpatches.hpp"
#include "test_support.hpp"

namespace mtldesc {
namespace {

namespace fs = std::filesystem;
using testing_support::scratch_dir;
using testing_support::tiny_config;

struct Run {
  int status = -1;
  std::string output;
};

Run run_cli(const std::string& args, const fs::path& scratch) {
  const auto log = scratch / "cli_output.txt";
  const std::string cmd = std::string("\"") + MTLDESC_CLI_PATH + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int raw = std::system(cmd.c_str());
  Run r;
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  std::ifstream in(log);
  r.output.assign(std::istreambuf_iterator<char>(in), {});
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

TEST(Cli, SynthZeroCountGivesEmptyManifest) {
  const auto dir = scratch_dir("cli");
  const auto r = run_cli("synth --preset toy --count 0 --out \"" + (dir / "data").string() + "\"", dir);
  EXPECT_EQ(r.status, 0) << r.output;
  EXPECT_EQ(fs::file_size(dir / "data" / "manifest.jsonl"), 0u);
  EXPECT_TRUE(fs::exists(dir / "data" / "config.txt"));
  fs::remove_all(dir);
}

TEST(Cli, SynthIsReproducible) {
  const auto dir = scratch_dir("cli");
  const std::string common = "synth --preset toy --count 3 --seed 5 --set data.crop=64 ";
  ASSERT_EQ(run_cli(common + "--out \"" + (dir / "a").string() + "\"", dir).status, 0);
  ASSERT_EQ(run_cli(common + "--out \"" + (dir / "b").string() + "\"", dir).status, 0);
  EXPECT_EQ(slurp(dir / "a" / "manifest.jsonl"), slurp(dir / "b" / "manifest.jsonl"));
  EXPECT_EQ(slurp(dir / "a" / "images" / "00002_b.png"), slurp(dir / "b" / "images" / "00002_b.png"));
  ASSERT_EQ(run_cli("synth --config \"" + (dir / "a" / "config.txt").string() + "\" --out \"" +
                        (dir / "c").string() + "\"",
                    dir)
                .status,
            0);
  EXPECT_EQ(slurp(dir / "a" / "manifest.jsonl"), slurp(dir / "c" / "manifest.jsonl"));
  int rows = 0;
  std::ifstream manifest(dir / "a" / "manifest.jsonl");
  for (std::string line; std::getline(manifest, line);) ++rows;
  EXPECT_EQ(rows, 3);
  fs::remove_all(dir);
}

TEST(Cli, OutputRootEnvironmentVariable) {
  const auto dir = scratch_dir("cli");
  const std::string cmd = std::string(kOutputRootEnv) + "=\"" + dir.string() + "\" ";
  const int raw = std::system((cmd + "\"" + MTLDESC_CLI_PATH + "\" synth --preset toy --count 0 --out rel > /dev/null 2>&1").c_str());
  EXPECT_EQ(WEXITSTATUS(raw), 0);
  EXPECT_TRUE(fs::exists(dir / "rel" / "manifest.jsonl"));
  fs::remove_all(dir);
}

TEST(Cli, ValidationErrorsExitNonZero) {
  const auto dir = scratch_dir("cli");
  auto r = run_cli("synth --out x --set loss.temprature=3", dir);
  EXPECT_NE(r.status, 0);
  EXPECT_NE(r.output.find("mtldesc: error:"), std::string::npos) << r.output;
  r = run_cli("synth --out x --set loss.temperature=-1", dir);
  EXPECT_NE(r.status, 0);
  EXPECT_NE(r.output.find("mtldesc: error:"), std::string::npos) << r.output;
  r = run_cli("train --data \"" + (dir / "missing").string() + "\" --out \"" + (dir / "o").string() + "\"", dir);
  EXPECT_NE(r.status, 0);
  EXPECT_NE(r.output.find("mtldesc: error:"), std::string::npos) << r.output;
  EXPECT_NE(run_cli("frobnicate", dir).status, 0);
  EXPECT_NE(run_cli("", dir).status, 0);
  fs::remove_all(dir);
}

TEST(Cli, GradcheckReportsPassAndWorkedExample) {
  const auto dir = scratch_dir("cli");
  const auto r = run_cli("gradcheck --trials 10 --out \"" + dir.string() + "\"", dir);
  EXPECT_EQ(r.status, 0) << r.output;
  EXPECT_NE(r.output.find("0.4239"), std::string::npos) << r.output;
  const auto j = nlohmann::json::parse(slurp(dir / "gradcheck.json"));
  EXPECT_TRUE(j["passed"].get<bool>());
  EXPECT_LT(j["atrip_loss"]["max_rel_error"].get<double>(), 1e-4);
  fs::remove_all(dir);
}

TEST(Cli, ExtractMatchAndEvalRoundTrip) {
  const auto dir = scratch_dir("cli");
  const auto cfg = tiny_config();
  MtlDesc model(cfg.model, 2);
  save_checkpoint(dir / "m.ckpt", model, cfg, TrainingState{});

  cv::Mat1b board(64, 64);
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x) board(y, x) = ((x / 8 + y / 8) % 2) ? 230 : 20;
  fs::create_directories(dir / "seq" / "v_board");
  cv::imwrite((dir / "seq" / "v_board" / "1.png").string(), board);
  cv::imwrite((dir / "seq" / "v_board" / "2.png").string(), board);
  write_homography_file(dir / "seq" / "v_board" / "H_1_2", Homography::identity());
  std::ofstream(dir / "broken.png") << "not an image";

  const std::string ckpt = "\"" + (dir / "m.ckpt").string() + "\"";
  const std::string images = "\"" + (dir / "seq" / "v_board" / "1.png").string() + "\" \"" +
                             (dir / "seq" / "v_board" / "2.png").string() + "\"";
  const std::string low = " --set inference.alpha=0.05 --set inference.max_keypoints=200";
  auto r = run_cli("extract --checkpoint " + ckpt + low + " --out \"" + (dir / "f1" / "v_board").string() + "\" " +
                       images + " \"" + (dir / "broken.png").string() + "\"",
                   dir);
  ASSERT_EQ(r.status, 0) << r.output;
  EXPECT_NE(r.output.find("warning"), std::string::npos);
  r = run_cli("extract --checkpoint " + ckpt + low + " --out \"" + (dir / "f2").string() + "\" " + images, dir);
  ASSERT_EQ(r.status, 0) << r.output;
  EXPECT_EQ(slurp(dir / "f1" / "v_board" / "1.features"), slurp(dir / "f2" / "1.features"));
  r = run_cli("extract --config \"" + (dir / "f2" / "config.txt").string() + "\" --checkpoint " + ckpt +
                  " --out \"" + (dir / "f3").string() + "\" " + images,
              dir);
  ASSERT_EQ(r.status, 0) << r.output;
  EXPECT_EQ(slurp(dir / "f3" / "1.features"), slurp(dir / "f2" / "1.features"));
  EXPECT_GT(read_features(dir / "f2" / "1.features").keypoints.size(), 4u);

  r = run_cli("extract --checkpoint " + ckpt + " --out \"" + (dir / "f4").string() + "\" \"" +
                  (dir / "broken.png").string() + "\"",
              dir);
  EXPECT_NE(r.status, 0);

  r = run_cli("match \"" + (dir / "f2" / "1.features").string() + "\" \"" + (dir / "f2" / "2.features").string() +
                  "\" --out \"" + (dir / "m").string() + "\"",
              dir);
  ASSERT_EQ(r.status, 0) << r.output;
  EXPECT_TRUE(fs::exists(dir / "m" / "matches.txt"));

  r = run_cli("eval --dataset \"" + (dir / "seq").string() + "\" --features \"" + (dir / "f1").string() +
                  "\" --out \"" + (dir / "e").string() + "\"",
              dir);
  ASSERT_EQ(r.status, 0) << r.output;
  const auto report = nlohmann::json::parse(slurp(dir / "e" / "report.json"));
  EXPECT_DOUBLE_EQ(report["groups"]["overall"]["mma"]["3"].get<double>(), 1.0);
  EXPECT_DOUBLE_EQ(report["groups"]["overall"]["ha"]["3"].get<double>(), 1.0);
  EXPECT_TRUE(fs::exists(dir / "e" / "report.txt"));
  EXPECT_TRUE(fs::exists(dir / "e" / "mma_curve.png"));
  EXPECT_TRUE(fs::exists(dir / "e" / "config.txt"));

  std::ofstream(dir / "seq" / "v_board" / "H_1_2") << "1 0 0\n";
  r = run_cli("eval --dataset \"" + (dir / "seq").string() + "\" --checkpoint " + ckpt + " --out \"" +
                  (dir / "e2").string() + "\"",
              dir);
  ASSERT_EQ(r.status, 0) << r.output;
  const auto skipped = nlohmann::json::parse(slurp(dir / "e2" / "report.json"));
  EXPECT_EQ(skipped["skipped"].size(), 1u);
  fs::remove_all(dir);
}

}  // namespace
}  // namespace mtldesc
