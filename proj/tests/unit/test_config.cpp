#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "mtldesc/config.hpp"

namespace mtldesc {
namespace {

TEST(RunConfig, DefaultsMatchTrainingSetup) {
  const RunConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  EXPECT_DOUBLE_EQ(cfg.optim.learning_rate, 1e-3);
  EXPECT_EQ(cfg.optim.batch_size, 12);
  EXPECT_EQ(cfg.data.crop, 400);
  EXPECT_DOUBLE_EQ(cfg.loss.temperature, 15.0);
  EXPECT_DOUBLE_EQ(cfg.loss.margin, 1.0);
  EXPECT_DOUBLE_EQ(cfg.loss.bce_lambda, 200.0);
  EXPECT_DOUBLE_EQ(cfg.inference.alpha, 0.9);
  EXPECT_EQ(cfg.inference.nms_radius, 4);
  EXPECT_EQ(cfg.inference.max_keypoints, 2000);
  EXPECT_EQ(cfg.data.sampler.points, 400);
  EXPECT_EQ(cfg.data.sampler.grid, 40);
  EXPECT_EQ(cfg.model.descriptor_dim, 128);
  EXPECT_EQ(cfg.model.agca_depth, 8);
  EXPECT_EQ(cfg.model.token_count(), 16);
}

TEST(RunConfig, ToyPresetIsValidAndQuarterWidth) {
  const auto toy = RunConfig::toy();
  EXPECT_NO_THROW(toy.validate());
  const RunConfig full;
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(toy.model.backbone_channels[i] * 4, full.model.backbone_channels[i]);
  }
  EXPECT_EQ(toy.optim.epochs, 5);
  EXPECT_EQ(toy.data.pairs, 200);
}

TEST(RunConfig, TextRoundTripPreservesEveryKey) {
  auto cfg = RunConfig::toy();
  cfg.apply_override("loss.temperature=2.5");
  cfg.apply_override("inference.match_mode=attention_weighted");
  cfg.apply_override("data.homography.max_rotation_deg=12.25");
  cfg.apply_override("model.fusion=raw");
  cfg.apply_override("run.seed=18446744073709551615");
  const auto back = RunConfig::from_text(cfg.to_text());
  EXPECT_EQ(back.entries(), cfg.entries());
  EXPECT_EQ(back.seed, 18446744073709551615ULL);
  EXPECT_EQ(back.model.fusion, FusionMode::Raw);
}

TEST(RunConfig, FileRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "mtldesc_config_test";
  std::filesystem::create_directories(dir);
  auto cfg = RunConfig::toy();
  cfg.set("optim.poly_power", "0.5");
  cfg.save(dir / "cfg.txt");
  EXPECT_EQ(RunConfig::load(dir / "cfg.txt").entries(), cfg.entries());
  std::filesystem::remove_all(dir);
}

TEST(RunConfig, RejectsUnknownKeysAndMalformedValues) {
  RunConfig cfg;
  EXPECT_THROW(cfg.apply_override("loss.temprature=3"), std::invalid_argument);
  EXPECT_THROW(cfg.apply_override("loss.temperature"), std::invalid_argument);
  EXPECT_THROW(cfg.set("optim.batch_size", "12x"), std::invalid_argument);
  EXPECT_THROW(cfg.set("model.backbone_channels", "1,2,3"), std::invalid_argument);
  EXPECT_THROW(cfg.set("data.photometric.enabled", "maybe"), std::invalid_argument);
  EXPECT_THROW(cfg.set("inference.match_mode", "ratio"), std::invalid_argument);
}

TEST(RunConfig, ValidationCatchesInvariantViolations) {
  auto expect_invalid = [](const std::string& assignment) {
    RunConfig cfg;
    cfg.apply_override(assignment);
    EXPECT_THROW(cfg.validate(), std::invalid_argument) << assignment;
  };
  expect_invalid("loss.temperature=0");
  expect_invalid("loss.temperature=-1");
  expect_invalid("loss.bce_lambda=0");
  expect_invalid("model.agca_embed_dim=64");
  expect_invalid("optim.batch_size=0");
  expect_invalid("inference.alpha=1.5");
  expect_invalid("data.sampler.points=1");
  expect_invalid("data.homography.scale_min=1.5");
  expect_invalid("model.dilation_rates=6,6,18");
}

TEST(RunConfig, LaterOverridesWin) {
  RunConfig cfg;
  cfg.apply_override("optim.epochs=3");
  cfg.apply_override("optim.epochs=7");
  EXPECT_EQ(cfg.optim.epochs, 7);
}

TEST(RunConfig, RandomOverridesSurviveRoundTrip) {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> t(0.01, 100.0);
  std::uniform_int_distribution<int> n(2, 5000);
  for (int i = 0; i < 200; ++i) {
    RunConfig cfg;
    cfg.set("loss.temperature", std::to_string(t(rng)));
    cfg.set("data.sampler.points", std::to_string(n(rng)));
    cfg.set("eval.ransac_seed", std::to_string(rng()));
    EXPECT_EQ(RunConfig::from_text(cfg.to_text()).entries(), cfg.entries());
  }
}

}  // namespace
}  // namespace mtldesc
