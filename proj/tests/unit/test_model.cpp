#include <gtest/gtest.h>

#include <random>

#include "mtldesc/model.hpp"

namespace mtldesc {
namespace {

ModelConfig small_config() {
  ModelConfig c;
  c.backbone_channels = {4, 8, 8, 8};
  c.agca_depth = 2;
  return c;
}

torch::Tensor& param(MtlDesc& model, const std::string& name) {
  for (auto& p : model->named_parameters()) {
    if (p.key() == name) return p.value();
  }
  throw std::out_of_range(name);
}

TEST(Backbone, PyramidResolutions) {
  MtlDesc model(small_config(), 1);
  torch::NoGradGuard no_grad;
  auto p = model->encode(torch::rand({1, 1, 32, 32}));
  EXPECT_EQ(p.c1.sizes(), (std::vector<int64_t>{1, 4, 32, 32}));
  EXPECT_EQ(p.c2.sizes(), (std::vector<int64_t>{1, 8, 16, 16}));
  EXPECT_EQ(p.c3.sizes(), (std::vector<int64_t>{1, 8, 8, 8}));
  EXPECT_EQ(p.c4.sizes(), (std::vector<int64_t>{1, 8, 4, 4}));
  p = model->encode(torch::rand({1, 1, 400, 400}));
  EXPECT_EQ(p.c4.size(2), 50);
  EXPECT_EQ(p.c4.size(3), 50);
  p = model->encode(torch::rand({1, 1, 480, 640}));
  EXPECT_EQ(p.c3.size(2), 120);
  EXPECT_EQ(p.c3.size(3), 160);
}

TEST(Backbone, RejectsBadInputs) {
  MtlDesc model(small_config(), 1);
  try {
    model->encode(torch::rand({1, 1, 36, 40}));
    FAIL() << "expected rejection";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("divisible by 8"), std::string::npos);
  }
  EXPECT_THROW(model->encode(torch::rand({1, 1, 24, 24})), std::invalid_argument);
  EXPECT_THROW(model->encode(torch::rand({1, 2, 32, 32})), std::invalid_argument);
  EXPECT_THROW(model->encode(torch::rand({1, 32, 32})), std::invalid_argument);
  EXPECT_NO_THROW(model->encode(torch::rand({1, 3, 32, 32})));
}

TEST(Agca, SixteenTokensOf128ForAnySize) {
  MtlDesc model(small_config(), 2);
  torch::NoGradGuard no_grad;
  for (auto [h, w] : {std::pair{32, 32}, {64, 96}, {200, 136}}) {
    const auto p = model->encode(torch::rand({2, 1, h, w}));
    const auto z = model->agca()->embed(p.c4);
    EXPECT_EQ(z.sizes(), (std::vector<int64_t>{2, 16, 128}));
  }
}

TEST(Agca, EqualPooledInputsGiveEqualContext) {
  MtlDesc model(small_config(), 3);
  torch::NoGradGuard no_grad;
  const auto c4 = torch::rand({1, 8, 128, 128});
  // +d/-d checkerboard has zero mean over every 2x2 pooling window.
  const auto sign = (torch::arange(128).view({1, 128}) + torch::arange(128).view({128, 1})).remainder(2) * 2 - 1;
  const auto other = c4 + 0.3 * sign.to(torch::kFloat32);
  const auto a = model->agca()->forward(c4, 32, 32);
  const auto b = model->agca()->forward(other, 32, 32);
  EXPECT_LT((a.context - b.context).abs().max().item<float>(), 1e-5);
}

TEST(DescriptorHead, ShapesNormsAndPositiveAttention) {
  std::mt19937 rng(4);
  std::uniform_int_distribution<int> side(4, 12);
  MtlDesc model(small_config(), 4);
  torch::NoGradGuard no_grad;
  for (int trial = 0; trial < 5; ++trial) {
    const int h = 8 * side(rng), w = 8 * side(rng);
    const auto out = model->forward(torch::rand({2, 1, h, w}));
    const auto& d = out.description;
    EXPECT_EQ(d.descriptors.sizes(), (std::vector<int64_t>{2, 128, h / 4, w / 4}));
    EXPECT_EQ(d.attention.sizes(), (std::vector<int64_t>{2, 1, h / 4, w / 4}));
    EXPECT_EQ(d.local_context.size(1), 128);
    EXPECT_LT((d.descriptors.norm(2, 1) - 1).abs().max().item<float>(), 1e-5);
    EXPECT_GT(d.attention.min().item<float>(), 0.0f);
    EXPECT_EQ(out.detection.heatmap.sizes(), (std::vector<int64_t>{2, 1, h, w}));
  }
}

TEST(DescriptorHead, ClosedGateRemovesGlobalContribution) {
  MtlDesc model(small_config(), 5);
  torch::NoGradGuard no_grad;
  param(model, "agca.gate_conv.weight").zero_();
  param(model, "agca.gate_conv.bias").fill_(-1.0);
  const auto out = model->forward(torch::rand({1, 1, 64, 64})).description;
  EXPECT_EQ(out.gate.abs().max().item<float>(), 0.0f);
  EXPECT_EQ(out.global_contribution.abs().max().item<float>(), 0.0f);
  const auto raw = torch::conv2d(out.c_cat, param(model, "descriptor.raw_conv.weight"),
                                 param(model, "descriptor.raw_conv.bias"), 1, 1);
  EXPECT_TRUE(torch::equal(out.d_raw, raw));
}

TEST(DescriptorHead, EachBranchOwnsOneBlock) {
  MtlDesc model(small_config(), 6);
  torch::NoGradGuard no_grad;
  const auto image = torch::rand({1, 1, 64, 64});
  const auto before = model->forward(image).description.local_context;
  const std::vector<std::string> branches{"branch_1x1", "branch_d6", "branch_d12", "branch_d18"};
  for (std::size_t b = 0; b < 4; ++b) {
    param(model, "descriptor." + branches[b] + ".weight").zero_();
    param(model, "descriptor." + branches[b] + ".bias").zero_();
    const auto after = model->forward(image).description.local_context;
    for (std::size_t k = 0; k < 4; ++k) {
      const auto block = after.slice(1, static_cast<int64_t>(32 * k), static_cast<int64_t>(32 * k + 32));
      if (k <= b) {
        EXPECT_EQ(block.abs().max().item<float>(), 0.0f) << b << " " << k;
      } else {
        EXPECT_TRUE(torch::equal(block, before.slice(1, static_cast<int64_t>(32 * k), static_cast<int64_t>(32 * k + 32))));
      }
    }
  }
}

TEST(DescriptorHead, AttentionIsSoftplusOfChannelMeanConv) {
  MtlDesc model(small_config(), 7);
  torch::NoGradGuard no_grad;
  const auto out = model->forward(torch::rand({1, 1, 48, 48})).description;
  const auto expected = torch::softplus(torch::conv2d(out.c_cat.mean(1, true), param(model, "descriptor.attention_conv.weight"),
                                                      param(model, "descriptor.attention_conv.bias"), 1, 1));
  EXPECT_LT((out.attention - expected).abs().max().item<float>(), 1e-6);
}

TEST(Detector, FusionCases) {
  MtlDesc model(small_config(), 8);
  torch::NoGradGuard no_grad;
  const auto image = torch::rand({1, 1, 64, 64});
  auto& w = model->detector()->fusion_weights();

  w.copy_(torch::tensor({0.0f, 0.0f, 200.0f, 0.0f}));
  auto det = model->forward(image).detection;
  EXPECT_LT((det.heatmap - torch::sigmoid(det.upsampled_logits[2])).abs().max().item<float>(), 1e-6);

  w.fill_(0.7f);
  det = model->forward(image).detection;
  EXPECT_LT((det.fusion - 0.25).abs().max().item<float>(), 1e-7);
  const auto mean = (det.upsampled_logits[0] + det.upsampled_logits[1] + det.upsampled_logits[2] +
                     det.upsampled_logits[3]) / 4.0;
  EXPECT_LT((det.fused_logits - mean).abs().max().item<float>(), 1e-5);
  EXPECT_EQ(det.heatmap.size(2), 64);

  for (int i = 1; i <= 4; ++i) {
    param(model, "detector.head" + std::to_string(i) + ".2.weight").zero_();
    param(model, "detector.head" + std::to_string(i) + ".2.bias").zero_();
  }
  det = model->forward(image).detection;
  EXPECT_TRUE(torch::equal(det.heatmap, torch::full_like(det.heatmap, 0.5)));
}

TEST(Detector, RawFusionUsesWeightsDirectly) {
  auto cfg = small_config();
  cfg.fusion = FusionMode::Raw;
  MtlDesc model(cfg, 9);
  torch::NoGradGuard no_grad;
  model->detector()->fusion_weights().copy_(torch::tensor({1.0f, 2.0f, 0.0f, -1.0f}));
  const auto det = model->forward(torch::rand({1, 1, 32, 32})).detection;
  EXPECT_TRUE(torch::equal(det.fusion, torch::tensor({1.0f, 2.0f, 0.0f, -1.0f})));
}

TEST(MtlDesc, FullResolutionOutputs) {
  MtlDesc model(small_config(), 10);
  model->eval();
  torch::NoGradGuard no_grad;
  const auto image = torch::rand({1, 1, 400, 400});
  const auto a = model->forward(image);
  EXPECT_EQ(a.description.descriptors.size(2), 100);
  EXPECT_EQ(a.description.attention.size(3), 100);
  EXPECT_EQ(a.detection.heatmap.size(2), 400);
  const auto b = model->forward(image);
  EXPECT_TRUE(torch::equal(a.description.descriptors, b.description.descriptors));
  EXPECT_TRUE(torch::equal(a.description.attention, b.description.attention));
  EXPECT_TRUE(torch::equal(a.detection.heatmap, b.detection.heatmap));
}

TEST(MtlDesc, SeededInitIsReproducible) {
  MtlDesc a(small_config(), 11), b(small_config(), 11), c(small_config(), 12);
  const auto pa = a->parameters(), pb = b->parameters(), pc = c->parameters();
  bool differs = false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    EXPECT_TRUE(torch::equal(pa[i], pb[i]));
    differs = differs || !torch::equal(pa[i], pc[i]);
  }
  EXPECT_TRUE(differs);
  const auto pos = a->agca()->position_embedding();
  EXPECT_LE(pos.abs().max().item<float>(), 0.04f + 1e-7f);
}

TEST(MtlDesc, ResetDescriptionLeavesDetectorAlone) {
  MtlDesc model(small_config(), 13);
  const auto det_before = param(model, "detector.head1.0.weight").clone();
  const auto desc_before = param(model, "descriptor.raw_conv.weight").clone();
  model->reset_description(99);
  EXPECT_TRUE(torch::equal(det_before, param(model, "detector.head1.0.weight")));
  EXPECT_FALSE(torch::equal(desc_before, param(model, "descriptor.raw_conv.weight")));
}

TEST(InitParameters, HeNormalScale) {
  torch::manual_seed(0);
  torch::nn::Conv2d c(torch::nn::Conv2dOptions(64, 64, 3));
  init_parameters(*c);
  const double expected = std::sqrt(2.0 / (64 * 9));
  EXPECT_NEAR(c->weight.std().item<double>(), expected, 0.05 * expected);
  EXPECT_EQ(c->bias.abs().max().item<float>(), 0.0f);
  auto t = torch::empty({10000});
  trunc_normal_(t, 0.02);
  EXPECT_LE(t.abs().max().item<float>(), 0.04f + 1e-7f);
}

}  // namespace
}  // namespace mtldesc
