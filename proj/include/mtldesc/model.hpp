#pragma once

#include <array>
#include <cstdint>

#include <torch/torch.h>

#include "mtldesc/config.hpp"

namespace mtldesc {

/// Backbone maps at full, 1/2, 1/4 and 1/8 resolution.
struct FeaturePyramid {
  torch::Tensor c1;
  torch::Tensor c2;
  torch::Tensor c3;
  torch::Tensor c4;
};

struct GlobalContext {
  /// B x E x h/4 x w/4, upsampled from the transformer's patch grid.
  torch::Tensor context;
  /// B x 1 x h/4 x w/4, ReLU output.
  torch::Tensor gate;
};

struct DescriptorOutput {
  torch::Tensor c_cat;
  /// conv3x3(C_cat) + gate * context.
  torch::Tensor d_raw;
  /// gate * context alone.
  torch::Tensor global_contribution;
  /// The four sub-descriptor branches concatenated (1x1, then dilations in config order).
  torch::Tensor local_context;
  /// L2-normalized per pixel, B x D x h/4 x w/4.
  torch::Tensor descriptors;
  /// SoftPlus scores, B x 1 x h/4 x w/4.
  torch::Tensor attention;
  torch::Tensor gate;
};

struct DetectorOutput {
  /// Header logits at their native scale.
  std::array<torch::Tensor, 4> scale_logits;
  /// Header logits resized to h x w.
  std::array<torch::Tensor, 4> upsampled_logits;
  /// Fusion coefficients actually applied (softmax of the learnable weights by default).
  torch::Tensor fusion;
  torch::Tensor fused_logits;
  /// sigmoid(fused_logits), B x 1 x h x w.
  torch::Tensor heatmap;
};

struct ModelOutput {
  DescriptorOutput description;
  DetectorOutput detection;
};

/// Four sub-encoders of 3x3 conv + ReLU pairs with 2x2 max-pooling between them.
class BackboneImpl : public torch::nn::Module {
 public:
  BackboneImpl(int64_t in_channels, const std::array<int64_t, 4>& channels);
  FeaturePyramid forward(const torch::Tensor& image);

 private:
  std::array<torch::nn::Conv2d, 4> first_{nullptr, nullptr, nullptr, nullptr};
  std::array<torch::nn::Conv2d, 4> second_{nullptr, nullptr, nullptr, nullptr};
};
TORCH_MODULE(Backbone);

/// Pre-norm transformer block: x + MSA(LN(x)), then x + MLP(LN(x)).
class TransformerLayerImpl : public torch::nn::Module {
 public:
  TransformerLayerImpl(int64_t dim, int64_t heads, int64_t hidden);
  torch::Tensor forward(const torch::Tensor& tokens);

 private:
  int64_t heads_;
  torch::nn::LayerNorm norm1_{nullptr};
  torch::nn::Linear qkv_{nullptr};
  torch::nn::Linear proj_{nullptr};
  torch::nn::LayerNorm norm2_{nullptr};
  torch::nn::Linear fc1_{nullptr};
  torch::nn::Linear fc2_{nullptr};
};
TORCH_MODULE(TransformerLayer);

/// Adaptive global context: C4 pooled to a fixed grid, split into flattened patches,
/// linearly embedded with learned position embeddings, run through transformer layers,
/// reshaped to the patch grid and upsampled; a parallel ReLU branch predicts the gate.
class AgcaImpl : public torch::nn::Module {
 public:
  AgcaImpl(int64_t c4_channels, const ModelConfig& config);

  /// Z0: B x N_tok x E.
  torch::Tensor embed(const torch::Tensor& c4);
  GlobalContext forward(const torch::Tensor& c4, int64_t out_h, int64_t out_w);

  const torch::Tensor& position_embedding() const { return pos_embed_; }

 private:
  int64_t pool_size_;
  int64_t patch_size_;
  int64_t embed_dim_;
  torch::nn::Linear patch_embed_{nullptr};
  torch::Tensor pos_embed_;
  torch::nn::ModuleList layers_;
  torch::nn::LayerNorm norm_{nullptr};
  torch::nn::Conv2d gate_conv_{nullptr};
};
TORCH_MODULE(Agca);

/// Dense descriptor and consistent-attention head on the 1/4-resolution aggregate C_cat.
class DescriptorHeadImpl : public torch::nn::Module {
 public:
  explicit DescriptorHeadImpl(const ModelConfig& config);
  DescriptorOutput forward(const FeaturePyramid& pyramid, const GlobalContext& global);

  static torch::Tensor aggregate(const FeaturePyramid& pyramid);

 private:
  torch::nn::Conv2d raw_conv_{nullptr};
  std::array<torch::nn::Conv2d, 4> branches_{nullptr, nullptr, nullptr, nullptr};
  torch::nn::Conv2d attention_conv_{nullptr};
};
TORCH_MODULE(DescriptorHead);

/// One 3x3 conv -> ReLU -> 1x1 conv header per pyramid level, fused at full resolution.
class DetectorImpl : public torch::nn::Module {
 public:
  DetectorImpl(const std::array<int64_t, 4>& channels, FusionMode fusion);
  DetectorOutput forward(const FeaturePyramid& pyramid, int64_t out_h, int64_t out_w);

  torch::Tensor& fusion_weights() { return fusion_weights_; }

 private:
  FusionMode fusion_;
  std::array<torch::nn::Sequential, 4> heads_{nullptr, nullptr, nullptr, nullptr};
  torch::Tensor fusion_weights_;
};
TORCH_MODULE(Detector);

class MtlDescImpl : public torch::nn::Module {
 public:
  /// Parameters are initialized by reset_parameters(seed).
  explicit MtlDescImpl(ModelConfig config, uint64_t seed = 0);

  /// Throws std::invalid_argument unless the input is B x C x h x w with h, w >= 32 and divisible by 8.
  FeaturePyramid encode(const torch::Tensor& image);
  DescriptorOutput describe(const FeaturePyramid& pyramid);
  DetectorOutput detect(const FeaturePyramid& pyramid);
  /// One backbone pass shared by both heads.
  ModelOutput forward(const torch::Tensor& image);

  const ModelConfig& config() const { return config_; }
  Backbone& backbone() { return backbone_; }
  Agca& agca() { return agca_; }
  DescriptorHead& descriptor_head() { return descriptor_; }
  Detector& detector() { return detector_; }

  /// init_parameters on every layer, truncated normal (std 0.02) position embeddings.
  void reset_parameters(uint64_t seed);
  /// Re-initializes only the description branch (AGCA + descriptor head).
  void reset_description(uint64_t seed);

 private:
  ModelConfig config_;
  Backbone backbone_{nullptr};
  Agca agca_{nullptr};
  DescriptorHead descriptor_{nullptr};
  Detector detector_{nullptr};
};
TORCH_MODULE(MtlDesc);

/// Checks the input layout and size rules; throws std::invalid_argument with the reason.
void check_input_image(const torch::Tensor& image, int64_t expected_channels);

/// He-normal convolutions, truncated-normal (std 0.02) linear layers, zero biases, unit LayerNorm.
void init_parameters(torch::nn::Module& module);
/// Normal(0, std) redrawn until every value lies within two standard deviations.
void trunc_normal_(torch::Tensor& t, double std);

}  // namespace mtldesc
