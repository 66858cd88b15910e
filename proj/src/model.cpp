#include "mtldesc/model.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace mtldesc {
namespace F = torch::nn::functional;

namespace {

torch::Tensor resize_bilinear(const torch::Tensor& x, int64_t h, int64_t w) {
  if (x.size(2) == h && x.size(3) == w) return x;
  return F::interpolate(x, F::InterpolateFuncOptions()
                               .size(std::vector<int64_t>{h, w})
                               .mode(torch::kBilinear)
                               .align_corners(false));
}

torch::nn::Conv2d conv(int64_t in, int64_t out, int64_t kernel, int64_t dilation = 1) {
  const int64_t pad = dilation * (kernel / 2);
  return torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, kernel).padding(pad).dilation(dilation));
}

}  // namespace

void check_input_image(const torch::Tensor& image, int64_t expected_channels) {
  if (!image.defined() || image.dim() != 4) {
    throw std::invalid_argument("input image must be a B x C x h x w tensor");
  }
  const int64_t c = image.size(1);
  if (c != expected_channels && !(expected_channels == 1 && c == 3)) {
    throw std::invalid_argument("input image has " + std::to_string(c) + " channels, expected " +
                                std::to_string(expected_channels));
  }
  const int64_t h = image.size(2), w = image.size(3);
  if (h % 8 != 0 || w % 8 != 0) {
    throw std::invalid_argument("input image " + std::to_string(h) + "x" + std::to_string(w) +
                                " rejected: height and width must be divisible by 8");
  }
  if (h < 32 || w < 32) {
    throw std::invalid_argument("input image " + std::to_string(h) + "x" + std::to_string(w) +
                                " rejected: height and width must be at least 32");
  }
}

void trunc_normal_(torch::Tensor& t, double std) {
  torch::NoGradGuard no_grad;
  t.normal_(0.0, std);
  for (int round = 0; round < 100; ++round) {
    const auto outside = t.abs() > 2.0 * std;
    if (!outside.any().item<bool>()) return;
    t.masked_scatter_(outside, torch::empty_like(t).normal_(0.0, std).masked_select(outside));
  }
  t.clamp_(-2.0 * std, 2.0 * std);
}

void init_parameters(torch::nn::Module& module) {
  torch::NoGradGuard no_grad;
  auto init = [](torch::nn::Module& m) {
    if (auto* c = m.as<torch::nn::Conv2dImpl>()) {
      const auto& w = c->weight;
      const double fan_in = static_cast<double>(w.size(1) * w.size(2) * w.size(3));
      c->weight.normal_(0.0, std::sqrt(2.0 / fan_in));
      if (c->bias.defined()) c->bias.zero_();
    } else if (auto* l = m.as<torch::nn::LinearImpl>()) {
      trunc_normal_(l->weight, 0.02);
      if (l->bias.defined()) l->bias.zero_();
    } else if (auto* n = m.as<torch::nn::LayerNormImpl>()) {
      n->weight.fill_(1.0);
      n->bias.zero_();
    }
  };
  // The root may not be owned by a shared_ptr yet (called from constructors).
  init(module);
  for (const auto& m : module.modules(/*include_self=*/false)) init(*m);
}

BackboneImpl::BackboneImpl(int64_t in_channels, const std::array<int64_t, 4>& channels) {
  int64_t in = in_channels;
  for (size_t i = 0; i < 4; ++i) {
    first_[i] = register_module("conv" + std::to_string(i + 1) + "a", conv(in, channels[i], 3));
    second_[i] = register_module("conv" + std::to_string(i + 1) + "b", conv(channels[i], channels[i], 3));
    in = channels[i];
  }
}

FeaturePyramid BackboneImpl::forward(const torch::Tensor& image) {
  std::array<torch::Tensor, 4> levels;
  torch::Tensor x = image;
  for (size_t i = 0; i < 4; ++i) {
    if (i > 0) x = F::max_pool2d(x, F::MaxPool2dFuncOptions(2).stride(2));
    x = torch::relu(first_[i]->forward(x));
    x = torch::relu(second_[i]->forward(x));
    levels[i] = x;
  }
  return {levels[0], levels[1], levels[2], levels[3]};
}

TransformerLayerImpl::TransformerLayerImpl(int64_t dim, int64_t heads, int64_t hidden) : heads_(heads) {
  norm1_ = register_module("norm1", torch::nn::LayerNorm(torch::nn::LayerNormOptions({dim})));
  qkv_ = register_module("qkv", torch::nn::Linear(dim, 3 * dim));
  proj_ = register_module("proj", torch::nn::Linear(dim, dim));
  norm2_ = register_module("norm2", torch::nn::LayerNorm(torch::nn::LayerNormOptions({dim})));
  fc1_ = register_module("fc1", torch::nn::Linear(dim, hidden));
  fc2_ = register_module("fc2", torch::nn::Linear(hidden, dim));
}

torch::Tensor TransformerLayerImpl::forward(const torch::Tensor& tokens) {
  const int64_t b = tokens.size(0), n = tokens.size(1), e = tokens.size(2);
  const int64_t head_dim = e / heads_;
  auto qkv = qkv_->forward(norm1_->forward(tokens)).reshape({b, n, 3, heads_, head_dim}).permute({2, 0, 3, 1, 4});
  auto q = qkv[0], k = qkv[1], v = qkv[2];
  auto scores = torch::matmul(q, k.transpose(-2, -1)) / std::sqrt(static_cast<double>(head_dim));
  auto attended = torch::matmul(torch::softmax(scores, -1), v).transpose(1, 2).reshape({b, n, e});
  auto x = tokens + proj_->forward(attended);
  return x + fc2_->forward(torch::gelu(fc1_->forward(norm2_->forward(x))));
}

AgcaImpl::AgcaImpl(int64_t c4_channels, const ModelConfig& config)
    : pool_size_(config.agca_pool_size), patch_size_(config.agca_patch_size), embed_dim_(config.agca_embed_dim) {
  const int64_t patch_dim = c4_channels * patch_size_ * patch_size_;
  patch_embed_ = register_module("patch_embed", torch::nn::Linear(patch_dim, embed_dim_));
  pos_embed_ = register_parameter("pos_embed", torch::zeros({1, config.token_count(), embed_dim_}));
  const auto hidden = static_cast<int64_t>(std::lround(config.agca_mlp_ratio * static_cast<double>(embed_dim_)));
  layers_ = register_module("layers", torch::nn::ModuleList());
  for (int64_t i = 0; i < config.agca_depth; ++i) {
    layers_->push_back(TransformerLayer(embed_dim_, config.agca_heads, hidden));
  }
  norm_ = register_module("norm", torch::nn::LayerNorm(torch::nn::LayerNormOptions({embed_dim_})));
  gate_conv_ = register_module("gate_conv", conv(c4_channels, 1, 3));
}

torch::Tensor AgcaImpl::embed(const torch::Tensor& c4) {
  const int64_t b = c4.size(0), c = c4.size(1);
  const int64_t grid = pool_size_ / patch_size_;
  auto pooled = F::adaptive_avg_pool2d(c4, F::AdaptiveAvgPool2dFuncOptions({pool_size_, pool_size_}));
  auto patches = pooled.reshape({b, c, grid, patch_size_, grid, patch_size_})
                     .permute({0, 2, 4, 1, 3, 5})
                     .reshape({b, grid * grid, c * patch_size_ * patch_size_});
  return patch_embed_->forward(patches) + pos_embed_;
}

GlobalContext AgcaImpl::forward(const torch::Tensor& c4, int64_t out_h, int64_t out_w) {
  auto z = embed(c4);
  for (const auto& layer : *layers_) z = layer->as<TransformerLayer>()->forward(z);
  z = norm_->forward(z);
  const int64_t b = c4.size(0);
  const int64_t grid = pool_size_ / patch_size_;
  auto patch_grid = z.transpose(1, 2).reshape({b, embed_dim_, grid, grid});
  GlobalContext out;
  out.context = resize_bilinear(patch_grid, out_h, out_w);
  out.gate = torch::relu(resize_bilinear(gate_conv_->forward(c4), out_h, out_w));
  return out;
}

DescriptorHeadImpl::DescriptorHeadImpl(const ModelConfig& config) {
  const int64_t cat = config.cat_channels();
  raw_conv_ = register_module("raw_conv", conv(cat, config.descriptor_dim, 3));
  branches_[0] = register_module("branch_1x1", conv(cat, config.sub_descriptor_dim, 1));
  for (size_t i = 0; i < 3; ++i) {
    const int64_t rate = config.dilation_rates[i];
    branches_[i + 1] =
        register_module("branch_d" + std::to_string(rate), conv(cat, config.sub_descriptor_dim, 3, rate));
  }
  attention_conv_ = register_module("attention_conv", conv(1, 1, 3));
}

torch::Tensor DescriptorHeadImpl::aggregate(const FeaturePyramid& p) {
  const int64_t h = p.c3.size(2), w = p.c3.size(3);
  return torch::cat({resize_bilinear(p.c1, h, w), resize_bilinear(p.c2, h, w), p.c3, resize_bilinear(p.c4, h, w)},
                    1);
}

DescriptorOutput DescriptorHeadImpl::forward(const FeaturePyramid& pyramid, const GlobalContext& global) {
  DescriptorOutput out;
  out.c_cat = aggregate(pyramid);
  out.gate = global.gate;
  out.global_contribution = global.gate * global.context;
  out.d_raw = raw_conv_->forward(out.c_cat) + out.global_contribution;
  out.local_context = torch::cat({branches_[0]->forward(out.c_cat), branches_[1]->forward(out.c_cat),
                                  branches_[2]->forward(out.c_cat), branches_[3]->forward(out.c_cat)},
                                 1);
  out.descriptors = F::normalize(out.d_raw + out.local_context, F::NormalizeFuncOptions().p(2).dim(1));
  out.attention = torch::softplus(attention_conv_->forward(out.c_cat.mean(1, /*keepdim=*/true)));
  return out;
}

DetectorImpl::DetectorImpl(const std::array<int64_t, 4>& channels, FusionMode fusion) : fusion_(fusion) {
  for (size_t i = 0; i < 4; ++i) {
    heads_[i] = register_module("head" + std::to_string(i + 1),
                                torch::nn::Sequential(conv(channels[i], channels[i], 3), torch::nn::ReLU(),
                                                      conv(channels[i], 1, 1)));
  }
  fusion_weights_ = register_parameter(
      "fusion_weights", fusion == FusionMode::Softmax ? torch::zeros({4}) : torch::full({4}, 0.25));
}

DetectorOutput DetectorImpl::forward(const FeaturePyramid& p, int64_t out_h, int64_t out_w) {
  DetectorOutput out;
  const std::array<const torch::Tensor*, 4> levels{&p.c1, &p.c2, &p.c3, &p.c4};
  out.fusion = fusion_ == FusionMode::Softmax ? torch::softmax(fusion_weights_, 0) : fusion_weights_;
  torch::Tensor fused;
  for (size_t i = 0; i < 4; ++i) {
    out.scale_logits[i] = heads_[i]->forward(*levels[i]);
    out.upsampled_logits[i] = resize_bilinear(out.scale_logits[i], out_h, out_w);
    auto term = out.fusion[static_cast<int64_t>(i)] * out.upsampled_logits[i];
    fused = fused.defined() ? fused + term : term;
  }
  out.fused_logits = fused;
  out.heatmap = torch::sigmoid(fused);
  return out;
}

MtlDescImpl::MtlDescImpl(ModelConfig config, uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  backbone_ = register_module("backbone", Backbone(config_.input_channels, config_.backbone_channels));
  agca_ = register_module("agca", Agca(config_.backbone_channels[3], config_));
  descriptor_ = register_module("descriptor", DescriptorHead(config_));
  detector_ = register_module("detector", Detector(config_.backbone_channels, config_.fusion));
  reset_parameters(seed);
}

FeaturePyramid MtlDescImpl::encode(const torch::Tensor& image) {
  check_input_image(image, config_.input_channels);
  torch::Tensor x = image;
  if (config_.input_channels == 1 && image.size(1) == 3) {
    x = (0.299 * image.select(1, 0) + 0.587 * image.select(1, 1) + 0.114 * image.select(1, 2)).unsqueeze(1);
  }
  return backbone_->forward(x);
}

DescriptorOutput MtlDescImpl::describe(const FeaturePyramid& pyramid) {
  const auto global = agca_->forward(pyramid.c4, pyramid.c3.size(2), pyramid.c3.size(3));
  return descriptor_->forward(pyramid, global);
}

DetectorOutput MtlDescImpl::detect(const FeaturePyramid& pyramid) {
  return detector_->forward(pyramid, pyramid.c1.size(2), pyramid.c1.size(3));
}

ModelOutput MtlDescImpl::forward(const torch::Tensor& image) {
  const auto pyramid = encode(image);
  return {describe(pyramid), detect(pyramid)};
}

void MtlDescImpl::reset_parameters(uint64_t seed) {
  torch::manual_seed(seed);
  init_parameters(*this);
  auto pos = agca_->position_embedding();
  trunc_normal_(pos, 0.02);
  torch::NoGradGuard no_grad;
  detector_->fusion_weights().fill_(config_.fusion == FusionMode::Softmax ? 0.0 : 0.25);
}

void MtlDescImpl::reset_description(uint64_t seed) {
  torch::manual_seed(seed);
  init_parameters(*agca_);
  init_parameters(*descriptor_);
  auto pos = agca_->position_embedding();
  trunc_normal_(pos, 0.02);
}

}  // namespace mtldesc
