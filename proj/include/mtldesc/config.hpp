#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace mtldesc {

enum class FusionMode { Softmax, Raw };
enum class MatchMode { Plain, AttentionWeighted };

std::string to_string(FusionMode mode);
std::string to_string(MatchMode mode);
MatchMode parse_match_mode(const std::string& text);

struct ModelConfig {
  std::array<int64_t, 4> backbone_channels{32, 64, 128, 128};
  int64_t input_channels = 1;
  int64_t descriptor_dim = 128;
  int64_t sub_descriptor_dim = 32;
  int64_t agca_pool_size = 64;
  int64_t agca_patch_size = 16;
  int64_t agca_embed_dim = 128;
  int64_t agca_depth = 8;
  int64_t agca_heads = 4;
  double agca_mlp_ratio = 2.0;
  std::array<int64_t, 3> dilation_rates{6, 12, 18};
  FusionMode fusion = FusionMode::Softmax;

  /// Throws std::invalid_argument naming the first violated constraint.
  void validate() const;

  int64_t token_count() const {
    const int64_t side = agca_pool_size / agca_patch_size;
    return side * side;
  }
  int64_t cat_channels() const {
    return backbone_channels[0] + backbone_channels[1] + backbone_channels[2] +
           backbone_channels[3];
  }
};

struct LossConfig {
  double temperature = 15.0;
  double margin = 1.0;
  double bce_lambda = 200.0;
  void validate() const;
};

struct OptimConfig {
  double learning_rate = 1e-3;
  double poly_power = 0.9;
  int64_t batch_size = 12;
  int64_t epochs = 30;
  void validate() const;
};

struct HomographyParams {
  double max_rotation_deg = 25.0;
  double scale_min = 0.8;
  double scale_max = 1.2;
  double max_perspective = 0.1;
  /// Fraction of the image size.
  double max_translation = 0.1;
  void validate() const;
};

struct PhotometricParams {
  double max_brightness = 0.2;
  double contrast_min = 0.8;
  double contrast_max = 1.25;
  double max_blur_sigma = 1.0;
  bool enabled = true;
  void validate() const;
};

struct SamplerConfig {
  int64_t points = 400;
  int64_t grid = 40;
  int64_t nms_radius = 4;
  void validate() const;
};

struct DataConfig {
  /// Empty: render synthetic shape scenes instead of reading a corpus.
  std::string corpus;
  int64_t pairs = 2000;
  int64_t crop = 400;
  uint64_t seed = 0;
  HomographyParams homography;
  PhotometricParams photometric;
  SamplerConfig sampler;
  void validate() const;
};

struct InferenceConfig {
  double alpha = 0.9;
  int64_t nms_radius = 4;
  int64_t max_keypoints = 2000;
  MatchMode match_mode = MatchMode::Plain;
  void validate() const;
};

struct EvalConfig {
  double ransac_threshold = 3.0;
  int64_t ransac_iterations = 2000;
  uint64_t ransac_seed = 0;
  double ms_threshold = 3.0;
  void validate() const;
};

struct RunConfig {
  ModelConfig model;
  LossConfig loss;
  OptimConfig optim;
  DataConfig data;
  InferenceConfig inference;
  EvalConfig eval;
  uint64_t seed = 0;
  int64_t threads = 1;

  void validate() const;

  /// Sets one dotted key from its text form. Unknown keys throw.
  void set(const std::string& key, const std::string& value);
  /// Applies "key=value".
  void apply_override(const std::string& assignment);
  /// Every key with its resolved value, in a stable order.
  std::vector<std::pair<std::string, std::string>> entries() const;

  std::string to_text() const;
  static RunConfig from_text(const std::string& text);
  static RunConfig load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  /// Desk-scale defaults: quarter-width backbone, 192x192 crops, batch 1, 5 epochs.
  static RunConfig toy();
};

}  // namespace mtldesc
