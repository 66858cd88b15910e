#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "mtldesc/config.hpp"

namespace mtldesc {

/// N point pairs with descriptors (N x D rows) and attention scores (N) from both images.
struct CorrespondenceBatch {
  torch::Tensor desc_a;
  torch::Tensor desc_b;
  torch::Tensor att_a;
  torch::Tensor att_b;

  int64_t size() const { return desc_a.defined() ? desc_a.size(0) : 0; }
  /// Shapes agree, N >= 2, every value finite, attention > 0 and (optionally) unit-norm rows.
  void validate(bool require_unit_norm = true, double norm_tolerance = 1e-4) const;
};

/// ||w_a[i] d_a[i] - w_b[i] d_b[i]||_2 for every i.
torch::Tensor positive_distances(const CorrespondenceBatch& batch);

/// For every i, the j != i minimizing ||w_a[i] d_a[i] - w_b[j] d_b[j]||_2 (lowest j among ties).
std::vector<int64_t> hardest_negative_indices(const CorrespondenceBatch& batch);

/// Distance to the hardest cross-image negative; differentiable through the selected pair.
torch::Tensor hardest_negative_distances(const CorrespondenceBatch& batch);

/// softmax(att / T) over the batch.
torch::Tensor attention_softmax(const torch::Tensor& att, double temperature);

/// sum_i softmax(w_a / T)_i * max(0, pos_i - neg_i + margin), not divided by N.
torch::Tensor atrip_loss(const CorrespondenceBatch& batch, const LossConfig& config);

/// Analytic gradient of ||w d - x_pos||_2 with respect to d: w (x - x_pos) / ||x - x_pos||.
std::vector<double> positive_distance_gradient(double weight, std::span<const double> descriptor,
                                               std::span<const double> positive);

using PositiveGradientFn =
    std::function<std::vector<double>(double, std::span<const double>, std::span<const double>)>;

struct GradCheckOptions {
  int trials = 100;
  int64_t points = 8;
  int64_t dim = 4;
  double step = 1e-5;
  uint64_t seed = 0;
  double temperature = 15.0;
  double abs_tolerance = 1e-6;
  double rel_tolerance = 1e-4;
};

struct GradCheckReport {
  int trials = 0;
  int resampled_degenerate = 0;
  double positive_gradient_max_abs_error = 0.0;
  double desc_a_max_rel_error = 0.0;
  double desc_b_max_rel_error = 0.0;
  double att_a_max_rel_error = 0.0;
  double att_b_max_rel_error = 0.0;
  std::string worst_case;
  bool passed = false;

  double loss_max_rel_error() const;
  std::string to_json() const;
};

/// (a) the positive-distance gradient formula against central differences, and
/// (b) autodiff gradients of atrip_loss w.r.t. all descriptors and attention scores against
/// central differences, on random float64 instances kept away from hinge and argmin kinks.
GradCheckReport atrip_gradient_check(const GradCheckOptions& options,
                                     const PositiveGradientFn& analytic = positive_distance_gradient);

inline constexpr double kBceEpsilon = 1e-6;

/// -lambda g log(k) - (1 - g) log(1 - k), k clamped to [eps, 1 - eps].
double weighted_bce(double k, double g, double lambda);

/// Mean weighted BCE over all pixels; shapes must match.
torch::Tensor detector_loss(const torch::Tensor& heatmap, const torch::Tensor& labels, double lambda);

/// l_det + l_des; both must be finite.
torch::Tensor total_loss(const torch::Tensor& l_det, const torch::Tensor& l_des);

}  // namespace mtldesc
