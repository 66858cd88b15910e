#pragma once

#include <functional>
#include <string>
#include <vector>

#include <opencv2/core.hpp>
#include <torch/torch.h>

#include "mtldesc/config.hpp"
#include "mtldesc/hpatches.hpp"
#include "mtldesc/keypoints.hpp"
#include "mtldesc/metrics.hpp"
#include "mtldesc/model.hpp"
#include "mtldesc/synth.hpp"

namespace mtldesc {

/// 1 x 1 x h x w copy of a single-channel image.
torch::Tensor image_to_tensor(const cv::Mat1f& image);
/// Copies a tensor holding exactly h x w values (any leading unit dims) into a matrix.
cv::Mat1f tensor_to_mat(const torch::Tensor& t);

/// Dense network outputs for one image, computed in eval mode without gradients.
struct DenseFeatures {
  cv::Size size;
  cv::Mat1f heatmap;
  /// D x h/4 x w/4.
  torch::Tensor descriptors;
  /// 1 x h/4 x w/4.
  torch::Tensor attention;
};

DenseFeatures compute_dense(MtlDesc& model, const cv::Mat1f& image);

/// Threshold + NMS on the heatmap, then descriptor and weight sampling at the survivors.
KeypointSet extract_features(const DenseFeatures& dense, const InferenceConfig& config);
KeypointSet extract_features(MtlDesc& model, const cv::Mat1f& image, const InferenceConfig& config);

/// Same keypoints and descriptors with every weight set to 1.
KeypointSet with_unit_weights(KeypointSet set);

/// Matches two keypoint sets and scores the result against the ground-truth homography.
PairEvaluation evaluate_pair(const KeypointSet& a, const KeypointSet& b, const Homography& gt, cv::Size size_a,
                             cv::Size size_b, MatchMode mode, const EvalConfig& config,
                             const std::vector<double>& thresholds);

/// Produces keypoints for an evaluation image (already cropped to multiples of 8).
using FeatureSource = std::function<KeypointSet(const std::filesystem::path& path, const cv::Mat1f& image)>;

MetricReport evaluate_sequences(const SequenceDataset& dataset, const FeatureSource& features, MatchMode mode,
                                const EvalConfig& config,
                                const std::vector<double>& thresholds = default_thresholds());

MetricReport evaluate_model(MtlDesc& model, const SequenceDataset& dataset, const InferenceConfig& inference,
                            const EvalConfig& config);

/// Mean |w_a(p) - w_b(H p)| over a stride-`stride` lattice of valid points of every pair.
double attention_consistency(MtlDesc& model, const std::vector<TrainingPair>& pairs, int stride = 4);

}  // namespace mtldesc
