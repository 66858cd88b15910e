#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include <opencv2/core.hpp>

#include "mtldesc/config.hpp"
#include "mtldesc/nms.hpp"

namespace mtldesc {

using DescriptorMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Detected keypoints with their sampled descriptors (rows, unit norm) and attention weights.
struct KeypointSet {
  std::vector<cv::Point2d> coords;
  std::vector<float> scores;
  DescriptorMatrix descriptors;
  std::vector<float> weights;

  std::size_t size() const { return coords.size(); }
  /// Throws std::invalid_argument when field lengths disagree, a weight is not positive,
  /// or a descriptor row deviates from unit norm by more than `norm_tolerance`.
  void validate(double norm_tolerance = 1e-4) const;
};

/// Pixels with k >= alpha, greedy Chebyshev NMS by descending score, at most `max_keypoints`.
std::vector<ScoredPixel> extract_keypoints(const cv::Mat1f& heatmap, double alpha, int nms_radius,
                                           int64_t max_keypoints);

struct Match {
  int index_a = 0;
  int index_b = 0;
  float distance = 0.0f;
};

struct MatchSet {
  std::vector<Match> pairs;
  MatchMode mode = MatchMode::Plain;
};

/// Pairwise Euclidean distances between (optionally attention-weighted) descriptors.
Eigen::MatrixXf descriptor_distances(const KeypointSet& a, const KeypointSet& b, MatchMode mode);

/// Mutual nearest neighbours; distance ties go to the lowest index.
MatchSet match(const KeypointSet& a, const KeypointSet& b, MatchMode mode);

}  // namespace mtldesc
