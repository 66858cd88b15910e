#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <opencv2/core/types.hpp>

#include "mtldesc/homography.hpp"

namespace mtldesc {

/// Normalized direct linear transform over >= 4 correspondences (least squares when > 4).
/// Returns nullopt for degenerate input.
std::optional<Homography> fit_homography_dlt(std::span<const cv::Point2d> src, std::span<const cv::Point2d> dst);

struct RansacOptions {
  double inlier_threshold = 3.0;
  int64_t max_iterations = 2000;
  double confidence = 0.999;
  uint64_t seed = 0;
};

struct HomographyEstimate {
  std::optional<Homography> homography;
  std::vector<bool> inliers;
  std::size_t inlier_count = 0;
  int64_t iterations = 0;

  bool ok() const { return homography.has_value(); }
};

/// Randomized 4-point hypotheses scored by forward reprojection error, adaptive stopping
/// capped at max_iterations, then a least-squares refit on the best inlier set.
/// Fewer than 4 matches or no non-degenerate hypothesis yields a failed estimate.
HomographyEstimate estimate_homography(std::span<const cv::Point2d> src, std::span<const cv::Point2d> dst,
                                       const RansacOptions& options = {});

}  // namespace mtldesc
