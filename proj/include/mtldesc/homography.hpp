#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <opencv2/core/types.hpp>

#include "mtldesc/config.hpp"

namespace mtldesc {

/// 3x3 projective transform, row-major, normalized so that h(2,2) == 1.
class Homography {
 public:
  Homography() : m_(Eigen::Matrix3d::Identity()) {}
  /// Normalizes by m(2,2); throws std::invalid_argument if not invertible.
  explicit Homography(const Eigen::Matrix3d& m);

  static Homography identity() { return Homography(); }
  static Homography translation(double tx, double ty);
  static Homography from_row_major(std::span<const double> values);

  const Eigen::Matrix3d& matrix() const { return m_; }
  double operator()(int r, int c) const { return m_(r, c); }
  std::array<double, 9> row_major() const;

  Homography inverse() const;
  /// (*this) applied after `first`: x -> this(first(x)).
  Homography after(const Homography& first) const;

  /// Returns nullopt when the homogeneous coordinate vanishes (|w| < 1e-10).
  std::optional<cv::Point2d> apply(const cv::Point2d& p) const;

 private:
  Eigen::Matrix3d m_;
};

std::vector<std::optional<cv::Point2d>> warp_points(std::span<const cv::Point2d> points,
                                                    const Homography& h);

/// Random warp about the image centre; deterministic per seed. Degenerate samples
/// (non-convex or collapsed corner quadrilateral) are redrawn up to a bounded number of times.
Homography random_homography(uint64_t seed, const HomographyParams& params, int width, int height);

/// Image corners (0,0), (w-1,0), (w-1,h-1), (0,h-1).
std::array<cv::Point2d, 4> image_corners(int width, int height);

}  // namespace mtldesc
