#include "mtldesc/homography.hpp"

#include <Eigen/LU>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace mtldesc {
namespace {

constexpr double kMinDeterminant = 1e-8;
constexpr double kMinHomogeneous = 1e-10;
constexpr int kMaxRedraws = 100;

double cross(const cv::Point2d& o, const cv::Point2d& a, const cv::Point2d& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

// Corners must stay finite, keep orientation, form a convex quad, and keep a sane area.
bool well_conditioned(const Homography& h, int width, int height) {
  const auto corners = image_corners(width, height);
  std::array<cv::Point2d, 4> warped;
  for (int i = 0; i < 4; ++i) {
    auto p = h.apply(corners[i]);
    if (!p || !std::isfinite(p->x) || !std::isfinite(p->y)) return false;
    warped[i] = *p;
  }
  double area = 0.0;
  for (int i = 0; i < 4; ++i) {
    const double c = cross(warped[i], warped[(i + 1) % 4], warped[(i + 2) % 4]);
    if (c <= 0.0) return false;
    area += warped[i].x * warped[(i + 1) % 4].y - warped[(i + 1) % 4].x * warped[i].y;
  }
  const double original = static_cast<double>(width - 1) * static_cast<double>(height - 1);
  const double ratio = 0.5 * area / original;
  return ratio > 0.25 && ratio < 4.0;
}

}  // namespace

Homography::Homography(const Eigen::Matrix3d& m) {
  if (!m.allFinite()) throw std::invalid_argument("homography has non-finite entries");
  if (std::abs(m(2, 2)) < kMinHomogeneous) {
    throw std::invalid_argument("homography has h(2,2) == 0 and cannot be normalized");
  }
  m_ = m / m(2, 2);
  if (std::abs(m_.determinant()) <= kMinDeterminant) {
    throw std::invalid_argument("homography is not invertible (|det| <= 1e-8)");
  }
}

Homography Homography::translation(double tx, double ty) {
  Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
  m(0, 2) = tx;
  m(1, 2) = ty;
  return Homography(m);
}

Homography Homography::from_row_major(std::span<const double> values) {
  if (values.size() != 9) throw std::invalid_argument("homography needs 9 values");
  Eigen::Matrix3d m;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) m(r, c) = values[r * 3 + c];
  return Homography(m);
}

std::array<double, 9> Homography::row_major() const {
  std::array<double, 9> out{};
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) out[r * 3 + c] = m_(r, c);
  return out;
}

Homography Homography::inverse() const { return Homography(m_.inverse()); }

Homography Homography::after(const Homography& first) const { return Homography(m_ * first.m_); }

std::optional<cv::Point2d> Homography::apply(const cv::Point2d& p) const {
  const double x = m_(0, 0) * p.x + m_(0, 1) * p.y + m_(0, 2);
  const double y = m_(1, 0) * p.x + m_(1, 1) * p.y + m_(1, 2);
  const double w = m_(2, 0) * p.x + m_(2, 1) * p.y + m_(2, 2);
  if (std::abs(w) < kMinHomogeneous) return std::nullopt;
  return cv::Point2d(x / w, y / w);
}

std::vector<std::optional<cv::Point2d>> warp_points(std::span<const cv::Point2d> points,
                                                    const Homography& h) {
  std::vector<std::optional<cv::Point2d>> out;
  out.reserve(points.size());
  for (const auto& p : points) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
      out.emplace_back(std::nullopt);
    } else {
      out.push_back(h.apply(p));
    }
  }
  return out;
}

std::array<cv::Point2d, 4> image_corners(int width, int height) {
  const double w = width - 1;
  const double h = height - 1;
  return {cv::Point2d(0, 0), cv::Point2d(w, 0), cv::Point2d(w, h), cv::Point2d(0, h)};
}

Homography random_homography(uint64_t seed, const HomographyParams& params, int width, int height) {
  params.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);

  const double cx = 0.5 * (width - 1);
  const double cy = 0.5 * (height - 1);
  const double half_w = 0.5 * width;
  const double half_h = 0.5 * height;

  for (int attempt = 0; attempt <= kMaxRedraws; ++attempt) {
    const double angle = unit(rng) * params.max_rotation_deg * std::numbers::pi / 180.0;
    const double log_lo = std::log(params.scale_min);
    const double log_hi = std::log(params.scale_max);
    const double scale = std::exp(log_lo + 0.5 * (unit(rng) + 1.0) * (log_hi - log_lo));
    const double px = unit(rng) * params.max_perspective / half_w;
    const double py = unit(rng) * params.max_perspective / half_h;
    const double tx = unit(rng) * params.max_translation * width;
    const double ty = unit(rng) * params.max_translation * height;

    Eigen::Matrix3d to_centre = Eigen::Matrix3d::Identity();
    to_centre(0, 2) = -cx;
    to_centre(1, 2) = -cy;
    Eigen::Matrix3d from_centre = Eigen::Matrix3d::Identity();
    from_centre(0, 2) = cx + tx;
    from_centre(1, 2) = cy + ty;
    Eigen::Matrix3d similarity = Eigen::Matrix3d::Identity();
    similarity(0, 0) = scale * std::cos(angle);
    similarity(0, 1) = -scale * std::sin(angle);
    similarity(1, 0) = scale * std::sin(angle);
    similarity(1, 1) = scale * std::cos(angle);
    Eigen::Matrix3d perspective = Eigen::Matrix3d::Identity();
    perspective(2, 0) = px;
    perspective(2, 1) = py;

    const Eigen::Matrix3d m = from_centre * perspective * similarity * to_centre;
    try {
      Homography h(m);
      if (well_conditioned(h, width, height)) return h;
    } catch (const std::invalid_argument&) {
    }
  }
  throw std::runtime_error("random_homography: no well-conditioned sample after bounded retries");
}

}  // namespace mtldesc
