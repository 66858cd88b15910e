#include "mtldesc/homography_estimation.hpp"

#include <Eigen/LU>
#include <Eigen/SVD>
#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <random>

namespace mtldesc {
namespace {

// Similarity taking the points to zero centroid and mean distance sqrt(2).
Eigen::Matrix3d normalizer(std::span<const cv::Point2d> pts) {
  double cx = 0.0, cy = 0.0;
  for (const auto& p : pts) {
    cx += p.x;
    cy += p.y;
  }
  cx /= static_cast<double>(pts.size());
  cy /= static_cast<double>(pts.size());
  double mean_dist = 0.0;
  for (const auto& p : pts) mean_dist += std::hypot(p.x - cx, p.y - cy);
  mean_dist /= static_cast<double>(pts.size());
  const double s = mean_dist > 0.0 ? std::sqrt(2.0) / mean_dist : 1.0;
  Eigen::Matrix3d t = Eigen::Matrix3d::Identity();
  t(0, 0) = s;
  t(1, 1) = s;
  t(0, 2) = -s * cx;
  t(1, 2) = -s * cy;
  return t;
}

bool collinear(const cv::Point2d& a, const cv::Point2d& b, const cv::Point2d& c) {
  const double area = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
  const double scale = std::max({std::hypot(b.x - a.x, b.y - a.y), std::hypot(c.x - a.x, c.y - a.y), 1e-12});
  return std::abs(area) < 1e-6 * scale * scale;
}

bool degenerate_sample(const std::array<cv::Point2d, 4>& p) {
  return collinear(p[0], p[1], p[2]) || collinear(p[0], p[1], p[3]) || collinear(p[0], p[2], p[3]) ||
         collinear(p[1], p[2], p[3]);
}

double reprojection_error(const Homography& h, const cv::Point2d& src, const cv::Point2d& dst) {
  const auto p = h.apply(src);
  if (!p) return std::numeric_limits<double>::infinity();
  return std::hypot(p->x - dst.x, p->y - dst.y);
}

std::size_t count_inliers(const Homography& h, std::span<const cv::Point2d> src, std::span<const cv::Point2d> dst,
                          double threshold, std::vector<bool>* mask) {
  std::size_t n = 0;
  if (mask) mask->assign(src.size(), false);
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (reprojection_error(h, src[i], dst[i]) <= threshold) {
      ++n;
      if (mask) (*mask)[i] = true;
    }
  }
  return n;
}

}  // namespace

std::optional<Homography> fit_homography_dlt(std::span<const cv::Point2d> src, std::span<const cv::Point2d> dst) {
  if (src.size() != dst.size() || src.size() < 4) return std::nullopt;
  const Eigen::Matrix3d ts = normalizer(src);
  const Eigen::Matrix3d td = normalizer(dst);
  const auto n = static_cast<Eigen::Index>(src.size());
  Eigen::MatrixXd a(2 * n, 9);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Vector3d s = ts * Eigen::Vector3d(src[static_cast<size_t>(i)].x, src[static_cast<size_t>(i)].y, 1.0);
    const Eigen::Vector3d d = td * Eigen::Vector3d(dst[static_cast<size_t>(i)].x, dst[static_cast<size_t>(i)].y, 1.0);
    const double x = s.x(), y = s.y(), u = d.x(), v = d.y();
    a.row(2 * i) << -x, -y, -1, 0, 0, 0, u * x, u * y, u;
    a.row(2 * i + 1) << 0, 0, 0, -x, -y, -1, v * x, v * y, v;
  }
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const Eigen::VectorXd h = svd.matrixV().col(8);
  Eigen::Matrix3d hn;
  hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
  const Eigen::Matrix3d m = td.inverse() * hn * ts;
  if (!m.allFinite() || std::abs(m(2, 2)) < 1e-12) return std::nullopt;
  try {
    return Homography(m);
  } catch (const std::invalid_argument&) {
    return std::nullopt;
  }
}

HomographyEstimate estimate_homography(std::span<const cv::Point2d> src, std::span<const cv::Point2d> dst,
                                       const RansacOptions& options) {
  HomographyEstimate best;
  if (src.size() != dst.size() || src.size() < 4) return best;
  const std::size_t n = src.size();
  std::mt19937_64 rng(options.seed);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);

  std::optional<Homography> best_h;
  std::size_t best_count = 0;
  int64_t needed = options.max_iterations;
  int64_t it = 0;
  for (; it < needed && it < options.max_iterations; ++it) {
    std::array<std::size_t, 4> idx{};
    for (int k = 0; k < 4; ++k) {
      std::size_t candidate = 0;
      do {
        candidate = pick(rng);
      } while (std::find(idx.begin(), idx.begin() + k, candidate) != idx.begin() + k);
      idx[static_cast<size_t>(k)] = candidate;
    }
    std::array<cv::Point2d, 4> s{}, d{};
    for (int k = 0; k < 4; ++k) {
      s[static_cast<size_t>(k)] = src[idx[static_cast<size_t>(k)]];
      d[static_cast<size_t>(k)] = dst[idx[static_cast<size_t>(k)]];
    }
    if (degenerate_sample(s) || degenerate_sample(d)) continue;
    const auto h = fit_homography_dlt(s, d);
    if (!h) continue;
    const std::size_t count = count_inliers(*h, src, dst, options.inlier_threshold, nullptr);
    if (count > best_count) {
      best_count = count;
      best_h = h;
      const double w = static_cast<double>(count) / static_cast<double>(n);
      const double p_fail = 1.0 - std::pow(w, 4.0);
      if (p_fail <= 0.0) {
        needed = it + 1;
      } else {
        const double k = std::log(1.0 - options.confidence) / std::log(p_fail);
        needed = std::min<int64_t>(options.max_iterations, static_cast<int64_t>(std::ceil(k)));
      }
    }
  }
  best.iterations = it;
  if (!best_h || best_count < 4) return best;

  std::vector<bool> mask;
  count_inliers(*best_h, src, dst, options.inlier_threshold, &mask);
  for (int round = 0; round < 2; ++round) {
    std::vector<cv::Point2d> s, d;
    for (std::size_t i = 0; i < n; ++i) {
      if (mask[i]) {
        s.push_back(src[i]);
        d.push_back(dst[i]);
      }
    }
    const auto refit = fit_homography_dlt(s, d);
    if (!refit) break;
    std::vector<bool> refit_mask;
    if (count_inliers(*refit, src, dst, options.inlier_threshold, &refit_mask) < 4) break;
    best_h = refit;
    mask = std::move(refit_mask);
  }
  best.homography = best_h;
  best.inliers = std::move(mask);
  best.inlier_count = static_cast<std::size_t>(std::count(best.inliers.begin(), best.inliers.end(), true));
  return best;
}

}  // namespace mtldesc
