#include "mtldesc/keypoints.hpp"

#include <cmath>
#include <stdexcept>

namespace mtldesc {

void KeypointSet::validate(double norm_tolerance) const {
  const auto n = coords.size();
  if (scores.size() != n || weights.size() != n || static_cast<size_t>(descriptors.rows()) != n) {
    throw std::invalid_argument("KeypointSet: coords/scores/weights/descriptors lengths differ");
  }
  for (size_t i = 0; i < n; ++i) {
    if (!(weights[i] > 0.0f)) {
      throw std::invalid_argument("KeypointSet: weight " + std::to_string(i) + " is not positive");
    }
    const double norm = descriptors.row(static_cast<Eigen::Index>(i)).cast<double>().norm();
    if (std::abs(norm - 1.0) > norm_tolerance) {
      throw std::invalid_argument("KeypointSet: descriptor " + std::to_string(i) + " has norm " +
                                  std::to_string(norm));
    }
  }
}

std::vector<ScoredPixel> extract_keypoints(const cv::Mat1f& heatmap, double alpha, int nms_radius,
                                           int64_t max_keypoints) {
  std::vector<ScoredPixel> candidates;
  for (int y = 0; y < heatmap.rows; ++y) {
    const float* row = heatmap.ptr<float>(y);
    for (int x = 0; x < heatmap.cols; ++x) {
      if (row[x] >= alpha) candidates.push_back({x, y, row[x]});
    }
  }
  if (max_keypoints <= 0) return {};
  return greedy_nms(std::move(candidates), nms_radius, heatmap.size(), static_cast<size_t>(max_keypoints));
}

Eigen::MatrixXf descriptor_distances(const KeypointSet& a, const KeypointSet& b, MatchMode mode) {
  if (a.descriptors.cols() != b.descriptors.cols()) {
    throw std::invalid_argument("descriptor_distances: descriptor dimensions differ");
  }
  DescriptorMatrix xa = a.descriptors;
  DescriptorMatrix xb = b.descriptors;
  if (mode == MatchMode::AttentionWeighted) {
    for (Eigen::Index i = 0; i < xa.rows(); ++i) xa.row(i) *= a.weights[static_cast<size_t>(i)];
    for (Eigen::Index j = 0; j < xb.rows(); ++j) xb.row(j) *= b.weights[static_cast<size_t>(j)];
  }
  Eigen::MatrixXf dist(xa.rows(), xb.rows());
  for (Eigen::Index i = 0; i < xa.rows(); ++i) {
    dist.row(i) = (xb.rowwise() - xa.row(i)).rowwise().norm().transpose();
  }
  return dist;
}

MatchSet match(const KeypointSet& a, const KeypointSet& b, MatchMode mode) {
  MatchSet out;
  out.mode = mode;
  if (a.size() == 0 || b.size() == 0) return out;
  const Eigen::MatrixXf dist = descriptor_distances(a, b, mode);

  std::vector<Eigen::Index> best_b(static_cast<size_t>(dist.rows()), 0);
  std::vector<Eigen::Index> best_a(static_cast<size_t>(dist.cols()), 0);
  for (Eigen::Index i = 0; i < dist.rows(); ++i) {
    for (Eigen::Index j = 0; j < dist.cols(); ++j) {
      // Strict '<' keeps the lowest index among ties on both sides.
      if (dist(i, j) < dist(i, best_b[static_cast<size_t>(i)])) best_b[static_cast<size_t>(i)] = j;
      if (dist(i, j) < dist(best_a[static_cast<size_t>(j)], j)) best_a[static_cast<size_t>(j)] = i;
    }
  }

  for (Eigen::Index i = 0; i < dist.rows(); ++i) {
    const auto j = best_b[static_cast<size_t>(i)];
    if (best_a[static_cast<size_t>(j)] == i) {
      out.pairs.push_back({static_cast<int>(i), static_cast<int>(j), dist(i, j)});
    }
  }
  return out;
}

}  // namespace mtldesc
