#pragma once

#include <cstddef>
#include <vector>

#include <opencv2/core.hpp>

namespace mtldesc {

struct ScoredPixel {
  int x = 0;
  int y = 0;
  float score = 0.0f;
};

/// Descending score; equal scores resolved by the smaller row-major index y * width + x.
void sort_by_score(std::vector<ScoredPixel>& pixels, int width);

/// Greedy non-maximum suppression: visits candidates in sort_by_score order and drops any
/// candidate within Chebyshev distance `radius` of one already kept. Stops after `limit` kept.
std::vector<ScoredPixel> greedy_nms(std::vector<ScoredPixel> candidates, int radius, cv::Size size,
                                    std::size_t limit);

}  // namespace mtldesc
