#include "mtldesc/nms.hpp"

#include <algorithm>
#include <stdexcept>

namespace mtldesc {

void sort_by_score(std::vector<ScoredPixel>& pixels, int width) {
  std::sort(pixels.begin(), pixels.end(), [width](const ScoredPixel& a, const ScoredPixel& b) {
    if (a.score != b.score) return a.score > b.score;
    return static_cast<long>(a.y) * width + a.x < static_cast<long>(b.y) * width + b.x;
  });
}

std::vector<ScoredPixel> greedy_nms(std::vector<ScoredPixel> candidates, int radius, cv::Size size,
                                    std::size_t limit) {
  if (radius < 0) throw std::invalid_argument("greedy_nms: negative radius");
  sort_by_score(candidates, size.width);
  cv::Mat1b suppressed(size, 0);
  std::vector<ScoredPixel> kept;
  for (const auto& c : candidates) {
    if (kept.size() >= limit) break;
    if (c.x < 0 || c.y < 0 || c.x >= size.width || c.y >= size.height) {
      throw std::invalid_argument("greedy_nms: candidate outside the map");
    }
    if (suppressed(c.y, c.x)) continue;
    kept.push_back(c);
    const int y0 = std::max(0, c.y - radius);
    const int y1 = std::min(size.height - 1, c.y + radius);
    const int x0 = std::max(0, c.x - radius);
    const int x1 = std::min(size.width - 1, c.x + radius);
    for (int y = y0; y <= y1; ++y) {
      std::fill(suppressed.ptr<uchar>(y) + x0, suppressed.ptr<uchar>(y) + x1 + 1, uchar{1});
    }
  }
  return kept;
}

}  // namespace mtldesc
