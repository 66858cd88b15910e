#include "mtldesc/sampler.hpp"

namespace mtldesc {

std::vector<int> grid_boundaries(int extent, int cells) {
  if (cells <= 0) throw std::invalid_argument("grid_boundaries: cells must be positive");
  std::vector<int> b(static_cast<size_t>(cells) + 1);
  for (int i = 0; i <= cells; ++i) {
    b[static_cast<size_t>(i)] = static_cast<int>(static_cast<long>(i) * extent / cells);
  }
  return b;
}

std::vector<ScoredPixel> per_cell_maxima(const cv::Mat1f& map, int cells) {
  const auto rows = grid_boundaries(map.rows, cells);
  const auto cols = grid_boundaries(map.cols, cells);
  std::vector<ScoredPixel> out;
  out.reserve(static_cast<size_t>(cells) * static_cast<size_t>(cells));
  for (int r = 0; r < cells; ++r) {
    for (int c = 0; c < cells; ++c) {
      const int y0 = rows[r], y1 = rows[r + 1];
      const int x0 = cols[c], x1 = cols[c + 1];
      if (y0 >= y1 || x0 >= x1) continue;
      ScoredPixel best{x0, y0, map(y0, x0)};
      // Row-major scan with strict '>' keeps the earliest index among ties.
      for (int y = y0; y < y1; ++y) {
        const float* row = map.ptr<float>(y);
        for (int x = x0; x < x1; ++x) {
          if (row[x] > best.score) best = {x, y, row[x]};
        }
      }
      out.push_back(best);
    }
  }
  return out;
}

Correspondences sample_correspondences(const TrainingPair& pair, const TeacherHeatmaps& teacher,
                                       const SamplerConfig& config) {
  config.validate();
  const cv::Mat1f& m = teacher.compound;
  if (m.size() != pair.image_a.size()) {
    throw std::invalid_argument("sample_correspondences: compound heatmap does not match image a");
  }
  const cv::Size size_b = pair.image_b.size();

  std::vector<ScoredPixel> candidates;
  std::vector<cv::Point2d> targets(static_cast<size_t>(m.rows) * m.cols);
  for (const auto& q : per_cell_maxima(m, static_cast<int>(config.grid))) {
    const auto p = pair.homography.apply(cv::Point2d(q.x, q.y));
    if (!p || p->x < 0.0 || p->y < 0.0 || p->x > size_b.width - 1 || p->y > size_b.height - 1) continue;
    targets[static_cast<size_t>(q.y) * m.cols + q.x] = *p;
    candidates.push_back(q);
  }

  const auto kept = greedy_nms(std::move(candidates), static_cast<int>(config.nms_radius), m.size(),
                               static_cast<size_t>(config.points));
  if (kept.size() < 2) {
    throw SamplingError("sample_correspondences: only " + std::to_string(kept.size()) +
                        " correspondence(s) survived; pair rejected");
  }
  Correspondences out;
  out.points_a.reserve(kept.size());
  out.points_b.reserve(kept.size());
  out.scores.reserve(kept.size());
  for (const auto& k : kept) {
    out.points_a.emplace_back(k.x, k.y);
    out.points_b.push_back(targets[static_cast<size_t>(k.y) * m.cols + k.x]);
    out.scores.push_back(k.score);
  }
  return out;
}

}  // namespace mtldesc
