#pragma once

#include <stdexcept>
#include <vector>

#include <opencv2/core.hpp>

#include "mtldesc/config.hpp"
#include "mtldesc/heatmap_io.hpp"
#include "mtldesc/nms.hpp"
#include "mtldesc/synth.hpp"

namespace mtldesc {

/// Point pairs (P, P') chosen for descriptor supervision.
struct Correspondences {
  std::vector<cv::Point> points_a;
  /// Exact warp of points_a into image b.
  std::vector<cv::Point2d> points_b;
  std::vector<float> scores;

  std::size_t size() const { return points_a.size(); }
};

class SamplingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Row/column boundaries of a `cells`-way split of `extent`: cell i covers [b[i], b[i+1]).
std::vector<int> grid_boundaries(int extent, int cells);

/// One candidate per non-empty cell: the cell's maximum, ties to the smallest row-major index.
std::vector<ScoredPixel> per_cell_maxima(const cv::Mat1f& map, int cells);

/// Keypoint-guided correspondence sampling: compound heatmap, per-cell maxima over a
/// grid x grid array of cells, candidates whose warp leaves image b dropped, greedy NMS,
/// then the best `points` survivors. Throws SamplingError when fewer than 2 survive.
Correspondences sample_correspondences(const TrainingPair& pair, const TeacherHeatmaps& teacher,
                                       const SamplerConfig& config);

}  // namespace mtldesc
