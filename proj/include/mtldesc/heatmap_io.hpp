#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include <opencv2/core.hpp>

#include "mtldesc/synth.hpp"

namespace mtldesc {

/// Heatmap file layout (little-endian):
///   bytes 0..3   magic "MTLH"
///   uint32       version (1)
///   uint32       height
///   uint32       width
///   float32[h*w] row-major values
inline constexpr char kHeatmapMagic[4] = {'M', 'T', 'L', 'H'};
inline constexpr uint32_t kHeatmapVersion = 1;

class HeatmapFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void write_heatmap(const std::filesystem::path& path, const cv::Mat1f& map);
/// Structural read only (magic, version, size); values are not range-checked.
cv::Mat1f read_heatmap(const std::filesystem::path& path);

struct TeacherHeatmaps {
  cv::Mat1f m1;
  cv::Mat1f m2;
  /// m2 pulled back into image a's frame.
  cv::Mat1f m1_warp;
  /// m1 + m1_warp, in [0, 2].
  cv::Mat1f compound;
};

/// Builds the compound map for a pair from maps already in memory; values must lie in [0, 1].
TeacherHeatmaps bind_teacher_heatmaps(const cv::Mat1f& m1, const cv::Mat1f& m2, const TrainingPair& pair);

/// Reads teacher maps for image a and image b, validates shape against the pair and
/// every value against [0, 1]. Errors name the file and the first offending pixel.
TeacherHeatmaps import_teacher_heatmaps(const std::filesystem::path& path_a,
                                        const std::filesystem::path& path_b, const TrainingPair& pair);

}  // namespace mtldesc
