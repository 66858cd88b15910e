#pragma once

#include <filesystem>
#include <string>

#include "mtldesc/keypoints.hpp"

namespace mtldesc {

/// Per-image feature export:
///   line 1: image path
///   line 2: "<h> <w> <count>"
///   then one line per keypoint: x y score weight d0 ... d(D-1),
///   space-delimited, 9 significant digits.
struct FeatureFile {
  std::string image_path;
  int height = 0;
  int width = 0;
  KeypointSet keypoints;
};

void write_features(const std::filesystem::path& path, const FeatureFile& features);
/// Validates the declared count, a consistent descriptor width, and unit-norm rows (1e-4).
FeatureFile read_features(const std::filesystem::path& path);

}  // namespace mtldesc
