#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include <opencv2/core.hpp>

#include "mtldesc/config.hpp"
#include "mtldesc/homography.hpp"

namespace mtldesc {

/// Warps `src` into a `size` canvas so that dst(h(p)) = src(p); outside pixels are 0.
cv::Mat1f warp_image(const cv::Mat1f& src, const Homography& h, cv::Size size);

/// Pulls a map defined in the target frame back into the source frame: dst(p) = src(h(p)).
cv::Mat1f pull_back(const cv::Mat1f& target_map, const Homography& h, cv::Size source_size);

/// 255 where the pixel of image a lands inside image b under h.
cv::Mat1b valid_mask(const Homography& h, cv::Size size_a, cv::Size size_b);

/// Brightness shift, contrast about the mean, then Gaussian blur, clipped to [0, 1].
cv::Mat1f photometric_jitter(const cv::Mat1f& image, const PhotometricParams& params, std::mt19937_64& rng);

struct TrainingPair {
  cv::Mat1f image_a;
  cv::Mat1f image_b;
  /// Maps pixels of image_a to image_b.
  Homography homography;
  cv::Mat1b valid_mask;
  /// Crop window taken from the source image.
  cv::Rect crop;

  double coverage() const;
};

struct PairOptions {
  int crop = 400;
  HomographyParams homography;
  PhotometricParams photometric;
};

/// Random crop (when the image is larger than the crop), random homography and independent
/// photometric jitter of both views. Images smaller than the crop are rejected.
TrainingPair synthesize_pair(const cv::Mat1f& image, uint64_t seed, const PairOptions& options);

struct Shape {
  enum class Kind { Polygon, Line, Ellipse, Checkerboard };
  Kind kind = Kind::Polygon;
  /// Polygon/line vertices; checkerboard: top-left and bottom-right corners.
  std::vector<cv::Point> vertices;
  cv::Point centre;
  cv::Size axes;
  double angle_deg = 0.0;
  int thickness = 1;
  int cells = 4;
  double intensity = 1.0;
  double alt_intensity = 0.0;
};

struct Scene {
  cv::Size size;
  double background = 0.0;
  /// 0 disables the low-frequency background texture.
  uint64_t texture_seed = 0;
  double texture_amplitude = 0.0;
  std::vector<Shape> shapes;
};

struct LabeledImage {
  cv::Mat1f image;
  /// 1 at corner/junction pixels, 0 elsewhere.
  cv::Mat1b labels;
  /// Every labelled vertex, in canvas coordinates.
  std::vector<cv::Point> vertices;
};

/// Rasterizes the scene; corner labels are the analytically known vertices
/// (polygon corners, line endpoints, checkerboard lattice points). Ellipses carry no label.
LabeledImage render_scene(const Scene& scene);

/// Random non-overlapping polygons, lines, ellipses and checkerboards on a textured background.
Scene random_scene(cv::Size size, uint64_t seed);

LabeledImage synthetic_corner_labels(cv::Size canvas_size, uint64_t seed);

/// Moves each positive label of image a through h; keeps those landing inside `size_b`.
cv::Mat1b warp_labels(const cv::Mat1b& labels_a, const Homography& h, cv::Size size_b);

}  // namespace mtldesc
