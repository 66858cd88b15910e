#include "mtldesc/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include <opencv2/imgproc.hpp>

namespace mtldesc {
namespace {

cv::Matx33d to_cv(const Homography& h) {
  cv::Matx33d m;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) m(r, c) = h(r, c);
  return m;
}

bool is_identity(const Homography& h) { return h.matrix() == Eigen::Matrix3d::Identity(); }

bool inside(const cv::Point2d& p, cv::Size size) {
  return p.x >= 0.0 && p.y >= 0.0 && p.x <= size.width - 1 && p.y <= size.height - 1;
}

double pick_contrasting(double background, std::mt19937_64& rng, double min_gap, double max_gap) {
  std::uniform_real_distribution<double> gap(min_gap, max_gap);
  const double g = gap(rng);
  const bool up_ok = background + g <= 1.0;
  const bool down_ok = background - g >= 0.0;
  if (up_ok && down_ok) return std::bernoulli_distribution(0.5)(rng) ? background + g : background - g;
  if (up_ok) return background + g;
  if (down_ok) return background - g;
  return background > 0.5 ? 0.0 : 1.0;
}

cv::Mat1f texture_layer(cv::Size size, int cells, double amplitude, std::mt19937_64& rng) {
  cv::Mat1f coarse(cells, cells);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  for (auto& v : coarse) v = u(rng);
  cv::Mat1f fine;
  cv::resize(coarse, fine, size, 0, 0, cv::INTER_CUBIC);
  return fine * amplitude;
}

}  // namespace

cv::Mat1f warp_image(const cv::Mat1f& src, const Homography& h, cv::Size size) {
  if (is_identity(h) && src.size() == size) return src.clone();
  cv::Mat1f dst;
  cv::warpPerspective(src, dst, to_cv(h), size, cv::INTER_LINEAR, cv::BORDER_CONSTANT, cv::Scalar(0));
  return dst;
}

cv::Mat1f pull_back(const cv::Mat1f& target_map, const Homography& h, cv::Size source_size) {
  if (is_identity(h) && target_map.size() == source_size) return target_map.clone();
  cv::Mat1f dst;
  cv::warpPerspective(target_map, dst, to_cv(h), source_size, cv::INTER_LINEAR | cv::WARP_INVERSE_MAP,
                      cv::BORDER_CONSTANT, cv::Scalar(0));
  return dst;
}

cv::Mat1b valid_mask(const Homography& h, cv::Size size_a, cv::Size size_b) {
  cv::Mat1b mask(size_a, 0);
  for (int y = 0; y < size_a.height; ++y) {
    auto* row = mask.ptr<uchar>(y);
    for (int x = 0; x < size_a.width; ++x) {
      const auto p = h.apply(cv::Point2d(x, y));
      if (p && inside(*p, size_b)) row[x] = 255;
    }
  }
  return mask;
}

cv::Mat1f photometric_jitter(const cv::Mat1f& image, const PhotometricParams& params, std::mt19937_64& rng) {
  if (!params.enabled) return image.clone();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double brightness = (2.0 * unit(rng) - 1.0) * params.max_brightness;
  const double log_lo = std::log(params.contrast_min);
  const double log_hi = std::log(params.contrast_max);
  const double contrast = std::exp(log_lo + unit(rng) * (log_hi - log_lo));
  const double sigma = unit(rng) * params.max_blur_sigma;

  const double mean = cv::mean(image)[0];
  cv::Mat1f out = (image - mean) * contrast + (mean + brightness);
  if (sigma > 0.05) cv::GaussianBlur(out, out, cv::Size(0, 0), sigma);
  cv::min(out, 1.0, out);
  cv::max(out, 0.0, out);
  return out;
}

double TrainingPair::coverage() const {
  if (valid_mask.empty()) return 0.0;
  return static_cast<double>(cv::countNonZero(valid_mask)) / static_cast<double>(valid_mask.total());
}

TrainingPair synthesize_pair(const cv::Mat1f& image, uint64_t seed, const PairOptions& options) {
  if (image.empty()) throw std::invalid_argument("synthesize_pair: empty image");
  if (image.cols < options.crop || image.rows < options.crop) {
    throw std::invalid_argument("synthesize_pair: image " + std::to_string(image.cols) + "x" +
                                std::to_string(image.rows) + " is smaller than the " +
                                std::to_string(options.crop) + "x" + std::to_string(options.crop) + " crop");
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> ox(0, image.cols - options.crop);
  std::uniform_int_distribution<int> oy(0, image.rows - options.crop);
  TrainingPair pair;
  pair.crop = cv::Rect(ox(rng), oy(rng), options.crop, options.crop);
  const cv::Mat1f crop = image(pair.crop).clone();
  const cv::Size size = crop.size();

  pair.homography = random_homography(rng(), options.homography, size.width, size.height);
  pair.image_a = photometric_jitter(crop, options.photometric, rng);
  pair.image_b = photometric_jitter(warp_image(crop, pair.homography, size), options.photometric, rng);
  pair.valid_mask = valid_mask(pair.homography, size, size);
  if (cv::countNonZero(pair.valid_mask) == 0) {
    throw std::runtime_error("synthesize_pair: homography leaves no overlap");
  }
  return pair;
}

LabeledImage render_scene(const Scene& scene) {
  LabeledImage out;
  out.image = cv::Mat1f(scene.size, static_cast<float>(scene.background));
  if (scene.texture_seed != 0 && scene.texture_amplitude > 0.0) {
    std::mt19937_64 rng(scene.texture_seed);
    const int side = std::max(scene.size.width, scene.size.height);
    out.image += texture_layer(scene.size, std::max(3, side / 24), scene.texture_amplitude, rng);
    out.image += texture_layer(scene.size, std::max(4, side / 6), 0.5 * scene.texture_amplitude, rng);
  }
  out.labels = cv::Mat1b(scene.size, 0);

  auto mark = [&](const cv::Point& p) {
    if (p.x < 0 || p.y < 0 || p.x >= scene.size.width || p.y >= scene.size.height) return;
    out.labels(p) = 1;
    out.vertices.push_back(p);
  };

  for (const auto& shape : scene.shapes) {
    const cv::Scalar colour(shape.intensity);
    switch (shape.kind) {
      case Shape::Kind::Polygon: {
        std::vector<std::vector<cv::Point>> polys{shape.vertices};
        cv::fillPoly(out.image, polys, colour, cv::LINE_8);
        for (const auto& v : shape.vertices) mark(v);
        break;
      }
      case Shape::Kind::Line: {
        cv::line(out.image, shape.vertices.at(0), shape.vertices.at(1), colour, shape.thickness, cv::LINE_8);
        mark(shape.vertices[0]);
        mark(shape.vertices[1]);
        break;
      }
      case Shape::Kind::Ellipse:
        cv::ellipse(out.image, shape.centre, shape.axes, shape.angle_deg, 0.0, 360.0, colour, cv::FILLED,
                    cv::LINE_8);
        break;
      case Shape::Kind::Checkerboard: {
        const cv::Point tl = shape.vertices.at(0);
        const cv::Point br = shape.vertices.at(1);
        const int n = shape.cells;
        const int sx = (br.x - tl.x) / n;
        const int sy = (br.y - tl.y) / n;
        for (int i = 0; i < n; ++i) {
          for (int j = 0; j < n; ++j) {
            const double v = ((i + j) % 2 == 0) ? shape.intensity : shape.alt_intensity;
            cv::rectangle(out.image, cv::Rect(tl.x + j * sx, tl.y + i * sy, sx, sy), cv::Scalar(v), cv::FILLED);
          }
        }
        for (int i = 0; i <= n; ++i)
          for (int j = 0; j <= n; ++j) mark(cv::Point(tl.x + j * sx, tl.y + i * sy));
        break;
      }
    }
  }
  cv::min(out.image, 1.0, out.image);
  cv::max(out.image, 0.0, out.image);
  return out;
}

Scene random_scene(cv::Size size, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Scene scene;
  scene.size = size;
  scene.background = 0.2 + 0.6 * unit(rng);
  scene.texture_seed = rng() | 1u;
  scene.texture_amplitude = 0.12 + 0.1 * unit(rng);

  const int min_side = std::min(size.width, size.height);
  const int max_box = std::max(14, min_side / 5);
  const int attempts = 8 + static_cast<int>(size.area() / 120);
  std::vector<cv::Rect> occupied;

  for (int a = 0; a < attempts; ++a) {
    const int bw = std::uniform_int_distribution<int>(12, max_box)(rng);
    const int bh = std::uniform_int_distribution<int>(12, max_box)(rng);
    if (bw + 4 >= size.width || bh + 4 >= size.height) continue;
    const int x0 = std::uniform_int_distribution<int>(2, size.width - bw - 3)(rng);
    const int y0 = std::uniform_int_distribution<int>(2, size.height - bh - 3)(rng);
    const cv::Rect box(x0, y0, bw, bh);
    const cv::Rect padded(x0 - 4, y0 - 4, bw + 8, bh + 8);
    const bool overlaps = std::any_of(occupied.begin(), occupied.end(),
                                      [&](const cv::Rect& r) { return (r & padded).area() > 0; });
    if (overlaps) continue;
    occupied.push_back(padded);

    Shape shape;
    shape.intensity = pick_contrasting(scene.background, rng, 0.3, 0.6);
    const double pick = unit(rng);
    if (pick < 0.5) {
      shape.kind = Shape::Kind::Polygon;
      const int n = std::uniform_int_distribution<int>(3, 5)(rng);
      const double cx = x0 + 0.5 * bw;
      const double cy = y0 + 0.5 * bh;
      const double phase = unit(rng) * 2.0 * std::numbers::pi;
      for (int k = 0; k < n; ++k) {
        const double theta = phase + 2.0 * std::numbers::pi * (k + 0.3 * (unit(rng) - 0.5)) / n;
        const double r = 0.65 + 0.35 * unit(rng);
        cv::Point v(static_cast<int>(std::lround(cx + 0.5 * (bw - 1) * r * std::cos(theta))),
                    static_cast<int>(std::lround(cy + 0.5 * (bh - 1) * r * std::sin(theta))));
        v.x = std::clamp(v.x, x0, x0 + bw - 1);
        v.y = std::clamp(v.y, y0, y0 + bh - 1);
        if (std::find(shape.vertices.begin(), shape.vertices.end(), v) == shape.vertices.end()) {
          shape.vertices.push_back(v);
        }
      }
      if (shape.vertices.size() < 3) continue;
    } else if (pick < 0.65) {
      shape.kind = Shape::Kind::Line;
      shape.thickness = std::uniform_int_distribution<int>(1, 3)(rng);
      if (unit(rng) < 0.5) {
        shape.vertices = {cv::Point(x0, y0), cv::Point(x0 + bw - 1, y0 + bh - 1)};
      } else {
        shape.vertices = {cv::Point(x0, y0 + bh - 1), cv::Point(x0 + bw - 1, y0)};
      }
    } else if (pick < 0.75) {
      shape.kind = Shape::Kind::Ellipse;
      shape.centre = cv::Point(x0 + bw / 2, y0 + bh / 2);
      shape.axes = cv::Size(std::max(3, bw / 2 - 1), std::max(3, bh / 2 - 1));
      shape.angle_deg = 0.0;
    } else {
      shape.kind = Shape::Kind::Checkerboard;
      shape.cells = std::uniform_int_distribution<int>(2, 4)(rng);
      const int side = std::min(bw, bh);
      const int cell = side / shape.cells;
      if (cell < 5) continue;
      shape.vertices = {cv::Point(x0, y0), cv::Point(x0 + cell * shape.cells, y0 + cell * shape.cells)};
      shape.alt_intensity = pick_contrasting(shape.intensity, rng, 0.4, 0.7);
    }
    scene.shapes.push_back(std::move(shape));
  }
  return scene;
}

LabeledImage synthetic_corner_labels(cv::Size canvas_size, uint64_t seed) {
  return render_scene(random_scene(canvas_size, seed));
}

cv::Mat1b warp_labels(const cv::Mat1b& labels_a, const Homography& h, cv::Size size_b) {
  cv::Mat1b out(size_b, 0);
  for (int y = 0; y < labels_a.rows; ++y) {
    const auto* row = labels_a.ptr<uchar>(y);
    for (int x = 0; x < labels_a.cols; ++x) {
      if (!row[x]) continue;
      const auto p = h.apply(cv::Point2d(x, y));
      if (!p) continue;
      const cv::Point q(static_cast<int>(std::lround(p->x)), static_cast<int>(std::lround(p->y)));
      if (q.x >= 0 && q.y >= 0 && q.x < size_b.width && q.y < size_b.height) out(q) = 1;
    }
  }
  return out;
}

}  // namespace mtldesc
