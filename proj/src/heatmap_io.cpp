#include "mtldesc/heatmap_io.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

namespace mtldesc {
namespace {

static_assert(std::endian::native == std::endian::little, "heatmap I/O assumes a little-endian host");

void put_u32(std::ostream& out, uint32_t v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); }

uint32_t get_u32(std::istream& in, const std::filesystem::path& path) {
  uint32_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) {
    throw HeatmapFormatError(path.string() + ": truncated header");
  }
  return v;
}

std::string pixel_name(int row, int col) {
  return "(row " + std::to_string(row) + ", col " + std::to_string(col) + ")";
}

void check_range(const cv::Mat1f& map, const std::string& what) {
  for (int y = 0; y < map.rows; ++y) {
    const float* row = map.ptr<float>(y);
    for (int x = 0; x < map.cols; ++x) {
      const float v = row[x];
      if (!std::isfinite(v) || v < 0.0f || v > 1.0f) {
        throw HeatmapFormatError(what + ": value " + std::to_string(v) + " at pixel " + pixel_name(y, x) +
                                 " is outside [0, 1]");
      }
    }
  }
}

}  // namespace

void write_heatmap(const std::filesystem::path& path, const cv::Mat1f& map) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write heatmap " + path.string());
  out.write(kHeatmapMagic, 4);
  put_u32(out, kHeatmapVersion);
  put_u32(out, static_cast<uint32_t>(map.rows));
  put_u32(out, static_cast<uint32_t>(map.cols));
  for (int y = 0; y < map.rows; ++y) {
    out.write(reinterpret_cast<const char*>(map.ptr<float>(y)), static_cast<std::streamsize>(map.cols * 4));
  }
  if (!out) throw std::runtime_error("short write on heatmap " + path.string());
}

cv::Mat1f read_heatmap(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw HeatmapFormatError("cannot open heatmap " + path.string());
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), 4) || std::memcmp(magic.data(), kHeatmapMagic, 4) != 0) {
    throw HeatmapFormatError(path.string() + ": bad magic (expected MTLH)");
  }
  const uint32_t version = get_u32(in, path);
  if (version != kHeatmapVersion) {
    throw HeatmapFormatError(path.string() + ": unsupported version " + std::to_string(version));
  }
  const uint32_t h = get_u32(in, path);
  const uint32_t w = get_u32(in, path);
  if (h == 0 || w == 0 || h > 1u << 15 || w > 1u << 15) {
    throw HeatmapFormatError(path.string() + ": implausible size " + std::to_string(h) + "x" + std::to_string(w));
  }
  cv::Mat1f map(static_cast<int>(h), static_cast<int>(w));
  for (int y = 0; y < map.rows; ++y) {
    if (!in.read(reinterpret_cast<char*>(map.ptr<float>(y)), static_cast<std::streamsize>(map.cols * 4))) {
      throw HeatmapFormatError(path.string() + ": truncated data at row " + std::to_string(y));
    }
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw HeatmapFormatError(path.string() + ": trailing bytes after " + std::to_string(h * w) + " values");
  }
  return map;
}

TeacherHeatmaps bind_teacher_heatmaps(const cv::Mat1f& m1, const cv::Mat1f& m2, const TrainingPair& pair) {
  if (m1.size() != pair.image_a.size()) {
    throw HeatmapFormatError("teacher map for image a has size " + std::to_string(m1.cols) + "x" +
                             std::to_string(m1.rows) + ", expected " + std::to_string(pair.image_a.cols) + "x" +
                             std::to_string(pair.image_a.rows));
  }
  if (m2.size() != pair.image_b.size()) {
    throw HeatmapFormatError("teacher map for image b has size " + std::to_string(m2.cols) + "x" +
                             std::to_string(m2.rows) + ", expected " + std::to_string(pair.image_b.cols) + "x" +
                             std::to_string(pair.image_b.rows));
  }
  check_range(m1, "teacher map a");
  check_range(m2, "teacher map b");
  TeacherHeatmaps t;
  t.m1 = m1.clone();
  t.m2 = m2.clone();
  t.m1_warp = pull_back(m2, pair.homography, m1.size());
  t.compound = t.m1 + t.m1_warp;
  return t;
}

TeacherHeatmaps import_teacher_heatmaps(const std::filesystem::path& path_a, const std::filesystem::path& path_b,
                                        const TrainingPair& pair) {
  const cv::Mat1f m1 = read_heatmap(path_a);
  const cv::Mat1f m2 = read_heatmap(path_b);
  check_range(m1, path_a.string());
  check_range(m2, path_b.string());
  return bind_teacher_heatmaps(m1, m2, pair);
}

}  // namespace mtldesc
