#include "mtldesc/hpatches.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <stdexcept>

#include <opencv2/imgcodecs.hpp>

namespace mtldesc {
namespace {

namespace fs = std::filesystem;

std::optional<fs::path> find_image(const fs::path& dir, int index) {
  for (const char* ext : {".ppm", ".png", ".jpg", ".pgm", ".jpeg"}) {
    fs::path p = dir / (std::to_string(index) + ext);
    if (fs::exists(p)) return p;
  }
  return std::nullopt;
}

std::vector<std::string> read_list(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read sequence list " + path.string());
  std::vector<std::string> names;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    std::string name;
    if (ls >> name) names.push_back(name);
  }
  return names;
}

}  // namespace

std::string to_string(SequenceKind kind) {
  switch (kind) {
    case SequenceKind::Illumination:
      return "illumination";
    case SequenceKind::Viewpoint:
      return "viewpoint";
    case SequenceKind::Unknown:
      break;
  }
  return "unknown";
}

SequenceKind kind_from_name(const std::string& name) {
  if (name.rfind("i_", 0) == 0) return SequenceKind::Illumination;
  if (name.rfind("v_", 0) == 0) return SequenceKind::Viewpoint;
  return SequenceKind::Unknown;
}

Homography read_homography_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<double> values;
  std::string token;
  while (in >> token) {
    try {
      size_t used = 0;
      const double v = std::stod(token, &used);
      if (used != token.size()) throw std::invalid_argument(token);
      values.push_back(v);
    } catch (const std::exception&) {
      throw std::runtime_error(path.string() + ": non-numeric token '" + token + "'");
    }
  }
  if (values.size() != 9) {
    throw std::runtime_error(path.string() + ": expected 9 values, found " + std::to_string(values.size()));
  }
  try {
    return Homography::from_row_major(values);
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

void write_homography_file(const fs::path& path, const Homography& h) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << std::setprecision(17);
  const auto v = h.row_major();
  for (int r = 0; r < 3; ++r) {
    out << v[static_cast<size_t>(r * 3)] << ' ' << v[static_cast<size_t>(r * 3 + 1)] << ' '
        << v[static_cast<size_t>(r * 3 + 2)] << '\n';
  }
}

SequenceDataset load_sequences(const fs::path& root, const std::optional<fs::path>& sequence_list) {
  if (!fs::is_directory(root)) throw std::runtime_error("dataset root " + root.string() + " is not a directory");
  std::vector<std::string> names;
  if (sequence_list) {
    names = read_list(*sequence_list);
  } else {
    for (const auto& entry : fs::directory_iterator(root)) {
      if (entry.is_directory()) names.push_back(entry.path().filename().string());
    }
    std::sort(names.begin(), names.end());
  }

  SequenceDataset ds;
  for (const auto& name : names) {
    const fs::path dir = root / name;
    if (!fs::is_directory(dir)) {
      ds.skipped.push_back(name + ": sequence directory missing");
      continue;
    }
    const auto ref = find_image(dir, 1);
    if (!ref) {
      ds.skipped.push_back(name + ": reference image 1 missing");
      continue;
    }
    for (int k = 2; k <= 6; ++k) {
      const auto tgt = find_image(dir, k);
      const fs::path hfile = dir / ("H_1_" + std::to_string(k));
      if (!tgt && !fs::exists(hfile)) continue;
      if (!tgt) {
        ds.skipped.push_back(name + "/1-" + std::to_string(k) + ": target image missing");
        continue;
      }
      try {
        SequencePair p;
        p.sequence = name;
        p.target_index = k;
        p.ref_image = *ref;
        p.tgt_image = *tgt;
        p.gt_homography = read_homography_file(hfile);
        p.kind = kind_from_name(name);
        ds.pairs.push_back(std::move(p));
      } catch (const std::exception& e) {
        ds.skipped.push_back(name + "/1-" + std::to_string(k) + ": " + e.what());
      }
    }
  }
  return ds;
}

cv::Mat1f load_eval_image(const fs::path& path) {
  const cv::Mat raw = cv::imread(path.string(), cv::IMREAD_GRAYSCALE);
  if (raw.empty()) throw std::runtime_error("cannot read image " + path.string());
  const int w = raw.cols - raw.cols % 8;
  const int h = raw.rows - raw.rows % 8;
  if (w < 32 || h < 32) throw std::runtime_error("image " + path.string() + " is smaller than 32x32");
  cv::Mat1f out;
  raw(cv::Rect(0, 0, w, h)).convertTo(out, CV_32F, 1.0 / 255.0);
  return out;
}

void write_sequence(const fs::path& dir, const std::vector<cv::Mat1f>& images,
                    const std::vector<Homography>& homographies_from_first) {
  if (images.size() != homographies_from_first.size() + 1) {
    throw std::invalid_argument("write_sequence: need one homography per non-reference image");
  }
  fs::create_directories(dir);
  for (std::size_t i = 0; i < images.size(); ++i) {
    cv::Mat u8;
    images[i].convertTo(u8, CV_8U, 255.0);
    const fs::path p = dir / (std::to_string(i + 1) + ".png");
    if (!cv::imwrite(p.string(), u8)) throw std::runtime_error("cannot write " + p.string());
  }
  for (std::size_t k = 0; k < homographies_from_first.size(); ++k) {
    write_homography_file(dir / ("H_1_" + std::to_string(k + 2)), homographies_from_first[k]);
  }
}

}  // namespace mtldesc
