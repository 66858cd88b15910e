#include "mtldesc/feature_io.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace mtldesc {

void write_features(const std::filesystem::path& path, const FeatureFile& features) {
  const auto& kp = features.keypoints;
  kp.validate();
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write features " + path.string());
  out << features.image_path << '\n' << features.height << ' ' << features.width << ' ' << kp.size() << '\n';
  out << std::setprecision(9);
  for (size_t i = 0; i < kp.size(); ++i) {
    out << kp.coords[i].x << ' ' << kp.coords[i].y << ' ' << kp.scores[i] << ' ' << kp.weights[i];
    for (Eigen::Index d = 0; d < kp.descriptors.cols(); ++d) {
      out << ' ' << kp.descriptors(static_cast<Eigen::Index>(i), d);
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("short write on features " + path.string());
}

FeatureFile read_features(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open features " + path.string());
  FeatureFile f;
  const auto fail = [&](const std::string& why) {
    return std::runtime_error("malformed feature file " + path.string() + ": " + why);
  };
  if (!std::getline(in, f.image_path)) throw fail("missing image path line");
  std::string header;
  if (!std::getline(in, header)) throw fail("missing size/count line");
  std::istringstream hs(header);
  long count = -1;
  if (!(hs >> f.height >> f.width >> count) || count < 0) throw fail("bad size/count line '" + header + "'");

  std::vector<std::vector<float>> rows;
  std::string line;
  long dim = -1;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::vector<float> values;
    float v = 0.0f;
    while (ls >> v) values.push_back(v);
    if (!ls.eof()) throw fail("non-numeric token on keypoint line " + std::to_string(rows.size()));
    if (values.size() < 5) throw fail("keypoint line " + std::to_string(rows.size()) + " is too short");
    const long this_dim = static_cast<long>(values.size()) - 4;
    if (dim < 0) dim = this_dim;
    if (this_dim != dim) throw fail("inconsistent descriptor width on keypoint line " + std::to_string(rows.size()));
    rows.push_back(std::move(values));
  }
  if (static_cast<long>(rows.size()) != count) {
    throw fail("header declares " + std::to_string(count) + " keypoints, found " + std::to_string(rows.size()));
  }
  auto& kp = f.keypoints;
  kp.descriptors.resize(static_cast<Eigen::Index>(rows.size()), dim < 0 ? 0 : dim);
  for (size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    kp.coords.emplace_back(r[0], r[1]);
    kp.scores.push_back(r[2]);
    kp.weights.push_back(r[3]);
    for (long d = 0; d < dim; ++d) kp.descriptors(static_cast<Eigen::Index>(i), d) = r[static_cast<size_t>(4 + d)];
  }
  try {
    kp.validate();
  } catch (const std::invalid_argument& e) {
    throw fail(e.what());
  }
  return f;
}

}  // namespace mtldesc
