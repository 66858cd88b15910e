#include "mtldesc/metrics.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace mtldesc {
namespace {

bool inside(const std::optional<cv::Point2d>& p, cv::Size size) {
  return p && p->x >= 0.0 && p->y >= 0.0 && p->x <= size.width - 1 && p->y <= size.height - 1;
}

std::size_t threshold_index(const std::vector<double>& thresholds, double t) {
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    if (std::abs(thresholds[i] - t) < 1e-9) return i;
  }
  throw std::out_of_range("threshold " + std::to_string(t) + " is not part of the report");
}

nlohmann::json summary_json(const MetricSummary& s) {
  nlohmann::json j;
  nlohmann::json mma = nlohmann::json::object();
  nlohmann::json ha = nlohmann::json::object();
  for (std::size_t i = 0; i < s.thresholds.size(); ++i) {
    std::ostringstream key;
    key << s.thresholds[i];
    mma[key.str()] = s.mma[i];
    ha[key.str()] = s.ha[i];
  }
  j["mma"] = mma;
  j["matching_score"] = s.matching_score;
  j["ha"] = ha;
  j["pairs"] = s.pairs;
  j["ms_pairs"] = s.ms_pairs;
  j["keypoints"] = s.keypoints;
  j["matches"] = s.matches;
  j["correct"] = s.correct;
  return j;
}

}  // namespace

std::vector<double> default_thresholds() { return {1, 2, 3, 4, 5, 6, 7, 8, 9, 10}; }

std::vector<double> match_errors(const KeypointSet& a, const KeypointSet& b, const MatchSet& matches,
                                 const Homography& gt) {
  std::vector<double> errors;
  errors.reserve(matches.pairs.size());
  for (const auto& m : matches.pairs) {
    const auto p = gt.apply(a.coords.at(static_cast<size_t>(m.index_a)));
    const auto& q = b.coords.at(static_cast<size_t>(m.index_b));
    errors.push_back(p ? std::hypot(p->x - q.x, p->y - q.y) : std::numeric_limits<double>::infinity());
  }
  return errors;
}

std::vector<double> mma(const KeypointSet& a, const KeypointSet& b, const MatchSet& matches, const Homography& gt,
                        const std::vector<double>& thresholds) {
  std::vector<double> out(thresholds.size(), 0.0);
  if (matches.pairs.empty()) return out;
  const auto errors = match_errors(a, b, matches, gt);
  for (std::size_t t = 0; t < thresholds.size(); ++t) {
    std::size_t correct = 0;
    for (double e : errors) correct += e <= thresholds[t] ? 1 : 0;
    out[t] = static_cast<double>(correct) / static_cast<double>(errors.size());
  }
  return out;
}

std::optional<double> matching_score(const KeypointSet& a, const KeypointSet& b, const MatchSet& matches,
                                     const Homography& gt, cv::Size size_a, cv::Size size_b, double threshold) {
  const Homography inv = gt.inverse();
  std::vector<bool> shared_a(a.size()), shared_b(b.size());
  std::size_t count_a = 0, count_b = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    shared_a[i] = inside(gt.apply(a.coords[i]), size_b);
    count_a += shared_a[i] ? 1 : 0;
  }
  for (std::size_t j = 0; j < b.size(); ++j) {
    shared_b[j] = inside(inv.apply(b.coords[j]), size_a);
    count_b += shared_b[j] ? 1 : 0;
  }
  if (count_a == 0 || count_b == 0) return std::nullopt;

  const auto errors = match_errors(a, b, matches, gt);
  std::size_t correct_a = 0, correct_b = 0;
  for (std::size_t k = 0; k < errors.size(); ++k) {
    if (errors[k] > threshold) continue;
    correct_a += shared_a[static_cast<size_t>(matches.pairs[k].index_a)] ? 1 : 0;
    correct_b += shared_b[static_cast<size_t>(matches.pairs[k].index_b)] ? 1 : 0;
  }
  return 0.5 * (static_cast<double>(correct_a) / static_cast<double>(count_a) +
                static_cast<double>(correct_b) / static_cast<double>(count_b));
}

double corner_error(const Homography& estimate, const Homography& gt, cv::Size size) {
  double total = 0.0;
  for (const auto& c : image_corners(size.width, size.height)) {
    const auto p = estimate.apply(c);
    const auto q = gt.apply(c);
    if (!p || !q) return std::numeric_limits<double>::infinity();
    total += std::hypot(p->x - q->x, p->y - q->y);
  }
  return 0.25 * total;
}

std::vector<bool> homography_accuracy(const std::optional<Homography>& estimate, const Homography& gt,
                                      cv::Size size, const std::vector<double>& thresholds) {
  std::vector<bool> out(thresholds.size(), false);
  if (!estimate) return out;
  const double err = corner_error(*estimate, gt, size);
  for (std::size_t t = 0; t < thresholds.size(); ++t) out[t] = err <= thresholds[t];
  return out;
}

double MetricSummary::mma_at(double t) const { return mma.at(threshold_index(thresholds, t)); }
double MetricSummary::ha_at(double t) const { return ha.at(threshold_index(thresholds, t)); }

MetricSummary summarize(const std::vector<PairEvaluation>& pairs, const std::vector<double>& thresholds) {
  MetricSummary s;
  s.thresholds = thresholds;
  s.mma.assign(thresholds.size(), 0.0);
  s.ha.assign(thresholds.size(), 0.0);
  for (const auto& p : pairs) {
    for (std::size_t t = 0; t < thresholds.size(); ++t) {
      s.mma[t] += p.mma.at(t);
      s.ha[t] += p.ha.at(t) ? 1.0 : 0.0;
    }
    if (p.matching_score) {
      s.matching_score += *p.matching_score;
      ++s.ms_pairs;
    }
    s.keypoints += p.keypoints_a + p.keypoints_b;
    s.matches += p.matches;
    s.correct += p.correct;
  }
  s.pairs = pairs.size();
  if (!pairs.empty()) {
    for (auto& v : s.mma) v /= static_cast<double>(pairs.size());
    for (auto& v : s.ha) v /= static_cast<double>(pairs.size());
  }
  if (s.ms_pairs > 0) s.matching_score /= static_cast<double>(s.ms_pairs);
  return s;
}

MetricReport build_report(std::vector<PairEvaluation> pairs, const std::vector<double>& thresholds,
                          std::vector<std::string> skipped) {
  MetricReport r;
  r.thresholds = thresholds;
  r.skipped = std::move(skipped);
  r.groups["overall"] = summarize(pairs, thresholds);
  std::map<std::string, std::vector<PairEvaluation>> by_kind;
  for (const auto& p : pairs) {
    if (!p.kind.empty()) by_kind[p.kind].push_back(p);
  }
  for (const auto& [kind, group] : by_kind) r.groups[kind] = summarize(group, thresholds);
  r.pairs = std::move(pairs);
  return r;
}

std::string report_to_json(const MetricReport& report) {
  nlohmann::json j;
  j["thresholds"] = report.thresholds;
  for (const auto& [name, s] : report.groups) j["groups"][name] = summary_json(s);
  j["skipped"] = report.skipped;
  nlohmann::json pairs = nlohmann::json::array();
  for (const auto& p : report.pairs) {
    nlohmann::json e;
    e["name"] = p.name;
    e["kind"] = p.kind;
    e["mma"] = p.mma;
    e["matching_score"] = p.matching_score ? nlohmann::json(*p.matching_score) : nlohmann::json(nullptr);
    std::vector<int> ha;
    for (bool b : p.ha) ha.push_back(b ? 1 : 0);
    e["ha"] = ha;
    e["keypoints"] = {p.keypoints_a, p.keypoints_b};
    e["matches"] = p.matches;
    e["correct"] = p.correct;
    pairs.push_back(std::move(e));
  }
  j["pairs"] = std::move(pairs);
  return j.dump(2);
}

std::string report_to_table(const MetricReport& report) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4);
  os << std::left << std::setw(14) << "group" << std::right << std::setw(7) << "pairs";
  for (double t : report.thresholds) os << std::setw(9) << ("MMA@" + std::to_string(static_cast<int>(t)));
  os << std::setw(9) << "M.S.";
  for (double t : {1.0, 3.0, 5.0}) {
    if (t <= report.thresholds.back()) os << std::setw(9) << ("HA@" + std::to_string(static_cast<int>(t)));
  }
  os << '\n';
  for (const auto& [name, s] : report.groups) {
    os << std::left << std::setw(14) << name << std::right << std::setw(7) << s.pairs;
    for (double v : s.mma) os << std::setw(9) << v;
    os << std::setw(9) << s.matching_score;
    for (double t : {1.0, 3.0, 5.0}) {
      if (t <= report.thresholds.back()) os << std::setw(9) << s.ha_at(t);
    }
    os << '\n';
  }
  if (!report.skipped.empty()) {
    os << "skipped:\n";
    for (const auto& s : report.skipped) os << "  " << s << '\n';
  }
  return os.str();
}

void write_mma_curve(const MetricReport& report, const std::filesystem::path& path) {
  const int width = 640, height = 480, margin = 50;
  cv::Mat3b canvas(height, width, cv::Vec3b(255, 255, 255));
  const auto& ts = report.thresholds;
  if (ts.empty()) throw std::invalid_argument("write_mma_curve: no thresholds");
  const double t_min = ts.front(), t_max = ts.back();
  auto to_px = [&](double t, double v) {
    const double fx = t_max > t_min ? (t - t_min) / (t_max - t_min) : 0.5;
    return cv::Point(margin + static_cast<int>(fx * (width - 2 * margin)),
                     height - margin - static_cast<int>(v * (height - 2 * margin)));
  };
  cv::line(canvas, to_px(t_min, 0), to_px(t_max, 0), cv::Scalar(0, 0, 0));
  cv::line(canvas, to_px(t_min, 0), to_px(t_min, 1), cv::Scalar(0, 0, 0));
  for (int k = 0; k <= 10; ++k) {
    const double v = k / 10.0;
    cv::line(canvas, to_px(t_min, v), to_px(t_max, v), cv::Scalar(225, 225, 225));
    cv::putText(canvas, cv::format("%.1f", v), to_px(t_min, v) + cv::Point(-40, 4), cv::FONT_HERSHEY_SIMPLEX, 0.4,
                cv::Scalar(0, 0, 0));
  }
  for (double t : ts) {
    cv::putText(canvas, cv::format("%g", t), to_px(t, 0) + cv::Point(-4, 18), cv::FONT_HERSHEY_SIMPLEX, 0.4,
                cv::Scalar(0, 0, 0));
  }
  cv::putText(canvas, "MMA vs threshold (px)", cv::Point(margin, 30), cv::FONT_HERSHEY_SIMPLEX, 0.6,
              cv::Scalar(0, 0, 0));
  const std::vector<cv::Scalar> palette = {cv::Scalar(200, 60, 20), cv::Scalar(30, 30, 220), cv::Scalar(30, 160, 30),
                                           cv::Scalar(160, 30, 160)};
  int idx = 0;
  for (const auto& [name, s] : report.groups) {
    const auto colour = palette[static_cast<size_t>(idx) % palette.size()];
    std::vector<cv::Point> pts;
    for (std::size_t i = 0; i < ts.size(); ++i) pts.push_back(to_px(ts[i], s.mma[i]));
    cv::polylines(canvas, pts, false, colour, 2, cv::LINE_AA);
    for (const auto& p : pts) cv::circle(canvas, p, 3, colour, cv::FILLED, cv::LINE_AA);
    cv::putText(canvas, name, cv::Point(width - margin - 120, margin + 20 * (idx + 1)), cv::FONT_HERSHEY_SIMPLEX,
                0.5, colour, 1, cv::LINE_AA);
    ++idx;
  }
  if (!cv::imwrite(path.string(), canvas)) throw std::runtime_error("cannot write plot " + path.string());
}

}  // namespace mtldesc
