#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <opencv2/core/types.hpp>

#include "mtldesc/homography.hpp"
#include "mtldesc/keypoints.hpp"

namespace mtldesc {

/// Pixel thresholds 1..10 used for MMA and HA curves.
std::vector<double> default_thresholds();

/// ||gt(p_a) - p_b|| for every match; +inf when the warp is undefined.
std::vector<double> match_errors(const KeypointSet& a, const KeypointSet& b, const MatchSet& matches,
                                 const Homography& gt);

/// Per-threshold fraction of matches within t pixels. A pair without matches scores 0.
std::vector<double> mma(const KeypointSet& a, const KeypointSet& b, const MatchSet& matches, const Homography& gt,
                        const std::vector<double>& thresholds);

/// Correct matches over keypoints inside the co-visible region, averaged over both directions.
/// A match counts for a direction only if it is correct at `threshold` and its keypoint on that
/// side lies in the shared view. nullopt when either side has no keypoint in the shared view.
std::optional<double> matching_score(const KeypointSet& a, const KeypointSet& b, const MatchSet& matches,
                                     const Homography& gt, cv::Size size_a, cv::Size size_b,
                                     double threshold = 3.0);

/// Mean distance between the four image corners warped by `estimate` and by `gt`.
double corner_error(const Homography& estimate, const Homography& gt, cv::Size size);

/// success@t iff the mean corner error is <= t; all false when estimation failed.
std::vector<bool> homography_accuracy(const std::optional<Homography>& estimate, const Homography& gt,
                                      cv::Size size, const std::vector<double>& thresholds);

struct PairEvaluation {
  std::string name;
  std::string kind;
  std::vector<double> mma;
  std::optional<double> matching_score;
  std::vector<bool> ha;
  std::size_t keypoints_a = 0;
  std::size_t keypoints_b = 0;
  std::size_t matches = 0;
  std::size_t correct = 0;
};

struct MetricSummary {
  std::vector<double> thresholds;
  std::vector<double> mma;
  double matching_score = 0.0;
  std::vector<double> ha;
  std::size_t pairs = 0;
  std::size_t ms_pairs = 0;
  std::size_t keypoints = 0;
  std::size_t matches = 0;
  std::size_t correct = 0;

  double mma_at(double t) const;
  double ha_at(double t) const;
};

MetricSummary summarize(const std::vector<PairEvaluation>& pairs, const std::vector<double>& thresholds);

struct MetricReport {
  std::vector<double> thresholds;
  /// "overall" plus one entry per sequence kind present.
  std::map<std::string, MetricSummary> groups;
  std::vector<PairEvaluation> pairs;
  /// Sequences or pairs that could not be evaluated, with the reason.
  std::vector<std::string> skipped;

  const MetricSummary& overall() const { return groups.at("overall"); }
};

MetricReport build_report(std::vector<PairEvaluation> pairs, const std::vector<double>& thresholds,
                          std::vector<std::string> skipped = {});

std::string report_to_json(const MetricReport& report);
std::string report_to_table(const MetricReport& report);
/// MMA-versus-threshold curve, one polyline per group, as an image file.
void write_mma_curve(const MetricReport& report, const std::filesystem::path& path);

}  // namespace mtldesc
