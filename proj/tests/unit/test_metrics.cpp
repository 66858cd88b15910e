#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <random>

#include "json.hpp"
#include "mtldesc/metrics.hpp"

namespace mtldesc {
namespace {

KeypointSet points_only(const std::vector<cv::Point2d>& pts) {
  KeypointSet s;
  s.coords = pts;
  s.scores.assign(pts.size(), 1.0f);
  s.weights.assign(pts.size(), 1.0f);
  s.descriptors = DescriptorMatrix::Zero(static_cast<Eigen::Index>(pts.size()), 2);
  s.descriptors.col(0).setOnes();
  return s;
}

std::vector<cv::Point2d> random_points(std::mt19937& rng, int n, double w, double h) {
  std::uniform_real_distribution<double> x(0.0, w - 1), y(0.0, h - 1);
  std::vector<cv::Point2d> pts;
  for (int i = 0; i < n; ++i) pts.emplace_back(x(rng), y(rng));
  return pts;
}

MatchSet diagonal(std::size_t n) {
  MatchSet m;
  for (std::size_t i = 0; i < n; ++i) m.pairs.push_back({static_cast<int>(i), static_cast<int>(i), 0.0f});
  return m;
}

TEST(Mma, IdentityPairScoresOne) {
  std::mt19937 rng(1);
  const auto a = points_only(random_points(rng, 50, 100, 100));
  const auto v = mma(a, a, diagonal(50), Homography::identity(), default_thresholds());
  for (double x : v) EXPECT_EQ(x, 1.0);
}

TEST(Mma, TwoPixelDisplacementStraddlesThresholds) {
  std::mt19937 rng(2);
  const auto pa = random_points(rng, 20, 100, 100);
  auto pb = pa;
  for (auto& p : pb) p.x += 2.0;
  const auto v = mma(points_only(pa), points_only(pb), diagonal(20), Homography::identity(), default_thresholds());
  EXPECT_EQ(v[0], 0.0);
  EXPECT_EQ(v[1], 1.0);
  EXPECT_EQ(v[2], 1.0);
}

TEST(Mma, NoMatchesScoresZero) {
  const auto a = points_only({{1, 1}});
  for (double x : mma(a, a, MatchSet{}, Homography::identity(), default_thresholds())) EXPECT_EQ(x, 0.0);
}

TEST(Mma, MonotoneAndPermutationInvariant) {
  std::mt19937 rng(3);
  std::normal_distribution<double> err(0.0, 4.0);
  for (int trial = 0; trial < 200; ++trial) {
    const auto pa = random_points(rng, 30, 200, 200);
    auto pb = pa;
    for (auto& p : pb) p += cv::Point2d(err(rng), err(rng));
    const auto a = points_only(pa), b = points_only(pb);
    auto m = diagonal(30);
    const auto v = mma(a, b, m, Homography::identity(), default_thresholds());
    EXPECT_TRUE(std::is_sorted(v.begin(), v.end()));
    std::shuffle(m.pairs.begin(), m.pairs.end(), rng);
    EXPECT_EQ(mma(a, b, m, Homography::identity(), default_thresholds()), v);
    const auto ms1 = matching_score(a, b, diagonal(30), Homography::identity(), {200, 200}, {200, 200});
    const auto ms2 = matching_score(a, b, m, Homography::identity(), {200, 200}, {200, 200});
    EXPECT_EQ(ms1, ms2);
  }
}

TEST(MatchingScore, IdentityIsOneAndNoMatchesIsZero) {
  std::mt19937 rng(4);
  const auto a = points_only(random_points(rng, 40, 64, 64));
  EXPECT_EQ(matching_score(a, a, diagonal(40), Homography::identity(), {64, 64}, {64, 64}), 1.0);
  EXPECT_EQ(matching_score(a, a, MatchSet{}, Homography::identity(), {64, 64}, {64, 64}), 0.0);
}

TEST(MatchingScore, DenominatorCountsSharedViewOnly) {
  // Shift by half the width: the left half of a maps into b, the right half falls outside.
  const auto h = Homography::translation(50, 0);
  std::vector<cv::Point2d> pa, pb;
  for (int i = 0; i < 10; ++i) {
    pa.emplace_back(5.0 + 4.0 * i, 10.0 + i);
    pb.push_back(*h.apply(pa.back()));
  }
  for (int i = 0; i < 10; ++i) pa.emplace_back(60.0 + 3.0 * i, 20.0 + i);
  for (int i = 0; i < 10; ++i) pb.emplace_back(2.0 + 4.0 * i, 60.0 + i);
  const auto ms = matching_score(points_only(pa), points_only(pb), diagonal(10), h, {100, 100}, {100, 100});
  ASSERT_TRUE(ms);
  EXPECT_DOUBLE_EQ(*ms, 1.0);
}

TEST(MatchingScore, EmptySharedViewIsSkipped) {
  const auto a = points_only({{10, 10}});
  EXPECT_FALSE(matching_score(a, a, diagonal(1), Homography::translation(500, 0), {64, 64}, {64, 64}));
}

TEST(Summaries, AverageOverPairsAndGroupByKind) {
  PairEvaluation p1{.name = "v_a/1-2", .kind = "viewpoint", .mma = std::vector<double>(10, 1.0),
                    .matching_score = 0.5, .ha = std::vector<bool>(10, true), .keypoints_a = 4,
                    .keypoints_b = 6, .matches = 3, .correct = 3};
  PairEvaluation p2{.name = "i_b/1-2", .kind = "illumination", .mma = std::vector<double>(10, 0.0),
                    .matching_score = std::nullopt, .ha = std::vector<bool>(10, false)};
  const auto report = build_report({p1, p2}, default_thresholds(), {"x: skipped"});
  EXPECT_DOUBLE_EQ(report.overall().mma_at(3), 0.5);
  EXPECT_DOUBLE_EQ(report.overall().ha_at(1), 0.5);
  EXPECT_DOUBLE_EQ(report.overall().matching_score, 0.5);
  EXPECT_EQ(report.overall().ms_pairs, 1u);
  EXPECT_EQ(report.overall().keypoints, 10u);
  EXPECT_DOUBLE_EQ(report.groups.at("viewpoint").mma_at(3), 1.0);
  EXPECT_DOUBLE_EQ(report.groups.at("illumination").mma_at(3), 0.0);
  EXPECT_THROW(report.overall().mma_at(2.5), std::out_of_range);

  const auto j = nlohmann::json::parse(report_to_json(report));
  EXPECT_DOUBLE_EQ(j["groups"]["overall"]["mma"]["3"].get<double>(), 0.5);
  EXPECT_TRUE(j["pairs"][1]["matching_score"].is_null());
  EXPECT_EQ(j["skipped"][0], "x: skipped");
  const auto table = report_to_table(report);
  EXPECT_NE(table.find("overall"), std::string::npos);
  EXPECT_NE(table.find("MMA@3"), std::string::npos);
  EXPECT_NE(table.find("x: skipped"), std::string::npos);

  const auto plot = std::filesystem::temp_directory_path() / "mtldesc_mma_curve.png";
  write_mma_curve(report, plot);
  EXPECT_GT(std::filesystem::file_size(plot), 0u);
  std::filesystem::remove(plot);
}

TEST(Summaries, OrderIndependent) {
  std::mt19937 rng(6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<PairEvaluation> pairs;
  for (int i = 0; i < 20; ++i) {
    PairEvaluation p;
    p.kind = i % 2 ? "viewpoint" : "illumination";
    for (int t = 0; t < 10; ++t) {
      p.mma.push_back(static_cast<double>(rng() % 9) / 8.0);
      p.ha.push_back(u(rng) > 0.5);
    }
    p.matching_score = static_cast<double>(rng() % 5) / 4.0;
    pairs.push_back(p);
  }
  const auto a = summarize(pairs, default_thresholds());
  std::shuffle(pairs.begin(), pairs.end(), rng);
  const auto b = summarize(pairs, default_thresholds());
  EXPECT_EQ(a.mma, b.mma);
  EXPECT_EQ(a.ha, b.ha);
  EXPECT_EQ(a.matching_score, b.matching_score);
}

}  // namespace
}  // namespace mtldesc
