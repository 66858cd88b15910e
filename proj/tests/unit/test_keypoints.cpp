#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "mtldesc/keypoints.hpp"

namespace mtldesc {
namespace {

// Brute force: candidates ranked by (score desc, row-major index asc); a candidate survives
// when no earlier survivor lies within the Chebyshev window.
std::vector<ScoredPixel> oracle_keypoints(const cv::Mat1f& k, double alpha, int radius, std::size_t limit) {
  std::vector<std::pair<float, int>> ranked;
  for (int i = 0; i < static_cast<int>(k.total()); ++i) {
    const float v = k(i / k.cols, i % k.cols);
    if (v >= alpha) ranked.emplace_back(v, i);
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  std::vector<ScoredPixel> kept;
  for (const auto& [v, i] : ranked) {
    if (kept.size() == limit) break;
    const int x = i % k.cols, y = i / k.cols;
    bool ok = true;
    for (const auto& q : kept) ok = ok && std::max(std::abs(q.x - x), std::abs(q.y - y)) > radius;
    if (ok) kept.push_back({x, y, v});
  }
  return kept;
}

KeypointSet make_set(const std::vector<std::vector<float>>& rows, const std::vector<float>& weights) {
  KeypointSet s;
  s.descriptors.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.at(0).size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      s.descriptors(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    s.coords.emplace_back(static_cast<double>(i), 0.0);
    s.scores.push_back(1.0f);
  }
  s.weights = weights;
  return s;
}

KeypointSet random_set(std::mt19937& rng, int n, int dim) {
  std::normal_distribution<float> g(0.0f, 1.0f);
  std::uniform_real_distribution<float> w(0.2f, 3.0f);
  KeypointSet s;
  s.descriptors.resize(n, dim);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < dim; ++j) s.descriptors(i, j) = g(rng);
    s.descriptors.row(i).normalize();
    s.coords.emplace_back(i, i);
    s.scores.push_back(1.0f);
    s.weights.push_back(w(rng));
  }
  return s;
}

TEST(ExtractKeypoints, SinglePeak) {
  cv::Mat1f k(32, 32, 0.0f);
  k(7, 9) = 0.95f;
  const auto kp = extract_keypoints(k, 0.9, 4, 2000);
  ASSERT_EQ(kp.size(), 1u);
  EXPECT_EQ(kp[0].x, 9);
  EXPECT_EQ(kp[0].y, 7);
}

TEST(ExtractKeypoints, WeakerNeighbourSuppressed) {
  cv::Mat1f k(32, 32, 0.0f);
  k(10, 10) = 0.95f;
  k(10, 12) = 0.92f;
  const auto kp = extract_keypoints(k, 0.9, 4, 2000);
  ASSERT_EQ(kp.size(), 1u);
  EXPECT_EQ(kp[0].x, 10);
  EXPECT_EQ(kp[0].y, 10);
}

TEST(ExtractKeypoints, ThresholdBoundary) {
  cv::Mat1f k(16, 16, 0.0f);
  k(3, 3) = 0.89f;
  EXPECT_TRUE(extract_keypoints(k, 0.9, 4, 2000).empty());
  k(3, 3) = 0.9f;
  EXPECT_EQ(extract_keypoints(k, static_cast<double>(0.9f), 4, 2000).size(), 1u);
  k(3, 3) = std::nextafter(0.9f, 0.0f);
  EXPECT_TRUE(extract_keypoints(k, static_cast<double>(0.9f), 4, 2000).empty());
}

TEST(ExtractKeypoints, EqualScoresResolveByRowMajorIndex) {
  cv::Mat1f k(16, 16, 0.0f);
  k(5, 7) = 0.95f;
  k(5, 5) = 0.95f;
  k(3, 9) = 0.95f;
  const auto kp = extract_keypoints(k, 0.9, 4, 2000);
  ASSERT_EQ(kp.size(), 1u);
  EXPECT_EQ(kp[0].x, 9);
  EXPECT_EQ(kp[0].y, 3);
}

TEST(ExtractKeypoints, LimitAndBlankMap) {
  cv::Mat1f k(64, 64, 1.0f);
  EXPECT_EQ(extract_keypoints(k, 0.9, 4, 3).size(), 3u);
  EXPECT_TRUE(extract_keypoints(cv::Mat1f(64, 64, 0.0f), 0.9, 4, 2000).empty());
  EXPECT_TRUE(extract_keypoints(k, 0.9, 4, 0).empty());
}

TEST(ExtractKeypoints, MatchesGreedyBruteForce) {
  std::mt19937 rng(2024);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  std::uniform_int_distribution<int> radius(0, 6);
  std::uniform_int_distribution<int> limit(1, 200);
  const float boundary[] = {0.9f, std::nextafter(0.9f, 0.0f), std::nextafter(0.9f, 1.0f), 1.0f, 0.95f};
  const double alpha = static_cast<double>(0.9f);
  for (int trial = 0; trial < 1000; ++trial) {
    cv::Mat1f k(64, 64);
    for (int i = 0; i < 64 * 64; ++i) {
      const float r = u(rng);
      // Mix continuous scores, boundary values and exact ties.
      k(i / 64, i % 64) = r < 0.6f ? u(rng) : r < 0.85f ? boundary[rng() % 5] : 0.875f + 0.125f * (rng() % 3) / 2.0f;
    }
    const int rad = radius(rng);
    const auto lim = static_cast<std::size_t>(trial % 3 == 0 ? 4096 : limit(rng));
    const auto got = extract_keypoints(k, alpha, rad, static_cast<int64_t>(lim));
    const auto want = oracle_keypoints(k, alpha, rad, lim);
    ASSERT_EQ(got.size(), want.size()) << "trial " << trial;
    for (std::size_t i = 0; i < got.size(); ++i) {
      ASSERT_EQ(got[i].x, want[i].x) << "trial " << trial;
      ASSERT_EQ(got[i].y, want[i].y) << "trial " << trial;
      ASSERT_EQ(got[i].score, want[i].score);
    }
  }
}

TEST(KeypointSet, ValidateRejectsBadSets) {
  auto s = make_set({{1, 0}, {0, 1}}, {1.0f, 2.0f});
  EXPECT_NO_THROW(s.validate());
  s.weights[1] = 0.0f;
  EXPECT_THROW(s.validate(), std::invalid_argument);
  s.weights[1] = 1.0f;
  s.descriptors(0, 0) = 0.5f;
  EXPECT_THROW(s.validate(), std::invalid_argument);
  s.descriptors(0, 0) = 1.0f;
  s.scores.pop_back();
  EXPECT_THROW(s.validate(), std::invalid_argument);
}

TEST(Match, IdenticalSetsMatchIdentically) {
  std::mt19937 rng(1);
  const auto s = random_set(rng, 30, 16);
  for (auto mode : {MatchMode::Plain, MatchMode::AttentionWeighted}) {
    const auto m = match(s, s, mode);
    ASSERT_EQ(m.pairs.size(), 30u);
    for (std::size_t i = 0; i < 30; ++i) {
      EXPECT_EQ(m.pairs[i].index_a, static_cast<int>(i));
      EXPECT_EQ(m.pairs[i].index_b, static_cast<int>(i));
      EXPECT_EQ(m.pairs[i].distance, 0.0f);
    }
  }
}

TEST(Match, EmptySideGivesNoMatches) {
  std::mt19937 rng(1);
  const auto s = random_set(rng, 5, 8);
  KeypointSet empty;
  empty.descriptors.resize(0, 8);
  EXPECT_TRUE(match(s, empty, MatchMode::Plain).pairs.empty());
  EXPECT_TRUE(match(empty, s, MatchMode::AttentionWeighted).pairs.empty());
}

TEST(Match, AgreesWithBruteForceMutualNearestNeighbour) {
  std::mt19937 rng(31);
  std::uniform_int_distribution<int> size(1, 12);
  for (int trial = 0; trial < 500; ++trial) {
    const int na = trial < 100 ? 3 : size(rng);
    const int nb = trial < 100 ? 3 : size(rng);
    const auto a = random_set(rng, na, 4);
    const auto b = random_set(rng, nb, 4);
    for (auto mode : {MatchMode::Plain, MatchMode::AttentionWeighted}) {
      auto dist = [&](int i, int j) {
        double s = 0.0;
        const double wa = mode == MatchMode::Plain ? 1.0 : a.weights[static_cast<std::size_t>(i)];
        const double wb = mode == MatchMode::Plain ? 1.0 : b.weights[static_cast<std::size_t>(j)];
        for (int c = 0; c < 4; ++c) {
          const double d = wa * a.descriptors(i, c) - wb * b.descriptors(j, c);
          s += d * d;
        }
        return std::sqrt(s);
      };
      std::vector<std::pair<int, int>> want;
      for (int i = 0; i < na; ++i) {
        int bj = 0;
        for (int j = 1; j < nb; ++j)
          if (dist(i, j) < dist(i, bj)) bj = j;
        int bi = 0;
        for (int i2 = 1; i2 < na; ++i2)
          if (dist(i2, bj) < dist(bi, bj)) bi = i2;
        if (bi == i) want.emplace_back(i, bj);
      }
      const auto got = match(a, b, mode);
      ASSERT_EQ(got.pairs.size(), want.size());
      for (std::size_t k = 0; k < want.size(); ++k) {
        EXPECT_EQ(got.pairs[k].index_a, want[k].first);
        EXPECT_EQ(got.pairs[k].index_b, want[k].second);
        EXPECT_NEAR(got.pairs[k].distance, dist(want[k].first, want[k].second), 1e-5);
      }
    }
  }
}

TEST(Match, CollinearDescriptorsPairByNearestWeight) {
  const std::vector<std::vector<float>> same(4, std::vector<float>{1.0f, 0.0f, 0.0f});
  const auto a = make_set(same, {1.0f, 2.0f, 3.0f, 4.0f});
  const auto b = make_set(same, {4.1f, 0.9f, 2.2f, 3.05f});
  const auto weighted = match(a, b, MatchMode::AttentionWeighted);
  ASSERT_EQ(weighted.pairs.size(), 4u);
  const int expected[] = {1, 2, 3, 0};
  const float gap[] = {0.1f, 0.2f, 0.05f, 0.1f};
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(weighted.pairs[i].index_b, expected[i]);
    EXPECT_NEAR(weighted.pairs[i].distance, gap[i], 1e-5);
  }
  const auto plain = match(a, b, MatchMode::Plain);
  ASSERT_EQ(plain.pairs.size(), 1u);
  EXPECT_EQ(plain.pairs[0].index_a, 0);
  EXPECT_EQ(plain.pairs[0].index_b, 0);
}

TEST(Match, UnitWeightsMakeModesCoincide) {
  std::mt19937 rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    auto a = random_set(rng, 20, 8);
    auto b = random_set(rng, 25, 8);
    std::fill(a.weights.begin(), a.weights.end(), 1.0f);
    std::fill(b.weights.begin(), b.weights.end(), 1.0f);
    const auto p = match(a, b, MatchMode::Plain);
    const auto w = match(a, b, MatchMode::AttentionWeighted);
    ASSERT_EQ(p.pairs.size(), w.pairs.size());
    for (std::size_t k = 0; k < p.pairs.size(); ++k) {
      EXPECT_EQ(p.pairs[k].index_a, w.pairs[k].index_a);
      EXPECT_EQ(p.pairs[k].index_b, w.pairs[k].index_b);
      EXPECT_EQ(p.pairs[k].distance, w.pairs[k].distance);
    }
  }
}

}  // namespace
}  // namespace mtldesc
