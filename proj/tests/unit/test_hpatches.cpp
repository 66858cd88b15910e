#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "mtldesc/hpatches.hpp"

namespace mtldesc {
namespace {

namespace fs = std::filesystem;

class Hpatches : public ::testing::Test {
 protected:
  void SetUp() override {
    root_ = fs::temp_directory_path() /
            ("mtldesc_hpatches_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(root_);
    fs::create_directories(root_);
  }
  void TearDown() override { fs::remove_all(root_); }

  void make_sequence(const std::string& name, int images) {
    std::vector<cv::Mat1f> imgs;
    std::vector<Homography> hs;
    for (int i = 0; i < images; ++i) {
      imgs.emplace_back(cv::Mat1f(43, 50, 0.1f * static_cast<float>(i)));
      if (i > 0) hs.push_back(Homography::translation(i, -i));
    }
    write_sequence(root_ / name, imgs, hs);
  }

  fs::path root_;
};

TEST(SequenceKind, FromName) {
  EXPECT_EQ(kind_from_name("v_wall"), SequenceKind::Viewpoint);
  EXPECT_EQ(kind_from_name("i_ajuntament"), SequenceKind::Illumination);
  EXPECT_EQ(kind_from_name("other"), SequenceKind::Unknown);
  EXPECT_EQ(to_string(SequenceKind::Viewpoint), "viewpoint");
}

TEST_F(Hpatches, HomographyFileRoundTripAndParsing) {
  const std::array<double, 9> v{0.9, 0.01, 12.5, -0.02, 1.1, -3.25, 1e-5, -2e-5, 1.0};
  const auto h = Homography::from_row_major(v);
  write_homography_file(root_ / "H", h);
  EXPECT_EQ(read_homography_file(root_ / "H").row_major(), h.row_major());

  std::ofstream(root_ / "H_ws") << "  1 0 5\n\t0 1   6\n0 0 1  \n";
  EXPECT_EQ(read_homography_file(root_ / "H_ws")(0, 2), 5.0);
  std::ofstream(root_ / "H_8") << "1 0 0 0 1 0 0 0\n";
  EXPECT_THROW(read_homography_file(root_ / "H_8"), std::runtime_error);
  std::ofstream(root_ / "H_10") << "1 0 0 0 1 0 0 0 1 1\n";
  EXPECT_THROW(read_homography_file(root_ / "H_10"), std::runtime_error);
  std::ofstream(root_ / "H_nan") << "1 0 0 0 1 0 0 0 abc\n";
  EXPECT_THROW(read_homography_file(root_ / "H_nan"), std::runtime_error);
  std::ofstream(root_ / "H_sing") << "0 0 0 0 0 0 0 0 1\n";
  EXPECT_THROW(read_homography_file(root_ / "H_sing"), std::runtime_error);
}

TEST_F(Hpatches, LoadsSequencesAndSkipsMalformedPairs) {
  make_sequence("v_one", 6);
  make_sequence("i_two", 3);
  std::ofstream(root_ / "i_two" / "H_1_3") << "garbage\n";
  const auto ds = load_sequences(root_);
  ASSERT_EQ(ds.pairs.size(), 6u);
  EXPECT_EQ(ds.pairs[0].sequence, "i_two");
  EXPECT_EQ(ds.pairs[0].kind, SequenceKind::Illumination);
  EXPECT_EQ(ds.pairs[1].name(), "v_one/1-2");
  EXPECT_EQ(ds.pairs[5].gt_homography(0, 2), 5.0);
  ASSERT_EQ(ds.skipped.size(), 1u);
  EXPECT_NE(ds.skipped[0].find("i_two/1-3"), std::string::npos);
}

TEST_F(Hpatches, SequenceListSelectsAndReportsMissing) {
  make_sequence("v_one", 3);
  make_sequence("v_two", 3);
  std::ofstream(root_ / "list.txt") << "# subset\nv_two\n\nv_missing\n";
  const auto ds = load_sequences(root_, root_ / "list.txt");
  ASSERT_EQ(ds.pairs.size(), 2u);
  EXPECT_EQ(ds.pairs[0].sequence, "v_two");
  ASSERT_EQ(ds.skipped.size(), 1u);
  EXPECT_NE(ds.skipped[0].find("v_missing"), std::string::npos);
  EXPECT_THROW(load_sequences(root_ / "nope"), std::runtime_error);
}

TEST_F(Hpatches, EvalImagesAreCroppedToMultiplesOfEight) {
  make_sequence("v_one", 2);
  const auto img = load_eval_image(root_ / "v_one" / "2.png");
  EXPECT_EQ(img.cols, 48);
  EXPECT_EQ(img.rows, 40);
  EXPECT_NEAR(img(0, 0), 0.1f, 1.0f / 255.0f);
  EXPECT_THROW(load_eval_image(root_ / "v_one" / "9.png"), std::runtime_error);
}

}  // namespace
}  // namespace mtldesc
