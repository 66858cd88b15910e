#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <opencv2/core.hpp>

#include "mtldesc/homography.hpp"

namespace mtldesc {

enum class SequenceKind { Illumination, Viewpoint, Unknown };

std::string to_string(SequenceKind kind);
/// HPatches naming: "i_*" illumination, "v_*" viewpoint.
SequenceKind kind_from_name(const std::string& sequence_name);

struct SequencePair {
  std::string sequence;
  int target_index = 2;
  std::filesystem::path ref_image;
  std::filesystem::path tgt_image;
  /// Maps the reference image (1) to the target image.
  Homography gt_homography;
  SequenceKind kind = SequenceKind::Unknown;

  std::string name() const { return sequence + "/1-" + std::to_string(target_index); }
};

struct SequenceDataset {
  std::vector<SequencePair> pairs;
  /// Sequences or pairs left out, with the reason.
  std::vector<std::string> skipped;
};

/// Parses a plain-text H file: exactly 9 whitespace-separated reals, row-major.
Homography read_homography_file(const std::filesystem::path& path);
void write_homography_file(const std::filesystem::path& path, const Homography& h);

/// Scans `root` for sequence directories holding images 1..6 (any of .ppm/.png/.jpg/.pgm)
/// and H_1_k files. When `sequence_list` is given only the listed sequences (one name per
/// line, '#' comments allowed) are loaded. Malformed or missing H files skip that pair.
SequenceDataset load_sequences(const std::filesystem::path& root,
                               const std::optional<std::filesystem::path>& sequence_list = std::nullopt);

/// Grayscale in [0, 1], cropped at the top-left to dimensions divisible by 8
/// (a top-left crop leaves the ground-truth homography unchanged).
cv::Mat1f load_eval_image(const std::filesystem::path& path);

/// Writes "<dir>/1.png .. n.png" and "H_1_k" files.
void write_sequence(const std::filesystem::path& dir, const std::vector<cv::Mat1f>& images,
                    const std::vector<Homography>& homographies_from_first);

}  // namespace mtldesc
