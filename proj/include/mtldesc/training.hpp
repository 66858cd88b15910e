#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <opencv2/core.hpp>
#include <torch/torch.h>

#include "mtldesc/checkpoint.hpp"
#include "mtldesc/config.hpp"
#include "mtldesc/homography.hpp"
#include "mtldesc/model.hpp"
#include "mtldesc/sampler.hpp"
#include "mtldesc/synth.hpp"

namespace mtldesc {

/// Stand-in teacher probability map: Gaussian-spread labels combined with a normalized
/// Harris response at half weight, clipped to [0, 1].
cv::Mat1f teacher_heatmap(const cv::Mat1f& image, const cv::Mat1b& labels);

/// Labels for images without analytic corners: teacher peaks >= 0.5 after NMS radius 4.
cv::Mat1b labels_from_teacher(const cv::Mat1f& teacher);

/// A generated pair before it is written to disk.
struct GeneratedPair {
  TrainingPair pair;
  cv::Mat1b labels_a;
  cv::Mat1b labels_b;
  uint64_t seed = 0;
};

/// Produces training pairs either from a directory of images (data.corpus) or, when the
/// corpus is empty, from synthetic shape scenes with analytic corner labels.
class PairGenerator {
 public:
  explicit PairGenerator(const DataConfig& config);
  /// Deterministic in (config, index).
  GeneratedPair generate(int64_t index) const;
  bool synthetic() const { return corpus_.empty(); }

 private:
  DataConfig config_;
  std::vector<std::filesystem::path> corpus_;
};

struct DatasetSummary {
  int64_t pairs = 0;
  double mean_coverage = 0.0;
};

/// Training layout: images/, labels/, teacher/ (heatmap files), manifest.jsonl and summary.json.
DatasetSummary write_training_set(const DataConfig& config, const std::filesystem::path& dir);

/// HPatches layout: one sequence directory per pair holding 1.png, 2.png and H_1_2.
DatasetSummary write_benchmark(const DataConfig& config, const std::filesystem::path& dir,
                               const std::string& prefix = "v_synth");

struct TrainingSample {
  TrainingPair pair;
  cv::Mat1b labels_a;
  cv::Mat1b labels_b;
  Correspondences correspondences;
};

struct TrainingSet {
  std::vector<TrainingSample> samples;
  /// Pairs dropped at load time, with the reason.
  std::vector<std::string> rejected;
};

/// Reads a training layout and runs the correspondence sampler on every pair.
TrainingSet load_training_set(const std::filesystem::path& dir, const SamplerConfig& sampler);

enum class TrainScope {
  Full,
  /// Only AGCA and the descriptor head are updated, with the description loss alone.
  DescriptionOnly
};

struct StepRecord {
  int64_t epoch = 0;
  int64_t step = 0;
  double learning_rate = 0.0;
  double l_det = 0.0;
  double l_des = 0.0;
  double l_total = 0.0;
};

struct BatchLosses {
  torch::Tensor l_det;
  torch::Tensor l_des;
  torch::Tensor l_total;
};

/// Detector loss averaged over both images of every pair; description loss averaged over pairs.
BatchLosses compute_batch_losses(MtlDesc& model, const std::vector<const TrainingSample*>& batch,
                                 const LossConfig& loss, TrainScope scope);

/// lr * (1 - step / total_steps)^power.
double poly_learning_rate(double base, double power, int64_t step, int64_t total_steps);

/// Epoch order: a permutation of [0, n) determined by (seed, epoch).
std::vector<std::size_t> epoch_order(std::size_t n, uint64_t seed, int64_t epoch);

class NonFiniteLossError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainOptions {
  TrainScope scope = TrainScope::Full;
  /// Checkpoints (epoch_<k>.ckpt, last.ckpt) and train_log.csv go here when set.
  std::optional<std::filesystem::path> output_dir;
  /// Continue from a checkpoint written with optimizer state.
  std::optional<std::filesystem::path> resume;
  /// Stop after this many completed epochs (the schedule still spans config.optim.epochs).
  std::optional<int64_t> stop_after_epochs;
  std::function<void(const StepRecord&)> on_step;
};

struct TrainResult {
  std::vector<StepRecord> log;
  TrainingState state;
};

/// Adam with poly decay over epochs x ceil(samples / batch) steps. Throws NonFiniteLossError
/// after writing a diagnostic dump when a loss is not finite.
TrainResult train(MtlDesc& model, const TrainingSet& data, const RunConfig& config, const TrainOptions& options);

}  // namespace mtldesc
