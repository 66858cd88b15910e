#include "mtldesc/pipeline.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

#include "mtldesc/field_sampling.hpp"
#include "mtldesc/homography_estimation.hpp"

namespace mtldesc {
namespace {

class EvalModeGuard {
 public:
  explicit EvalModeGuard(MtlDesc& model) : model_(model), was_training_(model->is_training()) { model_->eval(); }
  ~EvalModeGuard() { model_->train(was_training_); }
  EvalModeGuard(const EvalModeGuard&) = delete;
  EvalModeGuard& operator=(const EvalModeGuard&) = delete;

 private:
  MtlDesc& model_;
  bool was_training_;
};

}  // namespace

torch::Tensor image_to_tensor(const cv::Mat1f& image) {
  const cv::Mat1f c = image.isContinuous() ? image : image.clone();
  return torch::from_blob(const_cast<float*>(c.ptr<float>()), {1, 1, c.rows, c.cols}, torch::kFloat32).clone();
}

cv::Mat1f tensor_to_mat(const torch::Tensor& t) {
  auto s = t.detach().to(torch::kCPU, torch::kFloat32).contiguous();
  while (s.dim() > 2 && s.size(0) == 1) s = s.squeeze(0);
  if (s.dim() != 2) throw std::invalid_argument("tensor_to_mat expects a single h x w map");
  cv::Mat1f out(static_cast<int>(s.size(0)), static_cast<int>(s.size(1)));
  std::copy_n(s.data_ptr<float>(), s.numel(), out.ptr<float>());
  return out;
}

DenseFeatures compute_dense(MtlDesc& model, const cv::Mat1f& image) {
  EvalModeGuard guard(model);
  torch::NoGradGuard no_grad;
  const auto out = model->forward(image_to_tensor(image));
  DenseFeatures dense;
  dense.size = image.size();
  dense.heatmap = tensor_to_mat(out.detection.heatmap);
  dense.descriptors = out.description.descriptors[0];
  dense.attention = out.description.attention[0];
  return dense;
}

KeypointSet extract_features(const DenseFeatures& dense, const InferenceConfig& config) {
  const auto peaks = extract_keypoints(dense.heatmap, config.alpha, static_cast<int>(config.nms_radius),
                                       config.max_keypoints);
  KeypointSet set;
  set.coords.reserve(peaks.size());
  for (const auto& p : peaks) {
    set.coords.emplace_back(p.x, p.y);
    set.scores.push_back(p.score);
  }
  auto [desc, weights] = sample_at_keypoints(dense.descriptors, dense.attention, set.coords, dense.size);
  set.descriptors = std::move(desc);
  set.weights = std::move(weights);
  return set;
}

KeypointSet extract_features(MtlDesc& model, const cv::Mat1f& image, const InferenceConfig& config) {
  return extract_features(compute_dense(model, image), config);
}

KeypointSet with_unit_weights(KeypointSet set) {
  std::fill(set.weights.begin(), set.weights.end(), 1.0f);
  return set;
}

PairEvaluation evaluate_pair(const KeypointSet& a, const KeypointSet& b, const Homography& gt, cv::Size size_a,
                             cv::Size size_b, MatchMode mode, const EvalConfig& config,
                             const std::vector<double>& thresholds) {
  PairEvaluation ev;
  const auto matches = match(a, b, mode);
  ev.keypoints_a = a.size();
  ev.keypoints_b = b.size();
  ev.matches = matches.pairs.size();
  ev.mma = mma(a, b, matches, gt, thresholds);
  ev.matching_score = matching_score(a, b, matches, gt, size_a, size_b, config.ms_threshold);
  for (const double e : match_errors(a, b, matches, gt)) {
    if (e <= config.ms_threshold) ++ev.correct;
  }

  std::vector<cv::Point2d> src;
  std::vector<cv::Point2d> dst;
  for (const auto& m : matches.pairs) {
    src.push_back(a.coords[static_cast<std::size_t>(m.index_a)]);
    dst.push_back(b.coords[static_cast<std::size_t>(m.index_b)]);
  }
  RansacOptions ransac;
  ransac.inlier_threshold = config.ransac_threshold;
  ransac.max_iterations = config.ransac_iterations;
  ransac.seed = config.ransac_seed;
  const auto estimate = estimate_homography(src, dst, ransac);
  ev.ha = homography_accuracy(estimate.homography, gt, size_a, thresholds);
  return ev;
}

MetricReport evaluate_sequences(const SequenceDataset& dataset, const FeatureSource& features, MatchMode mode,
                                const EvalConfig& config, const std::vector<double>& thresholds) {
  std::vector<PairEvaluation> results;
  std::vector<std::string> skipped = dataset.skipped;
  std::map<std::filesystem::path, std::pair<cv::Size, KeypointSet>> cache;
  auto load = [&](const std::filesystem::path& path) -> const std::pair<cv::Size, KeypointSet>& {
    auto it = cache.find(path);
    if (it == cache.end()) {
      const auto image = load_eval_image(path);
      it = cache.emplace(path, std::make_pair(image.size(), features(path, image))).first;
    }
    return it->second;
  };
  for (const auto& pair : dataset.pairs) {
    try {
      const auto& [size_a, a] = load(pair.ref_image);
      const auto& [size_b, b] = load(pair.tgt_image);
      auto ev = evaluate_pair(a, b, pair.gt_homography, size_a, size_b, mode, config, thresholds);
      ev.name = pair.name();
      ev.kind = to_string(pair.kind);
      if (!ev.matching_score) skipped.push_back(pair.name() + ": empty shared view, excluded from M.S.");
      results.push_back(std::move(ev));
    } catch (const std::exception& e) {
      skipped.push_back(pair.name() + ": " + e.what());
    }
    // Reference features are shared within a sequence; target images are not reused.
    cache.erase(pair.tgt_image);
  }
  return build_report(std::move(results), thresholds, std::move(skipped));
}

MetricReport evaluate_model(MtlDesc& model, const SequenceDataset& dataset, const InferenceConfig& inference,
                            const EvalConfig& config) {
  return evaluate_sequences(
      dataset, [&](const std::filesystem::path&, const cv::Mat1f& image) {
        return extract_features(model, image, inference);
      },
      inference.match_mode, config);
}

double attention_consistency(MtlDesc& model, const std::vector<TrainingPair>& pairs, int stride) {
  if (stride < 1) throw std::invalid_argument("stride must be positive");
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& pair : pairs) {
    const auto da = compute_dense(model, pair.image_a);
    const auto db = compute_dense(model, pair.image_b);
    std::vector<double> pa;
    std::vector<double> pb;
    for (int y = 0; y < pair.image_a.rows; y += stride) {
      for (int x = 0; x < pair.image_a.cols; x += stride) {
        if (pair.valid_mask(y, x) == 0) continue;
        const auto q = pair.homography.apply({static_cast<double>(x), static_cast<double>(y)});
        if (!q || q->x < 0 || q->y < 0 || q->x > pair.image_b.cols - 1 || q->y > pair.image_b.rows - 1) continue;
        pa.insert(pa.end(), {static_cast<double>(x), static_cast<double>(y)});
        pb.insert(pb.end(), {q->x, q->y});
      }
    }
    if (pa.empty()) continue;
    const auto n = static_cast<int64_t>(pa.size() / 2);
    const auto ta = torch::from_blob(pa.data(), {n, 2}, torch::kFloat64).clone();
    const auto tb = torch::from_blob(pb.data(), {n, 2}, torch::kFloat64).clone();
    torch::NoGradGuard no_grad;
    const auto wa = sample_field(da.attention, ta, da.size);
    const auto wb = sample_field(db.attention, tb, db.size);
    total += (wa - wb).abs().sum().item<double>();
    count += static_cast<std::size_t>(n);
  }
  if (count == 0) throw std::invalid_argument("no valid correspondences to measure attention consistency");
  return total / static_cast<double>(count);
}

}  // namespace mtldesc
