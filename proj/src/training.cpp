#include "mtldesc/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "json.hpp"
#include "mtldesc/field_sampling.hpp"
#include "mtldesc/heatmap_io.hpp"
#include "mtldesc/hpatches.hpp"
#include "mtldesc/losses.hpp"
#include "mtldesc/nms.hpp"
#include "mtldesc/pipeline.hpp"

namespace mtldesc {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

uint64_t mix_seed(uint64_t seed, uint64_t index) {
  uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

bool is_image_file(const fs::path& p) {
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".ppm" || ext == ".pgm" || ext == ".bmp";
}

cv::Mat1f read_gray(const fs::path& path) {
  const cv::Mat raw = cv::imread(path.string(), cv::IMREAD_GRAYSCALE);
  if (raw.empty()) throw std::runtime_error("cannot read image " + path.string());
  cv::Mat1f out;
  raw.convertTo(out, CV_32F, 1.0 / 255.0);
  return out;
}

void write_gray(const fs::path& path, const cv::Mat1f& image) {
  cv::Mat u8;
  image.convertTo(u8, CV_8U, 255.0);
  if (!cv::imwrite(path.string(), u8)) throw std::runtime_error("cannot write " + path.string());
}

void write_labels(const fs::path& path, const cv::Mat1b& labels) {
  cv::Mat1b u8 = labels * 255;
  if (!cv::imwrite(path.string(), u8)) throw std::runtime_error("cannot write " + path.string());
}

cv::Mat1b read_labels(const fs::path& path) {
  const cv::Mat raw = cv::imread(path.string(), cv::IMREAD_GRAYSCALE);
  if (raw.empty()) throw std::runtime_error("cannot read labels " + path.string());
  cv::Mat1b out = raw > 0;
  return out / 255;
}

PairOptions pair_options(const DataConfig& config) {
  PairOptions o;
  o.crop = static_cast<int>(config.crop);
  o.homography = config.homography;
  o.photometric = config.photometric;
  return o;
}

torch::Tensor points_tensor(const std::vector<cv::Point>& pts) {
  auto t = torch::empty({static_cast<int64_t>(pts.size()), 2}, torch::kFloat32);
  auto a = t.accessor<float, 2>();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    a[static_cast<int64_t>(i)][0] = static_cast<float>(pts[i].x);
    a[static_cast<int64_t>(i)][1] = static_cast<float>(pts[i].y);
  }
  return t;
}

torch::Tensor points_tensor(const std::vector<cv::Point2d>& pts) {
  auto t = torch::empty({static_cast<int64_t>(pts.size()), 2}, torch::kFloat32);
  auto a = t.accessor<float, 2>();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    a[static_cast<int64_t>(i)][0] = static_cast<float>(pts[i].x);
    a[static_cast<int64_t>(i)][1] = static_cast<float>(pts[i].y);
  }
  return t;
}

torch::Tensor normalized_rows(const torch::Tensor& t) {
  return t / torch::linalg_vector_norm(t, 2, {1}, true).clamp_min(1e-12);
}

std::vector<torch::Tensor> trainable_parameters(MtlDesc& model, TrainScope scope) {
  if (scope == TrainScope::Full) return model->parameters();
  auto params = model->agca()->parameters();
  const auto head = model->descriptor_head()->parameters();
  params.insert(params.end(), head.begin(), head.end());
  return params;
}

void copy_parameters(MtlDesc& dst, MtlDesc& src) {
  torch::NoGradGuard no_grad;
  const auto from = src->named_parameters();
  for (auto& item : dst->named_parameters()) item.value().copy_(from[item.key()]);
}

void set_learning_rate(torch::optim::Optimizer& optimizer, double lr) {
  for (auto& group : optimizer.param_groups()) {
    static_cast<torch::optim::AdamOptions&>(group.options()).lr(lr);
  }
}

}  // namespace

cv::Mat1f teacher_heatmap(const cv::Mat1f& image, const cv::Mat1b& labels) {
  cv::Mat1f spread = cv::Mat1f::zeros(image.size());
  if (!labels.empty()) {
    labels.convertTo(spread, CV_32F);
    cv::GaussianBlur(spread, spread, cv::Size(5, 5), 1.0);
    double peak = 0.0;
    cv::minMaxLoc(spread, nullptr, &peak);
    if (peak > 0) spread /= peak;
  }
  cv::Mat1f harris;
  cv::cornerHarris(image, harris, 3, 3, 0.04);
  cv::max(harris, 0.0, harris);
  double top = 0.0;
  cv::minMaxLoc(harris, nullptr, &top);
  if (top > 0) harris /= top;
  cv::Mat1f out;
  cv::max(spread, 0.5 * harris, out);
  cv::min(out, 1.0, out);
  return out;
}

cv::Mat1b labels_from_teacher(const cv::Mat1f& teacher) {
  std::vector<ScoredPixel> candidates;
  for (int y = 0; y < teacher.rows; ++y) {
    for (int x = 0; x < teacher.cols; ++x) {
      if (teacher(y, x) >= 0.5f) candidates.push_back({x, y, teacher(y, x)});
    }
  }
  cv::Mat1b labels = cv::Mat1b::zeros(teacher.size());
  for (const auto& p : greedy_nms(std::move(candidates), 4, teacher.size(), SIZE_MAX)) labels(p.y, p.x) = 1;
  return labels;
}

PairGenerator::PairGenerator(const DataConfig& config) : config_(config) {
  config_.validate();
  if (config_.corpus.empty()) return;
  const fs::path root(config_.corpus);
  if (!fs::is_directory(root)) throw std::runtime_error("corpus " + root.string() + " is not a readable directory");
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_regular_file() && is_image_file(entry.path())) corpus_.push_back(entry.path());
  }
  std::sort(corpus_.begin(), corpus_.end());
  if (corpus_.empty()) throw std::runtime_error("corpus " + root.string() + " holds no images");
}

GeneratedPair PairGenerator::generate(int64_t index) const {
  GeneratedPair out;
  out.seed = mix_seed(config_.seed, static_cast<uint64_t>(index));
  const auto options = pair_options(config_);
  if (synthetic()) {
    const auto scene = synthetic_corner_labels(cv::Size(options.crop, options.crop), out.seed);
    out.pair = synthesize_pair(scene.image, mix_seed(out.seed, 1), options);
    out.labels_a = scene.labels(out.pair.crop).clone();
    out.labels_b = warp_labels(out.labels_a, out.pair.homography, out.pair.image_b.size());
    return out;
  }
  const auto& path = corpus_[out.seed % corpus_.size()];
  out.pair = synthesize_pair(read_gray(path), mix_seed(out.seed, 1), options);
  out.labels_a = labels_from_teacher(teacher_heatmap(out.pair.image_a, {}));
  out.labels_b = labels_from_teacher(teacher_heatmap(out.pair.image_b, {}));
  return out;
}

DatasetSummary write_training_set(const DataConfig& config, const fs::path& dir) {
  const PairGenerator generator(config);
  for (const char* sub : {"images", "labels", "teacher"}) fs::create_directories(dir / sub);
  std::ofstream manifest(dir / "manifest.jsonl");
  if (!manifest) throw std::runtime_error("cannot write " + (dir / "manifest.jsonl").string());

  DatasetSummary summary;
  double coverage = 0.0;
  for (int64_t i = 0; i < config.pairs; ++i) {
    const auto g = generator.generate(i);
    std::ostringstream stem;
    stem << std::setw(5) << std::setfill('0') << i;
    const std::string s = stem.str();
    json row;
    row["index"] = i;
    row["seed"] = g.seed;
    row["image_a"] = "images/" + s + "_a.png";
    row["image_b"] = "images/" + s + "_b.png";
    row["labels_a"] = "labels/" + s + "_a.png";
    row["labels_b"] = "labels/" + s + "_b.png";
    row["teacher_a"] = "teacher/" + s + "_a.hmap";
    row["teacher_b"] = "teacher/" + s + "_b.hmap";
    const auto h = g.pair.homography.row_major();
    row["homography"] = std::vector<double>(h.begin(), h.end());
    row["coverage"] = g.pair.coverage();

    write_gray(dir / row["image_a"].get<std::string>(), g.pair.image_a);
    write_gray(dir / row["image_b"].get<std::string>(), g.pair.image_b);
    write_labels(dir / row["labels_a"].get<std::string>(), g.labels_a);
    write_labels(dir / row["labels_b"].get<std::string>(), g.labels_b);
    write_heatmap(dir / row["teacher_a"].get<std::string>(), teacher_heatmap(g.pair.image_a, g.labels_a));
    write_heatmap(dir / row["teacher_b"].get<std::string>(), teacher_heatmap(g.pair.image_b, g.labels_b));
    manifest << row.dump() << '\n';
    coverage += g.pair.coverage();
    ++summary.pairs;
  }
  summary.mean_coverage = summary.pairs > 0 ? coverage / static_cast<double>(summary.pairs) : 0.0;
  std::ofstream(dir / "summary.json") << json{{"pairs", summary.pairs}, {"mean_coverage", summary.mean_coverage}}.dump(2)
                                      << '\n';
  return summary;
}

DatasetSummary write_benchmark(const DataConfig& config, const fs::path& dir, const std::string& prefix) {
  const PairGenerator generator(config);
  fs::create_directories(dir);
  DatasetSummary summary;
  double coverage = 0.0;
  for (int64_t i = 0; i < config.pairs; ++i) {
    const auto g = generator.generate(i);
    std::ostringstream name;
    name << prefix << '_' << std::setw(4) << std::setfill('0') << i;
    write_sequence(dir / name.str(), {g.pair.image_a, g.pair.image_b}, {g.pair.homography});
    coverage += g.pair.coverage();
    ++summary.pairs;
  }
  summary.mean_coverage = summary.pairs > 0 ? coverage / static_cast<double>(summary.pairs) : 0.0;
  return summary;
}

TrainingSet load_training_set(const fs::path& dir, const SamplerConfig& sampler) {
  const fs::path manifest_path = dir / "manifest.jsonl";
  std::ifstream manifest(manifest_path);
  if (!manifest) throw std::runtime_error("dataset manifest " + manifest_path.string() + " not found");
  TrainingSet set;
  std::string line;
  int line_no = 0;
  while (std::getline(manifest, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = manifest_path.string() + ":" + std::to_string(line_no);
    json row;
    try {
      row = json::parse(line);
    } catch (const json::exception& e) {
      throw std::runtime_error(where + ": " + e.what());
    }
    try {
      TrainingSample s;
      s.pair.image_a = read_gray(dir / row.at("image_a").get<std::string>());
      s.pair.image_b = read_gray(dir / row.at("image_b").get<std::string>());
      s.pair.homography = Homography::from_row_major(row.at("homography").get<std::vector<double>>());
      s.pair.valid_mask = valid_mask(s.pair.homography, s.pair.image_a.size(), s.pair.image_b.size());
      s.pair.crop = cv::Rect(0, 0, s.pair.image_a.cols, s.pair.image_a.rows);
      s.labels_a = read_labels(dir / row.at("labels_a").get<std::string>());
      s.labels_b = read_labels(dir / row.at("labels_b").get<std::string>());
      const auto teacher = import_teacher_heatmaps(dir / row.at("teacher_a").get<std::string>(),
                                                   dir / row.at("teacher_b").get<std::string>(), s.pair);
      s.correspondences = sample_correspondences(s.pair, teacher, sampler);
      set.samples.push_back(std::move(s));
    } catch (const SamplingError& e) {
      set.rejected.push_back(where + ": " + e.what());
    } catch (const json::exception& e) {
      throw std::runtime_error(where + ": " + e.what());
    }
  }
  return set;
}

BatchLosses compute_batch_losses(MtlDesc& model, const std::vector<const TrainingSample*>& batch,
                                 const LossConfig& loss, TrainScope scope) {
  if (batch.empty()) throw std::invalid_argument("empty training batch");
  std::vector<torch::Tensor> images;
  std::vector<torch::Tensor> labels;
  for (const auto* s : batch) images.push_back(image_to_tensor(s->pair.image_a));
  for (const auto* s : batch) images.push_back(image_to_tensor(s->pair.image_b));
  const auto x = torch::cat(images, 0);
  const auto n = static_cast<int64_t>(batch.size());

  BatchLosses out;
  DescriptorOutput description;
  if (scope == TrainScope::Full) {
    const auto result = model->forward(x);
    description = result.description;
    for (const auto* s : batch) labels.push_back(image_to_tensor(cv::Mat1f(s->labels_a)));
    for (const auto* s : batch) labels.push_back(image_to_tensor(cv::Mat1f(s->labels_b)));
    out.l_det = detector_loss(result.detection.heatmap, torch::cat(labels, 0), loss.bce_lambda);
  } else {
    FeaturePyramid pyramid;
    {
      torch::NoGradGuard no_grad;
      pyramid = model->encode(x);
    }
    description = model->describe(pyramid);
    out.l_det = torch::zeros({}, torch::kFloat32);
  }

  std::vector<torch::Tensor> per_pair;
  for (int64_t i = 0; i < n; ++i) {
    const auto& s = *batch[static_cast<std::size_t>(i)];
    const auto pa = points_tensor(s.correspondences.points_a);
    const auto pb = points_tensor(s.correspondences.points_b);
    CorrespondenceBatch cb;
    cb.desc_a = normalized_rows(sample_field(description.descriptors[i], pa, s.pair.image_a.size()));
    cb.desc_b = normalized_rows(sample_field(description.descriptors[n + i], pb, s.pair.image_b.size()));
    cb.att_a = sample_field(description.attention[i], pa, s.pair.image_a.size()).view({-1});
    cb.att_b = sample_field(description.attention[n + i], pb, s.pair.image_b.size()).view({-1});
    per_pair.push_back(atrip_loss(cb, loss));
  }
  out.l_des = torch::stack(per_pair).mean();
  out.l_total = out.l_det + out.l_des;
  return out;
}

double poly_learning_rate(double base, double power, int64_t step, int64_t total_steps) {
  if (total_steps <= 0) return base;
  const double progress = std::clamp(static_cast<double>(step) / static_cast<double>(total_steps), 0.0, 1.0);
  return base * std::pow(1.0 - progress, power);
}

std::vector<std::size_t> epoch_order(std::size_t n, uint64_t seed, int64_t epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(mix_seed(seed, static_cast<uint64_t>(epoch)));
  for (std::size_t i = n; i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(order[i - 1], order[pick(rng)]);
  }
  return order;
}

TrainResult train(MtlDesc& model, const TrainingSet& data, const RunConfig& config, const TrainOptions& options) {
  config.validate();
  if (data.samples.empty()) throw std::invalid_argument("training set is empty");
  const auto batch_size = static_cast<std::size_t>(config.optim.batch_size);
  const auto steps_per_epoch = static_cast<int64_t>((data.samples.size() + batch_size - 1) / batch_size);
  const int64_t total_steps = steps_per_epoch * config.optim.epochs;

  torch::optim::Adam optimizer(trainable_parameters(model, options.scope),
                               torch::optim::AdamOptions(config.optim.learning_rate));
  TrainResult result;
  if (options.resume) {
    auto ck = load_checkpoint(*options.resume);
    copy_parameters(model, ck.model);
    load_optimizer_state(*options.resume, optimizer);
    result.state = ck.state;
  }

  std::ofstream log;
  if (options.output_dir) {
    fs::create_directories(*options.output_dir);
    const auto log_path = *options.output_dir / "train_log.csv";
    const bool fresh = !options.resume || !fs::exists(log_path);
    log.open(log_path, fresh ? std::ios::trunc : std::ios::app);
    if (fresh) log << "epoch,step,lr,l_det,l_des,l_total\n";
    log << std::setprecision(9);
  }

  model->train();
  while (result.state.epoch < config.optim.epochs) {
    const int64_t epoch = result.state.epoch;
    const auto order = epoch_order(data.samples.size(), config.seed, epoch);
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      std::vector<const TrainingSample*> batch;
      std::vector<std::size_t> indices;
      for (std::size_t k = start; k < std::min(order.size(), start + batch_size); ++k) {
        batch.push_back(&data.samples[order[k]]);
        indices.push_back(order[k]);
      }
      const double lr = poly_learning_rate(config.optim.learning_rate, config.optim.poly_power, result.state.step,
                                           total_steps);
      set_learning_rate(optimizer, lr);
      optimizer.zero_grad();
      const auto losses = compute_batch_losses(model, batch, config.loss, options.scope);

      StepRecord rec;
      rec.epoch = epoch;
      rec.step = result.state.step;
      rec.learning_rate = lr;
      rec.l_det = losses.l_det.item<double>();
      rec.l_des = losses.l_des.item<double>();
      rec.l_total = losses.l_total.item<double>();
      if (!std::isfinite(rec.l_total)) {
        const fs::path dump_path =
            (options.output_dir ? *options.output_dir : fs::current_path()) / "nonfinite_dump.json";
        json dump{{"epoch", epoch},          {"step", rec.step},   {"learning_rate", lr},
                  {"l_det", rec.l_det},      {"l_des", rec.l_des}, {"sample_indices", indices}};
        for (const auto* s : batch) {
          dump["correspondences"].push_back(s->correspondences.size());
          const auto h = s->pair.homography.row_major();
          dump["homographies"].push_back(std::vector<double>(h.begin(), h.end()));
        }
        std::ofstream(dump_path) << dump.dump(2) << '\n';
        throw NonFiniteLossError("non-finite loss at epoch " + std::to_string(epoch) + ", step " +
                                 std::to_string(rec.step) + "; batch dumped to " + dump_path.string());
      }
      losses.l_total.backward();
      optimizer.step();
      ++result.state.step;

      if (log.is_open()) {
        log << rec.epoch << ',' << rec.step << ',' << rec.learning_rate << ',' << rec.l_det << ',' << rec.l_des << ','
            << rec.l_total << '\n';
      }
      if (options.on_step) options.on_step(rec);
      result.log.push_back(rec);
    }
    ++result.state.epoch;
    if (options.output_dir) {
      const auto ckpt = *options.output_dir / ("epoch_" + std::to_string(result.state.epoch) + ".ckpt");
      save_checkpoint(ckpt, model, config, result.state, &optimizer);
      fs::copy_file(ckpt, *options.output_dir / "last.ckpt", fs::copy_options::overwrite_existing);
      log.flush();
    }
    if (options.stop_after_epochs && result.state.epoch >= *options.stop_after_epochs) break;
  }
  return result;
}

}  // namespace mtldesc
