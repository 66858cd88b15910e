#include "mtldesc/commands.hpp"

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "mtldesc/checkpoint.hpp"
#include "mtldesc/feature_io.hpp"
#include "mtldesc/hpatches.hpp"
#include "mtldesc/pipeline.hpp"

namespace mtldesc {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + dir.string() + ": " + ec.message());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

}  // namespace

fs::path output_root() {
  const char* env = std::getenv(kOutputRootEnv);
  return env != nullptr && *env != '\0' ? fs::path(env) : fs::current_path();
}

fs::path resolve_output(const fs::path& path) { return path.is_absolute() ? path : output_root() / path; }

void write_resolved_config(const RunConfig& config, const fs::path& dir) {
  ensure_dir(dir);
  config.save(dir / "config.txt");
}

DatasetSummary cmd_synth(const RunConfig& config, const SynthArgs& args, std::ostream& log) {
  config.validate();
  const auto out = resolve_output(args.out);
  ensure_dir(out);
  const auto summary = args.layout == DatasetLayout::Training ? write_training_set(config.data, out)
                                                              : write_benchmark(config.data, out);
  write_resolved_config(config, out);
  log << "synth: wrote " << summary.pairs << " pairs to " << out.string() << " (mean valid coverage "
      << std::fixed << std::setprecision(3) << summary.mean_coverage << ")\n";
  return summary;
}

TrainResult cmd_train(const RunConfig& config, const TrainArgs& args, std::ostream& log) {
  config.validate();
  const auto out = resolve_output(args.out);
  ensure_dir(out);
  write_resolved_config(config, out);
  const auto data = load_training_set(args.data, config.data.sampler);
  for (const auto& r : data.rejected) log << "train: warning: skipped " << r << '\n';
  log << "train: " << data.samples.size() << " pairs, " << config.optim.epochs << " epochs, batch "
      << config.optim.batch_size << '\n';

  MtlDesc model(config.model, config.seed);
  TrainOptions options;
  options.scope = args.scope;
  options.output_dir = out;
  options.resume = args.resume;
  int64_t last_epoch = -1;
  options.on_step = [&](const StepRecord& r) {
    if (r.epoch != last_epoch) {
      last_epoch = r.epoch;
      log << "train: epoch " << r.epoch + 1 << " starts at step " << r.step << ", l_total " << r.l_total << '\n';
    }
  };
  auto result = train(model, data, config, options);
  if (!result.log.empty()) {
    const auto& first = result.log.front();
    const auto& last = result.log.back();
    log << "train: l_total " << first.l_total << " -> " << last.l_total << " over " << result.log.size()
        << " steps; checkpoint " << (out / "last.ckpt").string() << '\n';
  }
  return result;
}

std::size_t cmd_extract(const RunConfig& config, const ExtractArgs& args, std::ostream& log) {
  auto ck = load_checkpoint(args.checkpoint);
  const auto out = resolve_output(args.out);
  ensure_dir(out);
  RunConfig resolved = config;
  resolved.model = ck.config.model;
  write_resolved_config(resolved, out);

  std::size_t written = 0;
  for (const auto& path : args.images) {
    cv::Mat1f image;
    try {
      image = load_eval_image(path);
    } catch (const std::exception& e) {
      log << "extract: warning: skipped " << path.string() << ": " << e.what() << '\n';
      continue;
    }
    FeatureFile file;
    file.image_path = path.string();
    file.height = image.rows;
    file.width = image.cols;
    file.keypoints = extract_features(ck.model, image, config.inference);
    const auto target = out / (path.stem().string() + ".features");
    write_features(target, file);
    log << "extract: " << path.string() << ": " << file.keypoints.size() << " keypoints -> " << target.string()
        << '\n';
    ++written;
  }
  if (written == 0 && !args.images.empty()) throw std::runtime_error("no image could be read");
  return written;
}

std::size_t cmd_match(const RunConfig& config, const MatchArgs& args, std::ostream& log) {
  const auto a = read_features(args.features_a);
  const auto b = read_features(args.features_b);
  const auto matches = match(a.keypoints, b.keypoints, config.inference.match_mode);
  const auto out = resolve_output(args.out);
  ensure_dir(out);
  write_resolved_config(config, out);
  std::ofstream file(out / "matches.txt");
  if (!file) throw std::runtime_error("cannot write " + (out / "matches.txt").string());
  file << "# " << a.image_path << " -> " << b.image_path << '\n';
  file << "mode " << to_string(matches.mode) << " count " << matches.pairs.size() << '\n';
  file << std::setprecision(9);
  for (const auto& m : matches.pairs) {
    const auto& pa = a.keypoints.coords[static_cast<std::size_t>(m.index_a)];
    const auto& pb = b.keypoints.coords[static_cast<std::size_t>(m.index_b)];
    file << m.index_a << ' ' << m.index_b << ' ' << m.distance << ' ' << pa.x << ' ' << pa.y << ' ' << pb.x << ' '
         << pb.y << '\n';
  }
  log << "match: " << matches.pairs.size() << " mutual matches (" << to_string(matches.mode) << ")\n";
  return matches.pairs.size();
}

MetricReport cmd_eval(const RunConfig& config, const EvalArgs& args, std::ostream& log) {
  if (args.checkpoint.has_value() == args.features.has_value()) {
    throw std::invalid_argument("eval needs exactly one of a checkpoint or a features directory");
  }
  const auto dataset = load_sequences(args.dataset, args.sequence_list);
  for (const auto& s : dataset.skipped) log << "eval: warning: skipped " << s << '\n';

  MetricReport report;
  RunConfig resolved = config;
  if (args.checkpoint) {
    auto ck = load_checkpoint(*args.checkpoint);
    resolved.model = ck.config.model;
    report = evaluate_model(ck.model, dataset, config.inference, config.eval);
  } else {
    const fs::path root = *args.features;
    report = evaluate_sequences(
        dataset,
        [&](const fs::path& image_path, const cv::Mat1f& image) {
          const auto rel = fs::relative(image_path, args.dataset);
          auto file = read_features(root / rel.parent_path() / (rel.stem().string() + ".features"));
          if (file.height != image.rows || file.width != image.cols) {
            throw std::runtime_error("features for " + image_path.string() + " were extracted at a different size");
          }
          return std::move(file.keypoints);
        },
        config.inference.match_mode, config.eval);
  }

  const auto out = resolve_output(args.out);
  ensure_dir(out);
  write_resolved_config(resolved, out);
  write_text(out / "report.json", report_to_json(report) + "\n");
  write_text(out / "report.txt", report_to_table(report));
  write_mma_curve(report, out / "mma_curve.png");
  log << report_to_table(report);
  return report;
}

double worked_example_loss(double temperature) {
  CorrespondenceBatch b;
  const auto opts = torch::TensorOptions().dtype(torch::kFloat64);
  b.desc_a = torch::tensor({1.0, 0.0, 0.0, 1.0}, opts).view({2, 2});
  b.desc_b = torch::tensor({0.6, 0.8, 0.0, 1.0}, opts).view({2, 2});
  b.att_a = torch::ones({2}, opts);
  b.att_b = torch::ones({2}, opts);
  LossConfig cfg;
  cfg.temperature = temperature;
  return atrip_loss(b, cfg).item<double>();
}

GradCheckReport cmd_gradcheck(const RunConfig& config, const GradCheckArgs& args, std::ostream& log) {
  auto options = args.options;
  options.seed = config.seed;
  options.temperature = config.loss.temperature;
  const auto report = atrip_gradient_check(options);
  const double example = worked_example_loss(config.loss.temperature);
  log << report.to_json() << '\n';
  log << "gradcheck: worked example (N=2, dim=2, T=" << config.loss.temperature << "): loss " << std::fixed
      << std::setprecision(4) << example << '\n';
  if (args.out) {
    const auto out = resolve_output(*args.out);
    ensure_dir(out);
    write_resolved_config(config, out);
    write_text(out / "gradcheck.json", report.to_json() + "\n");
  }
  return report;
}

std::string TSweepReport::to_json() const {
  json j;
  for (const auto& r : rows) {
    j["rows"].push_back({{"temperature", r.temperature},
                         {"mma@3", r.mma3},
                         {"matching_score", r.matching_score},
                         {"ha@3", r.ha3},
                         {"final_l_des", r.final_l_des}});
  }
  j["mma_decreases_with_t"] = mma_decreases;
  j["ms_increases_with_t"] = ms_increases;
  return j.dump(2);
}

std::string TSweepReport::to_table() const {
  std::ostringstream os;
  os << std::setw(10) << "T" << std::setw(10) << "MMA@3" << std::setw(10) << "M.S." << std::setw(10) << "HA@3"
     << std::setw(12) << "L_des" << '\n';
  os << std::fixed << std::setprecision(4);
  for (const auto& r : rows) {
    os << std::setw(10) << std::setprecision(1) << r.temperature << std::setprecision(4) << std::setw(10) << r.mma3
       << std::setw(10) << r.matching_score << std::setw(10) << r.ha3 << std::setw(12) << r.final_l_des << '\n';
  }
  os << "MMA(T_min) >= MMA(T_max): " << (mma_decreases ? "yes" : "no") << '\n';
  os << "M.S.(T_max) >= M.S.(T_min): " << (ms_increases ? "yes" : "no") << '\n';
  return os.str();
}

TSweepReport cmd_tsweep(const RunConfig& config, const TSweepArgs& args, std::ostream& log) {
  if (args.temperatures.size() < 2) throw std::invalid_argument("t-sweep needs at least two temperatures");
  auto temps = args.temperatures;
  std::sort(temps.begin(), temps.end());
  const auto out = resolve_output(args.out);
  ensure_dir(out);
  const auto data = load_training_set(args.data, config.data.sampler);
  const auto dataset = load_sequences(args.benchmark);
  if (dataset.pairs.empty()) throw std::runtime_error("benchmark " + args.benchmark.string() + " has no pairs");

  TSweepReport report;
  for (const double t : temps) {
    auto ck = load_checkpoint(args.checkpoint);
    RunConfig cfg = config;
    cfg.model = ck.config.model;
    cfg.loss.temperature = t;
    ck.model->reset_description(config.seed);
    std::ostringstream name;
    name << "T_" << t;
    TrainOptions options;
    options.scope = TrainScope::DescriptionOnly;
    options.output_dir = out / name.str();
    const auto result = train(ck.model, data, cfg, options);
    write_resolved_config(cfg, out / name.str());
    const auto metrics = evaluate_model(ck.model, dataset, cfg.inference, cfg.eval);
    TSweepRow row;
    row.temperature = t;
    row.mma3 = metrics.overall().mma_at(3.0);
    row.matching_score = metrics.overall().matching_score;
    row.ha3 = metrics.overall().ha_at(3.0);
    row.final_l_des = result.log.empty() ? 0.0 : result.log.back().l_des;
    log << "t-sweep: T=" << t << " MMA@3 " << row.mma3 << " M.S. " << row.matching_score << '\n';
    report.rows.push_back(row);
  }
  report.mma_decreases = report.rows.front().mma3 >= report.rows.back().mma3;
  report.ms_increases = report.rows.back().matching_score >= report.rows.front().matching_score;
  write_resolved_config(config, out);
  write_text(out / "tsweep.json", report.to_json() + "\n");
  write_text(out / "tsweep.txt", report.to_table());
  log << report.to_table();
  return report;
}

}  // namespace mtldesc
