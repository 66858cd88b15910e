#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "CLI11.hpp"
#include "mtldesc/commands.hpp"

namespace {

using namespace mtldesc;

struct CommonOptions {
  std::optional<uint64_t> seed;
  std::optional<int64_t> threads;
  std::string config_path;
  std::string preset = "default";
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonOptions& common) {
  cmd->add_option("--seed", common.seed, "Seed for model init, data generation, shuffling and RANSAC");
  cmd->add_option("--threads", common.threads, "Intra-op CPU threads")->check(CLI::PositiveNumber);
  cmd->add_option("--config", common.config_path, "key=value config file")->check(CLI::ExistingFile);
  cmd->add_option("--preset", common.preset, "Base configuration")
      ->check(CLI::IsMember({"default", "toy"}));
  cmd->add_option("--set", common.overrides, "Override one config key (key=value), repeatable");
}

RunConfig resolve(const CommonOptions& common) {
  RunConfig cfg = common.preset == "toy" ? RunConfig::toy() : RunConfig{};
  if (!common.config_path.empty()) cfg = RunConfig::load(common.config_path);
  for (const auto& o : common.overrides) cfg.apply_override(o);
  if (common.seed) {
    cfg.seed = *common.seed;
    cfg.data.seed = *common.seed;
    cfg.eval.ransac_seed = *common.seed;
  }
  if (common.threads) cfg.threads = *common.threads;
  cfg.validate();
  torch::set_num_threads(static_cast<int>(cfg.threads));
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint keypoint detection and consistent-attention description"};
  app.require_subcommand(1);
  CommonOptions common;

  SynthArgs synth;
  std::string layout = "training";
  auto* synth_cmd = app.add_subcommand("synth", "Generate synthetic training pairs or an evaluation benchmark");
  synth_cmd->add_option("--out", synth.out, "Output directory")->required();
  synth_cmd->add_option("--layout", layout, "training or sequences")
      ->check(CLI::IsMember({"training", "sequences"}));
  std::optional<int64_t> count;
  synth_cmd->add_option("--count", count, "Number of pairs (data.pairs)")->check(CLI::NonNegativeNumber);
  add_common(synth_cmd, common);

  TrainArgs train_args;
  std::string scope = "full";
  auto* train_cmd = app.add_subcommand("train", "Train on a synthesized dataset");
  train_cmd->add_option("--data", train_args.data, "Training dataset directory")->required();
  train_cmd->add_option("--out", train_args.out, "Output directory")->required();
  train_cmd->add_option("--resume", train_args.resume, "Checkpoint to continue from")->check(CLI::ExistingFile);
  train_cmd->add_option("--scope", scope, "full or description")->check(CLI::IsMember({"full", "description"}));
  add_common(train_cmd, common);

  ExtractArgs extract;
  auto* extract_cmd = app.add_subcommand("extract", "Export keypoints, descriptors and weights per image");
  extract_cmd->add_option("--checkpoint", extract.checkpoint, "Model checkpoint")->required();
  extract_cmd->add_option("--out", extract.out, "Output directory")->required();
  extract_cmd->add_option("images", extract.images, "Image files")->required();
  add_common(extract_cmd, common);

  MatchArgs match_args;
  auto* match_cmd = app.add_subcommand("match", "Mutual nearest-neighbour matching of two feature files");
  match_cmd->add_option("features_a", match_args.features_a)->required()->check(CLI::ExistingFile);
  match_cmd->add_option("features_b", match_args.features_b)->required()->check(CLI::ExistingFile);
  match_cmd->add_option("--out", match_args.out, "Output directory")->required();
  add_common(match_cmd, common);

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "MMA, matching score and homography accuracy on sequence folders");
  eval_cmd->add_option("--dataset", eval.dataset, "Root holding sequence directories")->required();
  eval_cmd->add_option("--checkpoint", eval.checkpoint, "Model checkpoint")->check(CLI::ExistingFile);
  eval_cmd->add_option("--features", eval.features, "Directory of exported features")->check(CLI::ExistingDirectory);
  eval_cmd->add_option("--sequences", eval.sequence_list, "Sequence list file")->check(CLI::ExistingFile);
  eval_cmd->add_option("--out", eval.out, "Output directory")->required();
  add_common(eval_cmd, common);

  GradCheckArgs grad;
  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference check of the triplet-loss gradients");
  grad_cmd->add_option("--trials", grad.options.trials)->check(CLI::PositiveNumber);
  grad_cmd->add_option("--points", grad.options.points)->check(CLI::Range(2, 4096));
  grad_cmd->add_option("--dim", grad.options.dim)->check(CLI::PositiveNumber);
  grad_cmd->add_option("--out", grad.out, "Directory for gradcheck.json");
  add_common(grad_cmd, common);

  TSweepArgs sweep;
  auto* sweep_cmd = app.add_subcommand("t-sweep", "Retrain the description branch over several temperatures");
  sweep_cmd->add_option("--checkpoint", sweep.checkpoint, "Trained model")->required()->check(CLI::ExistingFile);
  sweep_cmd->add_option("--data", sweep.data, "Training dataset directory")->required();
  sweep_cmd->add_option("--benchmark", sweep.benchmark, "Sequence folders for evaluation")->required();
  sweep_cmd->add_option("--temperatures", sweep.temperatures, "Temperatures to compare");
  sweep_cmd->add_option("--out", sweep.out, "Output directory")->required();
  add_common(sweep_cmd, common);

  CLI11_PARSE(app, argc, argv);

  try {
    auto cfg = resolve(common);
    if (synth_cmd->parsed()) {
      if (count) cfg.data.pairs = *count;
      synth.layout = layout == "training" ? DatasetLayout::Training : DatasetLayout::Sequences;
      cmd_synth(cfg, synth, std::cout);
    } else if (train_cmd->parsed()) {
      train_args.scope = scope == "full" ? TrainScope::Full : TrainScope::DescriptionOnly;
      cmd_train(cfg, train_args, std::cout);
    } else if (extract_cmd->parsed()) {
      cmd_extract(cfg, extract, std::cout);
    } else if (match_cmd->parsed()) {
      cmd_match(cfg, match_args, std::cout);
    } else if (eval_cmd->parsed()) {
      cmd_eval(cfg, eval, std::cout);
    } else if (grad_cmd->parsed()) {
      const auto report = cmd_gradcheck(cfg, grad, std::cout);
      if (!report.passed) {
        std::cerr << "mtldesc: error: gradcheck failed: " << report.worst_case << '\n';
        return 1;
      }
    } else if (sweep_cmd->parsed()) {
      cmd_tsweep(cfg, sweep, std::cout);
    }
  } catch (const c10::Error& e) {
    std::cerr << "mtldesc: error: " << e.what_without_backtrace() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "mtldesc: error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
