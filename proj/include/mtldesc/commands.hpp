#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mtldesc/config.hpp"
#include "mtldesc/losses.hpp"
#include "mtldesc/metrics.hpp"
#include "mtldesc/training.hpp"

namespace mtldesc {

/// Environment variable naming the directory that relative output paths resolve against.
inline constexpr const char* kOutputRootEnv = "MTLDESC_OUTPUT_ROOT";

std::filesystem::path output_root();
/// Absolute paths pass through; relative ones are placed under output_root().
std::filesystem::path resolve_output(const std::filesystem::path& path);

/// Writes config.txt into `dir`.
void write_resolved_config(const RunConfig& config, const std::filesystem::path& dir);

enum class DatasetLayout { Training, Sequences };

struct SynthArgs {
  std::filesystem::path out;
  DatasetLayout layout = DatasetLayout::Training;
};
DatasetSummary cmd_synth(const RunConfig& config, const SynthArgs& args, std::ostream& log);

struct TrainArgs {
  std::filesystem::path data;
  std::filesystem::path out;
  std::optional<std::filesystem::path> resume;
  TrainScope scope = TrainScope::Full;
};
TrainResult cmd_train(const RunConfig& config, const TrainArgs& args, std::ostream& log);

struct ExtractArgs {
  std::filesystem::path checkpoint;
  std::vector<std::filesystem::path> images;
  std::filesystem::path out;
};
/// Returns the number of images written; unreadable images are skipped with a warning.
std::size_t cmd_extract(const RunConfig& config, const ExtractArgs& args, std::ostream& log);

struct MatchArgs {
  std::filesystem::path features_a;
  std::filesystem::path features_b;
  std::filesystem::path out;
};
std::size_t cmd_match(const RunConfig& config, const MatchArgs& args, std::ostream& log);

struct EvalArgs {
  std::filesystem::path dataset;
  std::optional<std::filesystem::path> checkpoint;
  /// Directory mirroring the dataset with <sequence>/<image stem>.features files.
  std::optional<std::filesystem::path> features;
  std::optional<std::filesystem::path> sequence_list;
  std::filesystem::path out;
};
MetricReport cmd_eval(const RunConfig& config, const EvalArgs& args, std::ostream& log);

struct GradCheckArgs {
  GradCheckOptions options;
  std::optional<std::filesystem::path> out;
};
GradCheckReport cmd_gradcheck(const RunConfig& config, const GradCheckArgs& args, std::ostream& log);

/// The N = 2 triplet-loss example with unit weights: d1 = (1, 0), d1' = (0.6, 0.8), d2 = d2' = (0, 1).
double worked_example_loss(double temperature);

struct TSweepArgs {
  std::filesystem::path checkpoint;
  std::filesystem::path data;
  std::filesystem::path benchmark;
  std::vector<double> temperatures{1.0, 15.0, 100.0};
  std::filesystem::path out;
};

struct TSweepRow {
  double temperature = 0.0;
  double mma3 = 0.0;
  double matching_score = 0.0;
  double ha3 = 0.0;
  double final_l_des = 0.0;
};

struct TSweepReport {
  std::vector<TSweepRow> rows;
  /// MMA at the lowest temperature >= MMA at the highest.
  bool mma_decreases = false;
  /// M.S. at the highest temperature >= M.S. at the lowest.
  bool ms_increases = false;

  std::string to_json() const;
  std::string to_table() const;
};

/// Re-initializes and retrains the description branch of a trained model once per temperature
/// (backbone and detector frozen) and evaluates each result on the benchmark.
TSweepReport cmd_tsweep(const RunConfig& config, const TSweepArgs& args, std::ostream& log);

}  // namespace mtldesc
