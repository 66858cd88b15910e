#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>

#include <torch/torch.h>

#include "mtldesc/config.hpp"
#include "mtldesc/model.hpp"

namespace mtldesc {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainingState {
  /// Completed epochs.
  int64_t epoch = 0;
  /// Completed optimizer steps.
  int64_t step = 0;
};

/// Writes the resolved config, training counters, all parameters and, when given, the optimizer state.
void save_checkpoint(const std::filesystem::path& path, MtlDesc& model, const RunConfig& config,
                     const TrainingState& state, torch::optim::Optimizer* optimizer = nullptr);

struct LoadedCheckpoint {
  RunConfig config;
  TrainingState state;
  MtlDesc model{nullptr};
};

/// Rebuilds the model from the stored config and loads its parameters.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

/// Restores optimizer state saved alongside the model; throws CheckpointError when absent.
void load_optimizer_state(const std::filesystem::path& path, torch::optim::Optimizer& optimizer);

}  // namespace mtldesc
