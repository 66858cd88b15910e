#include "mtldesc/checkpoint.hpp"

namespace mtldesc {
namespace {

constexpr int64_t kCheckpointVersion = 1;

torch::serialize::InputArchive open(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw CheckpointError("checkpoint " + path.string() + " does not exist");
  torch::serialize::InputArchive archive;
  try {
    archive.load_from(path.string());
  } catch (const c10::Error& e) {
    throw CheckpointError("cannot read checkpoint " + path.string() + ": " + e.what_without_backtrace());
  }
  return archive;
}

int64_t read_int(torch::serialize::InputArchive& archive, const std::string& key) {
  c10::IValue v;
  if (!archive.try_read(key, v) || !v.isInt()) throw CheckpointError("checkpoint lacks '" + key + "'");
  return v.toInt();
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, MtlDesc& model, const RunConfig& config,
                     const TrainingState& state, torch::optim::Optimizer* optimizer) {
  torch::serialize::OutputArchive archive;
  archive.write("format_version", c10::IValue(kCheckpointVersion));
  archive.write("config", c10::IValue(config.to_text()));
  archive.write("epoch", c10::IValue(state.epoch));
  archive.write("step", c10::IValue(state.step));
  torch::serialize::OutputArchive model_archive;
  model->save(model_archive);
  archive.write("model", model_archive);
  if (optimizer != nullptr) {
    torch::serialize::OutputArchive optim_archive;
    optimizer->save(optim_archive);
    archive.write("optimizer", optim_archive);
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  archive.save_to(tmp.string());
  std::filesystem::rename(tmp, path);
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  auto archive = open(path);
  if (read_int(archive, "format_version") != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version in " + path.string());
  }
  c10::IValue text;
  if (!archive.try_read("config", text) || !text.isString()) throw CheckpointError("checkpoint lacks its config");

  LoadedCheckpoint out;
  out.config = RunConfig::from_text(text.toStringRef());
  out.state.epoch = read_int(archive, "epoch");
  out.state.step = read_int(archive, "step");
  out.model = MtlDesc(out.config.model);
  torch::serialize::InputArchive model_archive;
  if (!archive.try_read("model", model_archive)) throw CheckpointError("checkpoint lacks model parameters");
  try {
    out.model->load(model_archive);
  } catch (const c10::Error& e) {
    throw CheckpointError("parameters in " + path.string() + " do not fit the stored config: " +
                          e.what_without_backtrace());
  }
  return out;
}

void load_optimizer_state(const std::filesystem::path& path, torch::optim::Optimizer& optimizer) {
  auto archive = open(path);
  torch::serialize::InputArchive optim_archive;
  if (!archive.try_read("optimizer", optim_archive)) {
    throw CheckpointError("checkpoint " + path.string() + " holds no optimizer state");
  }
  optimizer.load(optim_archive);
}

}  // namespace mtldesc
