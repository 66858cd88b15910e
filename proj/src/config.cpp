#include "mtldesc/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

namespace mtldesc {
namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument("invalid config: " + what);
}

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return {};
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

int64_t parse_int(const std::string& key, const std::string& text) {
  int64_t value = 0;
  const auto t = trim(text);
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (ec != std::errc() || ptr != t.data() + t.size()) {
    throw std::invalid_argument("invalid config: " + key + " expects an integer, got '" + text + "'");
  }
  return value;
}

uint64_t parse_uint(const std::string& key, const std::string& text) {
  uint64_t value = 0;
  const auto t = trim(text);
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (ec != std::errc() || ptr != t.data() + t.size()) {
    throw std::invalid_argument("invalid config: " + key + " expects an unsigned integer, got '" + text +
                                "'");
  }
  return value;
}

double parse_double(const std::string& key, const std::string& text) {
  const auto t = trim(text);
  try {
    size_t used = 0;
    const double value = std::stod(t, &used);
    if (used != t.size()) throw std::invalid_argument("trailing");
    return value;
  } catch (const std::exception&) {
    throw std::invalid_argument("invalid config: " + key + " expects a number, got '" + text + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& text) {
  const auto t = trim(text);
  if (t == "true" || t == "1") return true;
  if (t == "false" || t == "0") return false;
  throw std::invalid_argument("invalid config: " + key + " expects true/false, got '" + text + "'");
}

template <size_t N>
std::array<int64_t, N> parse_int_list(const std::string& key, const std::string& text) {
  std::array<int64_t, N> out{};
  std::stringstream ss(text);
  std::string item;
  size_t i = 0;
  while (std::getline(ss, item, ',')) {
    if (i >= N) break;
    out[i++] = parse_int(key, item);
  }
  if (i != N || std::getline(ss, item, ',')) {
    throw std::invalid_argument("invalid config: " + key + " expects " + std::to_string(N) +
                                " comma-separated integers");
  }
  return out;
}

template <size_t N>
std::string join(const std::array<int64_t, N>& values) {
  std::string out;
  for (size_t i = 0; i < N; ++i) {
    if (i) out += ',';
    out += std::to_string(values[i]);
  }
  return out;
}

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

struct Field {
  std::string key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

#define MTL_INT(KEY, MEMBER)                                                  \
  Field {                                                                     \
    KEY, [](const RunConfig& c) { return std::to_string(c.MEMBER); },         \
        [](RunConfig& c, const std::string& v) { c.MEMBER = parse_int(KEY, v); } \
  }
#define MTL_UINT(KEY, MEMBER)                                                  \
  Field {                                                                      \
    KEY, [](const RunConfig& c) { return std::to_string(c.MEMBER); },          \
        [](RunConfig& c, const std::string& v) { c.MEMBER = parse_uint(KEY, v); } \
  }
#define MTL_DOUBLE(KEY, MEMBER)                                                  \
  Field {                                                                        \
    KEY, [](const RunConfig& c) { return fmt_double(c.MEMBER); },                \
        [](RunConfig& c, const std::string& v) { c.MEMBER = parse_double(KEY, v); } \
  }
#define MTL_BOOL(KEY, MEMBER)                                                            \
  Field {                                                                                \
    KEY, [](const RunConfig& c) { return std::string(c.MEMBER ? "true" : "false"); },    \
        [](RunConfig& c, const std::string& v) { c.MEMBER = parse_bool(KEY, v); }        \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      Field{"model.backbone_channels",
            [](const RunConfig& c) { return join(c.model.backbone_channels); },
            [](RunConfig& c, const std::string& v) {
              c.model.backbone_channels = parse_int_list<4>("model.backbone_channels", v);
            }},
      MTL_INT("model.input_channels", model.input_channels),
      MTL_INT("model.descriptor_dim", model.descriptor_dim),
      MTL_INT("model.sub_descriptor_dim", model.sub_descriptor_dim),
      MTL_INT("model.agca_pool_size", model.agca_pool_size),
      MTL_INT("model.agca_patch_size", model.agca_patch_size),
      MTL_INT("model.agca_embed_dim", model.agca_embed_dim),
      MTL_INT("model.agca_depth", model.agca_depth),
      MTL_INT("model.agca_heads", model.agca_heads),
      MTL_DOUBLE("model.agca_mlp_ratio", model.agca_mlp_ratio),
      Field{"model.dilation_rates", [](const RunConfig& c) { return join(c.model.dilation_rates); },
            [](RunConfig& c, const std::string& v) {
              c.model.dilation_rates = parse_int_list<3>("model.dilation_rates", v);
            }},
      Field{"model.fusion", [](const RunConfig& c) { return to_string(c.model.fusion); },
            [](RunConfig& c, const std::string& v) {
              const auto t = trim(v);
              if (t == "softmax") {
                c.model.fusion = FusionMode::Softmax;
              } else if (t == "raw") {
                c.model.fusion = FusionMode::Raw;
              } else {
                throw std::invalid_argument("invalid config: model.fusion expects softmax|raw");
              }
            }},
      MTL_DOUBLE("loss.temperature", loss.temperature),
      MTL_DOUBLE("loss.margin", loss.margin),
      MTL_DOUBLE("loss.bce_lambda", loss.bce_lambda),
      MTL_DOUBLE("optim.learning_rate", optim.learning_rate),
      MTL_DOUBLE("optim.poly_power", optim.poly_power),
      MTL_INT("optim.batch_size", optim.batch_size),
      MTL_INT("optim.epochs", optim.epochs),
      Field{"data.corpus", [](const RunConfig& c) { return c.data.corpus; },
            [](RunConfig& c, const std::string& v) { c.data.corpus = trim(v); }},
      MTL_INT("data.pairs", data.pairs),
      MTL_INT("data.crop", data.crop),
      MTL_UINT("data.seed", data.seed),
      MTL_DOUBLE("data.homography.max_rotation_deg", data.homography.max_rotation_deg),
      MTL_DOUBLE("data.homography.scale_min", data.homography.scale_min),
      MTL_DOUBLE("data.homography.scale_max", data.homography.scale_max),
      MTL_DOUBLE("data.homography.max_perspective", data.homography.max_perspective),
      MTL_DOUBLE("data.homography.max_translation", data.homography.max_translation),
      MTL_BOOL("data.photometric.enabled", data.photometric.enabled),
      MTL_DOUBLE("data.photometric.max_brightness", data.photometric.max_brightness),
      MTL_DOUBLE("data.photometric.contrast_min", data.photometric.contrast_min),
      MTL_DOUBLE("data.photometric.contrast_max", data.photometric.contrast_max),
      MTL_DOUBLE("data.photometric.max_blur_sigma", data.photometric.max_blur_sigma),
      MTL_INT("data.sampler.points", data.sampler.points),
      MTL_INT("data.sampler.grid", data.sampler.grid),
      MTL_INT("data.sampler.nms_radius", data.sampler.nms_radius),
      MTL_DOUBLE("inference.alpha", inference.alpha),
      MTL_INT("inference.nms_radius", inference.nms_radius),
      MTL_INT("inference.max_keypoints", inference.max_keypoints),
      Field{"inference.match_mode", [](const RunConfig& c) { return to_string(c.inference.match_mode); },
            [](RunConfig& c, const std::string& v) { c.inference.match_mode = parse_match_mode(v); }},
      MTL_DOUBLE("eval.ransac_threshold", eval.ransac_threshold),
      MTL_INT("eval.ransac_iterations", eval.ransac_iterations),
      MTL_UINT("eval.ransac_seed", eval.ransac_seed),
      MTL_DOUBLE("eval.ms_threshold", eval.ms_threshold),
      MTL_UINT("run.seed", seed),
      MTL_INT("run.threads", threads),
  };
  return table;
}

#undef MTL_INT
#undef MTL_UINT
#undef MTL_DOUBLE
#undef MTL_BOOL

}  // namespace

std::string to_string(FusionMode mode) { return mode == FusionMode::Softmax ? "softmax" : "raw"; }

std::string to_string(MatchMode mode) {
  return mode == MatchMode::Plain ? "plain" : "attention_weighted";
}

MatchMode parse_match_mode(const std::string& text) {
  const auto t = trim(text);
  if (t == "plain") return MatchMode::Plain;
  if (t == "attention_weighted" || t == "weighted") return MatchMode::AttentionWeighted;
  throw std::invalid_argument("invalid match mode '" + text + "' (expected plain|attention_weighted)");
}

void ModelConfig::validate() const {
  for (auto c : backbone_channels) require(c > 0, "model.backbone_channels must be positive");
  require(input_channels == 1 || input_channels == 3, "model.input_channels must be 1 or 3");
  require(descriptor_dim > 0 && sub_descriptor_dim > 0, "descriptor dims must be positive");
  require(descriptor_dim == 4 * sub_descriptor_dim,
          "model.descriptor_dim must equal 4 * model.sub_descriptor_dim");
  require(agca_pool_size > 0 && agca_patch_size > 0, "AGCA pool/patch sizes must be positive");
  require(agca_pool_size % agca_patch_size == 0,
          "model.agca_pool_size must be divisible by model.agca_patch_size");
  require(agca_embed_dim > 0 && agca_depth > 0 && agca_heads > 0, "AGCA dims must be positive");
  require(agca_embed_dim % agca_heads == 0, "model.agca_embed_dim must be divisible by model.agca_heads");
  require(agca_embed_dim == descriptor_dim,
          "model.agca_embed_dim must equal model.descriptor_dim (global context is added to D_raw)");
  require(agca_mlp_ratio > 0.0, "model.agca_mlp_ratio must be positive");
  for (auto r : dilation_rates) require(r > 0, "model.dilation_rates must be positive");
  require(dilation_rates[0] != dilation_rates[1] && dilation_rates[0] != dilation_rates[2] &&
              dilation_rates[1] != dilation_rates[2],
          "model.dilation_rates must be distinct");
}

void LossConfig::validate() const {
  require(temperature > 0.0, "loss.temperature must be > 0");
  require(margin > 0.0, "loss.margin must be > 0");
  require(bce_lambda > 0.0, "loss.bce_lambda must be > 0");
}

void OptimConfig::validate() const {
  require(learning_rate > 0.0, "optim.learning_rate must be > 0");
  require(poly_power > 0.0, "optim.poly_power must be > 0");
  require(batch_size > 0, "optim.batch_size must be > 0");
  require(epochs >= 0, "optim.epochs must be >= 0");
}

void HomographyParams::validate() const {
  require(max_rotation_deg >= 0.0 && max_rotation_deg <= 90.0, "rotation range must be in [0, 90] deg");
  require(scale_min > 0.0 && scale_min <= scale_max, "scale range must satisfy 0 < min <= max");
  require(max_perspective >= 0.0 && max_perspective < 0.5, "perspective range must be in [0, 0.5)");
  require(max_translation >= 0.0 && max_translation <= 0.5, "translation range must be in [0, 0.5]");
}

void PhotometricParams::validate() const {
  require(max_brightness >= 0.0 && max_brightness <= 1.0, "brightness range must be in [0, 1]");
  require(contrast_min > 0.0 && contrast_min <= contrast_max, "contrast range must satisfy 0 < min <= max");
  require(max_blur_sigma >= 0.0, "blur sigma must be >= 0");
}

void SamplerConfig::validate() const {
  require(points >= 2, "data.sampler.points must be >= 2");
  require(grid > 0, "data.sampler.grid must be > 0");
  require(nms_radius >= 0, "data.sampler.nms_radius must be >= 0");
}

void DataConfig::validate() const {
  require(pairs >= 0, "data.pairs must be >= 0");
  require(crop >= 32 && crop % 8 == 0, "data.crop must be >= 32 and divisible by 8");
  homography.validate();
  photometric.validate();
  sampler.validate();
}

void InferenceConfig::validate() const {
  require(alpha > 0.0 && alpha < 1.0, "inference.alpha must be in (0, 1)");
  require(nms_radius >= 0, "inference.nms_radius must be >= 0");
  require(max_keypoints > 0, "inference.max_keypoints must be > 0");
}

void EvalConfig::validate() const {
  require(ransac_threshold > 0.0, "eval.ransac_threshold must be > 0");
  require(ransac_iterations > 0, "eval.ransac_iterations must be > 0");
  require(ms_threshold > 0.0, "eval.ms_threshold must be > 0");
}

void RunConfig::validate() const {
  model.validate();
  loss.validate();
  optim.validate();
  data.validate();
  inference.validate();
  eval.validate();
  require(threads > 0, "run.threads must be > 0");
}

void RunConfig::set(const std::string& key, const std::string& value) {
  for (const auto& f : fields()) {
    if (f.key == key) {
      f.set(*this, value);
      return;
    }
  }
  throw std::invalid_argument("invalid config: unknown key '" + key + "'");
}

void RunConfig::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw std::invalid_argument("invalid config: expected key=value, got '" + assignment + "'");
  }
  set(trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

std::vector<std::pair<std::string, std::string>> RunConfig::entries() const {
  std::vector<std::pair<std::string, std::string>> out;
  out.reserve(fields().size());
  for (const auto& f : fields()) out.emplace_back(f.key, f.get(*this));
  return out;
}

std::string RunConfig::to_text() const {
  std::string out;
  for (const auto& [k, v] : entries()) out += k + "=" + v + "\n";
  return out;
}

RunConfig RunConfig::from_text(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    try {
      cfg.apply_override(t);
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(std::string(e.what()) + " (line " + std::to_string(lineno) + ")");
    }
  }
  return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_text(ss.str());
}

void RunConfig::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write config file " + path.string());
  out << to_text();
}

RunConfig RunConfig::toy() {
  RunConfig cfg;
  cfg.model.backbone_channels = {8, 16, 32, 32};
  cfg.data.crop = 192;
  cfg.data.pairs = 200;
  cfg.data.sampler.points = 256;
  cfg.optim.batch_size = 1;
  cfg.optim.epochs = 5;
  return cfg;
}

}  // namespace mtldesc
