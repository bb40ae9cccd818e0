#include "vtp/run_config.hpp"

#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace vtp {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

const std::map<std::string, std::string>& default_values() {
  static const std::map<std::string, std::string> defaults = {
      {"seed", "0"},
      {"vocab.vq_size", "8192"},
      {"model.layers", "6"},
      {"model.dim", "512"},
      {"model.heads", "8"},
      {"model.head_dim", "64"},
      {"model.mlp_dim", "2048"},
      {"model.max_t", "5"},
      {"model.max_h", "16"},
      {"model.max_w", "16"},
      {"model.dropout", "0.1"},
      {"model.layout", "T,H|W"},
      {"model.ln_position", "post"},
      {"model.scale_attention", "true"},
      {"model.normalize_cl_features", "false"},
      {"model.ln_eps", "1e-5"},
      {"model.bn_eps", "1e-5"},
      {"model.bn_momentum", "0.1"},
      {"model.init_std", "0.02"},
      {"model.cl_layers", "3"},
      {"model.cl_intermediate", "4096"},
      {"model.cl_output", "256"},
      {"model.num_classes", "0"},
      {"masking.strategy", "block"},
      {"masking.blocks", "5"},
      {"masking.xi", "0.15"},
      {"sampler.clip_len", "5"},
      {"sampler.d_max", "inf"},
      {"train.group_size", "256"},
      {"train.accumulation_target", "1024"},
      {"train.epochs", "100"},
      {"train.steps_per_epoch", "0"},
      {"train.peak_lr", "3e-4"},
      {"train.warmup_ratio", "0.05"},
      {"train.weight_decay", "0.05"},
      {"train.adam_beta1", "0.9"},
      {"train.adam_beta2", "0.98"},
      {"train.adam_eps", "1e-8"},
      {"train.clip_norm", "1.0"},
      {"train.cl_input_masked", "true"},
      {"train.linear_probe", "false"},
      {"objective.alpha", "1.0"},
      {"objective.gamma", "0.1"},
      {"objective.pure_cl", "false"},
      {"crop.spatial", "center"},
      {"crop.temporal", "10"},
      {"crop.flip", "false"},
      {"quantizer.patch", "8"},
      {"quantizer.fps", "2"},
  };
  return defaults;
}

}  // namespace

RunConfig::RunConfig() : values_(default_values()) {}

RunConfig RunConfig::from_text(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  " has no '=': " + stripped);
    cfg.set(trim(stripped.substr(0, eq)), trim(stripped.substr(eq + 1)));
  }
  return cfg;
}

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::invalid_argument("cannot open config: " + path);
  std::stringstream buffer;
  buffer << f.rdbuf();
  return from_text(buffer.str());
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (!values_.contains(key))
    throw std::invalid_argument("unknown config key: " + key);
  values_[key] = value;
}

const std::string& RunConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end())
    throw std::invalid_argument("unknown config key: " + key);
  return it->second;
}

std::string RunConfig::resolved_dump() const {
  std::string out;
  for (const auto& [key, value] : values_) out += key + " = " + value + "\n";
  return out;
}

int RunConfig::get_int(const std::string& key) const {
  try {
    std::size_t used = 0;
    const int v = std::stoi(get(key), &used);
    if (used != get(key).size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("config key " + key +
                                " wants an integer, got '" + get(key) + "'");
  }
}

double RunConfig::get_double(const std::string& key) const {
  const std::string& raw = get(key);
  if (raw == "inf") return std::numeric_limits<double>::infinity();
  try {
    std::size_t used = 0;
    const double v = std::stod(raw, &used);
    if (used != raw.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("config key " + key + " wants a number, got '" +
                                raw + "'");
  }
}

bool RunConfig::get_bool(const std::string& key) const {
  const std::string& raw = get(key);
  if (raw == "true") return true;
  if (raw == "false") return false;
  throw std::invalid_argument("config key " + key +
                              " wants true or false, got '" + raw + "'");
}

std::uint64_t RunConfig::seed() const {
  return static_cast<std::uint64_t>(std::stoull(get("seed")));
}

ModelConfig RunConfig::model_config() const {
  ModelConfig cfg;
  cfg.layers = get_int("model.layers");
  cfg.dim = get_int("model.dim");
  cfg.heads = get_int("model.heads");
  cfg.head_dim = get_int("model.head_dim");
  cfg.mlp_dim = get_int("model.mlp_dim");
  cfg.vocab = Vocabulary::with_vq_size(get_int("vocab.vq_size"));
  cfg.max_t = get_int("model.max_t");
  cfg.max_h = get_int("model.max_h");
  cfg.max_w = get_int("model.max_w");
  cfg.dropout = get_double("model.dropout");
  cfg.layout = parse_layout(get("model.layout"));
  const std::string ln = get("model.ln_position");
  if (ln == "post") {
    cfg.ln_position = LayerNormPosition::kPost;
  } else if (ln == "pre") {
    cfg.ln_position = LayerNormPosition::kPre;
  } else {
    throw std::invalid_argument("model.ln_position wants post or pre, got '" +
                                ln + "'");
  }
  cfg.scale_attention = get_bool("model.scale_attention");
  cfg.normalize_cl_features = get_bool("model.normalize_cl_features");
  cfg.ln_eps = get_double("model.ln_eps");
  cfg.bn_eps = get_double("model.bn_eps");
  cfg.bn_momentum = get_double("model.bn_momentum");
  cfg.init_std = get_double("model.init_std");
  cfg.cl_head = ClHeadConfig{get_int("model.cl_layers"),
                             get_int("model.cl_intermediate"),
                             get_int("model.cl_output")};
  cfg.num_classes = get_int("model.num_classes");
  cfg.init_seed = seed();
  cfg.validate();
  return cfg;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig cfg;
  cfg.group_size = get_int("train.group_size");
  cfg.accumulation_target = get_int("train.accumulation_target");
  cfg.epochs = get_int("train.epochs");
  cfg.steps_per_epoch = get_int("train.steps_per_epoch");
  cfg.peak_lr = get_double("train.peak_lr");
  cfg.warmup_ratio = get_double("train.warmup_ratio");
  cfg.weight_decay = get_double("train.weight_decay");
  cfg.adam_beta1 = get_double("train.adam_beta1");
  cfg.adam_beta2 = get_double("train.adam_beta2");
  cfg.adam_eps = get_double("train.adam_eps");
  cfg.clip_norm = get_double("train.clip_norm");
  cfg.cl_input_masked = get_bool("train.cl_input_masked");
  cfg.linear_probe = get_bool("train.linear_probe");
  const std::string strategy = get("masking.strategy");
  if (strategy == "block") {
    cfg.masking.strategy = MaskStrategy::kBlock;
  } else if (strategy == "iid") {
    cfg.masking.strategy = MaskStrategy::kIid;
  } else {
    throw std::invalid_argument("masking.strategy wants block or iid, got '" +
                                strategy + "'");
  }
  cfg.masking.num_blocks = get_int("masking.blocks");
  cfg.masking.xi = get_double("masking.xi");
  cfg.masking.seed = seed();
  cfg.sampler.clip_len = get_int("sampler.clip_len");
  cfg.sampler.d_max = get_double("sampler.d_max");
  cfg.sampler.seed = seed();
  cfg.objective.alpha = get_double("objective.alpha");
  cfg.objective.contrastive.temperature = get_double("objective.gamma");
  cfg.objective.contrastive.n = cfg.group_size / 2;
  cfg.objective.pure_cl = get_bool("objective.pure_cl");
  cfg.seed = seed();
  return cfg;
}

CropConfig RunConfig::crop_config() const {
  CropConfig cfg;
  const std::string spatial = get("crop.spatial");
  if (spatial == "center") {
    cfg.three_spatial = false;
  } else if (spatial == "three") {
    cfg.three_spatial = true;
  } else {
    throw std::invalid_argument("crop.spatial wants center or three, got '" +
                                spatial + "'");
  }
  cfg.temporal = get_int("crop.temporal");
  if (cfg.temporal < 1)
    throw std::invalid_argument("crop.temporal must be >= 1");
  cfg.flip = get_bool("crop.flip");
  return cfg;
}

ToyQuantizerConfig RunConfig::quantizer_config() const {
  ToyQuantizerConfig cfg;
  cfg.patch = get_int("quantizer.patch");
  cfg.vq_size = get_int("vocab.vq_size");
  cfg.seed = seed();
  return cfg;
}

}  // namespace vtp
