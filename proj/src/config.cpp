#include "jsenet/config.hpp"

#include <charconv>
#include <fmt/format.h>
#include <fmt/ranges.h>
#include <fstream>
#include <sstream>

namespace jsenet {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value) {
  throw InputError(fmt::format("config: bad value '{}' for {}", value, key));
}

double parse_double(std::string_view key, std::string_view v) {
  double out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) bad_value(key, v);
  return out;
}

template <typename Int>
Int parse_int(std::string_view key, std::string_view v) {
  Int out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) bad_value(key, v);
  return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  bad_value(key, v);
}

std::vector<int> parse_int_list(std::string_view key, std::string_view v) {
  std::vector<int> out;
  while (!v.empty()) {
    const auto comma = v.find(',');
    out.push_back(parse_int<int>(key, trim(v.substr(0, comma))));
    if (comma == std::string_view::npos) break;
    v.remove_prefix(comma + 1);
  }
  if (out.empty()) bad_value(key, v);
  return out;
}

std::string show(double v) { return fmt::format("{}", v); }

template <typename T>
ConfigKey number_key(std::string name, std::string help, T TrainConfig::*field) {
  ConfigKey k;
  k.name = name;
  k.help = std::move(help);
  k.set = [field, name](TrainConfig& c, std::string_view v) {
    if constexpr (std::is_floating_point_v<T>)
      c.*field = parse_double(name, v);
    else
      c.*field = parse_int<T>(name, v);
  };
  k.get = [field](const TrainConfig& c) {
    if constexpr (std::is_floating_point_v<T>)
      return show(c.*field);
    else
      return std::to_string(c.*field);
  };
  return k;
}

ConfigKey bool_key(std::string name, std::string help, bool TrainConfig::*field) {
  ConfigKey k;
  k.name = name;
  k.help = std::move(help);
  k.set = [field, name](TrainConfig& c, std::string_view v) { c.*field = parse_bool(name, v); };
  k.get = [field](const TrainConfig& c) { return std::string(c.*field ? "true" : "false"); };
  return k;
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> k;
    k.push_back(number_key("sphere_radius", "input sphere radius (m)", &TrainConfig::sphere_radius));
    k.push_back(number_key("grid_cell", "subsampling cell (m)", &TrainConfig::grid_cell));
    k.push_back(number_key("lr", "initial learning rate", &TrainConfig::lr));
    k.push_back(number_key("momentum", "SGD momentum", &TrainConfig::momentum));
    k.push_back(number_key("lr_decay_epochs", "epochs per tenfold learning-rate drop", &TrainConfig::lr_decay_epochs));
    k.push_back(number_key("stage1_epochs", "epochs without the refinement module", &TrainConfig::stage1_epochs));
    k.push_back(number_key("stage2_epochs", "epochs training the refinement module", &TrainConfig::stage2_epochs));
    k.push_back(number_key("steps_per_epoch", "spheres per epoch", &TrainConfig::steps_per_epoch));
    k.push_back(number_key("lambda_seg", "segmentation weight (0: number of classes)", &TrainConfig::lambda_seg));
    k.push_back(number_key("lambda_edge", "multi-label edge weight", &TrainConfig::lambda_edge));
    k.push_back(number_key("lambda_bce", "binary edge weight", &TrainConfig::lambda_bce));
    k.push_back(number_key("lambda_dual", "edge activation weight", &TrainConfig::lambda_dual));
    k.push_back(number_key("emg_radius", "edge-map mean filter radius (m)", &TrainConfig::emg_radius));
    k.push_back(number_key("edge_radius", "ground-truth edge radius (m)", &TrainConfig::edge_radius));
    k.push_back(number_key("seed", "random seed", &TrainConfig::seed));
    k.push_back(number_key("checkpoint_every", "epochs between checkpoints", &TrainConfig::checkpoint_every));
    k.push_back(bool_key("augment", "random rotation, scaling and jitter", &TrainConfig::augment));
    k.push_back(number_key("min_sphere_points", "redraw spheres with fewer points", &TrainConfig::min_sphere_points));
    k.push_back(number_key("sphere_retries", "redraws before giving up", &TrainConfig::sphere_retries));
    k.push_back(number_key("num_classes", "semantic classes", &TrainConfig::num_classes));
    {
      ConfigKey c;
      c.name = "stage_channels";
      c.help = "encoder widths, comma separated";
      c.set = [](TrainConfig& cfg, std::string_view v) { cfg.stage_channels = parse_int_list("stage_channels", v); };
      c.get = [](const TrainConfig& cfg) { return fmt::format("{}", fmt::join(cfg.stage_channels, ",")); };
      k.push_back(std::move(c));
    }
    k.push_back(number_key("blocks_per_stage", "residual blocks per encoder stage", &TrainConfig::blocks_per_stage));
    k.push_back(number_key("sed_channels", "edge-stream reduction width", &TrainConfig::sed_channels));
    k.push_back(number_key("fusion_channels", "refinement module width", &TrainConfig::fusion_channels));
    k.push_back(bool_key("use_jrm", "enable the refinement module", &TrainConfig::use_jrm));
    return k;
  }();
  return keys;
}

void set_config_value(TrainConfig& config, std::string_view key, std::string_view value) {
  for (const ConfigKey& k : config_keys()) {
    if (k.name == key) {
      k.set(config, trim(value));
      return;
    }
  }
  throw InputError(fmt::format("config: unknown key '{}'", key));
}

TrainConfig parse_config(std::string_view text, TrainConfig base) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw InputError(fmt::format("config: line {} is not 'key = value'", line_no));
    set_config_value(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return base;
}

TrainConfig load_config(const std::string& path, TrainConfig base) {
  std::ifstream in(path);
  if (!in) throw InputError("config: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

std::string format_config(const TrainConfig& config) {
  std::string out;
  for (const ConfigKey& k : config_keys()) out += k.name + " = " + k.get(config) + "\n";
  return out;
}

void TrainConfig::validate() const {
  require(sphere_radius > 0 && grid_cell > 0, "config: sphere radius and grid cell must be positive");
  require(lr > 0 && momentum >= 0 && momentum < 1, "config: need lr > 0 and momentum in [0, 1)");
  require(lr_decay_epochs > 0, "config: lr_decay_epochs must be positive");
  require(stage1_epochs >= 0 && stage2_epochs >= 0 && steps_per_epoch > 0, "config: bad epoch counts");
  require(lambda_seg >= 0 && lambda_edge >= 0 && lambda_bce >= 0 && lambda_dual >= 0,
          "config: loss weights must be non-negative");
  require(emg_radius > 0 && edge_radius > 0, "config: radii must be positive");
  require(checkpoint_every > 0, "config: checkpoint_every must be positive");
  require(min_sphere_points >= 1 && sphere_retries >= 1, "config: bad sphere sampling limits");
  model_config().validate();
}

ModelConfig TrainConfig::model_config() const {
  ModelConfig m;
  m.num_classes = num_classes;
  m.stage_channels = stage_channels;
  m.blocks_per_stage = blocks_per_stage;
  m.base_cell = grid_cell;
  m.sed_channels = sed_channels;
  m.fusion_channels = fusion_channels;
  m.emg_radius = emg_radius;
  m.use_jrm = use_jrm;
  m.seed = seed;
  return m;
}

LossWeights TrainConfig::loss_weights() const {
  LossWeights w = LossWeights::for_classes(num_classes);
  if (lambda_seg > 0) w.seg = static_cast<Real>(lambda_seg);
  w.edge = static_cast<Real>(lambda_edge);
  w.bce = static_cast<Real>(lambda_bce);
  w.dual = static_cast<Real>(lambda_dual);
  return w;
}

}  // namespace jsenet
