#pragma once

// Training configuration. The flat text form is one `key = value` per line;
// '#' starts a comment. Unknown keys are rejected.

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "jsenet/losses.hpp"
#include "jsenet/model.hpp"

namespace jsenet {

struct TrainConfig {
  double sphere_radius = 2.0;
  double grid_cell = 0.04;
  double lr = 0.01;
  double momentum = 0.98;
  double lr_decay_epochs = 100;  // the rate drops tenfold over this many epochs
  int stage1_epochs = 350;
  int stage2_epochs = 150;
  int steps_per_epoch = 500;
  double lambda_seg = 0;  // 0 means "number of classes"
  double lambda_edge = 1;
  double lambda_bce = 1;
  double lambda_dual = 1;
  double emg_radius = 0.10;
  double edge_radius = 0.02;
  std::uint64_t seed = 0;
  int checkpoint_every = 10;
  bool augment = true;
  int min_sphere_points = 16;
  int sphere_retries = 32;

  int num_classes = 13;
  std::vector<int> stage_channels{64, 128, 256, 512, 1024};
  int blocks_per_stage = 2;
  int sed_channels = 32;
  int fusion_channels = 32;
  bool use_jrm = true;

  void validate() const;
  ModelConfig model_config() const;
  LossWeights loss_weights() const;
};

struct ConfigKey {
  std::string name;
  std::string help;
  std::function<void(TrainConfig&, std::string_view)> set;
  std::function<std::string(const TrainConfig&)> get;
};

const std::vector<ConfigKey>& config_keys();

// Throws InputError on unknown keys or unparsable values.
void set_config_value(TrainConfig& config, std::string_view key, std::string_view value);
TrainConfig parse_config(std::string_view text, TrainConfig base = {});
TrainConfig load_config(const std::string& path, TrainConfig base = {});
std::string format_config(const TrainConfig& config);

}  // namespace jsenet
