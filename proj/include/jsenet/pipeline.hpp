#pragma once

// Scene preparation, two-stage training and model checkpoints.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "jsenet/config.hpp"
#include "jsenet/labels.hpp"
#include "jsenet/losses.hpp"
#include "jsenet/model.hpp"

namespace jsenet {

// A labeled scene on the training grid. `raw` keeps the original points for
// projecting predictions back.
struct PreparedScene {
  std::string name;
  PointCloud raw;
  PointCloud cloud;
  SemanticEdgeLabels edges;  // on `cloud`
};

// Subsamples at `cell`; edge labels are computed on the raw points at
// `edge_radius` and OR-ed into the subsampled points.
PreparedScene prepare_scene(std::string name, PointCloud raw, int num_classes, double cell, double edge_radius);

// Per-sphere supervision.
struct SphereTargets {
  OneHotMask one_hot;
  SemanticEdgeLabels edges;
  Tensor edge_truth;                  // N x K
  std::vector<std::uint8_t> binary;   // any edge bit
  std::vector<std::uint8_t> valid;    // label != -1
  SkewWeights beta;                   // over valid points
  Tensor activation_truth;            // emg_gt of the one-hot mask
};

SphereTargets make_targets(const PointCloud& sphere, const SemanticEdgeLabels& edges, const MeanFilter& filter,
                           int num_classes);

// Sphere around `center` on the scene grid, with targets.
struct Sphere {
  PointCloud cloud;  // source_indices index the scene's subsampled cloud
  ModelInput input;
  SphereTargets targets;
};

Sphere make_sphere(const PreparedScene& scene, const Vec3& center, const TrainConfig& config,
                   const ModelConfig& model, std::uint64_t augment_seed, bool augment_points);

// Objective of one stage (1 or 2) on computed outputs.
struct StageLoss {
  Tensor total;
  LossComponents parts;
};
StageLoss stage_loss(Tape& tape, int stage, const JSENetOutputs& out, const SphereTargets& targets,
                     const LossWeights& weights);

// The stage's objective in inference mode, no gradients recorded.
double evaluate_objective(JSENet& model, const Sphere& sphere, int stage, const LossWeights& weights);

struct StepRecord {
  int stage = 0;
  int epoch = 0;
  int step = 0;  // global step within the stage
  double lr = 0;
  double loss = 0;
};

struct TrainHooks {
  std::filesystem::path checkpoint_dir;  // empty: no periodic checkpoints
  std::ostream* loss_csv = nullptr;
  std::function<void(int stage, int epoch)> on_epoch_end;
  std::string config_text;  // stored in checkpoints
};

struct StageReport {
  std::vector<StepRecord> steps;
  double first_loss = 0;
  double best_loss = 0;
  double final_loss = 0;
};

// Stage 1 trains theta and phi; stage 2 trains gamma with theta and phi frozen.
// Each stage has its own random stream and restarts the schedule. After stage 1
// the parameters are rounded to checkpoint precision so a stage-2 run from the
// saved checkpoint is exactly the same computation.
StageReport train_stage(JSENet& model, const std::vector<PreparedScene>& scenes, const TrainConfig& config, int stage,
                        const TrainHooks& hooks = {});

// Checkpoint = every parameter and buffer plus header entries carrying the
// kernel layout and the configuration text.
void save_model(const std::filesystem::path& path, const JSENet& model, const std::string& config_text);

struct LoadedModel {
  TrainConfig config;
  std::unique_ptr<JSENet> model;
};
LoadedModel load_model(const std::filesystem::path& path);

// Number of worker threads: JSENET_THREADS if set, else the hardware count.
std::size_t worker_count();

}  // namespace jsenet
