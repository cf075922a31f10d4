#include "jsenet/pipeline.hpp"

#include <cmath>
#include <cstdlib>
#include <fmt/format.h>
#include <ostream>
#include <random>
#include <spdlog/spdlog.h>
#include <thread>

#include "jsenet/checkpoint.hpp"
#include "jsenet/optimizer.hpp"

namespace jsenet {

namespace {

constexpr const char* kKernelEntry = "header/kernel_points";
constexpr const char* kConfigEntry = "header/config";

Rng stage_rng(std::uint64_t seed, int stage) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(100 + stage)};
  return Rng(seq);
}

SemanticEdgeLabels edges_of(const SemanticEdgeLabels& scene, std::span<const std::uint32_t> rows) {
  SemanticEdgeLabels out;
  out.num_classes = scene.num_classes;
  out.masks.reserve(rows.size());
  for (std::uint32_t r : rows) out.masks.push_back(scene.masks[r]);
  return out;
}

}  // namespace

PreparedScene prepare_scene(std::string name, PointCloud raw, int num_classes, double cell, double edge_radius) {
  raw.validate(num_classes);
  require(!raw.empty(), "prepare_scene: scene " + name + " has no points");
  PreparedScene scene;
  scene.name = std::move(name);
  const SemanticEdgeLabels fine = generate_edge_labels(raw, num_classes, edge_radius);
  SubsampleResult sub = grid_subsample(raw, cell);
  scene.edges = transfer_edge_labels(fine, sub.members);
  scene.cloud = std::move(sub.cloud);
  scene.cloud.source_indices.clear();
  scene.raw = std::move(raw);
  return scene;
}

SphereTargets make_targets(const PointCloud& sphere, const SemanticEdgeLabels& edges, const MeanFilter& filter,
                           int num_classes) {
  require(edges.size() == sphere.size(), "targets: edge labels do not match the sphere");
  SphereTargets t;
  t.one_hot = one_hot(sphere.labels, num_classes);
  t.edges = edges;
  t.edge_truth = edge_truth_matrix(edges);
  t.binary = to_binary_edges(edges);
  t.valid.resize(sphere.size());
  for (std::size_t i = 0; i < sphere.size(); ++i) t.valid[i] = sphere.labels[i] != kIgnoreLabel;
  if (t.one_hot.valid_count() > 0) t.beta = skew_weights(edges, t.valid);
  else t.beta.per_class.assign(static_cast<std::size_t>(num_classes), 1.0);
  t.activation_truth = emg_gt(t.one_hot, filter);
  return t;
}

Sphere make_sphere(const PreparedScene& scene, const Vec3& center, const TrainConfig& config,
                   const ModelConfig& model, std::uint64_t augment_seed, bool augment_points) {
  Sphere s;
  s.cloud = sample_sphere(scene.cloud, center, config.sphere_radius);
  require(!s.cloud.empty(), "sphere: no points within the radius");
  for (Vec3& p : s.cloud.positions) p -= center;
  if (augment_points) s.cloud = augment(s.cloud, augment_seed);
  s.input = prepare_model_input(s.cloud, model);
  s.targets = make_targets(s.cloud, edges_of(scene.edges, s.cloud.source_indices), s.input.emg_filter,
                           model.num_classes);
  return s;
}

StageLoss stage_loss(Tape& tape, int stage, const JSENetOutputs& out, const SphereTargets& t,
                     const LossWeights& weights) {
  require(stage == 1 || stage == 2, "stage_loss: stage must be 1 or 2");
  StageLoss r;
  const auto& valid = t.valid;
  if (stage == 1) {
    r.parts.seg.push_back(loss_seg(tape, t.one_hot, out.prob_unrefined));
    for (const Tensor& head : out.ssp_heads) r.parts.seg.push_back(loss_seg(tape, t.one_hot, ops::softmax_rows(tape, head)));
    r.parts.edge = loss_edge(tape, t.edge_truth, out.edge_unrefined, t.beta.per_class, valid);
    for (const Tensor& head : out.binary_heads)
      r.parts.bce.push_back(loss_bce(tape, t.binary, ops::sigmoid(tape, head), t.beta.overall, valid));
  } else {
    require(out.prob_refined.defined(), "stage_loss: stage 2 needs refined outputs");
    r.parts.seg.push_back(loss_seg(tape, t.one_hot, out.prob_refined));
    r.parts.edge = loss_edge(tape, t.edge_truth, out.sep_refined, t.beta.per_class, valid);
    r.parts.dual.push_back(loss_dual(tape, t.activation_truth, out.act_input, t.beta.overall, valid));
    r.parts.dual.push_back(loss_dual(tape, t.activation_truth, out.act_refined, t.beta.overall, valid));
  }
  r.total = loss_total(tape, r.parts, weights);
  return r;
}

double evaluate_objective(JSENet& model, const Sphere& sphere, int stage, const LossWeights& weights) {
  const Phase saved = model.phase();
  model.set_phase(Phase::kInference);
  Tape tape;
  const JSENetOutputs out = model.forward(tape, sphere.input);
  const double value = stage_loss(tape, stage, out, sphere.targets, weights).total.item();
  model.set_phase(saved);
  return value;
}

namespace {

std::string describe(const LossComponents& parts) {
  std::string s;
  auto add = [&s](const char* name, const Tensor& t) {
    if (t.defined()) s += fmt::format(" {}={}", name, t.item());
  };
  for (const Tensor& t : parts.seg) add("seg", t);
  add("edge", parts.edge);
  for (const Tensor& t : parts.bce) add("bce", t);
  for (const Tensor& t : parts.dual) add("dual", t);
  return s;
}

}  // namespace

StageReport train_stage(JSENet& model, const std::vector<PreparedScene>& scenes, const TrainConfig& config, int stage,
                        const TrainHooks& hooks) {
  config.validate();
  require(stage == 1 || stage == 2, "train: stage must be 1 or 2");
  require(!scenes.empty(), "train: no scenes");
  require(stage == 1 || model.config().use_jrm, "train: stage 2 needs the refinement module");
  for (const auto& s : scenes) require(!s.cloud.empty(), "train: scene " + s.name + " is empty");

  model.set_phase(stage == 1 ? Phase::kStage1 : Phase::kStage2);
  std::vector<Tensor> params;
  for (const auto& e : model.store().entries())
    if (e.trainable && e.tensor.requires_grad()) params.push_back(e.tensor);
  MomentumOptimizer optimizer(params, static_cast<Real>(config.lr), static_cast<Real>(config.momentum));
  const LossWeights weights = config.loss_weights();
  const ModelConfig model_config = model.config();
  Rng rng = stage_rng(config.seed, stage);
  std::uniform_int_distribution<std::size_t> pick_scene(0, scenes.size() - 1);

  StageReport report;
  const int epochs = stage == 1 ? config.stage1_epochs : config.stage2_epochs;
  int step = 0;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    optimizer.set_learning_rate(scheduled_learning_rate(static_cast<Real>(config.lr), epoch, config.lr_decay_epochs));
    for (int i = 0; i < config.steps_per_epoch; ++i, ++step) {
      Sphere sphere;
      for (int attempt = 0;; ++attempt) {
        if (attempt == config.sphere_retries) {
          throw ContractError(fmt::format("train: no sphere with at least {} points after {} draws",
                                          config.min_sphere_points, config.sphere_retries));
        }
        const PreparedScene& scene = scenes[pick_scene(rng)];
        std::uniform_int_distribution<std::size_t> pick_point(0, scene.cloud.size() - 1);
        const Vec3 center = scene.cloud.positions[pick_point(rng)];
        const std::uint64_t augment_seed = rng();
        sphere = make_sphere(scene, center, config, model_config, augment_seed, config.augment);
        if (sphere.cloud.size() >= static_cast<std::size_t>(config.min_sphere_points)) break;
      }
      Tape tape;
      const JSENetOutputs out = model.forward(tape, sphere.input);
      const StageLoss loss = stage_loss(tape, stage, out, sphere.targets, weights);
      const double value = loss.total.item();
      if (!std::isfinite(value)) {
        std::string where = fmt::format("stage {} epoch {} step {}:{}", stage, epoch, step, describe(loss.parts));
        if (!hooks.checkpoint_dir.empty()) {
          const auto dump = hooks.checkpoint_dir / "nan_dump.jsec";
          save_model(dump, model, hooks.config_text);
          where += ", parameters saved to " + dump.string();
        }
        throw ContractError("train: non-finite loss at " + where);
      }
      tape.backward(loss.total);
      optimizer.step();
      optimizer.zero_grad();

      StepRecord rec{stage, epoch, step, static_cast<double>(optimizer.learning_rate()), value};
      report.steps.push_back(rec);
      if (hooks.loss_csv) *hooks.loss_csv << fmt::format("{},{},{},{},{}\n", stage, epoch, step, rec.lr, value);
    }
    spdlog::info("stage {} epoch {}/{} lr {:.3g} loss {:.5f}", stage, epoch + 1, epochs, optimizer.learning_rate(),
                 report.steps.back().loss);
    if (!hooks.checkpoint_dir.empty() && (epoch + 1) % config.checkpoint_every == 0) {
      save_model(hooks.checkpoint_dir / fmt::format("stage{}_epoch{:04d}.jsec", stage, epoch + 1), model,
                 hooks.config_text);
    }
    if (hooks.on_epoch_end) hooks.on_epoch_end(stage, epoch);
  }
  model.store().round_to_checkpoint_precision();
  model.set_phase(Phase::kInference);

  if (!report.steps.empty()) {
    report.first_loss = report.steps.front().loss;
    report.final_loss = report.steps.back().loss;
    report.best_loss = report.first_loss;
    for (const auto& r : report.steps) report.best_loss = std::min(report.best_loss, r.loss);
  }
  return report;
}

void save_model(const std::filesystem::path& path, const JSENet& model, const std::string& config_text) {
  std::vector<CheckpointTensor> tensors;
  CheckpointTensor kernel{kKernelEntry, {kKernelPoints, 3}, {}};
  for (const Vec3& p : KernelLayout::standard().points)
    for (int c = 0; c < 3; ++c) kernel.values.push_back(static_cast<float>(p[c]));
  tensors.push_back(std::move(kernel));
  CheckpointTensor cfg{kConfigEntry, {config_text.size()}, {}};
  for (unsigned char ch : config_text) cfg.values.push_back(static_cast<float>(ch));
  tensors.push_back(std::move(cfg));
  for (auto& t : snapshot(model.store())) tensors.push_back(std::move(t));
  write_checkpoint(path, tensors);
}

LoadedModel load_model(const std::filesystem::path& path) {
  std::vector<CheckpointTensor> tensors = read_checkpoint(path);
  const CheckpointTensor* kernel = nullptr;
  const CheckpointTensor* cfg = nullptr;
  for (const auto& t : tensors) {
    if (t.name == kKernelEntry) kernel = &t;
    if (t.name == kConfigEntry) cfg = &t;
  }
  if (!kernel || !cfg) throw InputError("checkpoint " + path.string() + " has no model header");
  const auto& layout = KernelLayout::standard().points;
  if (kernel->values.size() != kKernelPoints * 3) throw InputError("checkpoint kernel table has the wrong size");
  for (std::size_t k = 0; k < kKernelPoints; ++k)
    for (int c = 0; c < 3; ++c)
      if (kernel->values[k * 3 + static_cast<std::size_t>(c)] != static_cast<float>(layout[k][c]))
        throw InputError("checkpoint was written with a different kernel layout");
  std::string text;
  for (float v : cfg->values) text.push_back(static_cast<char>(static_cast<unsigned char>(v)));

  LoadedModel loaded;
  loaded.config = parse_config(text);
  loaded.model = std::make_unique<JSENet>(loaded.config.model_config());
  const auto extra = restore(loaded.model->store(), tensors);
  for (const auto& name : extra)
    if (name != kKernelEntry && name != kConfigEntry) throw InputError("checkpoint has unknown tensor " + name);
  return loaded;
}

std::size_t worker_count() {
  std::size_t n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("JSENET_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1) n = static_cast<std::size_t>(v);
    else spdlog::warn("ignoring JSENET_THREADS='{}'", env);
  }
  return n;
}

}  // namespace jsenet
