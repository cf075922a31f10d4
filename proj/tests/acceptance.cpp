// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <spdlog/spdlog.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "jsenet/checkpoint.hpp"
#include "jsenet/config.hpp"
#include "jsenet/edgegen.hpp"
#include "jsenet/gradcheck.hpp"
#include "jsenet/metrics.hpp"
#include "jsenet/optimizer.hpp"
#include "jsenet/pipeline.hpp"
#include "jsenet/spatial_index.hpp"
#include "jsenet/toy.hpp"
#include "jsenet/voting.hpp"
#include "oracles/oracles.hpp"
#include "test_support.hpp"

#ifndef JSENET_SOURCE_DIR
#define JSENET_SOURCE_DIR "."
#endif

using namespace jsenet;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

std::map<int, std::pair<bool, std::string>> results;

void report(int id, bool ok, const std::string& what) { results[id] = {ok, what}; }

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::string bytes_of(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<Real> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

// ------------------------------------------------------------------ 1

void criterion_scope() {
  const fs::path readme = fs::path(JSENET_SOURCE_DIR) / "README.md";
  const std::string text = bytes_of(readme);
  const bool ok = text.find("## Scope") != std::string::npos && text.find("not reproduced") != std::string::npos;
  report(1, ok, "full-scale benchmark numbers documented as out of scope in README.md");
}

// ------------------------------------------------------------------ 2

void criterion_gradients() {
  const auto t0 = Clock::now();
  bool ok = sizeof(Real) == 8;
  double worst = 0;
  std::string names;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    for (const auto& r : run_gradient_suites(seed, 1e-4)) {
      ok = ok && r.passed;
      worst = std::max(worst, r.max_relative_error);
      if (seed == 1) names += (names.empty() ? "" : ",") + r.name;
    }
  }
  const double secs = seconds_since(t0);
  ok = ok && secs < 60;
  char buf[256];
  std::snprintf(buf, sizeof buf, "gradient suites [%s] worst relative error %.2e (< 1e-4, %s), %.1f s (< 60 s)",
                names.c_str(), worst, sizeof(Real) == 8 ? "64-bit" : "32-bit build", secs);
  report(2, ok, buf);
}

// ------------------------------------------------------------------ 3

void criterion_oracles() {
  using namespace testing_support;
  const auto t0 = Clock::now();
  std::map<std::string, int> matched;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto f = oracle::make_fixture(1000 + seed, 500, 4);
    const auto pos = to_vec3(f.pos);
    const auto labels = to_i32(f.labels), pred = to_i32(f.pred);
    const double radius = 0.02, cell = 0.03;

    const auto masks = oracle::edge_masks(f.pos, f.labels, radius);
    matched["edge_labels"] += generate_edge_labels(pos, labels, f.k, radius).masks == masks;

    const auto nb = oracle::neighbors(f.pos, f.pos, 0.03);
    const IndexGroups got = radius_neighbors(pos, pos, 0.03);
    bool same = got.size() == nb.size();
    for (std::size_t i = 0; same && i < nb.size(); ++i) {
      const auto g = got.group(i);
      same = std::vector<std::uint32_t>(g.begin(), g.end()) == nb[i];
    }
    matched["radius_neighbors"] += same;

    const auto sub = oracle::subsample(f.pos, f.labels, f.k, cell);
    const SubsampleResult s = grid_subsample(to_cloud(f), cell);
    same = s.cloud.size() == sub.pos.size();
    for (std::size_t i = 0; same && i < sub.pos.size(); ++i) {
      same = s.cloud.positions[i] == Vec3(sub.pos[i].x, sub.pos[i].y, sub.pos[i].z) && s.cloud.labels[i] == sub.labels[i];
      const auto m = s.members.group(i);
      same = same && std::vector<std::uint32_t>(m.begin(), m.end()) == sub.members[i];
    }
    matched["grid_subsample"] += same;

    matched["miou"] += miou(pred, labels, f.k).mean == oracle::miou(f.pred, f.labels, f.k);

    const auto scores = lattice_scores(masks, f.k, seed);
    ThresholdSweep sweep(f.k);
    sweep.add(scores, SemanticEdgeLabels{masks, f.k});
    matched["mf_ods"] += mf_ods(sweep).mean == oracle::mf_ods(scores, masks, f.k);

    const auto b = oracle::boundary(f.pos, f.pred, f.labels, radius);
    const BoundaryScore bs = boundary_fscore(pos, pred, labels, f.k, radius);
    matched["boundary_f"] += bs.precision == b.precision && bs.recall == b.recall && bs.fscore == b.f;
  }
  const double secs = seconds_since(t0);
  bool ok = secs < 30;
  std::string detail;
  for (const auto& [name, count] : matched) {
    ok = ok && count == 20;
    detail += name + " " + std::to_string(count) + "/20, ";
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.1f s (< 30 s)", secs);
  report(3, ok, "exact match with brute-force oracles on 20 x 500 points: " + detail + buf);
}

// ------------------------------------------------------------------ 4

void criterion_emg() {
  using namespace testing_support;
  const auto f = oracle::make_fixture(7, 300, 3);
  const MeanFilter filter = build_mean_filter(to_vec3(f.pos), 0.03);
  Tape tape;
  std::vector<Real> constant;
  for (int i = 0; i < 300; ++i) constant.insert(constant.end(), {Real(0.2), Real(0.3), Real(0.5)});
  bool zeros = true;
  const Tensor flat = emg(tape, Tensor::from({300, 3}, constant), filter);
  for (Real v : flat.data()) zeros = zeros && v == 0;

  const std::vector<Vec3> two{{0, 0, 0}, {0.05, 0, 0}};
  bool half = true;
  const Tensor split = emg(tape, Tensor::from({2, 2}, {1, 0, 0, 1}), build_mean_filter(two, 0.1));
  for (Real v : split.data()) half = half && v == Real(0.5);

  auto labels = to_i32(f.labels);
  for (auto& l : labels) l = std::max(l, 0);
  const OneHotMask truth = one_hot(labels, 3);
  const Tensor a = emg(tape, truth.values, filter), b = emg_gt(truth, filter);
  const bool same = values(a) == values(b);
  report(4, zeros && half && same,
         std::string("constant mask -> zeros ") + (zeros ? "exact" : "NOT exact") + ", two-point case -> 0.5 " +
             (half ? "exact" : "NOT exact") + ", emg(one_hot) == emg_gt " + (same ? "exact" : "NOT exact"));
}

// ------------------------------------------------------------------ 5, 6, 8

TrainConfig toy_config() {
  TrainConfig c;
  c.num_classes = kToyClasses;
  c.stage_channels = {16, 32, 64, 128, 256};
  c.stage1_epochs = 100;
  c.stage2_epochs = 50;
  c.steps_per_epoch = 10;
  c.lr = 0.01;
  c.lr_decay_epochs = 100;
  c.seed = 0;
  return c;
}

struct ToyMetrics {
  double miou = 0, mmf = 0;
};

ToyMetrics training_metrics(const JSENet& model, const PreparedScene& scene, double radius) {
  VotingOptions o;
  o.sphere_radius = radius;
  const ScenePrediction p = predict_grid(model, scene, o);
  ThresholdSweep sweep(kToyClasses);
  sweep.add(p.edges, scene.edges);
  return {miou(p.labels, scene.cloud.labels, kToyClasses).mean, mf_ods(sweep).mean};
}

std::map<std::string, std::vector<float>> sections(const fs::path& path, std::string_view prefix) {
  std::map<std::string, std::vector<float>> out;
  for (auto& t : read_checkpoint(path))
    if (has_prefix(t.name, prefix)) out[t.name] = std::move(t.values);
  return out;
}

void criteria_toy(const fs::path& work) {
  const auto t0 = Clock::now();
  const TrainConfig config = toy_config();
  const std::string config_text = format_config(config);
  const std::vector<PreparedScene> scenes{
      prepare_scene("toy", make_toy_scene(1), kToyClasses, config.grid_cell, config.edge_radius)};
  const PreparedScene& scene = scenes[0];
  spdlog::info("toy scene: {} raw points, {} on the training grid", scene.raw.size(), scene.cloud.size());

  JSENet model(config.model_config());
  const StageReport r1 = train_stage(model, scenes, config, 1);
  save_model(work / "stage1.jsec", model, config_text);

  // Objective of the frozen stage-1 outputs: the stage-2 loss with the
  // refinement module bypassed, on a fixed sphere covering the scene.
  const Sphere eval = make_sphere(scene, Vec3(1, 1, 0.25), config, model.config(), 0, false);
  const LossWeights weights = config.loss_weights();
  // Converged stage-1 loss: the stage-1 objective of the trained model on that sphere.
  const double stage1_converged = evaluate_objective(model, eval, 1, weights);
  double last_epoch_mean = 0;
  const std::size_t last_n = std::min<std::size_t>(r1.steps.size(), static_cast<std::size_t>(config.steps_per_epoch));
  for (std::size_t i = r1.steps.size() - last_n; i < r1.steps.size(); ++i) last_epoch_mean += r1.steps[i].loss / last_n;
  model.set_use_jrm(false);
  const double stage1_best = evaluate_objective(model, eval, 2, weights);
  const ToyMetrics unrefined = training_metrics(model, scene, config.sphere_radius);

  // Ablation wiring on the trained model.
  bool bypass_exact = true;
  {
    Tape tape;
    const auto out = model.forward(tape, eval.input);
    bypass_exact = values(out.ssp_refined) == values(out.ssp_unrefined) &&
                   values(out.sep_refined) == values(out.edge_unrefined);
    model.set_use_jrm(true);
    const auto with = model.forward(tape, eval.input);
    bypass_exact = bypass_exact && values(with.ssp_unrefined) == values(out.ssp_unrefined) &&
                   values(with.sep_unrefined) == values(out.sep_unrefined);
  }

  double stage2_best = std::numeric_limits<double>::infinity();
  TrainHooks hooks;
  hooks.on_epoch_end = [&](int, int) { stage2_best = std::min(stage2_best, evaluate_objective(model, eval, 2, weights)); };
  const StageReport r2 = train_stage(model, scenes, config, 2, hooks);
  save_model(work / "stage2.jsec", model, config_text);
  const ToyMetrics refined = training_metrics(model, scene, config.sphere_radius);
  const double secs = seconds_since(t0);
  const std::size_t steps = r1.steps.size() + r2.steps.size();

  const bool ok = refined.miou >= 0.95 && refined.mmf >= 0.50 && stage2_best <= stage1_best && steps <= 2000 &&
                  secs <= 15 * 60;
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "toy scene (%zu points), %zu steps: mIoU %.4f (>= 0.95), mMF %.4f (>= 0.50) [stage-1 only: %.4f / %.4f]; "
                "best objective stage 2 %.4f <= stage 1 %.4f; %.0f s (<= 900 s); stage-1 loss %.3f at step 1 -> %.4f converged "
                "(last epoch mean %.3f)",
                scene.cloud.size(), steps, refined.miou, refined.mmf, unrefined.miou, unrefined.mmf, stage2_best,
                stage1_best, secs, r1.first_loss, stage1_converged, last_epoch_mean);
  report(5, ok, buf);

  const auto theta1 = sections(work / "stage1.jsec", kThetaPrefix), theta2 = sections(work / "stage2.jsec", kThetaPrefix);
  const auto phi1 = sections(work / "stage1.jsec", kPhiPrefix), phi2 = sections(work / "stage2.jsec", kPhiPrefix);
  const auto g1 = sections(work / "stage1.jsec", kGammaPrefix), g2 = sections(work / "stage2.jsec", kGammaPrefix);
  const bool frozen = !theta1.empty() && !phi1.empty() && theta1 == theta2 && phi1 == phi2 && g1 != g2;
  report(6, bypass_exact && frozen,
         std::string("bypass reproduces unrefined outputs ") + (bypass_exact ? "bit-exactly" : "NOT exactly") +
             "; stage 2 leaves " + std::to_string(theta1.size() + phi1.size()) + " theta/phi checkpoint tensors " +
             (frozen ? "bit-unchanged" : "CHANGED or gamma untouched"));

  // Voting order invariance on the trained model.
  VotingOptions o;
  o.sphere_radius = 0.8;
  const ScenePrediction base = predict_grid(model, scene, o);
  bool invariant = base.spheres > 1;
  for (std::uint64_t seed : {11, 12, 13}) {
    VotingOptions s = o;
    s.shuffle_seed = seed;
    s.threads = seed % 2 ? 1 : 2;
    const ScenePrediction p = predict_grid(model, scene, s);
    invariant = invariant && p.probabilities == base.probabilities && p.edges == base.edges;
  }

  // Two seeded runs of a shorter schedule.
  TrainConfig short_cfg = config;
  short_cfg.stage1_epochs = 2;
  short_cfg.stage2_epochs = 2;
  short_cfg.seed = 42;
  for (int run = 0; run < 2; ++run) {
    JSENet m(short_cfg.model_config());
    train_stage(m, scenes, short_cfg, 1);
    train_stage(m, scenes, short_cfg, 2);
    save_model(work / ("determinism" + std::to_string(run) + ".jsec"), m, format_config(short_cfg));
  }
  const std::string a = bytes_of(work / "determinism0.jsec"), b = bytes_of(work / "determinism1.jsec");
  const bool identical = !a.empty() && a == b;
  report(8, identical && invariant,
         std::string("two seeded training runs: checkpoints ") + (identical ? "byte-identical" : "DIFFER") + " (" +
             std::to_string(a.size()) + " bytes); voting over " + std::to_string(base.spheres) + " spheres " +
             (invariant ? "invariant" : "NOT invariant") + " to sphere order and thread count");
}

// ------------------------------------------------------------------ 7

void criterion_schedule() {
  TrainConfig c;
  bool ok = true;
  std::string detail;
  for (int k : {3, 13, 20}) {
    c.num_classes = k;
    ok = ok && c.loss_weights().seg == Real(k);
  }
  c.num_classes = 13;
  detail += "lambda_0 = " + std::to_string(static_cast<int>(c.loss_weights().seg)) + " for K = 13";
  const double lr100 = scheduled_learning_rate(Real(c.lr), 100, c.lr_decay_epochs);
  const double lr200 = scheduled_learning_rate(Real(c.lr), 200, c.lr_decay_epochs);
  ok = ok && std::abs(lr100 - 1e-3) <= 1e-12 && std::abs(lr200 - 1e-4) <= 1e-12;
  char buf[128];
  std::snprintf(buf, sizeof buf, "; lr(100) = %.6g, lr(200) = %.6g", lr100, lr200);
  report(7, ok, detail + buf);
}

}  // namespace

int main() {
  spdlog::set_level(spdlog::level::warn);
  const fs::path work = fs::temp_directory_path() / "jsenet_acceptance";
  fs::remove_all(work);
  fs::create_directories(work);
  try {
    criterion_scope();
    criterion_gradients();
    criterion_oracles();
    criterion_emg();
    criterion_schedule();
    criteria_toy(work);
  } catch (const std::exception& e) {
    std::printf("acceptance aborted: %s\n", e.what());
  }
  int failures = 0;
  for (int id = 1; id <= 8; ++id) {
    const auto it = results.find(id);
    const bool ok = it != results.end() && it->second.first;
    std::printf("%s criterion %d: %s\n", ok ? "PASS" : "FAIL", id,
                it == results.end() ? "not evaluated" : it->second.second.c_str());
    failures += !ok;
  }
  std::printf("%d of 8 criteria failed\n", failures);
  return failures ? 1 : 0;
}
