// Command-line front end: data preparation, training, inference, evaluation
// and the built-in checks.

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>

#include "jsenet/config.hpp"
#include "jsenet/gradcheck.hpp"
#include "jsenet/labels.hpp"
#include "jsenet/metrics.hpp"
#include "jsenet/pipeline.hpp"
#include "jsenet/ply.hpp"
#include "jsenet/selftest.hpp"
#include "jsenet/toy.hpp"
#include "jsenet/voting.hpp"

#ifndef JSENET_SOURCE_DIR
#define JSENET_SOURCE_DIR "."
#endif

namespace fs = std::filesystem;
using namespace jsenet;

namespace {

std::string flag_name(const std::string& key) {
  std::string out = "--" + key;
  for (char& c : out)
    if (c == '_') c = '-';
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

SemanticEdgeLabels load_gt_edges(const fs::path& path, int k, double radius) {
  if (path.extension() == ".sepm") return read_edge_labels(path);
  return generate_edge_labels(read_ply_cloud(path), k, radius);
}

std::vector<double> read_score_columns(const PlyData& ply, const std::string& prefix, int k, const fs::path& path) {
  std::vector<double> out(ply.vertex_count * static_cast<std::size_t>(k));
  for (int c = 0; c < k; ++c) {
    const auto* col = ply.find(prefix + std::to_string(c));
    if (!col) throw InputError(path.string() + " has no property " + prefix + std::to_string(c));
    for (std::size_t i = 0; i < ply.vertex_count; ++i) out[i * static_cast<std::size_t>(k) + static_cast<std::size_t>(c)] = (*col)[i];
  }
  return out;
}

struct TrainArgs {
  std::string config_path;
  std::vector<std::pair<std::string, std::string>> overrides;
  std::vector<std::string> scenes;
  std::string out_dir = "run";
  std::string init;
  int stage = 0;
};

int run_train(TrainArgs& args) {
  TrainConfig config;
  if (!args.config_path.empty()) config = load_config(args.config_path);
  for (const auto& [key, value] : args.overrides) set_config_value(config, key, value);
  config.validate();
  const std::string config_text = format_config(config);

  std::vector<PreparedScene> scenes;
  for (const auto& path : args.scenes) {
    PointCloud raw = read_ply_cloud(path);
    scenes.push_back(prepare_scene(path, std::move(raw), config.num_classes, config.grid_cell, config.edge_radius));
    spdlog::info("{}: {} points, {} after subsampling", path, scenes.back().raw.size(), scenes.back().cloud.size());
  }
  fs::create_directories(args.out_dir);
  write_text(fs::path(args.out_dir) / "config.txt", config_text);
  std::ofstream csv(fs::path(args.out_dir) / "loss.csv");
  csv << "stage,epoch,step,lr,loss\n";

  std::unique_ptr<JSENet> model;
  if (!args.init.empty()) {
    LoadedModel loaded = load_model(args.init);
    const ModelConfig a = loaded.config.model_config(), b = config.model_config();
    if (a.num_classes != b.num_classes || a.stage_channels != b.stage_channels ||
        a.blocks_per_stage != b.blocks_per_stage || a.sed_channels != b.sed_channels ||
        a.fusion_channels != b.fusion_channels) {
      throw InputError("--init checkpoint has a different network layout than the configuration");
    }
    model = std::move(loaded.model);
  } else {
    model = std::make_unique<JSENet>(config.model_config());
  }
  TrainHooks hooks;
  hooks.checkpoint_dir = args.out_dir;
  hooks.loss_csv = &csv;
  hooks.config_text = config_text;
  if (args.stage == 0 || args.stage == 1) {
    const StageReport r = train_stage(*model, scenes, config, 1, hooks);
    spdlog::info("stage 1: first loss {:.5f}, best {:.5f}", r.first_loss, r.best_loss);
    save_model(fs::path(args.out_dir) / "stage1.jsec", *model, config_text);
  }
  if ((args.stage == 0 || args.stage == 2) && config.use_jrm) {
    const StageReport r = train_stage(*model, scenes, config, 2, hooks);
    spdlog::info("stage 2: first loss {:.5f}, best {:.5f}", r.first_loss, r.best_loss);
  }
  save_model(fs::path(args.out_dir) / "model.jsec", *model, config_text);
  std::cout << "wrote " << (fs::path(args.out_dir) / "model.jsec").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint semantic segmentation and semantic edge detection for point clouds"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "debug logging");

  // prepare-edges
  auto* prep = app.add_subcommand("prepare-edges", "labeled cloud PLY -> semantic edge label file");
  double prep_radius = kDefaultEdgeRadius;
  int prep_classes = 0;
  std::string prep_in, prep_out;
  prep->add_option("--radius", prep_radius, "edge radius in meters")->capture_default_str();
  prep->add_option("--classes", prep_classes, "number of classes (default: max label + 1)");
  prep->add_option("input", prep_in, "labeled cloud")->required()->check(CLI::ExistingFile);
  prep->add_option("output", prep_out, "edge label file")->required();

  // sample-mesh
  auto* sample = app.add_subcommand("sample-mesh", "triangle mesh PLY -> sampled cloud PLY");
  double density = 5000;
  std::uint64_t sample_seed = 0;
  bool ascii = false;
  std::string mesh_in, mesh_out;
  sample->add_option("--density", density, "samples per square meter")->capture_default_str();
  sample->add_option("--seed", sample_seed, "random seed")->capture_default_str();
  sample->add_flag("--ascii", ascii, "write ascii PLY");
  sample->add_option("input", mesh_in, "mesh")->required()->check(CLI::ExistingFile);
  sample->add_option("output", mesh_out, "cloud")->required();

  // toy-scene
  auto* toy = app.add_subcommand("toy-scene", "write the synthetic two-box scene");
  std::uint64_t toy_seed = 0;
  double toy_density = 5000;
  std::string toy_out;
  toy->add_option("--seed", toy_seed, "random seed")->capture_default_str();
  toy->add_option("--density", toy_density, "samples per square meter")->capture_default_str();
  toy->add_option("output", toy_out, "cloud")->required();

  // train
  auto* train = app.add_subcommand("train", "two-stage training");
  TrainArgs targs;
  std::vector<std::unique_ptr<std::string>> flag_values;
  std::vector<const ConfigKey*> flag_keys;
  train->add_option("--config", targs.config_path, "key = value configuration file")->check(CLI::ExistingFile);
  train->add_option("--out", targs.out_dir, "output directory")->capture_default_str();
  train->add_option("--stage", targs.stage, "1 or 2 to run a single stage, 0 for both")->check(CLI::Range(0, 2));
  train->add_option("--init", targs.init, "start from this checkpoint")->check(CLI::ExistingFile);
  for (const ConfigKey& key : config_keys()) {
    flag_values.push_back(std::make_unique<std::string>());
    flag_keys.push_back(&key);
    train->add_option(flag_name(key.name), *flag_values.back(), key.help + " (default " + key.get(TrainConfig{}) + ")");
  }
  train->add_option("scenes", targs.scenes, "labeled cloud PLY files")->required()->check(CLI::ExistingFile);

  // infer
  auto* infer = app.add_subcommand("infer", "voting inference on one scene");
  std::string ckpt, infer_in, infer_out, infer_edges;
  double infer_radius = 0;
  double infer_spacing = 0;
  infer->add_option("--checkpoint", ckpt, "model checkpoint")->required()->check(CLI::ExistingFile);
  infer->add_option("--sphere-radius", infer_radius, "sphere radius (default: training value)");
  infer->add_option("--spacing", infer_spacing, "sphere grid spacing (default: the radius)");
  infer->add_option("--edges-out", infer_edges, "also write edges thresholded at 0.5 as a label file");
  infer->add_option("input", infer_in, "cloud PLY")->required()->check(CLI::ExistingFile);
  infer->add_option("output", infer_out, "prediction PLY")->required();

  // eval-seg
  auto* eval_seg = app.add_subcommand("eval-seg", "mIoU and boundary F-score of predicted labels");
  std::vector<std::string> seg_pred, seg_gt;
  int eval_classes = 0;
  double eval_radius = kDefaultEdgeRadius;
  std::string report_path;
  eval_seg->add_option("--pred", seg_pred, "prediction PLY (repeatable)")->required()->check(CLI::ExistingFile);
  eval_seg->add_option("--gt", seg_gt, "ground-truth PLY (repeatable, same order)")->required()->check(CLI::ExistingFile);
  eval_seg->add_option("--classes", eval_classes, "number of classes")->required();
  eval_seg->add_option("--radius", eval_radius, "boundary radius")->capture_default_str();
  eval_seg->add_option("--report", report_path, "key = value report file");

  // eval-edge
  auto* eval_edge = app.add_subcommand("eval-edge", "per-class maximum F-measure at the dataset-optimal threshold");
  std::vector<std::string> edge_pred, edge_gt;
  eval_edge->add_option("--pred", edge_pred, "prediction PLY with edge_k properties (repeatable)")->required()->check(CLI::ExistingFile);
  eval_edge->add_option("--gt", edge_gt, "edge label file or labeled PLY (repeatable, same order)")->required()->check(CLI::ExistingFile);
  eval_edge->add_option("--classes", eval_classes, "number of classes")->required();
  eval_edge->add_option("--radius", eval_radius, "edge radius when the ground truth is a labeled PLY")->capture_default_str();
  eval_edge->add_option("--report", report_path, "key = value report file");

  // gradcheck
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient suites");
  std::uint64_t grad_seed = 1;
  gradcheck->add_option("--seed", grad_seed, "instance seed")->capture_default_str();

  // selftest
  auto* selftest = app.add_subcommand("selftest", "oracle report on the shipped fixture vs the golden file");
  std::string fixture = std::string(JSENET_SOURCE_DIR) + "/tests/data/selftest_fixture.ply";
  std::string golden = std::string(JSENET_SOURCE_DIR) + "/tests/data/selftest_golden.txt";
  selftest->add_option("--fixture", fixture, "fixture PLY")->capture_default_str();
  selftest->add_option("--golden", golden, "golden report")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);

  try {
    if (*prep) {
      const PointCloud cloud = read_ply_cloud(prep_in);
      int k = prep_classes;
      if (k == 0)
        for (auto l : cloud.labels) k = std::max(k, l + 1);
      const SemanticEdgeLabels edges = generate_edge_labels(cloud, std::max(k, 1), prep_radius);
      write_edge_labels(prep_out, edges);
      std::size_t count = 0;
      for (auto m : edges.masks) count += m != 0;
      std::cout << fmt::format("{} of {} points on edges\n", count, edges.size());
    } else if (*sample) {
      const MeshSampling s = sample_mesh(read_ply_mesh(mesh_in), density, sample_seed);
      write_ply_cloud(mesh_out, s.cloud, ascii ? PlyFormat::kAscii : PlyFormat::kBinaryLittleEndian);
      std::cout << fmt::format("{} samples\n", s.cloud.size());
    } else if (*toy) {
      const PointCloud cloud = make_toy_scene(toy_seed, toy_density);
      write_ply_cloud(toy_out, cloud);
      std::cout << fmt::format("{} points\n", cloud.size());
    } else if (*train) {
      for (std::size_t i = 0; i < flag_keys.size(); ++i) {
        auto* opt = train->get_option(flag_name(flag_keys[i]->name));
        if (opt->count() > 0) targs.overrides.emplace_back(flag_keys[i]->name, *flag_values[i]);
      }
      return run_train(targs);
    } else if (*infer) {
      LoadedModel loaded = load_model(ckpt);
      const TrainConfig& config = loaded.config;
      PointCloud raw = read_ply_cloud(infer_in);
      for (auto& l : raw.labels)
        if (l >= config.num_classes) l = kIgnoreLabel;
      const PreparedScene scene = prepare_scene(infer_in, raw, config.num_classes, config.grid_cell, config.edge_radius);
      VotingOptions options;
      options.sphere_radius = infer_radius > 0 ? infer_radius : config.sphere_radius;
      options.spacing = infer_spacing;
      const ScenePrediction pred = infer_voting(*loaded.model, scene, options);
      const auto k = pred.num_classes;
      PointCloud out = scene.raw;
      out.labels = pred.labels;
      std::vector<ExtraProperty> extra;
      for (std::size_t c = 0; c < k; ++c) {
        ExtraProperty prob{"prob_" + std::to_string(c), {}}, edge{"edge_" + std::to_string(c), {}};
        for (std::size_t i = 0; i < out.size(); ++i) {
          prob.values.push_back(static_cast<float>(pred.probabilities[i * k + c]));
          edge.values.push_back(static_cast<float>(pred.edges[i * k + c]));
        }
        extra.push_back(std::move(prob));
        extra.push_back(std::move(edge));
      }
      write_ply_cloud(infer_out, out, PlyFormat::kBinaryLittleEndian, extra);
      if (!infer_edges.empty()) {
        SemanticEdgeLabels edges;
        edges.num_classes = static_cast<int>(k);
        edges.masks.assign(out.size(), 0);
        for (std::size_t i = 0; i < out.size(); ++i)
          for (std::size_t c = 0; c < k; ++c)
            if (pred.edges[i * k + c] >= 0.5) edges.masks[i] |= std::uint64_t{1} << c;
        write_edge_labels(infer_edges, edges);
      }
      std::cout << fmt::format("{} points, {} spheres\n", out.size(), pred.spheres);
    } else if (*eval_seg) {
      if (seg_pred.size() != seg_gt.size()) throw InputError("eval-seg: need one --gt per --pred");
      ConfusionMatrix cm(eval_classes);
      std::vector<std::pair<std::string, double>> kv;
      for (std::size_t s = 0; s < seg_pred.size(); ++s) {
        const PointCloud p = read_ply_cloud(seg_pred[s]);
        const PointCloud g = read_ply_cloud(seg_gt[s]);
        if (p.size() != g.size()) throw InputError(seg_pred[s] + " and " + seg_gt[s] + " differ in size");
        cm.add(p.labels, g.labels);
        const BoundaryScore b = boundary_fscore(g.positions, p.labels, g.labels, eval_classes, eval_radius);
        kv.emplace_back("boundary_f/" + fs::path(seg_gt[s]).stem().string(), b.fscore);
      }
      const IouReport iou = miou(cm);
      std::vector<std::string> names;
      for (int c = 0; c < eval_classes; ++c) {
        names.push_back(std::to_string(c));
        kv.emplace_back("iou/" + std::to_string(c), iou.per_class[static_cast<std::size_t>(c)]);
      }
      kv.emplace_back("miou", iou.mean);
      std::cout << format_table(names, iou.per_class, "IoU", iou.mean);
      if (!report_path.empty()) write_text(report_path, format_key_values(kv));
    } else if (*eval_edge) {
      if (edge_pred.size() != edge_gt.size()) throw InputError("eval-edge: need one --gt per --pred");
      ThresholdSweep sweep(eval_classes);
      for (std::size_t s = 0; s < edge_pred.size(); ++s) {
        const PlyData ply = read_ply_data(edge_pred[s]);
        const SemanticEdgeLabels gt = load_gt_edges(edge_gt[s], eval_classes, eval_radius);
        if (gt.size() != ply.vertex_count) throw InputError(edge_pred[s] + " and " + edge_gt[s] + " differ in size");
        sweep.add(read_score_columns(ply, "edge_", eval_classes, edge_pred[s]), gt);
      }
      const MfReport mf = mf_ods(sweep);
      std::vector<std::string> names;
      std::vector<std::pair<std::string, double>> kv;
      for (int c = 0; c < eval_classes; ++c) {
        names.push_back(std::to_string(c));
        kv.emplace_back("mf/" + std::to_string(c), mf.per_class[static_cast<std::size_t>(c)]);
      }
      kv.emplace_back("mmf", mf.mean);
      std::cout << format_table(names, mf.per_class, "MF", mf.mean);
      if (!report_path.empty()) write_text(report_path, format_key_values(kv));
    } else if (*gradcheck) {
      const double tolerance = sizeof(Real) == 8 ? 1e-4 : 5e-2;
      const auto start = std::chrono::steady_clock::now();
      bool ok = true;
      for (const auto& r : run_gradient_suites(grad_seed, tolerance)) {
        std::cout << fmt::format("{:<12} rel. error {:.3e}  {}\n", r.name, r.max_relative_error, r.passed ? "ok" : "FAIL");
        ok = ok && r.passed;
      }
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      std::cout << fmt::format("{:.2f} s\n", secs);
      return ok ? 0 : 1;
    } else if (*selftest) {
      const std::string report = selftest_report(fixture);
      const std::string expected = read_text(golden);
      if (report == expected) {
        std::cout << "selftest: report matches " << golden << "\n";
        return 0;
      }
      std::istringstream a(report), b(expected);
      std::string la, lb;
      while (std::getline(a, la) && std::getline(b, lb)) {
        if (la != lb) std::cout << "got      " << la << "\nexpected " << lb << "\n";
      }
      std::cout << "selftest: report differs from " << golden << "\n";
      return 1;
    }
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ContractError& e) {
    std::cerr << "contract violation: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
