#pragma once

// Two-stream network: a shared KPConv encoder feeding a segmentation decoder
// (theta) and a skip-layer edge stream (phi), followed by the joint
// refinement module (gamma) that fuses masks and edge maps.

#include <cstdint>
#include <vector>

#include "jsenet/edgegen.hpp"
#include "jsenet/kpconv.hpp"

namespace jsenet {

struct ModelConfig {
  int num_classes = 13;
  int input_features = 4;  // constant 1 + rgb
  std::vector<int> stage_channels{64, 128, 256, 512, 1024};
  int blocks_per_stage = 2;
  double base_cell = 0.04;
  double conv_radius_factor = 2.5;
  int sed_channels = 32;
  int fusion_channels = 32;
  double emg_radius = 0.10;
  double bn_momentum = 0.99;
  bool use_jrm = true;
  std::uint64_t seed = 0;

  // Throws ContractError on inconsistent values.
  void validate() const;
};

// Everything one forward pass needs about an input sphere.
struct ModelInput {
  Pyramid pyramid;
  Tensor features;  // N x input_features
  MeanFilter emg_filter;

  std::size_t size() const { return features.rows(); }
};

ModelInput prepare_model_input(const PointCloud& cloud, const ModelConfig& config);

// Scores are pre-softmax, logits pre-sigmoid. Edge maps are stored point-major
// (N x K). Refined fields are undefined after a stage-1 forward.
struct JSENetOutputs {
  Tensor ssp_unrefined;
  Tensor sep_unrefined;
  Tensor ssp_refined;
  Tensor sep_refined;              // probabilities in [0, 1]
  std::vector<Tensor> binary_heads;  // 3 x (N x 1) logits
  std::vector<Tensor> ssp_heads;     // 2 x (N x K) scores
  Tensor prob_unrefined;           // softmax(ssp_unrefined)
  Tensor prob_refined;             // softmax(ssp_refined)
  Tensor edge_unrefined;           // sigmoid(sep_unrefined)
  Tensor act_input;                // emg(prob_unrefined)
  Tensor act_refined;              // emg(prob_refined)
};

enum class Phase {
  kInference,  // everything frozen, batch norm on running statistics
  kStage1,     // theta and phi train, refinement module skipped
  kStage2,     // gamma trains, theta and phi frozen in inference mode
};

class FusionSubmodule {
 public:
  FusionSubmodule() = default;
  FusionSubmodule(ParameterStore& store, const std::string& prefix, std::size_t in, std::size_t out,
                  std::size_t channels, std::size_t stages, Rng& rng);
  Tensor forward(Tape& tape, const Pyramid& pyramid, const Tensor& x, const LayerMode& mode) const;

 private:
  std::vector<SimpleBlock> encoder_;
  std::vector<UnaryBlock> decoder_;
  Linear head_;
};

class JSENet {
 public:
  explicit JSENet(ModelConfig config);
  JSENet(const JSENet&) = delete;
  JSENet& operator=(const JSENet&) = delete;

  // Sets which parameter groups take gradients and how batch norm behaves.
  void set_phase(Phase phase);
  Phase phase() const { return phase_; }
  // With the refinement module off, refined outputs alias the unrefined ones.
  void set_use_jrm(bool enabled) { config_.use_jrm = enabled; }

  JSENetOutputs forward(Tape& tape, const ModelInput& input) const;

  ParameterStore& store() { return store_; }
  const ParameterStore& store() const { return store_; }
  const ModelConfig& config() const { return config_; }

 private:
  LayerMode mode(bool trains) const;
  void refine(Tape& tape, const ModelInput& input, JSENetOutputs& out) const;

  ModelConfig config_;
  ParameterStore store_;
  Phase phase_ = Phase::kInference;

  Encoder encoder_;
  std::vector<UnaryBlock> ss_decoder_;
  UnaryBlock ss_head_hidden_;
  Linear ss_head_;

  std::vector<UnaryBlock> sed_reduce_;
  std::vector<Linear> binary_heads_;
  std::vector<Linear> ssp_heads_;
  Linear sep_head_;

  FusionSubmodule jrm_seg_;
  FusionSubmodule jrm_edge_;
};

inline constexpr std::string_view kThetaPrefix = "theta/";
inline constexpr std::string_view kPhiPrefix = "phi/";
inline constexpr std::string_view kGammaPrefix = "gamma/";

}  // namespace jsenet
