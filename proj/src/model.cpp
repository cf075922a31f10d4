#include "jsenet/model.hpp"

#include "jsenet/labels.hpp"

namespace jsenet {

namespace {

constexpr std::size_t kBinaryHeadStages = 3;

// Independent streams so that, e.g., the refinement module's initial weights
// do not depend on the backbone widths.
Rng stream_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  return Rng(seq);
}

}  // namespace

void ModelConfig::validate() const {
  require(num_classes >= 1 && num_classes <= kMaxClasses, "model: class count must be in [1, 64]");
  require(input_features >= 1, "model: need at least one input feature");
  require(stage_channels.size() > kBinaryHeadStages, "model: need at least four encoder stages");
  for (int c : stage_channels) require(c >= 4, "model: stage widths must be at least 4");
  require(blocks_per_stage >= 0, "model: negative block count");
  require(base_cell > 0 && conv_radius_factor > 0, "model: cell and radius factor must be positive");
  require(sed_channels >= 1 && fusion_channels >= 1, "model: head widths must be positive");
  require(emg_radius > 0, "model: edge-map radius must be positive");
  require(bn_momentum >= 0 && bn_momentum < 1, "model: batch-norm momentum must be in [0, 1)");
}

ModelInput prepare_model_input(const PointCloud& cloud, const ModelConfig& config) {
  require(!cloud.empty(), "model input: empty sphere");
  require(cloud.colors.size() == cloud.size(), "model input: colors missing");
  ModelInput in;
  PyramidConfig pc;
  pc.stages = static_cast<int>(config.stage_channels.size());
  pc.base_cell = config.base_cell;
  pc.conv_radius_factor = config.conv_radius_factor;
  in.pyramid = build_pyramid(cloud.positions, pc);
  const std::size_t n = cloud.size(), f = static_cast<std::size_t>(config.input_features);
  in.features = Tensor::zeros({n, f});
  for (std::size_t i = 0; i < n; ++i) {
    in.features.at(i, 0) = 1;
    for (std::size_t c = 1; c < f && c <= 3; ++c) in.features.at(i, c) = static_cast<Real>(cloud.colors[i][c - 1]);
  }
  in.emg_filter = build_mean_filter(cloud.positions, config.emg_radius);
  return in;
}

FusionSubmodule::FusionSubmodule(ParameterStore& store, const std::string& prefix, std::size_t in, std::size_t out,
                                 std::size_t channels, std::size_t stages, Rng& rng) {
  for (std::size_t s = 0; s < stages; ++s)
    encoder_.emplace_back(store, prefix + "/enc" + std::to_string(s), s == 0 ? in : channels, channels, rng);
  for (std::size_t s = 0; s + 1 < stages; ++s)
    decoder_.emplace_back(store, prefix + "/dec" + std::to_string(s), 2 * channels, channels, true, rng);
  head_ = Linear(store, prefix + "/head", channels, out, true, rng, 1.0);
}

Tensor FusionSubmodule::forward(Tape& tape, const Pyramid& pyramid, const Tensor& x, const LayerMode& mode) const {
  std::vector<Tensor> skips;
  Tensor h = encoder_[0].forward(tape, x, pyramid.conv[0], mode);
  skips.push_back(h);
  for (std::size_t s = 1; s < encoder_.size(); ++s) {
    h = encoder_[s].forward(tape, h, pyramid.pool[s], mode);
    skips.push_back(h);
  }
  for (std::size_t s = encoder_.size() - 1; s-- > 0;) {
    const Tensor up = nearest_upsample(tape, h, pyramid.parent[s]);
    h = decoder_[s].forward(tape, ops::concat(tape, {up, skips[s]}), mode);
  }
  return head_.forward(tape, h);
}

JSENet::JSENet(ModelConfig config) : config_(std::move(config)) {
  config_.validate();
  const auto& ch = config_.stage_channels;
  const std::size_t stages = ch.size();
  const auto k = static_cast<std::size_t>(config_.num_classes);
  const auto sed = static_cast<std::size_t>(config_.sed_channels);
  const auto fusion = static_cast<std::size_t>(config_.fusion_channels);

  Rng theta = stream_rng(config_.seed, 1);
  encoder_ = Encoder(store_, "theta/encoder", static_cast<std::size_t>(config_.input_features), ch,
                     config_.blocks_per_stage, theta);
  for (std::size_t s = 0; s + 1 < stages; ++s) {
    const auto in = static_cast<std::size_t>(ch[s] + ch[s + 1]);
    ss_decoder_.emplace_back(store_, "theta/decoder/up" + std::to_string(s), in, static_cast<std::size_t>(ch[s]),
                             true, theta);
  }
  ss_head_hidden_ = UnaryBlock(store_, "theta/head/hidden", static_cast<std::size_t>(ch[0]),
                               static_cast<std::size_t>(ch[0]), true, theta);
  ss_head_ = Linear(store_, "theta/head/out", static_cast<std::size_t>(ch[0]), k, true, theta, 1.0);

  Rng phi = stream_rng(config_.seed, 2);
  for (std::size_t s = 0; s < stages; ++s) {
    sed_reduce_.emplace_back(store_, "phi/reduce" + std::to_string(s), static_cast<std::size_t>(ch[s]), sed, true,
                             phi);
  }
  for (std::size_t s = 0; s < stages; ++s) {
    if (s < kBinaryHeadStages)
      binary_heads_.emplace_back(store_, "phi/binary" + std::to_string(s), sed, 1, true, phi, 1.0);
    else
      ssp_heads_.emplace_back(store_, "phi/ssp" + std::to_string(s), sed, k, true, phi, 1.0);
  }
  sep_head_ = Linear(store_, "phi/sep", stages * sed, k, true, phi, 1.0);

  Rng gamma = stream_rng(config_.seed, 3);
  jrm_seg_ = FusionSubmodule(store_, "gamma/seg", 2 * k, k, fusion, stages, gamma);
  jrm_edge_ = FusionSubmodule(store_, "gamma/edge", 2 * k, k, fusion, stages, gamma);
  set_phase(Phase::kInference);
}

void JSENet::set_phase(Phase phase) {
  phase_ = phase;
  store_.set_trainable_group(kThetaPrefix, phase == Phase::kStage1);
  store_.set_trainable_group(kPhiPrefix, phase == Phase::kStage1);
  store_.set_trainable_group(kGammaPrefix, phase == Phase::kStage2);
}

LayerMode JSENet::mode(bool trains) const {
  LayerMode m;
  m.training = trains;
  m.batch_norm.momentum = static_cast<Real>(config_.bn_momentum);
  return m;
}

JSENetOutputs JSENet::forward(Tape& tape, const ModelInput& input) const {
  const Pyramid& pyr = input.pyramid;
  if (pyr.stage_count() != config_.stage_channels.size()) {
    throw DimensionError("model: input pyramid has " + std::to_string(pyr.stage_count()) + " stages, model has " +
                         std::to_string(config_.stage_channels.size()));
  }
  const LayerMode backbone = mode(phase_ == Phase::kStage1);
  JSENetOutputs out;

  const std::vector<Tensor> feats = encoder_.forward(tape, pyr, input.features, backbone);

  // Segmentation decoder: upsample, concatenate the skip, mix.
  Tensor x = feats.back();
  for (std::size_t s = feats.size() - 1; s-- > 0;) {
    const Tensor up = nearest_upsample(tape, x, pyr.parent[s]);
    x = ss_decoder_[s].forward(tape, ops::concat(tape, {up, feats[s]}), backbone);
  }
  out.ssp_unrefined = ss_head_.forward(tape, ss_head_hidden_.forward(tape, x, backbone));

  // Edge stream: reduce every stage, bring it to full resolution, supervise
  // each level and fuse all of them.
  std::vector<Tensor> reduced;
  for (std::size_t s = 0; s < feats.size(); ++s) {
    Tensor r = sed_reduce_[s].forward(tape, feats[s], backbone);
    if (s > 0) r = nearest_upsample(tape, r, pyr.full_parent[s]);
    reduced.push_back(r);
    if (s < kBinaryHeadStages)
      out.binary_heads.push_back(binary_heads_[s].forward(tape, r));
    else
      out.ssp_heads.push_back(ssp_heads_[s - kBinaryHeadStages].forward(tape, r));
  }
  out.sep_unrefined = sep_head_.forward(tape, ops::concat(tape, reduced));

  out.prob_unrefined = ops::softmax_rows(tape, out.ssp_unrefined);
  out.edge_unrefined = ops::sigmoid(tape, out.sep_unrefined);
  if (phase_ != Phase::kStage1) refine(tape, input, out);
  return out;
}

void JSENet::refine(Tape& tape, const ModelInput& input, JSENetOutputs& out) const {
  out.act_input = emg(tape, out.prob_unrefined, input.emg_filter);
  if (!config_.use_jrm) {
    out.ssp_refined = out.ssp_unrefined;
    out.prob_refined = out.prob_unrefined;
    out.sep_refined = out.edge_unrefined;
    out.act_refined = out.act_input;
    return;
  }
  const LayerMode m = mode(phase_ == Phase::kStage2);
  const Pyramid& pyr = input.pyramid;
  out.ssp_refined = jrm_seg_.forward(tape, pyr, ops::concat(tape, {out.prob_unrefined, out.edge_unrefined}), m);
  out.prob_refined = ops::softmax_rows(tape, out.ssp_refined);
  out.act_refined = emg(tape, out.prob_refined, input.emg_filter);
  const Tensor aux = jrm_edge_.forward(tape, pyr, ops::concat(tape, {out.edge_unrefined, out.act_input}), m);
  const Tensor adjusted = ops::sigmoid(tape, ops::add(tape, out.sep_unrefined, aux));
  out.sep_refined = ops::clamp(tape, ops::add(tape, adjusted, out.act_refined), 0, 1);
}

}  // namespace jsenet
