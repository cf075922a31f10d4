#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "jsenet/losses.hpp"
#include "jsenet/model.hpp"
#include "jsenet/toy.hpp"

using namespace jsenet;

namespace {

ModelConfig small_config(std::uint64_t seed = 1) {
  ModelConfig c;
  c.num_classes = 3;
  c.stage_channels = {8, 16, 32, 64, 128};
  c.blocks_per_stage = 1;
  c.sed_channels = 8;
  c.fusion_channels = 8;
  c.seed = seed;
  return c;
}

const PointCloud& small_cloud() {
  static const PointCloud cloud = [] {
    const PointCloud scene = grid_subsample(make_toy_scene(3, 2000), 0.04).cloud;
    return sample_sphere(scene, Vec3(0.6, 0.65, 0.25), 0.45);
  }();
  return cloud;
}

std::vector<Real> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

}  // namespace

TEST(JSENet, ShapesAndRanges) {
  JSENet model(small_config());
  const ModelInput in = prepare_model_input(small_cloud(), model.config());
  const std::size_t n = small_cloud().size(), k = 3;
  ASSERT_GT(n, 50u);
  Tape tape;
  const JSENetOutputs out = model.forward(tape, in);
  EXPECT_EQ(out.ssp_unrefined.shape(), (Shape{n, k}));
  EXPECT_EQ(out.sep_unrefined.shape(), (Shape{n, k}));
  EXPECT_EQ(out.ssp_refined.shape(), (Shape{n, k}));
  EXPECT_EQ(out.sep_refined.shape(), (Shape{n, k}));
  ASSERT_EQ(out.binary_heads.size(), 3u);
  ASSERT_EQ(out.ssp_heads.size(), 2u);
  for (const auto& h : out.binary_heads) EXPECT_EQ(h.shape(), (Shape{n, 1}));
  for (const auto& h : out.ssp_heads) EXPECT_EQ(h.shape(), (Shape{n, k}));
  for (const Tensor* p : {&out.prob_unrefined, &out.prob_refined}) {
    for (std::size_t i = 0; i < n; ++i) {
      Real s = 0;
      for (std::size_t c = 0; c < k; ++c) s += p->at(i, c);
      EXPECT_NEAR(s, 1, 1e-9);
    }
  }
  for (Real v : out.sep_refined.data()) {
    EXPECT_GE(v, 0);
    EXPECT_LE(v, 1);
  }
  for (Real v : out.edge_unrefined.data()) {
    EXPECT_GT(v, 0);
    EXPECT_LT(v, 1);
  }
  EXPECT_EQ(out.act_input.shape(), (Shape{n, k}));
  EXPECT_EQ(out.act_refined.shape(), (Shape{n, k}));
}

TEST(JSENet, DeterministicForward) {
  JSENet a(small_config(5)), b(small_config(5));
  EXPECT_EQ(a.store().hash(), b.store().hash());
  const ModelInput in = prepare_model_input(small_cloud(), a.config());
  Tape t1, t2;
  const auto o1 = a.forward(t1, in), o2 = a.forward(t2, in), o3 = b.forward(t2, in);
  EXPECT_EQ(values(o1.ssp_refined), values(o2.ssp_refined));
  EXPECT_EQ(values(o1.sep_refined), values(o2.sep_refined));
  EXPECT_EQ(values(o1.sep_refined), values(o3.sep_refined));
  JSENet c(small_config(6));
  EXPECT_NE(c.store().hash(), a.store().hash());
}

TEST(JSENet, BypassReproducesUnrefinedOutputs) {
  JSENet model(small_config());
  const ModelInput in = prepare_model_input(small_cloud(), model.config());
  Tape tape;
  const auto with = model.forward(tape, in);
  model.set_use_jrm(false);
  const auto without = model.forward(tape, in);
  EXPECT_EQ(values(without.ssp_refined), values(without.ssp_unrefined));
  EXPECT_EQ(values(without.prob_refined), values(without.prob_unrefined));
  EXPECT_EQ(values(without.sep_refined), values(without.edge_unrefined));
  EXPECT_EQ(values(without.act_refined), values(without.act_input));
  // The streams themselves do not depend on the switch.
  EXPECT_EQ(values(without.ssp_unrefined), values(with.ssp_unrefined));
  EXPECT_EQ(values(without.sep_unrefined), values(with.sep_unrefined));
  EXPECT_NE(values(with.sep_refined), values(with.edge_unrefined));
}

TEST(JSENet, ParameterPartition) {
  JSENet model(small_config());
  std::size_t theta = 0, phi = 0, gamma = 0;
  for (const auto& e : model.store().entries()) {
    const int groups = has_prefix(e.name, kThetaPrefix) + has_prefix(e.name, kPhiPrefix) + has_prefix(e.name, kGammaPrefix);
    EXPECT_EQ(groups, 1) << e.name;
    if (!e.trainable) continue;
    theta += has_prefix(e.name, kThetaPrefix);
    phi += has_prefix(e.name, kPhiPrefix);
    gamma += has_prefix(e.name, kGammaPrefix);
  }
  EXPECT_GT(theta, 0u);
  EXPECT_GT(phi, 0u);
  EXPECT_GT(gamma, 0u);
}

TEST(JSENet, PhasesControlGradientsAndRefinement) {
  JSENet model(small_config());
  const ModelInput in = prepare_model_input(small_cloud(), model.config());
  model.set_phase(Phase::kStage1);
  {
    Tape tape;
    const auto out = model.forward(tape, in);
    EXPECT_FALSE(out.ssp_refined.defined());
    for (const auto& e : model.store().entries())
      if (e.trainable) EXPECT_EQ(e.tensor.requires_grad(), !has_prefix(e.name, kGammaPrefix)) << e.name;
  }
  model.set_phase(Phase::kStage2);
  for (const auto& e : model.store().entries())
    if (e.trainable) EXPECT_EQ(e.tensor.requires_grad(), has_prefix(e.name, kGammaPrefix)) << e.name;
  const auto theta_before = model.store().hash(kThetaPrefix);
  {
    // Batch norm of the frozen streams must not move its running statistics.
    Tape tape;
    model.forward(tape, in);
  }
  EXPECT_EQ(model.store().hash(kThetaPrefix), theta_before);
}

TEST(JSENet, EveryHeadReachesTheEncoder) {
  JSENet model(small_config());
  model.set_phase(Phase::kStage1);
  const ModelInput in = prepare_model_input(small_cloud(), model.config());
  const Tensor* first = nullptr;
  for (const auto& e : model.store().entries())
    if (e.trainable && has_prefix(e.name, "theta/encoder")) {
      first = &e.tensor;
      break;
    }
  ASSERT_NE(first, nullptr);
  for (int head = 0; head < 7; ++head) {
    model.store().zero_grad();
    Tape tape;
    const auto out = model.forward(tape, in);
    Tensor target;
    if (head == 0) target = out.ssp_unrefined;
    else if (head == 1) target = out.sep_unrefined;
    else if (head < 5) target = out.binary_heads[static_cast<std::size_t>(head - 2)];
    else target = out.ssp_heads[static_cast<std::size_t>(head - 5)];
    tape.backward(ops::sum(tape, ops::mul(tape, target, target)));
    double norm = 0;
    for (Real g : first->grad()) norm += std::abs(g);
    EXPECT_GT(norm, 0) << "head " << head;
  }
}

TEST(JSENet, PermutingInputsPermutesOutputs) {
  JSENet model(small_config());
  const PointCloud& cloud = small_cloud();
  std::vector<std::uint32_t> perm(cloud.size());
  std::iota(perm.begin(), perm.end(), 0u);
  std::mt19937_64 rng(3);
  std::shuffle(perm.begin(), perm.end(), rng);
  const PointCloud shuffled = cloud.subset(perm);
  Tape tape;
  const auto a = model.forward(tape, prepare_model_input(cloud, model.config()));
  const auto b = model.forward(tape, prepare_model_input(shuffled, model.config()));
  for (std::size_t i = 0; i < perm.size(); ++i)
    for (std::size_t c = 0; c < 3; ++c) {
      EXPECT_NEAR(b.ssp_refined.at(i, c), a.ssp_refined.at(perm[i], c), 1e-8);
      EXPECT_NEAR(b.sep_refined.at(i, c), a.sep_refined.at(perm[i], c), 1e-8);
    }
}

TEST(JSENet, ArgmaxInvariantToSharedShift) {
  JSENet model(small_config());
  Tape tape;
  const auto out = model.forward(tape, prepare_model_input(small_cloud(), model.config()));
  const Tensor shifted = ops::affine(tape, out.ssp_refined, 1, 17.25);
  const Tensor p = ops::softmax_rows(tape, out.ssp_refined), q = ops::softmax_rows(tape, shifted);
  for (std::size_t i = 0; i < p.rows(); ++i) {
    const auto row = [&](const Tensor& t) {
      std::size_t best = 0;
      for (std::size_t c = 1; c < 3; ++c)
        if (t.at(i, c) > t.at(i, best)) best = c;
      return best;
    };
    EXPECT_EQ(row(p), row(q));
    for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(p.at(i, c), q.at(i, c), 1e-12);
  }
}

TEST(JSENet, FiniteOutputsOverManySeeds) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0, 0.6);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    PointCloud c;
    for (int i = 0; i < 80; ++i)
      c.push_back(Vec3(u(rng), u(rng), u(rng)), Color(float(u(rng)), float(u(rng)), float(u(rng))), int(seed % 3));
    JSENet model(small_config(seed));
    Tape tape;
    const auto out = model.forward(tape, prepare_model_input(c, model.config()));
    for (const Tensor* t : {&out.ssp_refined, &out.sep_refined, &out.ssp_unrefined, &out.sep_unrefined})
      for (Real v : t->data()) ASSERT_TRUE(std::isfinite(v)) << "seed " << seed;
  }
}

TEST(ModelConfig, Validation) {
  ModelConfig c = small_config();
  c.stage_channels = {8, 16, 32};
  EXPECT_THROW(c.validate(), ContractError);
  c = small_config();
  c.num_classes = 0;
  EXPECT_THROW(c.validate(), ContractError);
}
