#include <gtest/gtest.h>

#include <cmath>

#include "jsenet/config.hpp"
#include "jsenet/gradcheck.hpp"
#include "jsenet/losses.hpp"
#include "jsenet/optimizer.hpp"

using namespace jsenet;

namespace {
constexpr double kTol = sizeof(Real) == 8 ? 1e-12 : 1e-5;
}

TEST(LossSeg, HandValueSkipsIgnoredRows) {
  Tape tape;
  const auto truth = one_hot(std::vector<std::int32_t>{0, 1, -1}, 2);
  const Tensor probs = Tensor::from({3, 2}, {0.8, 0.2, 0.4, 0.6, 0.5, 0.5});
  const double expected = -(std::log(0.8) + std::log(0.6)) / 2;
  EXPECT_NEAR(loss_seg(tape, truth, probs).item(), expected, kTol);
}

TEST(LossSeg, ClampsZeroProbability) {
  Tape tape;
  const auto truth = one_hot(std::vector<std::int32_t>{0}, 2);
  const Tensor probs = Tensor::from({1, 2}, {0, 1});
  const double v = loss_seg(tape, truth, probs).item();
  EXPECT_TRUE(std::isfinite(v));
  EXPECT_NEAR(v, -std::log(static_cast<double>(ops::kLogClampLow)), 1e-3);
}

TEST(LossEdge, HandValue) {
  Tape tape;
  const Tensor truth = Tensor::from({2, 2}, {1, 0, 0, 0});
  const Tensor probs = Tensor::from({2, 2}, {0.7, 0.1, 0.2, 0.4});
  const std::vector<double> beta{0.5, 1.0};
  const double expected =
      -(0.5 * std::log(0.7) + 0.0 * std::log(0.9) + 0.5 * std::log(0.8) + 0.0 * std::log(0.6)) / 2;
  EXPECT_NEAR(loss_edge(tape, truth, probs, beta).item(), expected, kTol);
}

TEST(LossEdge, ValidMaskChangesDenominator) {
  Tape tape;
  const Tensor truth = Tensor::from({2, 1}, {1, 1});
  const Tensor probs = Tensor::from({2, 1}, {0.5, 0.25});
  const std::vector<double> beta{0.8};
  const std::vector<std::uint8_t> valid{1, 0};
  EXPECT_NEAR(loss_edge(tape, truth, probs, beta, valid).item(), -0.8 * std::log(0.5), kTol);
}

TEST(LossEdge, RejectsBadBetaAndShapes) {
  Tape tape;
  const Tensor t = Tensor::zeros({2, 2});
  const std::vector<double> bad{0.5, 1.5};
  EXPECT_THROW(loss_edge(tape, t, Tensor::full({2, 2}, 0.5), bad), ContractError);
  const std::vector<double> ok{0.5, 0.5};
  EXPECT_THROW(loss_edge(tape, t, Tensor::full({2, 3}, 0.5), ok), DimensionError);
}

TEST(LossBce, HandValue) {
  Tape tape;
  const std::vector<std::uint8_t> truth{1, 0, 0};
  const Tensor probs = Tensor::from({3, 1}, {0.9, 0.3, 0.2});
  const double beta = 2.0 / 3.0;
  const double expected = -(beta * std::log(0.9) + (1 - beta) * (std::log(0.7) + std::log(0.8))) / 3;
  EXPECT_NEAR(loss_bce(tape, truth, probs, beta).item(), expected, kTol);
}

TEST(LossDual, HandValue) {
  Tape tape;
  const Tensor truth = Tensor::from({2, 2}, {0, 0.5, 0, 0});
  const Tensor act = Tensor::from({2, 2}, {0.25, 0.25, 0, 1});
  const std::vector<std::uint8_t> valid{1, 0};
  EXPECT_NEAR(loss_dual(tape, truth, act, 0.9).item(), 0.9 * 1.5 / 2, kTol);
  EXPECT_NEAR(loss_dual(tape, truth, act, 0.9, valid).item(), 0.9 * 0.5 / 1, kTol);
}

TEST(LossTotal, WeightedSum) {
  Tape tape;
  LossComponents parts;
  parts.seg = {Tensor::scalar(1), Tensor::scalar(0.5)};
  parts.edge = Tensor::scalar(2);
  parts.bce = {Tensor::scalar(0.25)};
  parts.dual = {Tensor::scalar(0.125), Tensor::scalar(0.125)};
  const LossWeights w = LossWeights::for_classes(13);
  EXPECT_NEAR(loss_total(tape, parts, w).item(), 13 * 1.5 + 2 + 0.25 + 0.25, kTol);
  parts.edge = Tensor::scalar(std::nan(""));
  EXPECT_THROW(loss_total(tape, parts, w), ContractError);
}

TEST(LossWeights, SegmentationWeightIsClassCount) {
  EXPECT_EQ(LossWeights::for_classes(13).seg, Real(13));
  TrainConfig c;
  c.num_classes = 20;
  EXPECT_EQ(c.loss_weights().seg, Real(20));
  EXPECT_EQ(c.loss_weights().edge, Real(1));
}

TEST(Schedule, TenfoldEveryHundredEpochs) {
  EXPECT_NEAR(scheduled_learning_rate(Real(0.01), 0), 0.01, 1e-9);
  EXPECT_NEAR(scheduled_learning_rate(Real(0.01), 100), 1e-3, 1e-9);
  EXPECT_NEAR(scheduled_learning_rate(Real(0.01), 200), 1e-4, 1e-9);
  EXPECT_LT(scheduled_learning_rate(Real(0.01), 51), scheduled_learning_rate(Real(0.01), 50));
}

TEST(Optimizer, HeavyBallUpdate) {
  Tensor p = Tensor::from({2}, {1, 2}, true);
  MomentumOptimizer opt({p}, Real(0.1), Real(0.5));
  const std::vector<std::vector<Real>> g1{{1, -1}};
  opt.step(g1);
  EXPECT_NEAR(p.data()[0], 0.9, kTol);
  EXPECT_NEAR(p.data()[1], 2.1, kTol);
  opt.step(g1);  // v = 0.5 * -0.1 - 0.1 = -0.15
  EXPECT_NEAR(p.data()[0], 0.75, kTol);
  EXPECT_NEAR(p.data()[1], 2.25, kTol);
}

TEST(GradientSuites, AllPass) {
  const double tol = sizeof(Real) == 8 ? 1e-4 : 5e-2;
  for (std::uint64_t seed : {1, 2, 3}) {
    for (const auto& r : run_gradient_suites(seed, tol)) {
      EXPECT_TRUE(r.passed) << r.name << " seed " << seed << " error " << r.max_relative_error;
      EXPECT_GT(r.evaluations, 0u);
    }
  }
}

TEST(GradientCheck, DetectsWrongGradient) {
  // A deliberately broken op: forward x^2, backward claims 3x.
  Tensor x = Tensor::from({3}, {0.3, -0.2, 0.5}, true);
  const auto result = check_gradient(
      "broken", {x},
      [x](Tape& tape) {
        Tensor out = Tensor::scalar(0);
        Real s = 0;
        for (Real v : x.data()) s += v * v;
        out.data()[0] = s;
        out.set_requires_grad(true);
        const Tensor src = x;
        tape.record("broken", {src}, out, [src, out] {
          auto g = src.grad();
          for (std::size_t i = 0; i < g.size(); ++i) g[i] += 3 * src.data()[i] * out.grad()[0];
        });
        return out;
      },
      1e-6, 1e-4);
  EXPECT_FALSE(result.passed);
}
