#include <gtest/gtest.h>

#include <cmath>

#include "jsenet/checkpoint.hpp"
#include "jsenet/parameters.hpp"
#include "jsenet/tensor.hpp"

using namespace jsenet;

namespace {

std::vector<Real> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }
std::vector<Real> grads(const Tensor& t) { return {t.grad().begin(), t.grad().end()}; }

}  // namespace

TEST(Tensor, HandlesAliasAndCloneDetaches) {
  Tensor a = Tensor::from({2, 2}, {1, 2, 3, 4});
  Tensor b = a;
  b.at(0, 1) = 9;
  EXPECT_EQ(a.at(0, 1), 9);
  Tensor c = a.clone();
  c.at(0, 0) = -1;
  EXPECT_EQ(a.at(0, 0), 1);
  EXPECT_FALSE(c.same_storage(a));
  EXPECT_THROW(Tensor::from({2, 2}, {1, 2, 3}), DimensionError);
}

TEST(Ops, MatmulForwardBackward) {
  Tape tape;
  Tensor a = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6}, true);
  Tensor b = Tensor::from({3, 1}, {1, 0, -1}, true);
  Tensor y = ops::matmul(tape, a, b);
  EXPECT_EQ(values(y), (std::vector<Real>{-2, -2}));
  tape.backward(ops::sum(tape, y));
  EXPECT_EQ(grads(a), (std::vector<Real>{1, 0, -1, 1, 0, -1}));
  EXPECT_EQ(grads(b), (std::vector<Real>{5, 7, 9}));
  EXPECT_EQ(tape.size(), 0u);
  EXPECT_THROW(ops::matmul(tape, a, a), DimensionError);
}

TEST(Ops, BroadcastAddAccumulatesRowGradient) {
  Tape tape;
  Tensor a = Tensor::zeros({3, 2}, true);
  Tensor bias = Tensor::from({1, 2}, {1, 2}, true);
  Tensor y = ops::add(tape, a, bias);
  EXPECT_EQ(y.at(2, 1), 2);
  tape.backward(ops::sum(tape, y));
  EXPECT_EQ(grads(bias), (std::vector<Real>{3, 3}));
}

TEST(Ops, SoftmaxRowsSumToOneAndShiftInvariant) {
  Tape tape;
  Tensor a = Tensor::from({2, 3}, {1, 2, 3, -50, 0, 50});
  Tensor s = ops::softmax_rows(tape, a);
  Tensor shifted = ops::softmax_rows(tape, ops::affine(tape, a, 1, 123.5));
  for (std::size_t r = 0; r < 2; ++r) {
    Real sum = 0;
    for (std::size_t c = 0; c < 3; ++c) {
      sum += s.at(r, c);
      EXPECT_NEAR(s.at(r, c), shifted.at(r, c), 1e-12);
    }
    EXPECT_NEAR(sum, 1, 1e-12);
  }
}

TEST(Ops, GatherScatterAreAdjoint) {
  Tape tape;
  Tensor a = Tensor::from({3, 1}, {10, 20, 30}, true);
  const std::vector<std::uint32_t> idx{2, 0, 2};
  Tensor g = ops::gather_rows(tape, a, idx);
  EXPECT_EQ(values(g), (std::vector<Real>{30, 10, 30}));
  tape.backward(ops::sum(tape, g));
  EXPECT_EQ(grads(a), (std::vector<Real>{1, 0, 2}));
  Tape t2;
  Tensor s = ops::scatter_add_rows(t2, Tensor::from({3, 1}, {1, 2, 4}), idx, 3);
  EXPECT_EQ(values(s), (std::vector<Real>{2, 0, 5}));
}

TEST(Ops, ConcatAndSlice) {
  Tape tape;
  Tensor a = Tensor::from({2, 1}, {1, 2}, true);
  Tensor b = Tensor::from({2, 2}, {3, 4, 5, 6}, true);
  Tensor c = ops::concat(tape, {a, b});
  EXPECT_EQ(values(c), (std::vector<Real>{1, 3, 4, 2, 5, 6}));
  Tensor s = ops::slice_column(tape, c, 1, 2);
  EXPECT_EQ(values(s), (std::vector<Real>{3, 5}));
  tape.backward(ops::sum(tape, s));
  EXPECT_EQ(grads(b), (std::vector<Real>{1, 0, 1, 0}));
  EXPECT_EQ(grads(a), (std::vector<Real>{0, 0}));
}

TEST(Ops, ElementwiseValues) {
  Tape tape;
  Tensor a = Tensor::from({4}, {-2, -0.5, 0.5, 2});
  EXPECT_EQ(values(ops::leaky_relu(tape, a)), (std::vector<Real>{Real(-0.2), Real(-0.05), Real(0.5), 2}));
  EXPECT_EQ(values(ops::abs(tape, a)), (std::vector<Real>{2, 0.5, 0.5, 2}));
  EXPECT_EQ(values(ops::clamp(tape, a, -1, 1)), (std::vector<Real>{-1, -0.5, 0.5, 1}));
  EXPECT_NEAR(ops::sigmoid(tape, a).data()[3], 1 / (1 + std::exp(-2.0)), 1e-12);
  EXPECT_NEAR(ops::mean(tape, a).item(), 0, 1e-15);
}

TEST(Ops, MeanOverGroups) {
  Tape tape;
  Tensor a = Tensor::from({3, 1}, {1, 2, 6}, true);
  IndexGroups g;
  g.push_group(std::vector<std::uint32_t>{0, 2});
  g.push_group(std::vector<std::uint32_t>{1});
  Tensor m = ops::mean_over_index_groups(tape, a, g);
  EXPECT_EQ(values(m), (std::vector<Real>{3.5, 2}));
  tape.backward(ops::sum(tape, m));
  EXPECT_EQ(grads(a), (std::vector<Real>{0.5, 1, 0.5}));
}

TEST(Ops, MeanDeviationOverGroups) {
  Tape tape;
  Tensor a = Tensor::from({3, 1}, {1, 2, 6}, true);
  IndexGroups g;
  g.push_group(std::vector<std::uint32_t>{0, 2});
  g.push_group(std::vector<std::uint32_t>{1});
  g.push_group(std::vector<std::uint32_t>{0, 1, 2});
  Tensor m = ops::mean_deviation_over_index_groups(tape, a, g);
  EXPECT_EQ(values(m), (std::vector<Real>{2.5, 0, -3}));
  tape.backward(ops::sum(tape, m));
  const std::vector<Real> expected{-0.5 + 1.0 / 3.0, 1.0 / 3.0, 0.5 - 2.0 / 3.0};
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(grads(a)[i], expected[i], 1e-15);
  IndexGroups short_groups;
  short_groups.push_group(std::vector<std::uint32_t>{0});
  EXPECT_THROW(ops::mean_deviation_over_index_groups(tape, a, short_groups), DimensionError);
}

TEST(Ops, BatchNormTrainingAndRunningStats) {
  Tape tape;
  Tensor x = Tensor::from({4, 1}, {1, 2, 3, 4});
  Tensor gamma = Tensor::full({1, 1}, 1), beta = Tensor::zeros({1, 1});
  Tensor rm = Tensor::zeros({1, 1}), rv = Tensor::full({1, 1}, 1);
  ops::BatchNormOptions o;
  o.momentum = 0.5;
  Tensor y = ops::batch_norm(tape, x, gamma, beta, rm, rv, o);
  Real mean = 0;
  for (Real v : y.data()) mean += v;
  EXPECT_NEAR(mean, 0, 1e-12);
  EXPECT_NEAR(rm.item(), 0.5 * 2.5, 1e-12);
  o.training = false;
  Tensor z = ops::batch_norm(tape, x, gamma, beta, rm, rv, o);
  EXPECT_NEAR(z.at(0, 0), (1 - rm.item()) / std::sqrt(rv.item() + o.epsilon), 1e-9);
}

TEST(Tape, BackwardAccumulatesOverMultipleUses) {
  Tape tape;
  Tensor a = Tensor::from({1}, {3}, true);
  Tensor y = ops::mul(tape, a, a);
  tape.backward(ops::sum(tape, y));
  EXPECT_EQ(a.grad()[0], 6);
}

TEST(ParameterStore, GroupsHashAndRounding) {
  ParameterStore store;
  store.add("theta/a", Tensor::from({2}, {0.1, 0.2}));
  store.add("phi/b", Tensor::from({1}, {1.0 / 3.0}));
  store.add("theta/bn/running_mean", Tensor::zeros({1}), false);
  EXPECT_EQ(store.parameters("theta/").size(), 1u);
  EXPECT_EQ(store.parameters().size(), 2u);
  const auto before_phi = store.hash("phi/");
  store.get("theta/a").data()[0] = 0.5;
  EXPECT_EQ(store.hash("phi/"), before_phi);
  EXPECT_THROW(store.add("theta/a", Tensor::zeros({1})), ContractError);
  EXPECT_THROW(store.get("nope"), ContractError);
  store.round_to_checkpoint_precision();
  EXPECT_EQ(store.get("phi/b").data()[0], static_cast<Real>(static_cast<float>(1.0 / 3.0)));
}

TEST(Checkpoint, RoundTripAndShapeCheck) {
  ParameterStore store;
  store.add("theta/w", Tensor::from({2, 2}, {1, 2, 3, 4}));
  store.add("gamma/b", Tensor::from({1, 3}, {5, 6, 7}));
  const auto path = std::filesystem::temp_directory_path() / "jsenet_ckpt.jsec";
  auto snap = snapshot(store);
  snap.push_back({"header/extra", {1}, {42.0f}});
  write_checkpoint(path, snap);
  ParameterStore other;
  other.add("theta/w", Tensor::zeros({2, 2}));
  other.add("gamma/b", Tensor::zeros({1, 3}));
  const auto extra = restore(other, read_checkpoint(path));
  EXPECT_EQ(extra, (std::vector<std::string>{"header/extra"}));
  EXPECT_EQ(other.hash(), store.hash());
  ParameterStore wrong;
  wrong.add("theta/w", Tensor::zeros({4}));
  EXPECT_THROW(restore(wrong, read_checkpoint(path)), InputError);
  std::filesystem::remove(path);
}
