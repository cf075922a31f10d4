#include <gtest/gtest.h>

#include <cmath>

#include "jsenet/metrics.hpp"
#include "test_support.hpp"

using namespace jsenet;
using testing_support::to_i32;
using testing_support::to_vec3;

namespace {

void expect_same(double got, double expected) {
  if (std::isnan(expected)) EXPECT_TRUE(std::isnan(got));
  else EXPECT_DOUBLE_EQ(got, expected);
}

}  // namespace

TEST(Miou, MatchesOracleOnRandomFixtures) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto f = oracle::make_fixture(seed);
    std::vector<double> per_class;
    const double expected = oracle::miou(f.pred, f.labels, f.k, &per_class);
    const IouReport got = miou(to_i32(f.pred), to_i32(f.labels), f.k);
    EXPECT_DOUBLE_EQ(got.mean, expected) << "seed " << seed;
    for (int c = 0; c < f.k; ++c) expect_same(got.per_class[static_cast<std::size_t>(c)], per_class[static_cast<std::size_t>(c)]);
  }
}

TEST(Miou, HandCaseAndAbsentClass) {
  const std::vector<std::int32_t> gt{0, 0, 1, 1, -1};
  const std::vector<std::int32_t> pred{0, 1, 1, 1, 2};
  const IouReport r = miou(pred, gt, 3);
  EXPECT_DOUBLE_EQ(r.per_class[0], 0.5);
  EXPECT_DOUBLE_EQ(r.per_class[1], 2.0 / 3.0);
  EXPECT_TRUE(std::isnan(r.per_class[2]));  // only predicted on an ignored point
  EXPECT_DOUBLE_EQ(r.mean, (0.5 + 2.0 / 3.0) / 2);
}

TEST(Miou, ConfusionMergeEqualsConcatenation) {
  const auto a = oracle::make_fixture(1), b = oracle::make_fixture(2);
  ConfusionMatrix ma(4), mb(4), all(4);
  ma.add(to_i32(a.pred), to_i32(a.labels));
  mb.add(to_i32(b.pred), to_i32(b.labels));
  all.add(to_i32(a.pred), to_i32(a.labels));
  all.add(to_i32(b.pred), to_i32(b.labels));
  ma.merge(mb);
  EXPECT_EQ(miou(ma).mean, miou(all).mean);
  EXPECT_EQ(ma.ignored(), all.ignored());
  EXPECT_THROW(ma.add(std::vector<std::int32_t>{4}, std::vector<std::int32_t>{0}), ContractError);
}

TEST(MfOds, MatchesOracleOnRandomFixtures) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto f = oracle::make_fixture(seed);
    const auto masks = oracle::edge_masks(f.pos, f.labels, 0.02);
    const auto scores = testing_support::lattice_scores(masks, f.k, seed + 1000);
    std::vector<double> per_class;
    const double expected = oracle::mf_ods(scores, masks, f.k, &per_class);
    ThresholdSweep sweep(f.k);
    sweep.add(scores, SemanticEdgeLabels{masks, f.k});
    const MfReport got = mf_ods(sweep);
    EXPECT_DOUBLE_EQ(got.mean, expected) << "seed " << seed;
    for (int c = 0; c < f.k; ++c) expect_same(got.per_class[static_cast<std::size_t>(c)], per_class[static_cast<std::size_t>(c)]);
  }
}

TEST(MfOds, ThresholdIsSharedAcrossScenes) {
  // Each scene alone is perfect at its own threshold (F = 1); one shared
  // threshold cannot do that for both.
  SemanticEdgeLabels a{{1, 0}, 1}, b{{1, 0}, 1};
  const std::vector<double> sa{0.2, 0.1}, sb{0.9, 0.8};
  ThresholdSweep s(1);
  s.add(sa, a);
  s.add(sb, b);
  const MfReport r = mf_ods(s);
  // Best is t in (0.1, 0.2]: tp 2, fp 1, fn 0; the lowest such threshold is reported.
  EXPECT_NEAR(r.mean, 0.8, 1e-12);
  EXPECT_NEAR(r.best_threshold[0], 0.11, 1e-12);
}

TEST(MfOds, ScoreEqualToThresholdIsPositive) {
  SemanticEdgeLabels g{{1}, 1};
  const std::vector<double> s{0.5};
  ThresholdSweep sweep(1);
  sweep.add(s, g);
  EXPECT_EQ(sweep.tp(0, 49), 1u);  // t = 0.50
  EXPECT_EQ(sweep.tp(0, 50), 0u);  // t = 0.51
}

TEST(MfOds, ClassWithoutPositivesIsExcluded) {
  SemanticEdgeLabels g{{1, 0, 1}, 2};
  const std::vector<double> s{0.9, 0.9, 0.1, 0.1, 0.9, 0.9};
  ThresholdSweep sweep(2);
  sweep.add(s, g);
  const MfReport r = mf_ods(sweep);
  EXPECT_TRUE(std::isnan(r.per_class[1]));
  EXPECT_DOUBLE_EQ(r.mean, 1.0);
}

TEST(BoundaryF, MatchesOracleOnRandomFixtures) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto f = oracle::make_fixture(seed);
    const auto expected = oracle::boundary(f.pos, f.pred, f.labels, 0.02);
    const BoundaryScore got = boundary_fscore(to_vec3(f.pos), to_i32(f.pred), to_i32(f.labels), f.k, 0.02);
    EXPECT_DOUBLE_EQ(got.precision, expected.precision) << "seed " << seed;
    EXPECT_DOUBLE_EQ(got.recall, expected.recall);
    EXPECT_DOUBLE_EQ(got.fscore, expected.f);
  }
}

TEST(BoundaryF, PerfectPredictionScoresOne) {
  const auto f = oracle::make_fixture(9);
  auto pred = to_i32(f.labels);
  const BoundaryScore b = boundary_fscore(to_vec3(f.pos), pred, to_i32(f.labels), f.k);
  EXPECT_DOUBLE_EQ(b.fscore, 1.0);
}

TEST(FMeasure, Degenerate) {
  EXPECT_EQ(f_measure(0, 0, 5), 0.0);
  EXPECT_EQ(f_measure(0, 3, 0), 0.0);
  EXPECT_DOUBLE_EQ(f_measure(1, 1, 1), 0.5);
}

TEST(Reports, KeyValuesInPercent) {
  EXPECT_EQ(format_key_values({{"miou", 0.5}, {"x", 0.123456}}), "miou = 50.0000\nx = 12.3456\n");
}
