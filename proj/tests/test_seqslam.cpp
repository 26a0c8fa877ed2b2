#include <gtest/gtest.h>

#include "oracles.hpp"
#include "seqvpr/seqslam.hpp"
#include "seqvpr/synth.hpp"

using namespace seqvpr;

namespace {

Traversal route(std::size_t frames, std::size_t dim, std::uint64_t seed, std::size_t step = 1) {
  WorldConfig cfg;
  cfg.num_places = frames * step;
  cfg.dim = dim;
  cfg.transform_scale = 0.0;
  cfg.noise = 0.0;
  cfg.rng_seed = seed;
  auto t = generate_world(cfg).traversals[0];
  std::vector<FeatureFrame> kept;
  for (std::size_t i = 0; i < t.frames.size(); i += step) kept.push_back(t.frames[i]);
  t.frames = std::move(kept);
  return t;
}

FeatureFrame frame(std::uint32_t id, std::vector<float> values) { return {id, 0, std::move(values)}; }

}  // namespace

TEST(DifferenceMatrixTest, HandComputedSingleEntry) {
  const std::vector<FeatureFrame> q = {frame(0, {0, 0})}, r = {frame(0, {3, 4})};
  const auto D = build_difference_matrix(q, r);
  ASSERT_EQ(D.rows(), 1);
  ASSERT_EQ(D.cols(), 1);
  EXPECT_EQ(D(0, 0), 25.0);
}

TEST(DifferenceMatrixTest, IdenticalTraversalsHaveZeroDiagonal) {
  const auto t = route(20, 8, 1);
  const auto D = build_difference_matrix(t.frames, t.frames);
  for (Eigen::Index i = 0; i < D.rows(); ++i) EXPECT_EQ(D(i, i), 0.0);
  EXPECT_GT(D(0, 1), 0.0);
}

TEST(ContrastEnhance, HandComputedColumn) {
  DifferenceMatrix D(3, 1);
  D << 0, 2, 4;
  const auto E = contrast_enhance(D, 3);
  const double expected = 2.0 / std::sqrt(8.0 / 3.0);
  EXPECT_NEAR(E(0, 0), -expected, 1e-8);
  EXPECT_NEAR(E(1, 0), 0.0, 1e-12);
  EXPECT_NEAR(E(2, 0), expected, 1e-8);
  EXPECT_NEAR(expected, 1.2247, 1e-4);
}

TEST(ContrastEnhance, ConstantMatrixBecomesZero) {
  const DifferenceMatrix D = DifferenceMatrix::Constant(6, 4, 3.5);
  EXPECT_EQ(contrast_enhance(D, 3).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_THROW(contrast_enhance(D, 0), ConfigError);
}

TEST(MatchSequence, AlignedTraversalsRecoverTheStart) {
  const auto t = route(30, 8, 2);
  const auto E = contrast_enhance(build_difference_matrix(t.frames, t.frames), 5);
  for (std::size_t q = 0; q + 5 <= 30; ++q) EXPECT_EQ(match_sequence(E, q, 5, {1.0, 1.0, 1}).reference_start, q);
}

TEST(MatchSequence, DoubleSpeedPrefersSlopeTwo) {
  const auto reference = route(40, 8, 3);
  const auto query = route(20, 8, 3, 2);
  const auto E = contrast_enhance(build_difference_matrix(query.frames, reference.frames), 5);
  const auto slope_two = match_sequence(E, 2, 6, {2.0, 2.0, 1});
  const auto slope_one = match_sequence(E, 2, 6, {1.0, 1.0, 1});
  EXPECT_EQ(slope_two.reference_start, 4u);
  EXPECT_LT(slope_two.score, slope_one.score);
  const auto sweep = match_sequence(E, 2, 6, {1.0, 2.0, 3});
  EXPECT_EQ(sweep.velocity, 2.0);
  EXPECT_EQ(sweep.reference_start, 4u);
}

TEST(MatchSequence, SingleFrameSequences) {
  DifferenceMatrix E(2, 3);
  E << 1, -1, 0, 0, 0, -2;
  EXPECT_EQ(match_sequence(E, 0, 1, {1.0, 1.0, 1}).reference_start, 1u);
  EXPECT_EQ(match_sequence(E, 1, 1, {1.0, 1.0, 1}).reference_start, 2u);
}

TEST(MatchSequence, TiesGoToTheLowestStart) {
  const DifferenceMatrix E = DifferenceMatrix::Zero(3, 5);
  EXPECT_EQ(match_sequence(E, 0, 3, {1.0, 1.0, 1}).reference_start, 0u);
}

TEST(MatchSequence, Errors) {
  const DifferenceMatrix E = DifferenceMatrix::Zero(5, 3);
  EXPECT_THROW(match_sequence(E, 0, 4, {1.0, 1.0, 1}), NoMatchError);
  EXPECT_THROW(match_sequence(E, 3, 4, {1.0, 1.0, 1}), ConfigError);
  EXPECT_THROW(match_sequence(E, 0, 2, {0.0, 1.0, 2}), ConfigError);
}

TEST(RunSeqSlam, NoiselessAlignedTraversalsAreFullyRecovered) {
  const auto t = route(100, 16, 4);
  const auto result = run_seqslam(t, t, SeqSlamParams{}, PlaceConvention{0});
  EXPECT_EQ(result.matches.size(), 91u);
  EXPECT_EQ(result.precision, 1.0);
  for (const auto& m : result.matches) EXPECT_EQ(m.reference_start, m.query_start);
}

TEST(RunSeqSlam, ReversedQueryCollapses) {
  WorldConfig cfg;
  cfg.num_places = 120;
  cfg.dim = 16;
  cfg.temporal_correlation = 0.9;
  cfg.rng_seed = 5;
  auto store = generate_world(cfg);
  const double forward = run_seqslam(store.traversals[1], store.traversals[0], SeqSlamParams{}, {}).precision;
  store = perturb_reverse(std::move(store), 1);
  const double reversed = run_seqslam(store.traversals[1], store.traversals[0], SeqSlamParams{}, {}).precision;
  const double single = single_frame_precision(store.traversals[1], store.traversals[0], {});
  EXPECT_GT(forward, single);
  EXPECT_LT(reversed, single - 0.10);
}
