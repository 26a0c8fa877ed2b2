#include <gtest/gtest.h>

#include "oracles.hpp"
#include "seqvpr/synth.hpp"

using namespace seqvpr;

namespace {

WorldConfig identity_config() {
  WorldConfig cfg;
  cfg.num_places = 30;
  cfg.dim = 8;
  cfg.transform_scale = 0.0;
  cfg.noise = 0.0;
  cfg.offset_scale = 0.0;
  cfg.conditions = 3;
  return cfg;
}

bool same_frames(const Traversal& a, const Traversal& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a.frames[i].frame_id != b.frames[i].frame_id || a.frames[i].features != b.frames[i].features)
      return false;
  return true;
}

std::vector<std::uint32_t> ids_of(const Traversal& t) {
  std::vector<std::uint32_t> ids;
  for (const auto& f : t.frames) ids.push_back(f.frame_id);
  return ids;
}

}  // namespace

TEST(GenerateWorld, IdentityConditionsProduceIdenticalTraversals) {
  const auto store = generate_world(identity_config());
  ASSERT_EQ(store.traversals.size(), 3u);
  for (std::size_t c = 1; c < 3; ++c) {
    ASSERT_EQ(store.traversals[c].size(), 30u);
    for (std::size_t i = 0; i < 30; ++i)
      EXPECT_EQ(store.traversals[c].frames[i].features, store.traversals[0].frames[i].features);
  }
  EXPECT_EQ(store.traversals[2].frames[5].condition_id, 2u);
}

TEST(GenerateWorld, PlaceVectorsHaveUnitNorm) {
  for (double rho : {0.0, 0.9}) {
    auto cfg = identity_config();
    cfg.temporal_correlation = rho;
    const auto store = generate_world(cfg);
    for (const auto& f : store.traversals[0].frames) {
      double s = 0.0;
      for (float v : f.features) s += double(v) * v;
      EXPECT_NEAR(std::sqrt(s), 1.0, 1e-6);
    }
  }
}

TEST(GenerateWorld, TemporalCorrelationLinksNeighbours) {
  auto cfg = identity_config();
  cfg.dim = 64;
  cfg.num_places = 400;
  auto mean_dot = [](const FeatureStore& s) {
    const auto& f = s.traversals[0].frames;
    double sum = 0.0;
    for (std::size_t i = 1; i < f.size(); ++i)
      for (std::size_t j = 0; j < f[i].features.size(); ++j) sum += double(f[i].features[j]) * f[i - 1].features[j];
    return sum / static_cast<double>(f.size() - 1);
  };
  EXPECT_NEAR(mean_dot(generate_world(cfg)), 0.0, 0.05);
  cfg.temporal_correlation = 0.9;
  EXPECT_NEAR(mean_dot(generate_world(cfg)), 0.9, 0.05);
}

TEST(GenerateWorld, SameSeedIsBitIdentical) {
  WorldConfig cfg;
  cfg.num_places = 40;
  cfg.dim = 16;
  const auto a = generate_world(cfg), b = generate_world(cfg);
  for (std::size_t c = 0; c < 2; ++c) EXPECT_TRUE(same_frames(a.traversals[c], b.traversals[c]));
  cfg.rng_seed = 1;
  EXPECT_FALSE(same_frames(a.traversals[0], generate_world(cfg).traversals[0]));
}

TEST(GenerateWorld, ValidatesConfig) {
  auto cfg = identity_config();
  cfg.num_places = 5;
  EXPECT_THROW(generate_world(cfg), ConfigError);
  cfg = identity_config();
  cfg.conditions = 1;
  EXPECT_THROW(generate_world(cfg), ConfigError);
  cfg = identity_config();
  cfg.noise = -1.0;
  EXPECT_THROW(generate_world(cfg), ConfigError);
  cfg = identity_config();
  cfg.temporal_correlation = 1.0;
  EXPECT_THROW(generate_world(cfg), ConfigError);
}

TEST(PerturbReverse, IsAnInvolutionAndKeepsFrameIds) {
  WorldConfig cfg;
  cfg.num_places = 20;
  cfg.dim = 4;
  const auto store = generate_world(cfg);
  const auto once = perturb_reverse(store, 1);
  EXPECT_EQ(once.traversals[1].frames.front().frame_id, 19u);
  EXPECT_EQ(once.traversals[1].frames.front().features, store.traversals[1].frames.back().features);
  EXPECT_TRUE(same_frames(once.traversals[0], store.traversals[0]));
  EXPECT_TRUE(same_frames(perturb_reverse(once, 1).traversals[1], store.traversals[1]));
  EXPECT_THROW(perturb_reverse(store, 5), ConfigError);
}

TEST(PerturbSpeed, UnitMultiplierIsTheIdentity) {
  const auto store = generate_world(identity_config());
  std::mt19937_64 rng(1);
  EXPECT_TRUE(same_frames(perturb_speed(store, 0, {1}, rng).traversals[0], store.traversals[0]));
}

TEST(PerturbSpeed, DoubleSpeedKeepsEveryOtherFrame) {
  const auto store = oracle::make_store(10, 1, 2, [](auto, auto i, auto) { return float(i); });
  std::mt19937_64 rng(2);
  const auto sped = perturb_speed(store, 1, {2}, rng);
  EXPECT_EQ(ids_of(sped.traversals[1]), (std::vector<std::uint32_t>{0, 2, 4, 6, 8}));
  EXPECT_EQ(sped.traversals[0].size(), 10u);
}

TEST(PerturbSpeed, MixedMultipliersStayWithinBounds) {
  const auto store = oracle::make_store(300, 1, 2, [](auto, auto i, auto) { return float(i); });
  std::mt19937_64 rng(3);
  const auto sped = perturb_speed(store, 0, {1, 2, 3}, rng);
  const auto ids = ids_of(sped.traversals[0]);
  EXPECT_GE(ids.size(), 100u);
  EXPECT_LE(ids.size(), 300u);
  EXPECT_EQ(ids.front(), 0u);
  for (std::size_t i = 1; i < ids.size(); ++i) {
    EXPECT_GE(ids[i] - ids[i - 1], 1u);
    EXPECT_LE(ids[i] - ids[i - 1], 3u);
  }
  EXPECT_THROW(perturb_speed(store, 0, {}, rng), ConfigError);
  EXPECT_THROW(perturb_speed(store, 0, {0}, rng), ConfigError);
}

TEST(SplitPlaces, RebasesTheSecondPart) {
  const auto store = oracle::make_store(10, 1, 2, [](auto, auto i, auto) { return float(i); });
  const auto [train, test] = split_places(store, 6);
  EXPECT_EQ(train.traversals[1].size(), 6u);
  EXPECT_EQ(ids_of(test.traversals[1]), (std::vector<std::uint32_t>{0, 1, 2, 3}));
  EXPECT_EQ(test.traversals[1].frames[0].features[0], 6.0f);
  EXPECT_THROW(split_places(store, 11), ConfigError);
}

TEST(GroundTruth, MapsFramesToPlaces) {
  auto store = oracle::make_store(3, 1, 2, [](auto, auto, auto) { return 0.0f; });
  store.convention.tolerance = 1;
  const auto gt = ground_truth_json(store);
  EXPECT_EQ(gt["tolerance"], 1);
  EXPECT_EQ(gt["conditions"].size(), 2u);
  EXPECT_EQ(gt["conditions"][1]["place_of_frame"]["2"], 2);
}
