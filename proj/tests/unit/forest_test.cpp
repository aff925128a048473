#include <gtest/gtest.h>

#include <cmath>

#include "ellitrack/error.hpp"
#include "ellitrack/forest.hpp"
#include "support.hpp"

using namespace ellitrack;
using ellitrack::testing::descriptor_at;
using ellitrack::testing::separable_samples;
using ellitrack::testing::TempDir;

namespace {

FeatureVector with_center(double d) {
  std::array<double, kFeatureCount> v{};
  v.fill(0.5);
  v[0] = d;
  return FeatureVector::from_values(v);
}

/// Noisy labels: P(positive) = 0.8 when feature 1 < 0.5, else 0.2.
std::vector<TrainingSample> noisy_samples(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<TrainingSample> out;
  for (int i = 0; i < n; ++i) {
    std::array<double, kFeatureCount> v{};
    for (double& x : v) x = u(rng);
    const bool pos = u(rng) < (v[1] < 0.5 ? 0.8 : 0.2);
    out.push_back({FeatureVector::from_values(v), pos});
  }
  return out;
}

int leaves_total(const DecisionTree& t) {
  int n = 0;
  for (const TreeNode& node : t.nodes) {
    if (node.feature_index < 0) n += node.leaf_counts[0] + node.leaf_counts[1];
  }
  return n;
}

}  // namespace

TEST(Forest, SeparableDataIsLearned) {
  const auto samples = separable_samples(100, 1);
  const Forest f = train_forest(samples, 25, 3);
  EXPECT_EQ(f.n_trees(), 25u);
  EXPECT_GE(f.oob_accuracy, 0.99);
  EXPECT_EQ(f.votes(with_center(1.0)), 1.0);
  EXPECT_EQ(f.votes(with_center(9.0)), 0.0);
}

TEST(Forest, VotesAreMultiplesOfOneOverN) {
  const auto samples = noisy_samples(300, 2);
  const Forest f = train_forest(samples, 7, 4);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0, 1);
  for (int i = 0; i < 200; ++i) {
    std::array<double, kFeatureCount> v{};
    for (double& x : v) x = u(rng);
    const double votes = f.votes(FeatureVector::from_values(v));
    EXPECT_GE(votes, 0.0);
    EXPECT_LE(votes, 1.0);
    EXPECT_NEAR(votes * 7, std::round(votes * 7), 1e-12);
  }
}

TEST(Forest, DeterministicInSeed) {
  const auto samples = noisy_samples(200, 3);
  EXPECT_EQ(train_forest(samples, 10, 11), train_forest(samples, 10, 11));
  EXPECT_NE(train_forest(samples, 10, 11).trees, train_forest(samples, 10, 12).trees);
}

TEST(Forest, ThreadCountDoesNotMatter) {
  const auto samples = noisy_samples(250, 4);
  const Forest one = train_forest(samples, 12, 5, 1);
  EXPECT_EQ(one, train_forest(samples, 12, 5, 3));
  EXPECT_EQ(one, train_forest(samples, 12, 5, 8));
}

TEST(Forest, SingleTree) {
  const auto samples = noisy_samples(100, 6);
  const Forest f = train_forest(samples, 1, 7);
  ASSERT_EQ(f.n_trees(), 1u);
  const double v = f.votes(samples[0].features);
  EXPECT_TRUE(v == 0.0 || v == 1.0);
}

TEST(Forest, TreesArePureAndHoldTheBootstrap) {
  const auto samples = noisy_samples(150, 8);
  const Forest f = train_forest(samples, 5, 1);
  for (const DecisionTree& t : f.trees) {
    EXPECT_EQ(leaves_total(t), 150);
    for (const TreeNode& n : t.nodes) {
      if (n.feature_index >= 0) {
        EXPECT_LT(n.feature_index, static_cast<int>(kFeatureCount));
        EXPECT_GT(n.left, 0);
        EXPECT_GT(n.right, 0);
      }
    }
  }
}

TEST(Forest, TreeMajorityTieVotesNegative) {
  DecisionTree t;
  t.nodes.push_back(TreeNode{});
  t.nodes[0].leaf_counts = {2, 2};
  EXPECT_FALSE(t.predict({}));
  t.nodes[0].leaf_counts = {1, 2};
  EXPECT_TRUE(t.predict({}));
}

TEST(Forest, NoisyOobNearBayesRate) {
  const Forest f = train_forest(noisy_samples(2000, 10), 50, 2);
  EXPECT_GT(f.oob_accuracy, 0.7);
  EXPECT_LE(f.oob_accuracy, 0.85);
}

TEST(Forest, RejectsSingleClass) {
  auto samples = separable_samples(20, 1);
  for (auto& s : samples) s.positive = true;
  EXPECT_THROW(train_forest(samples, 5, 1), ContractError);
  EXPECT_THROW(train_forest({}, 5, 1), ContractError);
  EXPECT_THROW(train_forest(separable_samples(20, 1), 0, 1), ContractError);
}

TEST(Forest, JsonRoundTrip) {
  const Forest f = train_forest(noisy_samples(200, 12), 6, 13);
  const Forest back = forest_from_json(forest_to_json(f));
  EXPECT_EQ(back, f);
  TempDir dir("forest");
  save_forest(dir.path() / "f.json", f);
  EXPECT_EQ(load_forest(dir.path() / "f.json"), f);
}

TEST(Forest, MalformedJsonNamesSource) {
  try {
    forest_from_json("{\"trees\": 3}", "bad.json");
    FAIL();
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("bad.json"), std::string::npos);
  }
  EXPECT_THROW(load_forest("/nonexistent/forest.json"), IoError);
}

TEST(Forest, IdentityPairScoresAsSameObject) {
  // a forest trained on geometric feature pairs recognises an object paired with itself
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0, 1);
  const GrayImage img = GrayImage::filled(128, 128, 0.4);
  std::vector<TrainingSample> samples;
  for (int i = 0; i < 120; ++i) {
    const Point2 c{40 + 40 * u(rng), 40 + 40 * u(rng)};
    const double t = 3 * u(rng);
    const ObjectDescriptor a = descriptor_at(img, c, {10, 5}, t);
    const ObjectDescriptor same = descriptor_at(img, {c.x + 2 * u(rng), c.y + 2 * u(rng)}, {10, 5}, t + 0.1 * u(rng));
    const ObjectDescriptor other = descriptor_at(img, {c.x + 20 + 10 * u(rng), c.y}, {7, 4}, t + 1.0);
    samples.push_back({pair_features(a, same), true});
    samples.push_back({pair_features(a, other), false});
  }
  const Forest f = train_forest(samples, 30, 1);
  const ObjectDescriptor probe = descriptor_at(img, {64, 64}, {10, 5}, 0.7);
  EXPECT_GE(f.votes(pair_features(probe, probe)), 0.5);
}
