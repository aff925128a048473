#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ellitrack/features.hpp"

namespace ellitrack {

struct TrainingSample {
  FeatureVector features;
  bool positive = false;  ///< same object in both frames
};

/// Internal node when feature_index >= 0 (x <= threshold goes left);
/// leaf otherwise.
struct TreeNode {
  int feature_index = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  std::array<int, 2> leaf_counts{0, 0};  ///< {negative, positive} training samples

  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct DecisionTree {
  std::vector<TreeNode> nodes;  ///< nodes[0] is the root

  /// Leaf majority; ties vote negative.
  bool predict(const std::array<double, kFeatureCount>& x) const;

  friend bool operator==(const DecisionTree&, const DecisionTree&) = default;
};

class Forest {
 public:
  std::vector<DecisionTree> trees;
  std::uint64_t seed = 0;
  double oob_accuracy = 0.0;

  std::size_t n_trees() const { return trees.size(); }
  /// Fraction of trees voting "same object".
  double votes(const FeatureVector& fv) const;

  friend bool operator==(const Forest&, const Forest&) = default;
};

/// Bagged Gini trees with ceil(sqrt(8)) = 3 candidate features per split,
/// grown until pure. Tree t draws from a generator seeded with seed + t, so
/// the result does not depend on `threads`. Throws ContractError unless
/// both labels are present.
Forest train_forest(std::span<const TrainingSample> samples, int n_trees, std::uint64_t seed, int threads = 1);

std::string forest_to_json(const Forest& forest);
Forest forest_from_json(const std::string& text, const std::string& source = "<memory>");
void save_forest(const std::filesystem::path& path, const Forest& forest);
Forest load_forest(const std::filesystem::path& path);

}  // namespace ellitrack
