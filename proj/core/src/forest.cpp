#include "ellitrack/forest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "ellitrack/error.hpp"
#include "ellitrack/parallel.hpp"

namespace ellitrack {

using nlohmann::json;

namespace {

using Row = std::array<double, kFeatureCount>;

double gini(int neg, int pos) {
  const double n = neg + pos;
  if (n == 0) return 0.0;
  const double p = pos / n;
  return 2.0 * p * (1.0 - p);
}

struct Split {
  int feature = -1;
  double threshold = 0.0;
  double gain = -1.0;
};

class TreeBuilder {
 public:
  TreeBuilder(const std::vector<Row>& x, const std::vector<bool>& y, std::mt19937_64& rng)
      : x_(x), y_(y), rng_(rng) {}

  DecisionTree build(std::vector<int> idx) {
    tree_.nodes.clear();
    grow(std::move(idx));
    return std::move(tree_);
  }

 private:
  int grow(std::vector<int> idx) {
    const int node = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    int pos = 0;
    for (int i : idx) pos += y_[i] ? 1 : 0;
    const int neg = static_cast<int>(idx.size()) - pos;
    tree_.nodes[node].leaf_counts = {neg, pos};
    if (pos == 0 || neg == 0 || idx.size() < 2) return node;

    std::array<int, kFeatureCount> order;
    std::iota(order.begin(), order.end(), 0);
    constexpr std::size_t mtry = 3;  // ceil(sqrt(8))
    for (std::size_t i = 0; i < mtry; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, kFeatureCount - 1);
      std::swap(order[i], order[pick(rng_)]);
    }
    Split best;
    for (std::size_t i = 0; i < mtry; ++i) consider(idx, order[i], neg, pos, best);
    // Constant candidates: fall back to the remaining features before giving up.
    for (std::size_t i = mtry; i < kFeatureCount && best.feature < 0; ++i) consider(idx, order[i], neg, pos, best);
    if (best.feature < 0) return node;

    std::vector<int> left, right;
    for (int i : idx) (x_[i][best.feature] <= best.threshold ? left : right).push_back(i);
    idx.clear();
    idx.shrink_to_fit();
    const int l = grow(std::move(left));
    const int r = grow(std::move(right));
    TreeNode& n = tree_.nodes[node];
    n.feature_index = best.feature;
    n.threshold = best.threshold;
    n.left = l;
    n.right = r;
    return node;
  }

  void consider(const std::vector<int>& idx, int f, int neg, int pos, Split& best) const {
    std::vector<int> sorted = idx;
    std::stable_sort(sorted.begin(), sorted.end(), [&](int a, int b) { return x_[a][f] < x_[b][f]; });
    const double parent = gini(neg, pos);
    const double n = static_cast<double>(sorted.size());
    int lpos = 0, lneg = 0;
    for (std::size_t k = 0; k + 1 < sorted.size(); ++k) {
      (y_[sorted[k]] ? lpos : lneg) += 1;
      const double v0 = x_[sorted[k]][f];
      const double v1 = x_[sorted[k + 1]][f];
      if (!(v0 < v1)) continue;
      const double nl = lpos + lneg;
      const double nr = n - nl;
      const double gain = parent - (nl / n) * gini(lneg, lpos) - (nr / n) * gini(neg - lneg, pos - lpos);
      if (gain > best.gain) {
        best.gain = gain;
        best.feature = f;
        best.threshold = 0.5 * (v0 + v1);
        if (!(best.threshold < v1)) best.threshold = v0;  // adjacent doubles
      }
    }
  }

  const std::vector<Row>& x_;
  const std::vector<bool>& y_;
  std::mt19937_64& rng_;
  DecisionTree tree_;
};

}  // namespace

bool DecisionTree::predict(const Row& x) const {
  int n = 0;
  while (nodes[n].feature_index >= 0) {
    n = x[nodes[n].feature_index] <= nodes[n].threshold ? nodes[n].left : nodes[n].right;
  }
  return nodes[n].leaf_counts[1] > nodes[n].leaf_counts[0];
}

double Forest::votes(const FeatureVector& fv) const {
  if (trees.empty()) throw ContractError("Forest::votes: forest is untrained");
  const Row x = fv.values();
  std::size_t yes = 0;
  for (const DecisionTree& t : trees) yes += t.predict(x) ? 1 : 0;
  return static_cast<double>(yes) / static_cast<double>(trees.size());
}

Forest train_forest(std::span<const TrainingSample> samples, int n_trees, std::uint64_t seed, int threads) {
  if (n_trees < 1) throw ContractError("train_forest: n_trees must be >= 1");
  if (samples.size() < 2) throw ContractError("train_forest: at least 2 samples required");
  std::vector<Row> x;
  std::vector<bool> y;
  for (const TrainingSample& s : samples) {
    const Row r = s.features.values();
    for (double v : r) {
      if (!std::isfinite(v)) throw ContractError("train_forest: non-finite feature value");
    }
    x.push_back(r);
    y.push_back(s.positive);
  }
  const auto positives = std::count(y.begin(), y.end(), true);
  if (positives == 0 || positives == static_cast<long>(y.size())) {
    throw ContractError("train_forest: both positive and negative samples are required");
  }

  const std::size_t n = samples.size();
  Forest forest;
  forest.seed = seed;
  forest.trees.resize(n_trees);
  std::vector<std::vector<bool>> in_bag(n_trees, std::vector<bool>(n, false));
  parallel_for(static_cast<std::size_t>(n_trees), threads, [&](std::size_t t) {
    std::mt19937_64 rng(seed + t);
    std::uniform_int_distribution<std::size_t> draw(0, n - 1);
    std::vector<int> idx(n);
    for (std::size_t i = 0; i < n; ++i) {
      idx[i] = static_cast<int>(draw(rng));
      in_bag[t][idx[i]] = true;
    }
    TreeBuilder builder(x, y, rng);
    forest.trees[t] = builder.build(std::move(idx));
  });

  std::size_t scored = 0, correct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t voters = 0, yes = 0;
    for (int t = 0; t < n_trees; ++t) {
      if (in_bag[t][i]) continue;
      ++voters;
      yes += forest.trees[t].predict(x[i]) ? 1 : 0;
    }
    if (voters == 0) continue;
    ++scored;
    const bool predicted = 2 * yes > voters;
    correct += predicted == y[i] ? 1 : 0;
  }
  forest.oob_accuracy = scored == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(scored);
  return forest;
}

// --- JSON -----------------------------------------------------------------------

namespace {
constexpr const char* kForestSchema = "ellitrack.forest";
constexpr int kForestVersion = 1;
}  // namespace

std::string forest_to_json(const Forest& forest) {
  json doc;
  doc["schema"] = kForestSchema;
  doc["version"] = kForestVersion;
  doc["seed"] = forest.seed;
  doc["oob_accuracy"] = forest.oob_accuracy;
  json names = json::array();
  for (const char* name : FeatureVector::names()) names.push_back(name);
  doc["features"] = names;
  json trees = json::array();
  for (const DecisionTree& t : forest.trees) {
    json nodes = json::array();
    for (const TreeNode& n : t.nodes) {
      nodes.push_back({{"feature_index", n.feature_index},
                       {"threshold", n.threshold},
                       {"left", n.left},
                       {"right", n.right},
                       {"leaf_counts", {n.leaf_counts[0], n.leaf_counts[1]}}});
    }
    trees.push_back({{"nodes", nodes}});
  }
  doc["trees"] = trees;
  return doc.dump();
}

Forest forest_from_json(const std::string& text, const std::string& source) {
  try {
    const json doc = json::parse(text);
    if (doc.value("schema", "") != kForestSchema) throw IoError(source + ": not a forest document");
    if (doc.at("version").get<int>() != kForestVersion) {
      throw IoError(source + ": unsupported forest version " + doc.at("version").dump());
    }
    Forest forest;
    forest.seed = doc.at("seed").get<std::uint64_t>();
    forest.oob_accuracy = doc.at("oob_accuracy").get<double>();
    for (const json& t : doc.at("trees")) {
      DecisionTree tree;
      for (const json& n : t.at("nodes")) {
        TreeNode node;
        node.feature_index = n.at("feature_index").get<int>();
        node.threshold = n.at("threshold").get<double>();
        node.left = n.at("left").get<int>();
        node.right = n.at("right").get<int>();
        node.leaf_counts = {n.at("leaf_counts").at(0).get<int>(), n.at("leaf_counts").at(1).get<int>()};
        tree.nodes.push_back(node);
      }
      const int size = static_cast<int>(tree.nodes.size());
      if (size == 0) throw IoError(source + ": empty tree");
      for (const TreeNode& node : tree.nodes) {
        if (node.feature_index >= static_cast<int>(kFeatureCount) ||
            (node.feature_index >= 0 && (node.left <= 0 || node.left >= size || node.right <= 0 || node.right >= size))) {
          throw IoError(source + ": corrupt tree node");
        }
      }
      forest.trees.push_back(std::move(tree));
    }
    if (forest.trees.empty()) throw IoError(source + ": forest has no trees");
    return forest;
  } catch (const json::exception& e) {
    throw IoError(source + ": malformed forest (" + e.what() + ")");
  }
}

void save_forest(const std::filesystem::path& path, const Forest& forest) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << forest_to_json(forest) << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

Forest load_forest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return forest_from_json(ss.str(), path.string());
}

}  // namespace ellitrack
