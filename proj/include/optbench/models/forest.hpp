#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "optbench/models/tree.hpp"

namespace optbench::models {

struct ForestParams {
  int n_trees = 100;
  std::size_t feature_subset = 0;  // k features tried per node
  bool bootstrap = true;
  std::uint64_t seed = 0;

  void validate(std::size_t n_features) const {
    if (n_trees < 1) throw ConfigError("forest: n_trees must be >= 1");
    if (feature_subset < 1 || feature_subset > n_features)
      throw ConfigError("forest: feature subset k=" + std::to_string(feature_subset) + " outside [1, " +
                        std::to_string(n_features) + "]");
  }
};

class RandomForest {
 public:
  RandomForest() = default;
  explicit RandomForest(std::vector<RegressionTree> trees) : trees_(std::move(trees)) {}

  double predict(std::span<const double> x) const {
    double s = 0.0;
    for (const auto& t : trees_) s += t.predict(x);
    return s / static_cast<double>(trees_.size());
  }

  std::vector<double> predict(const MatrixView& X) const {
    std::vector<double> out(X.rows);
    for (std::size_t i = 0; i < X.rows; ++i) out[i] = predict(X.row(i));
    return out;
  }

  const std::vector<RegressionTree>& trees() const { return trees_; }
  bool operator==(const RandomForest&) const = default;

 private:
  std::vector<RegressionTree> trees_;
};

/// Bagged CART with k-of-d feature sampling at every node.
///
/// Tree t draws from its own generator seeded by (seed, t), so the result
/// does not depend on the order trees are grown in.
inline RandomForest fit_random_forest(const MatrixView& X, std::span<const double> y, const ForestParams& params,
                                      const TreeParams& tree) {
  params.validate(X.cols);
  tree.validate();
  if (y.size() != X.rows) throw ConfigError("fit_random_forest: target length does not match rows");
  if (X.rows < 2 * tree.min_samples_leaf)
    throw DataError("fit_random_forest: need at least 2 * min_samples_leaf rows");

  const SplitIndex index(X, tree);
  std::vector<double> g(X.rows), h(X.rows), c(X.rows);
  std::vector<RegressionTree> trees;
  trees.reserve(static_cast<std::size_t>(params.n_trees));
  for (int t = 0; t < params.n_trees; ++t) {
    std::seed_seq seq{static_cast<std::uint32_t>(params.seed), static_cast<std::uint32_t>(params.seed >> 32),
                      static_cast<std::uint32_t>(t)};
    std::mt19937_64 rng(seq);
    std::fill(c.begin(), c.end(), params.bootstrap ? 0.0 : 1.0);
    if (params.bootstrap) {
      std::uniform_int_distribution<std::size_t> draw(0, X.rows - 1);
      for (std::size_t i = 0; i < X.rows; ++i) c[draw(rng)] += 1.0;
    }
    for (std::size_t i = 0; i < X.rows; ++i) {
      g[i] = -c[i] * y[i];
      h[i] = c[i];
    }
    GrowOptions opt;
    opt.features_per_node = params.feature_subset;
    opt.rng = &rng;
    trees.push_back(grow_tree(index, {g, h, c}, opt));
  }
  return RandomForest(std::move(trees));
}

}  // namespace optbench::models
