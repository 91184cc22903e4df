#pragma once

// Regression trees grown level-wise on per-row gradient statistics.
//
// Every learner in this library reduces to the same grower. A node holding
// gradient sum G, hessian sum H and penalty lambda has structure score
// G^2 / (H + lambda); a split's gain is
//
//   1/2 [G_L^2/(H_L+lambda) + G_R^2/(H_R+lambda) - G^2/(H+lambda)] - gamma
//
// and a leaf's value is -G / (H + lambda). Plain variance-reduction CART is
// the special case g_i = -w_i y_i, h_i = w_i, lambda = gamma = 0: the gain is
// then half the weighted SSE reduction and the leaf value the weighted mean.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "optbench/error.hpp"
#include "optbench/features.hpp"

namespace optbench::models {

/// Non-owning row-major matrix.
struct MatrixView {
  const double* data = nullptr;
  std::size_t rows = 0;
  std::size_t cols = 0;

  MatrixView() = default;
  MatrixView(const double* d, std::size_t r, std::size_t c) : data(d), rows(r), cols(c) {}
  MatrixView(std::span<const double> d, std::size_t r, std::size_t c) : data(d.data()), rows(r), cols(c) {
    if (d.size() != r * c) throw ConfigError("matrix view: size mismatch");
  }
  explicit MatrixView(const FeatureMatrix& m) : data(m.X.data()), rows(m.rows), cols(m.cols()) {}

  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
  std::span<const double> row(std::size_t i) const { return {data + i * cols, cols}; }
};

enum class SplitMode { kExact, kHistogram };

struct TreeParams {
  int max_depth = 6;
  std::size_t min_samples_leaf = 1;
  SplitMode split_mode = SplitMode::kExact;
  int n_bins = 256;

  void validate() const {
    if (max_depth < 1) throw ConfigError("tree: max_depth must be >= 1");
    if (min_samples_leaf < 1) throw ConfigError("tree: min_samples_leaf must be >= 1");
    if (n_bins < 2) throw ConfigError("tree: n_bins must be >= 2");
  }
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;

  bool is_leaf() const { return feature < 0; }
  bool operator==(const TreeNode&) const = default;
};

class RegressionTree {
 public:
  RegressionTree() : nodes_{TreeNode{}} {}
  explicit RegressionTree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {
    if (nodes_.empty()) throw DataError("tree: no nodes");
  }

  double predict(std::span<const double> x) const {
    int id = 0;
    while (!nodes_[id].is_leaf()) {
      const auto& n = nodes_[id];
      id = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
    }
    return nodes_[id].value;
  }

  std::vector<double> predict(const MatrixView& X) const {
    std::vector<double> out(X.rows);
    for (std::size_t i = 0; i < X.rows; ++i) out[i] = predict(X.row(i));
    return out;
  }

  const std::vector<TreeNode>& nodes() const { return nodes_; }

  int depth() const { return depth_from(0); }

  std::size_t leaf_count() const {
    return static_cast<std::size_t>(
        std::count_if(nodes_.begin(), nodes_.end(), [](const TreeNode& n) { return n.is_leaf(); }));
  }

  bool operator==(const RegressionTree&) const = default;

 private:
  int depth_from(int id) const {
    const auto& n = nodes_[id];
    return n.is_leaf() ? 0 : 1 + std::max(depth_from(n.left), depth_from(n.right));
  }

  std::vector<TreeNode> nodes_;
};

/// Per-fit preprocessing shared by every tree grown on the same X:
/// presorted row orders (exact mode) or equal-frequency bins (histogram).
class SplitIndex {
 public:
  SplitIndex(const MatrixView& X, const TreeParams& params) : X_(X), params_(params) {
    params.validate();
    if (params.split_mode == SplitMode::kExact) {
      sorted_.resize(X.cols);
      for (std::size_t f = 0; f < X.cols; ++f) {
        auto& order = sorted_[f];
        order.resize(X.rows);
        std::iota(order.begin(), order.end(), 0u);
        std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) { return X(a, f) < X(b, f); });
      }
    } else {
      build_bins();
    }
  }

  const MatrixView& X() const { return X_; }
  const TreeParams& params() const { return params_; }
  const std::vector<std::uint32_t>& sorted(std::size_t f) const { return sorted_[f]; }

  std::size_t bin_count(std::size_t f) const { return bin_lo_[f].size(); }
  std::uint32_t bin_of(std::size_t row, std::size_t f) const { return bins_[row * X_.cols + f]; }
  double bin_lo(std::size_t f, std::size_t b) const { return bin_lo_[f][b]; }
  double bin_hi(std::size_t f, std::size_t b) const { return bin_hi_[f][b]; }

 private:
  void build_bins() {
    const std::size_t n = X_.rows;
    bins_.assign(n * X_.cols, 0);
    bin_lo_.assign(X_.cols, {});
    bin_hi_.assign(X_.cols, {});
    std::vector<double> values(n);
    for (std::size_t f = 0; f < X_.cols; ++f) {
      for (std::size_t i = 0; i < n; ++i) values[i] = X_(i, f);
      std::sort(values.begin(), values.end());
      // distinct values with their multiplicities
      std::vector<double> distinct;
      std::vector<std::size_t> counts;
      for (double v : values) {
        if (distinct.empty() || v != distinct.back()) {
          distinct.push_back(v);
          counts.push_back(0);
        }
        ++counts.back();
      }
      auto& lo = bin_lo_[f];
      auto& hi = bin_hi_[f];
      const auto target_bins = static_cast<std::size_t>(params_.n_bins);
      if (distinct.size() <= target_bins) {
        lo = distinct;
        hi = distinct;
      } else {
        // Close a bin once the running count reaches its equal-frequency
        // quota; the last bin takes whatever remains.
        std::size_t acc = 0;
        const double quota = static_cast<double>(n) / static_cast<double>(target_bins);
        for (std::size_t j = 0; j < distinct.size(); ++j) {
          if (lo.size() == hi.size()) lo.push_back(distinct[j]);
          acc += counts[j];
          const bool last = j + 1 == distinct.size();
          const bool full = static_cast<double>(acc) >= static_cast<double>(hi.size() + 1) * quota;
          if (last || (full && hi.size() + 1 < target_bins)) hi.push_back(distinct[j]);
        }
      }
      for (std::size_t i = 0; i < n; ++i) {
        const double v = X_(i, f);
        const auto it = std::lower_bound(hi.begin(), hi.end(), v);
        bins_[i * X_.cols + f] = static_cast<std::uint32_t>(it - hi.begin());
      }
    }
  }

  MatrixView X_;
  TreeParams params_;
  std::vector<std::vector<std::uint32_t>> sorted_;
  std::vector<std::uint32_t> bins_;
  std::vector<std::vector<double>> bin_lo_, bin_hi_;
};

struct GrowOptions {
  double lambda = 0.0;
  double gamma = 0.0;
  std::size_t features_per_node = 0;  // 0 = all features
  std::mt19937_64* rng = nullptr;     // required when features_per_node < cols
};

struct GradientStats {
  std::span<const double> grad;
  std::span<const double> hess;
  std::span<const double> count;  // sample multiplicity, 0 excludes the row
};

namespace detail {

// Splits with gain below this fraction of the node's total sum g^2/h are
// treated as rounding noise.
inline constexpr double kRelativeGainFloor = 1e-12;

inline double midpoint(double a, double b) {
  const double m = a + (b - a) / 2.0;
  return m < b ? m : a;
}

struct NodeAccum {
  double G = 0.0, H = 0.0, n = 0.0, energy = 0.0;
};

struct Candidate {
  double gain = -std::numeric_limits<double>::infinity();
  int feature = -1;
  double threshold = 0.0;
};

inline double structure_score(double G, double H, double lambda) {
  const double d = H + lambda;
  return d > 0.0 ? G * G / d : 0.0;
}

inline double split_gain(double GL, double HL, double GR, double HR, double lambda, double gamma) {
  return 0.5 * (structure_score(GL, HL, lambda) + structure_score(GR, HR, lambda) -
                structure_score(GL + GR, HL + HR, lambda)) -
         gamma;
}

}  // namespace detail

/// Grow one tree on gradient statistics. Rows with count 0 are ignored;
/// min_samples_leaf is measured in summed counts.
inline RegressionTree grow_tree(const SplitIndex& index, const GradientStats& stats, const GrowOptions& opt) {
  const auto& X = index.X();
  const auto& params = index.params();
  const std::size_t n = X.rows;
  const std::size_t d = X.cols;
  if (stats.grad.size() != n || stats.hess.size() != n || stats.count.size() != n)
    throw ConfigError("grow_tree: gradient statistics size mismatch");
  const std::size_t k = opt.features_per_node == 0 ? d : opt.features_per_node;
  if (k > d) throw ConfigError("grow_tree: features_per_node exceeds feature count");
  if (k < d && opt.rng == nullptr) throw ConfigError("grow_tree: feature subsampling needs an rng");
  const double msl = static_cast<double>(params.min_samples_leaf);

  std::vector<TreeNode> nodes(1);
  std::vector<int> node_of(n, -1);  // slot of the row's node in the current level
  std::vector<int> level_nodes{0};
  for (std::size_t i = 0; i < n; ++i)
    if (stats.count[i] > 0.0) node_of[i] = 0;

  auto leaf_value = [&](const detail::NodeAccum& a) {
    const double denom = a.H + opt.lambda;
    return denom > 0.0 ? -a.G / denom : 0.0;
  };

  std::vector<std::size_t> all_features(d);
  std::iota(all_features.begin(), all_features.end(), 0);

  for (int depth = 0; !level_nodes.empty(); ++depth) {
    const std::size_t m = level_nodes.size();
    std::vector<detail::NodeAccum> total(m);
    for (std::size_t i = 0; i < n; ++i) {
      if (node_of[i] < 0) continue;
      auto& a = total[static_cast<std::size_t>(node_of[i])];
      a.G += stats.grad[i];
      a.H += stats.hess[i];
      a.n += stats.count[i];
      if (stats.hess[i] > 0.0) a.energy += stats.grad[i] * stats.grad[i] / stats.hess[i];
    }
    for (std::size_t s = 0; s < m; ++s) nodes[static_cast<std::size_t>(level_nodes[s])].value = leaf_value(total[s]);
    if (depth >= params.max_depth) break;

    std::vector<char> splittable(m);
    std::vector<char> allowed(m * d, 1);
    for (std::size_t s = 0; s < m; ++s) {
      splittable[s] = total[s].n >= 2.0 * msl;
      if (k < d && splittable[s]) {
        std::fill_n(allowed.begin() + static_cast<std::ptrdiff_t>(s * d), d, 0);
        auto pool = all_features;
        for (std::size_t j = 0; j < k; ++j) {
          std::uniform_int_distribution<std::size_t> pick(j, d - 1);
          std::swap(pool[j], pool[pick(*opt.rng)]);
          allowed[s * d + pool[j]] = 1;
        }
      }
    }

    std::vector<detail::Candidate> best(m);
    auto consider = [&](std::size_t s, std::size_t f, const detail::NodeAccum& left, double lo, double hi) {
      const auto& t = total[s];
      const double nr = t.n - left.n;
      if (left.n < msl || nr < msl) return;
      const double gain = detail::split_gain(left.G, left.H, t.G - left.G, t.H - left.H, opt.lambda, opt.gamma);
      if (gain > best[s].gain) best[s] = {gain, static_cast<int>(f), detail::midpoint(lo, hi)};
    };

    if (params.split_mode == SplitMode::kExact) {
      // Rows with equal x are summed as a group before joining the prefix,
      // the same arithmetic as a lossless histogram.
      std::vector<detail::NodeAccum> left(m), group(m);
      std::vector<double> last(m);
      std::vector<char> seen(m);
      for (std::size_t f = 0; f < d; ++f) {
        std::fill(left.begin(), left.end(), detail::NodeAccum{});
        std::fill(group.begin(), group.end(), detail::NodeAccum{});
        std::fill(seen.begin(), seen.end(), 0);
        for (const auto row : index.sorted(f)) {
          const int slot = node_of[row];
          if (slot < 0) continue;
          const auto s = static_cast<std::size_t>(slot);
          if (!splittable[s] || !allowed[s * d + f]) continue;
          const double x = X(row, f);
          if (seen[s] && x > last[s]) {
            left[s].G += group[s].G;
            left[s].H += group[s].H;
            left[s].n += group[s].n;
            group[s] = {};
            consider(s, f, left[s], last[s], x);
          }
          group[s].G += stats.grad[row];
          group[s].H += stats.hess[row];
          group[s].n += stats.count[row];
          last[s] = x;
          seen[s] = 1;
        }
      }
    } else {
      for (std::size_t f = 0; f < d; ++f) {
        const std::size_t nb = index.bin_count(f);
        std::vector<detail::NodeAccum> hist(m * nb);
        for (std::size_t i = 0; i < n; ++i) {
          const int slot = node_of[i];
          if (slot < 0) continue;
          auto& h = hist[static_cast<std::size_t>(slot) * nb + index.bin_of(i, f)];
          h.G += stats.grad[i];
          h.H += stats.hess[i];
          h.n += stats.count[i];
        }
        for (std::size_t s = 0; s < m; ++s) {
          if (!splittable[s] || !allowed[s * d + f]) continue;
          detail::NodeAccum left;
          std::optional<std::size_t> prev;
          for (std::size_t b = 0; b < nb; ++b) {
            const auto& h = hist[s * nb + b];
            if (h.n <= 0.0) continue;
            if (prev) consider(s, f, left, index.bin_hi(f, *prev), index.bin_lo(f, b));
            left.G += h.G;
            left.H += h.H;
            left.n += h.n;
            prev = b;
          }
        }
      }
    }

    std::vector<int> next_level;
    std::vector<int> child_slot(m * 2, -1);
    for (std::size_t s = 0; s < m; ++s) {
      const auto& c = best[s];
      if (c.feature < 0 || !(c.gain > detail::kRelativeGainFloor * total[s].energy) || !(c.gain > 0.0)) continue;
      const auto id = static_cast<std::size_t>(level_nodes[s]);
      nodes[id].feature = c.feature;
      nodes[id].threshold = c.threshold;
      nodes[id].value = 0.0;  // internal nodes carry no value
      nodes[id].left = static_cast<int>(nodes.size());
      nodes[id].right = static_cast<int>(nodes.size() + 1);
      nodes.emplace_back();
      nodes.emplace_back();
      child_slot[2 * s] = static_cast<int>(next_level.size());
      next_level.push_back(nodes[id].left);
      child_slot[2 * s + 1] = static_cast<int>(next_level.size());
      next_level.push_back(nodes[id].right);
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (node_of[i] < 0) continue;
      const auto s = static_cast<std::size_t>(node_of[i]);
      const auto& node = nodes[static_cast<std::size_t>(level_nodes[s])];
      if (node.is_leaf()) {
        node_of[i] = -1;
        continue;
      }
      const bool go_left = X(i, static_cast<std::size_t>(node.feature)) <= node.threshold;
      node_of[i] = child_slot[2 * s + (go_left ? 0 : 1)];
    }
    level_nodes = std::move(next_level);
  }
  return RegressionTree(std::move(nodes));
}

/// Variance-reduction CART. Leaves hold the (weighted) mean target.
inline RegressionTree fit_tree(const MatrixView& X, std::span<const double> y, const TreeParams& params,
                               std::span<const double> sample_weights = {}) {
  params.validate();
  if (y.size() != X.rows) throw ConfigError("fit_tree: target length does not match rows");
  if (!sample_weights.empty() && sample_weights.size() != X.rows)
    throw ConfigError("fit_tree: weight length does not match rows");
  if (X.rows < 2 * params.min_samples_leaf)
    throw DataError("fit_tree: need at least 2 * min_samples_leaf rows, got " + std::to_string(X.rows));
  std::vector<double> g(X.rows), h(X.rows), c(X.rows, 1.0);
  for (std::size_t i = 0; i < X.rows; ++i) {
    const double w = sample_weights.empty() ? 1.0 : sample_weights[i];
    if (!(w >= 0.0)) throw ConfigError("fit_tree: negative sample weight");
    g[i] = -w * y[i];
    h[i] = w;
    if (w == 0.0) c[i] = 0.0;
  }
  const SplitIndex index(X, params);
  return grow_tree(index, {g, h, c}, {});
}

}  // namespace optbench::models
