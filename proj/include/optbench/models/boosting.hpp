#pragma once

#include <functional>
#include <numeric>
#include <span>
#include <vector>

#include "optbench/models/tree.hpp"

namespace optbench::models {

enum class BoostOrder { kFirst, kSecond };

struct BoostParams {
  int n_rounds = 100;
  double learning_rate = 0.1;
  double lambda = 1.0;  // L2 penalty on leaf weights (second order only)
  double gamma = 0.0;   // per-split penalty (second order only)
  TreeParams tree;
  BoostOrder order = BoostOrder::kSecond;

  void validate() const {
    tree.validate();
    if (n_rounds < 1) throw ConfigError("boosting: n_rounds must be >= 1");
    if (!(learning_rate > 0.0 && learning_rate <= 1.0)) throw ConfigError("boosting: learning_rate must be in (0, 1]");
    if (!(lambda >= 0.0) || !(gamma >= 0.0)) throw ConfigError("boosting: lambda and gamma must be >= 0");
  }
};

/// F(x) = base + sum_m learning_rate * tree_m(x), accumulated in round order.
class BoostedModel {
 public:
  BoostedModel() = default;
  BoostedModel(double base, double learning_rate, std::vector<RegressionTree> trees)
      : base_(base), learning_rate_(learning_rate), trees_(std::move(trees)) {}

  double predict(std::span<const double> x) const {
    double f = base_;
    for (const auto& t : trees_) f += learning_rate_ * t.predict(x);
    return f;
  }

  std::vector<double> predict(const MatrixView& X) const {
    std::vector<double> out(X.rows);
    for (std::size_t i = 0; i < X.rows; ++i) out[i] = predict(X.row(i));
    return out;
  }

  double base() const { return base_; }
  double learning_rate() const { return learning_rate_; }
  const std::vector<RegressionTree>& trees() const { return trees_; }
  bool operator==(const BoostedModel&) const = default;

 private:
  double base_ = 0.0;
  double learning_rate_ = 1.0;
  std::vector<RegressionTree> trees_;
};

// Called after each round with the round index and current training predictions.
using RoundObserver = std::function<void(int, std::span<const double>)>;

namespace detail {

inline double mean(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace detail

/// Least-squares gradient boosting: each round fits a variance-reduction
/// tree to the residuals y - F (the negative gradient of squared loss).
inline BoostedModel fit_gb_first_order(const MatrixView& X, std::span<const double> y, const BoostParams& params,
                                       const RoundObserver& observe = {}) {
  params.validate();
  if (y.size() != X.rows || X.rows == 0) throw ConfigError("fit_gb_first_order: bad target length");
  const SplitIndex index(X, params.tree);
  const double base = detail::mean(y);
  std::vector<double> F(X.rows, base), g(X.rows), h(X.rows, 1.0), c(X.rows, 1.0);
  std::vector<RegressionTree> trees;
  for (int m = 0; m < params.n_rounds; ++m) {
    for (std::size_t i = 0; i < X.rows; ++i) g[i] = -(y[i] - F[i]);  // tree target is the residual
    auto tree = grow_tree(index, {g, h, c}, {});
    for (std::size_t i = 0; i < X.rows; ++i) F[i] += params.learning_rate * tree.predict(X.row(i));
    trees.push_back(std::move(tree));
    if (observe) observe(m, F);
  }
  return BoostedModel(base, params.learning_rate, std::move(trees));
}

/// Regularized second-order boosting on squared loss: g = F - y, h = 1,
/// gain-maximizing splits with lambda/gamma, leaf weight -G / (H + lambda).
inline BoostedModel fit_gb_second_order(const MatrixView& X, std::span<const double> y, const BoostParams& params,
                                        const RoundObserver& observe = {}) {
  params.validate();
  if (y.size() != X.rows || X.rows == 0) throw ConfigError("fit_gb_second_order: bad target length");
  const SplitIndex index(X, params.tree);
  const double base = detail::mean(y);
  std::vector<double> F(X.rows, base), g(X.rows), h(X.rows, 1.0), c(X.rows, 1.0);
  std::vector<RegressionTree> trees;
  GrowOptions opt;
  opt.lambda = params.lambda;
  opt.gamma = params.gamma;
  for (int m = 0; m < params.n_rounds; ++m) {
    for (std::size_t i = 0; i < X.rows; ++i) g[i] = F[i] - y[i];
    auto tree = grow_tree(index, {g, h, c}, opt);
    for (std::size_t i = 0; i < X.rows; ++i) F[i] += params.learning_rate * tree.predict(X.row(i));
    trees.push_back(std::move(tree));
    if (observe) observe(m, F);
  }
  return BoostedModel(base, params.learning_rate, std::move(trees));
}

inline BoostedModel fit_gb(const MatrixView& X, std::span<const double> y, const BoostParams& params) {
  return params.order == BoostOrder::kFirst ? fit_gb_first_order(X, y, params) : fit_gb_second_order(X, y, params);
}

}  // namespace optbench::models
