#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "optbench/models/boosting.hpp"
#include "optbench/models/forest.hpp"
#include "optbench/models/ngboost.hpp"
#include "optbench/models/tree.hpp"
#include "optbench/text.hpp"

namespace optbench::models {

enum class Family { kCart, kRandomForest, kGbFirst, kGbSecond, kNgb };

inline std::string_view to_string(Family f) {
  switch (f) {
    case Family::kCart: return "cart";
    case Family::kRandomForest: return "rf";
    case Family::kGbFirst: return "gb1";
    case Family::kGbSecond: return "gb2";
    case Family::kNgb: return "ngb";
  }
  return "?";
}

inline Family parse_family(std::string_view s) {
  for (auto f : {Family::kCart, Family::kRandomForest, Family::kGbFirst, Family::kGbSecond, Family::kNgb})
    if (to_string(f) == s) return f;
  throw ConfigError("unknown model family '" + std::string(s) + "'");
}

/// Flat hyperparameter record for any family. Fields a family does not use
/// are ignored by it but still serialized, so two specs compare equal only
/// when every field matches.
struct ModelSpec {
  Family family = Family::kCart;
  TreeParams tree;
  int n_trees = 100;
  double feature_fraction = 1.0;  // forest: k = ceil(fraction * d), clamped to [1, d]
  bool bootstrap = true;
  int n_rounds = 100;
  double learning_rate = 0.1;
  double lambda = 0.0;
  double gamma = 0.0;
  std::uint64_t seed = 0;

  bool operator==(const ModelSpec& o) const { return serialize() == o.serialize(); }

  ForestParams forest_params(std::size_t n_features) const {
    if (!(feature_fraction > 0.0 && feature_fraction <= 1.0))
      throw ConfigError("feature_fraction must be in (0, 1]");
    const auto k = static_cast<std::size_t>(std::ceil(feature_fraction * static_cast<double>(n_features) - 1e-9));
    return {n_trees, std::clamp<std::size_t>(k, 1, std::max<std::size_t>(n_features, 1)), bootstrap, seed};
  }

  BoostParams boost_params() const {
    return {n_rounds, learning_rate, lambda, gamma, tree,
            family == Family::kGbFirst ? BoostOrder::kFirst : BoostOrder::kSecond};
  }

  // Canonical single-line form: "family=gb2 max_depth=4 ..."
  std::string serialize() const {
    std::string s = "family=" + std::string(to_string(family));
    s += " max_depth=" + std::to_string(tree.max_depth);
    s += " min_samples_leaf=" + std::to_string(tree.min_samples_leaf);
    s += " split=" + std::string(tree.split_mode == SplitMode::kExact ? "exact" : "histogram");
    s += " n_bins=" + std::to_string(tree.n_bins);
    s += " n_trees=" + std::to_string(n_trees);
    s += " feature_fraction=" + text::format_exact(feature_fraction);
    s += " bootstrap=" + std::string(bootstrap ? "1" : "0");
    s += " n_rounds=" + std::to_string(n_rounds);
    s += " learning_rate=" + text::format_exact(learning_rate);
    s += " lambda=" + text::format_exact(lambda);
    s += " gamma=" + text::format_exact(gamma);
    s += " seed=" + std::to_string(seed);
    return s;
  }

  static ModelSpec parse(std::string_view line) {
    ModelSpec m;
    std::istringstream in{std::string(line)};
    std::string tok;
    while (in >> tok) {
      const auto eq = tok.find('=');
      if (eq == std::string::npos) throw ConfigError("model spec: expected key=value, got '" + tok + "'");
      const auto key = tok.substr(0, eq);
      const auto val = tok.substr(eq + 1);
      auto num = [&] {
        const auto d = text::parse_double(val);
        if (!d) throw ConfigError("model spec: bad value for " + key + ": '" + val + "'");
        return *d;
      };
      auto integer = [&] {
        const auto d = text::parse_int(val);
        if (!d) throw ConfigError("model spec: bad integer for " + key + ": '" + val + "'");
        return *d;
      };
      if (key == "family") m.family = parse_family(val);
      else if (key == "max_depth") m.tree.max_depth = static_cast<int>(integer());
      else if (key == "min_samples_leaf") m.tree.min_samples_leaf = static_cast<std::size_t>(integer());
      else if (key == "split") {
        if (val == "exact") m.tree.split_mode = SplitMode::kExact;
        else if (val == "histogram") m.tree.split_mode = SplitMode::kHistogram;
        else throw ConfigError("model spec: unknown split mode '" + val + "'");
      }
      else if (key == "n_bins") m.tree.n_bins = static_cast<int>(integer());
      else if (key == "n_trees") m.n_trees = static_cast<int>(integer());
      else if (key == "feature_fraction") m.feature_fraction = num();
      else if (key == "bootstrap") m.bootstrap = integer() != 0;
      else if (key == "n_rounds") m.n_rounds = static_cast<int>(integer());
      else if (key == "learning_rate") m.learning_rate = num();
      else if (key == "lambda") m.lambda = num();
      else if (key == "gamma") m.gamma = num();
      else if (key == "seed") m.seed = static_cast<std::uint64_t>(integer());
      else throw ConfigError("model spec: unknown key '" + key + "'");
    }
    return m;
  }
};

using Model = std::variant<RegressionTree, RandomForest, BoostedModel, NgbModel>;

inline Model fit(const ModelSpec& spec, const MatrixView& X, std::span<const double> y) {
  switch (spec.family) {
    case Family::kCart: return fit_tree(X, y, spec.tree);
    case Family::kRandomForest: return fit_random_forest(X, y, spec.forest_params(X.cols), spec.tree);
    case Family::kGbFirst: return fit_gb_first_order(X, y, spec.boost_params());
    case Family::kGbSecond: return fit_gb_second_order(X, y, spec.boost_params());
    case Family::kNgb: return fit_ngb_gaussian(X, y, spec.boost_params());
  }
  throw ConfigError("fit: unknown family");
}

inline std::vector<double> predict(const Model& model, const MatrixView& X) {
  return std::visit([&](const auto& m) { return m.predict(X); }, model);
}

// ---------------------------------------------------------------------------
// Plain-text dump
//
//   optbench-model 1
//   type <tree|forest|boosted|ngb>
//   ... type-specific header lines ...
//   tree <node-count>
//   split <feature> <threshold> <left> <right>
//   leaf <value>
// ---------------------------------------------------------------------------

inline constexpr std::string_view kModelDumpMagic = "optbench-model";
inline constexpr int kModelDumpVersion = 1;

namespace detail {

inline void dump_tree(std::ostringstream& out, const RegressionTree& t) {
  out << "tree " << t.nodes().size() << '\n';
  for (const auto& n : t.nodes()) {
    if (n.is_leaf())
      out << "leaf " << text::format_exact(n.value) << '\n';
    else
      out << "split " << n.feature << ' ' << text::format_exact(n.threshold) << ' ' << n.left << ' ' << n.right
          << '\n';
  }
}

class DumpReader {
 public:
  explicit DumpReader(std::string_view content) {
    for (const auto& l : text::split(content, '\n')) {
      const auto t = text::trim(l);
      if (!t.empty()) lines_.emplace_back(t);
    }
  }

  std::vector<std::string> next(std::string_view expected_head) {
    if (pos_ >= lines_.size()) throw DataError("model dump: unexpected end, expected '" + std::string(expected_head) + "'");
    std::istringstream in(lines_[pos_]);
    std::vector<std::string> toks;
    for (std::string t; in >> t;) toks.push_back(t);
    if (toks.empty() || toks[0] != expected_head)
      throw DataError("model dump line " + std::to_string(pos_ + 1) + ": expected '" + std::string(expected_head) + "'");
    ++pos_;
    return toks;
  }

  double number(const std::string& s) const {
    const auto d = text::parse_double(s);
    if (!d) throw DataError("model dump line " + std::to_string(pos_) + ": bad number '" + s + "'");
    return *d;
  }

  std::int64_t integer(const std::string& s) const {
    const auto d = text::parse_int(s);
    if (!d) throw DataError("model dump line " + std::to_string(pos_) + ": bad integer '" + s + "'");
    return *d;
  }

  double value(std::string_view head) {
    const auto t = next(head);
    if (t.size() != 2) throw DataError("model dump: malformed '" + std::string(head) + "' line");
    return number(t[1]);
  }

  RegressionTree tree() {
    const auto head = next("tree");
    if (head.size() != 2) throw DataError("model dump: malformed tree header");
    const auto count = integer(head[1]);
    if (count < 1) throw DataError("model dump: tree without nodes");
    std::vector<TreeNode> nodes;
    for (std::int64_t i = 0; i < count; ++i) {
      if (pos_ >= lines_.size()) throw DataError("model dump: truncated tree");
      if (lines_[pos_].starts_with("leaf")) {
        const auto t = next("leaf");
        if (t.size() != 2) throw DataError("model dump: malformed leaf");
        nodes.push_back({-1, 0.0, -1, -1, number(t[1])});
      } else {
        const auto t = next("split");
        if (t.size() != 5) throw DataError("model dump: malformed split");
        TreeNode n;
        n.feature = static_cast<int>(integer(t[1]));
        n.threshold = number(t[2]);
        n.left = static_cast<int>(integer(t[3]));
        n.right = static_cast<int>(integer(t[4]));
        if (n.feature < 0 || n.left <= static_cast<int>(i) || n.right <= static_cast<int>(i) || n.left >= count ||
            n.right >= count)
          throw DataError("model dump: split node " + std::to_string(i) + " has invalid links");
        nodes.push_back(n);
      }
    }
    return RegressionTree(std::move(nodes));
  }

  bool done() const { return pos_ == lines_.size(); }

 private:
  std::vector<std::string> lines_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string save_model(const Model& model) {
  std::ostringstream out;
  out << kModelDumpMagic << ' ' << kModelDumpVersion << '\n';
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, RegressionTree>) {
          out << "type tree\n";
          detail::dump_tree(out, m);
        } else if constexpr (std::is_same_v<T, RandomForest>) {
          out << "type forest\ntrees " << m.trees().size() << '\n';
          for (const auto& t : m.trees()) detail::dump_tree(out, t);
        } else if constexpr (std::is_same_v<T, BoostedModel>) {
          out << "type boosted\nbase " << text::format_exact(m.base()) << "\nlearning_rate "
              << text::format_exact(m.learning_rate()) << "\ntrees " << m.trees().size() << '\n';
          for (const auto& t : m.trees()) detail::dump_tree(out, t);
        } else {
          out << "type ngb\nbase_mu " << text::format_exact(m.base().mu) << "\nbase_log_sigma "
              << text::format_exact(m.base().log_sigma) << "\nlearning_rate " << text::format_exact(m.learning_rate())
              << "\nrounds " << m.rounds().size() << '\n';
          for (const auto& r : m.rounds()) {
            out << "scale " << text::format_exact(r.scale) << '\n';
            detail::dump_tree(out, r.mu_tree);
            detail::dump_tree(out, r.log_sigma_tree);
          }
        }
      },
      model);
  return out.str();
}

inline Model load_model(std::string_view content) {
  detail::DumpReader in(content);
  const auto head = in.next(kModelDumpMagic);
  if (head.size() != 2 || in.integer(head[1]) != kModelDumpVersion)
    throw DataError("model dump: unsupported version");
  const auto type = in.next("type");
  if (type.size() != 2) throw DataError("model dump: malformed type line");
  auto count = [&](std::string_view key) {
    const auto v = in.value(key);
    if (v < 0 || v != std::floor(v)) throw DataError("model dump: bad count for " + std::string(key));
    return static_cast<std::size_t>(v);
  };
  Model out;
  if (type[1] == "tree") {
    out = in.tree();
  } else if (type[1] == "forest") {
    const auto n = count("trees");
    std::vector<RegressionTree> trees;
    for (std::size_t i = 0; i < n; ++i) trees.push_back(in.tree());
    out = RandomForest(std::move(trees));
  } else if (type[1] == "boosted") {
    const double base = in.value("base");
    const double lr = in.value("learning_rate");
    const auto n = count("trees");
    std::vector<RegressionTree> trees;
    for (std::size_t i = 0; i < n; ++i) trees.push_back(in.tree());
    out = BoostedModel(base, lr, std::move(trees));
  } else if (type[1] == "ngb") {
    GaussianPrediction base;
    base.mu = in.value("base_mu");
    base.log_sigma = in.value("base_log_sigma");
    const double lr = in.value("learning_rate");
    const auto n = count("rounds");
    std::vector<NgbRound> rounds;
    for (std::size_t i = 0; i < n; ++i) {
      NgbRound r;
      r.scale = in.value("scale");
      r.mu_tree = in.tree();
      r.log_sigma_tree = in.tree();
      rounds.push_back(std::move(r));
    }
    out = NgbModel(base, lr, std::move(rounds));
  } else {
    throw DataError("model dump: unknown model type '" + type[1] + "'");
  }
  if (!in.done()) throw DataError("model dump: trailing content");
  return out;
}

// ---------------------------------------------------------------------------
// Tuning
// ---------------------------------------------------------------------------

struct TuneResult {
  std::size_t best_index = 0;
  ModelSpec best;
  std::vector<double> validation_rmse;  // one per grid point
};

/// Exhaustive grid search on a chronological holdout: the last
/// `val_fraction` of rows (in the given order) validate, the rest train.
/// Lowest validation RMSE wins; ties go to the earlier grid point.
inline TuneResult tune(Family family, const MatrixView& X, std::span<const double> y,
                       const std::vector<ModelSpec>& grid, double val_fraction) {
  if (grid.empty()) throw ConfigError("tune: empty grid");
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw ConfigError("tune: val_fraction must be in (0, 1)");
  for (const auto& g : grid)
    if (g.family != family) throw ConfigError("tune: grid point of family '" + std::string(to_string(g.family)) +
                                              "' in a '" + std::string(to_string(family)) + "' grid");
  if (y.size() != X.rows) throw ConfigError("tune: target length does not match rows");
  const auto n_val = static_cast<std::size_t>(std::ceil(val_fraction * static_cast<double>(X.rows)));
  if (n_val < 1 || n_val >= X.rows) throw DataError("tune: too few rows for a validation split");
  const std::size_t n_fit = X.rows - n_val;

  const MatrixView fit_X(X.data, n_fit, X.cols);
  const MatrixView val_X(X.data + n_fit * X.cols, n_val, X.cols);
  const auto fit_y = y.subspan(0, n_fit);
  const auto val_y = y.subspan(n_fit);

  TuneResult result;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto pred = predict(fit(grid[i], fit_X, fit_y), val_X);
    double sse = 0.0;
    for (std::size_t j = 0; j < n_val; ++j) sse += (pred[j] - val_y[j]) * (pred[j] - val_y[j]);
    const double rmse = std::sqrt(sse / static_cast<double>(n_val));
    result.validation_rmse.push_back(rmse);
    if (rmse < best) {
      best = rmse;
      result.best_index = i;
    }
  }
  result.best = grid[result.best_index];
  return result;
}

}  // namespace optbench::models
