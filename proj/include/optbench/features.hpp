#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "optbench/dataset.hpp"
#include "optbench/error.hpp"

namespace optbench {

/// Named column set. Recognized feature names:
/// S, K, S/K, tau, r, sigma, delta, q (monthly dividend rate).
struct InputConfig {
  std::string name;
  std::vector<std::string> columns;

  static InputConfig named(std::string_view name) {
    if (name == "In1") return {"In1", {"S", "K", "tau", "r"}};
    if (name == "In2") return {"In2", {"S/K", "tau", "r"}};
    if (name == "In3") return {"In3", {"S", "K", "tau", "r", "sigma"}};
    if (name == "In4") return {"In4", {"S/K", "tau", "r", "sigma"}};
    if (name == "In5") return {"In5", {"S", "K", "tau", "r", "sigma", "delta"}};
    if (name == "In6") return {"In6", {"S/K", "tau", "r", "sigma", "delta"}};
    if (name == "STANDARD") return {"STANDARD", {"S/K", "tau", "r", "sigma", "q"}};
    throw ConfigError("unknown input configuration '" + std::string(name) + "'");
  }

  static std::vector<InputConfig> input_experiment() {
    std::vector<InputConfig> out;
    for (auto n : {"In1", "In2", "In3", "In4", "In5", "In6"}) out.push_back(named(n));
    return out;
  }
};

struct RowKey {
  std::string contract_id;
  Date trade_date{};
};

/// Row-major design matrix with its regression target.
struct FeatureMatrix {
  std::size_t rows = 0;
  std::vector<std::string> columns;
  std::vector<double> X;              // rows * columns.size()
  std::vector<double> y;
  std::vector<RowKey> keys;
  std::vector<std::size_t> source;    // index of the originating record

  std::size_t cols() const { return columns.size(); }
  std::span<const double> row(std::size_t i) const { return {X.data() + i * cols(), cols()}; }
  double at(std::size_t i, std::size_t j) const { return X[i * cols() + j]; }
};

namespace detail {

inline double feature_value(const OptionRecord& r, std::string_view name) {
  if (name == "S") return r.spot;
  if (name == "K") return r.strike;
  if (name == "S/K") return r.spot / r.strike;
  if (name == "tau") return r.tau;
  if (name == "r") return r.rate;
  if (name == "sigma") return r.sigma;
  if (name == "delta") return r.delta;
  if (name == "q") return r.q_monthly;
  throw ConfigError("unknown feature '" + std::string(name) + "'");
}

}  // namespace detail

inline FeatureMatrix assemble(const std::vector<OptionRecord>& records, const InputConfig& cfg) {
  if (cfg.columns.empty()) throw ConfigError("input configuration '" + cfg.name + "' has no columns");
  OptionRecord probe;
  probe.spot = probe.strike = 1.0;
  for (const auto& c : cfg.columns) detail::feature_value(probe, c);  // throws on unknown names

  FeatureMatrix m;
  m.rows = records.size();
  m.columns = cfg.columns;
  m.X.reserve(m.rows * m.cols());
  m.y.reserve(m.rows);
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    for (const auto& c : cfg.columns) {
      const double v = detail::feature_value(r, c);
      if (!std::isfinite(v))
        throw DataError("record " + std::to_string(i) + " (" + r.contract_id + "): missing value for feature '" +
                        c + "'");
      m.X.push_back(v);
    }
    m.y.push_back(r.price);
    m.keys.push_back({r.contract_id, r.trade_date});
    m.source.push_back(i);
  }
  return m;
}

/// Per-contract lag features.
///
/// Rows are grouped by contract (groups in order of first appearance) and
/// sorted by trade date. A row survives when it has at least `window`
/// earlier rows in its contract; it then carries its k base features
/// followed by the base features at lags 1..window, k * (window + 1)
/// columns in total. Targets are never lagged.
inline FeatureMatrix sliding_window(const FeatureMatrix& m, std::size_t window) {
  if (window == 0) throw ConfigError("sliding_window: window must be >= 1");
  std::vector<std::vector<std::size_t>> groups;
  std::unordered_map<std::string, std::size_t> group_of;
  for (std::size_t i = 0; i < m.rows; ++i) {
    const auto [it, inserted] = group_of.try_emplace(m.keys[i].contract_id, groups.size());
    if (inserted) groups.emplace_back();
    groups[it->second].push_back(i);
  }

  FeatureMatrix out;
  out.columns = m.columns;
  for (std::size_t lag = 1; lag <= window; ++lag)
    for (const auto& c : m.columns) out.columns.push_back(c + "@lag" + std::to_string(lag));

  for (auto& g : groups) {
    std::stable_sort(g.begin(), g.end(),
                     [&](std::size_t a, std::size_t b) { return m.keys[a].trade_date < m.keys[b].trade_date; });
    for (std::size_t pos = window; pos < g.size(); ++pos) {
      const std::size_t i = g[pos];
      for (std::size_t lag = 0; lag <= window; ++lag) {
        const auto src = m.row(g[pos - lag]);
        out.X.insert(out.X.end(), src.begin(), src.end());
      }
      out.y.push_back(m.y[i]);
      out.keys.push_back(m.keys[i]);
      out.source.push_back(m.source[i]);
      ++out.rows;
    }
  }
  return out;
}

}  // namespace optbench
