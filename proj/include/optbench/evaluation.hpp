#pragma once

// Error metrics and the score-rate evaluation mechanism.
//
// For a sub-experiment s and an evaluated model with error e:
//   rate vs BS  = (E_BS - e) / E_BS * 100, E_BS the BS row's error in s
//   rate vs ML  = (E - e) / E * 100,       E the largest error in s among
//                                          models outside the exclusion set
// A model's score is the weight-normalized mean of its per-sub rates.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "optbench/error.hpp"
#include "optbench/text.hpp"

namespace optbench {

inline double mse(std::span<const double> pred, std::span<const double> actual) {
  if (pred.size() != actual.size()) throw DataError("mse: length mismatch");
  if (pred.empty()) throw DataError("mse: empty input");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - actual[i];
    s += d * d;
  }
  return s / static_cast<double>(pred.size());
}

inline double rmse(std::span<const double> pred, std::span<const double> actual) {
  return std::sqrt(mse(pred, actual));
}

inline double score_rate_bs(double e, double e_bs) {
  if (!(e_bs > 0.0)) throw DomainError("score_rate_bs: BS error must be > 0");
  if (!(e >= 0.0)) throw DomainError("score_rate_bs: model error must be >= 0");
  return (e_bs - e) / e_bs * 100.0;
}

inline double score_rate_ml(double e, double e_max) {
  if (!(e_max > 0.0)) throw DomainError("score_rate_ml: reference error must be > 0");
  if (!(e >= 0.0)) throw DomainError("score_rate_ml: model error must be >= 0");
  return (e_max - e) / e_max * 100.0;
}

inline double error_increase_pct(double mse_original, double mse_denoised) {
  if (mse_original == 0.0) throw DomainError("error_increase_pct: original error is zero");
  return (mse_denoised - mse_original) / mse_original * 100.0;
}

/// Per-sub-experiment weights, keyed by sub-experiment name.
struct WeightVector {
  std::vector<std::string> subs;
  std::vector<double> weights;

  static WeightVector make(std::vector<std::string> subs, std::vector<double> weights) {
    if (subs.size() != weights.size())
      throw ConfigError("weights: " + std::to_string(weights.size()) + " weights for " +
                        std::to_string(subs.size()) + " sub-experiments");
    for (double w : weights)
      if (!(w > 0.0) || !std::isfinite(w)) throw ConfigError("weights: every weight must be > 0");
    return {std::move(subs), std::move(weights)};
  }

  static WeightVector equal(std::vector<std::string> subs) {
    std::vector<double> w(subs.size(), 1.0);
    return make(std::move(subs), std::move(w));
  }

  double at(const std::string& sub) const {
    for (std::size_t i = 0; i < subs.size(); ++i)
      if (subs[i] == sub) return weights[i];
    throw ConfigError("weights: no weight for sub-experiment '" + sub + "'");
  }
};

/// sum_s w_s * rate_s / sum_s w_s. Rates are aligned with weights.subs.
inline double weighted_score(std::span<const double> rates, const WeightVector& w) {
  if (rates.size() != w.weights.size()) throw ConfigError("weighted_score: rates and weights differ in length");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < rates.size(); ++i) {
    num += w.weights[i] * rates[i];
    den += w.weights[i];
  }
  if (!(den > 0.0)) throw ConfigError("weighted_score: no weight");
  return num / den;
}

inline double weighted_score(const std::map<std::string, double>& rates, const WeightVector& w) {
  if (rates.size() != w.subs.size()) throw ConfigError("weighted_score: key mismatch");
  std::vector<double> aligned;
  for (const auto& s : w.subs) {
    const auto it = rates.find(s);
    if (it == rates.end()) throw ConfigError("weighted_score: no rate for sub-experiment '" + s + "'");
    aligned.push_back(it->second);
  }
  return weighted_score(aligned, w);
}

/// Model x sub-experiment errors. Absent cells are std::nullopt.
class ErrorTable {
 public:
  ErrorTable() = default;
  ErrorTable(std::vector<std::string> subs, std::vector<std::string> models)
      : subs_(std::move(subs)), models_(std::move(models)), cells_(subs_.size() * models_.size()) {}

  std::string bs_row = "BS";
  std::set<std::string> excluded_from_ml_max{"BS", "BSM"};

  const std::vector<std::string>& subs() const { return subs_; }
  const std::vector<std::string>& models() const { return models_; }

  std::size_t add_sub(const std::string& s) {
    if (const auto i = index_of(subs_, s)) return *i;
    std::vector<std::optional<double>> grown((subs_.size() + 1) * models_.size());
    for (std::size_t m = 0; m < models_.size(); ++m)
      for (std::size_t j = 0; j < subs_.size(); ++j) grown[m * (subs_.size() + 1) + j] = cells_[m * subs_.size() + j];
    subs_.push_back(s);
    cells_ = std::move(grown);
    return subs_.size() - 1;
  }

  std::size_t add_model(const std::string& m) {
    if (const auto i = index_of(models_, m)) return *i;
    models_.push_back(m);
    cells_.resize(models_.size() * subs_.size());
    return models_.size() - 1;
  }

  void set(const std::string& model, const std::string& sub, std::optional<double> v) {
    const auto m = add_model(model);
    const auto s = add_sub(sub);
    if (v && (!(*v >= 0.0) || !std::isfinite(*v)))
      throw DataError("error table: error for (" + model + ", " + sub + ") must be finite and >= 0");
    cells_[m * subs_.size() + s] = v;
  }

  std::optional<double> get(const std::string& model, const std::string& sub) const {
    const auto m = index_of(models_, model);
    const auto s = index_of(subs_, sub);
    if (!m || !s) return std::nullopt;
    return cells_[*m * subs_.size() + *s];
  }

  bool has_model(const std::string& m) const { return index_of(models_, m).has_value(); }

 private:
  static std::optional<std::size_t> index_of(const std::vector<std::string>& v, const std::string& k) {
    const auto it = std::find(v.begin(), v.end(), k);
    if (it == v.end()) return std::nullopt;
    return static_cast<std::size_t>(it - v.begin());
  }

  std::vector<std::string> subs_;
  std::vector<std::string> models_;
  std::vector<std::optional<double>> cells_;  // row-major by model
};

struct ScoreRow {
  std::string model;
  double score_bs = 0.0;
  double score_ml = 0.0;
  std::map<std::string, double> rate_bs;  // per scored sub-experiment
  std::map<std::string, double> rate_ml;
};

struct ScoreReport {
  std::vector<ScoreRow> rows;
  std::vector<std::string> warnings;

  const ScoreRow* find(const std::string& model) const {
    for (const auto& r : rows)
      if (r.model == model) return &r;
    return nullptr;
  }
};

/// Score every model outside the exclusion set against the BS row and the
/// worst non-excluded model, sub-experiment by sub-experiment, then weight.
/// Absent cells drop out of the weighting with a warning.
inline ScoreReport score_table(const ErrorTable& table, const WeightVector& weights) {
  if (!table.has_model(table.bs_row)) throw DataError("score_table: BS row '" + table.bs_row + "' not in table");
  {
    std::set<std::string> a(table.subs().begin(), table.subs().end());
    std::set<std::string> b(weights.subs.begin(), weights.subs.end());
    if (a != b || weights.subs.size() != table.subs().size())
      throw ConfigError("score_table: weight keys do not match the table's sub-experiments");
  }

  ScoreReport report;
  std::map<std::string, double> e_bs, e_max;
  for (const auto& s : table.subs()) {
    const auto bs = table.get(table.bs_row, s);
    if (!bs || !(*bs > 0.0)) {
      report.warnings.push_back("sub-experiment '" + s + "': no positive BS error, skipped");
      continue;
    }
    std::optional<double> worst;
    for (const auto& m : table.models()) {
      if (table.excluded_from_ml_max.contains(m)) continue;
      if (const auto e = table.get(m, s)) worst = std::max(worst.value_or(*e), *e);
    }
    if (!worst || !(*worst > 0.0)) {
      report.warnings.push_back("sub-experiment '" + s + "': no positive non-excluded error, skipped");
      continue;
    }
    e_bs[s] = *bs;
    e_max[s] = *worst;
  }

  for (const auto& m : table.models()) {
    if (m == table.bs_row || table.excluded_from_ml_max.contains(m)) continue;
    ScoreRow row;
    row.model = m;
    double num_bs = 0.0, num_ml = 0.0, den = 0.0;
    for (const auto& s : table.subs()) {
      const auto e = table.get(m, s);
      if (!e) {
        report.warnings.push_back("model '" + m + "', sub-experiment '" + s + "': absent, excluded from weighting");
        continue;
      }
      if (!e_bs.contains(s)) continue;
      const double w = weights.at(s);
      row.rate_bs[s] = score_rate_bs(*e, e_bs[s]);
      row.rate_ml[s] = score_rate_ml(*e, e_max[s]);
      num_bs += w * row.rate_bs[s];
      num_ml += w * row.rate_ml[s];
      den += w;
    }
    if (den == 0.0) {
      report.warnings.push_back("model '" + m + "': no scorable sub-experiment");
      continue;
    }
    row.score_bs = num_bs / den;
    row.score_ml = num_ml / den;
    report.rows.push_back(std::move(row));
  }
  return report;
}

// ---------------------------------------------------------------------------
// Error-table CSV ("model,sub,error", long format) and its sidecar config.
// ---------------------------------------------------------------------------

inline ErrorTable parse_error_csv(std::string_view content, const std::string& origin = "<errors>") {
  auto lines = text::split(content, '\n');
  while (!lines.empty() && text::trim(lines.back()).empty()) lines.pop_back();
  if (lines.empty() || text::trim(lines.front()) != "model,sub,error")
    throw DataError(origin + ": expected header 'model,sub,error'");
  ErrorTable t;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (text::trim(lines[i]).empty()) continue;
    const auto cells = text::split(lines[i], ',');
    if (cells.size() != 3) throw DataError(origin + ": row " + std::to_string(i) + ": expected 3 fields");
    const std::string model(text::trim(cells[0]));
    const std::string sub(text::trim(cells[1]));
    if (model.empty() || sub.empty()) throw DataError(origin + ": row " + std::to_string(i) + ": empty name");
    const auto raw = text::trim(cells[2]);
    if (raw.empty()) {
      t.set(model, sub, std::nullopt);
      continue;
    }
    const auto v = text::parse_double(raw);
    if (!v) throw DataError(origin + ": row " + std::to_string(i) + ", field 'error': not a number");
    t.set(model, sub, *v);
  }
  return t;
}

inline ErrorTable load_error_csv(const std::string& path) { return parse_error_csv(text::read_file(path), path); }

inline std::string to_error_csv(const ErrorTable& t) {
  std::string out = "model,sub,error\n";
  for (const auto& m : t.models())
    for (const auto& s : t.subs()) {
      const auto v = t.get(m, s);
      out += m + ',' + s + ',' + (v ? text::format_exact(*v) : std::string{}) + '\n';
    }
  return out;
}

struct ScoreConfig {
  std::string bs_row = "BS";
  std::set<std::string> exclude{"BS", "BSM"};
  std::vector<double> weights;  // in the table's sub order; empty = equal

  static ScoreConfig from_kv(const text::KeyValueFile& kv) {
    ScoreConfig c;
    c.bs_row = kv.get_string("bs_row", c.bs_row);
    if (const auto e = kv.get("exclude")) {
      const auto names = text::parse_name_list(*e);
      c.exclude = {names.begin(), names.end()};
    }
    if (const auto w = kv.get("weights")) c.weights = text::parse_double_list(*w, "weights");
    return c;
  }

  static ScoreConfig load(const std::string& path) { return from_kv(text::KeyValueFile::load(path)); }

  WeightVector weights_for(const ErrorTable& t) const {
    return weights.empty() ? WeightVector::equal(t.subs()) : WeightVector::make(t.subs(), weights);
  }

  void apply(ErrorTable& t) const {
    t.bs_row = bs_row;
    t.excluded_from_ml_max = exclude;
  }
};

}  // namespace optbench
