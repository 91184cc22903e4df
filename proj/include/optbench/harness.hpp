#pragma once

// Experiment orchestration with parameter transfer: each major experiment
// either tunes once in a designated sub-experiment or inherits the tuned
// hyperparameters of another experiment, then reuses them unchanged in
// every sub-experiment.

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "optbench/dataset.hpp"
#include "optbench/error.hpp"
#include "optbench/evaluation.hpp"
#include "optbench/features.hpp"
#include "optbench/models/model.hpp"
#include "optbench/pricing.hpp"
#include "optbench/text.hpp"

namespace optbench::harness {

enum class ExperimentKind { kInput, kMoneyness, kWindow, kNoise };

inline std::string_view to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::kInput: return "input";
    case ExperimentKind::kMoneyness: return "moneyness";
    case ExperimentKind::kWindow: return "window";
    case ExperimentKind::kNoise: return "noise";
  }
  return "?";
}

inline ExperimentKind parse_experiment(std::string_view s) {
  for (auto k : {ExperimentKind::kInput, ExperimentKind::kMoneyness, ExperimentKind::kWindow, ExperimentKind::kNoise})
    if (to_string(k) == s) return k;
  throw ConfigError("unknown experiment '" + std::string(s) + "'");
}

/// Where a plan's hyperparameters come from: (experiment, sub-experiment).
struct ParamSource {
  std::string experiment;
  std::string sub;

  std::string str() const { return experiment + "/" + sub; }
  bool operator==(const ParamSource&) const = default;
  auto operator<=>(const ParamSource&) const = default;

  static ParamSource parse(std::string_view s) {
    const auto slash = s.find('/');
    if (slash == std::string_view::npos) throw ConfigError("parameter source must be 'experiment/sub': '" + std::string(s) + "'");
    return {std::string(text::trim(s.substr(0, slash))), std::string(text::trim(s.substr(slash + 1)))};
  }
};

inline constexpr std::string_view kAnalyticModels[] = {"BS", "BSM"};

inline bool is_analytic(std::string_view model) {
  return model == "BS" || model == "BSM";
}

inline std::vector<std::string> default_roster() { return {"BS", "BSM", "CART", "RF", "GB1", "GB2", "GB2-hist", "NGB"}; }

struct ExperimentPlan {
  ExperimentKind kind = ExperimentKind::kInput;
  std::vector<std::string> sub_experiments;
  std::optional<std::string> tune_in;       // tune in one of this plan's subs...
  std::optional<ParamSource> inherit_from;  // ...or inherit from another plan
  std::optional<WeightVector> weights;      // present for scored experiments
  std::vector<std::string> roster;
  std::uint64_t seed = 0;

  std::string name() const { return std::string(to_string(kind)); }

  ParamSource param_source() const { return tune_in ? ParamSource{name(), *tune_in} : *inherit_from; }

  void validate() const {
    if (tune_in.has_value() == inherit_from.has_value())
      throw ConfigError("plan '" + name() + "': exactly one tuning source required");
    if (tune_in && std::find(sub_experiments.begin(), sub_experiments.end(), *tune_in) == sub_experiments.end())
      throw ConfigError("plan '" + name() + "': tuning sub-experiment '" + *tune_in + "' not in plan");
  }

  static ExperimentPlan input(std::vector<std::string> roster, std::uint64_t seed) {
    ExperimentPlan p{ExperimentKind::kInput, {"In1", "In2", "In3", "In4", "In5", "In6"}, "In1", std::nullopt,
                     std::nullopt, std::move(roster), seed};
    p.weights = WeightVector::make(p.sub_experiments, {1, 1, 2, 2, 1, 1});
    return p;
  }

  static ExperimentPlan moneyness(std::vector<std::string> roster, std::uint64_t seed) {
    ExperimentPlan p{ExperimentKind::kMoneyness, {"ALL", "ITM", "ATM", "OTM"}, "ALL", std::nullopt,
                     std::nullopt, std::move(roster), seed};
    p.weights = WeightVector::equal(p.sub_experiments);
    return p;
  }

  static ExperimentPlan window(std::vector<std::string> roster, std::uint64_t seed,
                               ParamSource source = {"input", "In1"}) {
    return {ExperimentKind::kWindow,
            {"ITM-ON", "ITM-OFF", "ATM-ON", "ATM-OFF", "OTM-ON", "OTM-OFF"},
            std::nullopt,
            std::move(source),
            std::nullopt,
            std::move(roster),
            seed};
  }

  static ExperimentPlan noise(std::vector<std::string> roster, std::uint64_t seed,
                              ParamSource source = {"moneyness", "ALL"}) {
    return {ExperimentKind::kNoise, {"original", "denoised"}, std::nullopt, std::move(source), std::nullopt,
            std::move(roster), seed};
  }
};

struct RunRecord {
  ExperimentPlan plan;
  bool fixture = false;
  std::string metric = "RMSE";
  std::string param_provenance;                       // "tuned in input/In1" / "inherited from input/In1"
  std::map<std::string, models::ModelSpec> hyperparameters;
  // sub-experiment -> model -> serialized spec actually used for the fit
  std::map<std::string, std::map<std::string, std::string>> used_params;
  ErrorTable errors;
  std::optional<ScoreReport> scores;
  std::map<std::string, double> error_increase_pct;  // noise experiment only
  std::vector<std::string> diagnostics;
  std::vector<std::string> dependencies;
  double wall_clock_seconds = 0.0;
};

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

inline models::ModelSpec base_spec(const std::string& model, std::uint64_t seed) {
  models::ModelSpec s;
  s.seed = seed;
  if (model == "CART") {
    s.family = models::Family::kCart;
    s.tree.min_samples_leaf = 5;
  } else if (model == "RF") {
    s.family = models::Family::kRandomForest;
    s.n_trees = 60;
    s.tree.max_depth = 12;
    s.tree.min_samples_leaf = 2;
  } else if (model == "GB1") {
    s.family = models::Family::kGbFirst;
    s.n_rounds = 150;
    s.tree.min_samples_leaf = 5;
  } else if (model == "GB2" || model == "GB2-hist") {
    s.family = models::Family::kGbSecond;
    s.n_rounds = 150;
    s.lambda = 1.0;
    s.tree.min_samples_leaf = 5;
    if (model == "GB2-hist") {
      s.tree.split_mode = models::SplitMode::kHistogram;
      s.tree.n_bins = 64;
    }
  } else if (model == "NGB") {
    s.family = models::Family::kNgb;
    s.n_rounds = 150;
    s.learning_rate = 0.1;
    s.tree.min_samples_leaf = 10;
  } else {
    throw ConfigError("unknown model '" + model + "'");
  }
  return s;
}

inline std::vector<models::ModelSpec> default_grid(const std::string& model, std::uint64_t seed) {
  std::vector<models::ModelSpec> grid;
  auto s = base_spec(model, seed);
  if (model == "CART") {
    for (int d : {6, 10}) {
      s.tree.max_depth = d;
      grid.push_back(s);
    }
  } else if (model == "RF") {
    for (double f : {0.6, 1.0}) {
      s.feature_fraction = f;
      grid.push_back(s);
    }
  } else {
    for (int d : {3, 5}) {
      s.tree.max_depth = d;
      grid.push_back(s);
    }
  }
  return grid;
}

struct HarnessConfig {
  std::vector<std::string> roster = default_roster();
  std::map<std::string, std::vector<models::ModelSpec>> grids;  // overrides default_grid
  double val_fraction = 0.2;
  std::size_t window = 5;
  bool window_everywhere = false;   // also window the input/moneyness/noise features
  ParamSource window_source{"input", "In1"};
  ParamSource noise_source{"moneyness", "ALL"};
  std::optional<double> bs_vol_override;
  bool swap_itm_otm = false;
  std::uint64_t seed = 20200101;

  std::vector<models::ModelSpec> grid_for(const std::string& model) const {
    if (const auto it = grids.find(model); it != grids.end()) return it->second;
    return default_grid(model, seed);
  }

  // Keys: roster, val_fraction, window, window_everywhere, window_source,
  // noise_source, bs_vol, swap_itm_otm, seed, and repeatable
  // "grid.<MODEL> = key=value ..." lines (unset keys take the model's base spec).
  static HarnessConfig from_kv(const text::KeyValueFile& kv) {
    HarnessConfig c;
    c.seed = static_cast<std::uint64_t>(kv.get_int("seed", static_cast<std::int64_t>(c.seed)));
    if (const auto r = kv.get("roster")) c.roster = text::parse_name_list(*r);
    c.val_fraction = kv.get_double("val_fraction", c.val_fraction);
    const auto w = kv.get_int("window", static_cast<std::int64_t>(c.window));
    if (w < 1) throw ConfigError("window must be >= 1");
    c.window = static_cast<std::size_t>(w);
    c.window_everywhere = kv.get_int("window_everywhere", 0) != 0;
    if (const auto s = kv.get("window_source")) c.window_source = ParamSource::parse(*s);
    if (const auto s = kv.get("noise_source")) c.noise_source = ParamSource::parse(*s);
    if (kv.has("bs_vol")) c.bs_vol_override = kv.get_double("bs_vol", 0.0);
    c.swap_itm_otm = kv.get_int("swap_itm_otm", 0) != 0;
    for (const auto& m : c.roster)
      if (!is_analytic(m)) (void)base_spec(m, c.seed);
    for (const auto& [key, value] : kv.entries()) {
      if (!key.starts_with("grid.")) continue;
      const auto model = key.substr(5);
      auto spec = models::ModelSpec::parse(base_spec(model, c.seed).serialize() + " " + value);
      if (spec.family != base_spec(model, c.seed).family)
        throw ConfigError("grid for '" + model + "' changes the model family");
      c.grids[model].push_back(spec);
    }
    return c;
  }
};

// ---------------------------------------------------------------------------
// Runner
// ---------------------------------------------------------------------------

namespace detail {

inline FeatureMatrix select_rows(const FeatureMatrix& m, const std::function<bool(std::size_t)>& keep) {
  FeatureMatrix out;
  out.columns = m.columns;
  for (std::size_t i = 0; i < m.rows; ++i) {
    if (!keep(i)) continue;
    const auto r = m.row(i);
    out.X.insert(out.X.end(), r.begin(), r.end());
    out.y.push_back(m.y[i]);
    out.keys.push_back(m.keys[i]);
    out.source.push_back(m.source[i]);
    ++out.rows;
  }
  return out;
}

}  // namespace detail

/// Runs plans against one dataset split, caching tuned hyperparameters by
/// their source so inheriting plans reuse them.
class ExperimentRunner {
 public:
  using Clock = std::chrono::steady_clock;

  ExperimentRunner(HarnessConfig config, DatasetSplit data) : config_(std::move(config)), data_(std::move(data)) {}

  const HarnessConfig& config() const { return config_; }
  const DatasetSplit& data() const { return data_; }

  bool has_tuned(const ParamSource& src) const { return tuned_.contains(src); }

  /// Hyperparameters tuned at `src`, tuning on demand.
  const std::map<std::string, models::ModelSpec>& tuned(const ParamSource& src, const std::vector<std::string>& roster) {
    auto& slot = tuned_[src];
    FeatureMatrix train;
    bool built = false;
    for (const auto& model : roster) {
      if (is_analytic(model) || slot.contains(model)) continue;
      if (!built) {
        train = tuning_matrix(src);
        built = true;
      }
      const auto grid = config_.grid_for(model);
      const auto family = grid.empty() ? models::Family::kCart : grid.front().family;
      const auto result =
          models::tune(family, models::MatrixView(train), train.y, grid, config_.val_fraction);
      slot[model] = result.best;
    }
    return slot;
  }

  RunRecord run(const ExperimentPlan& plan) {
    switch (plan.kind) {
      case ExperimentKind::kInput: return run_input_experiment(plan);
      case ExperimentKind::kMoneyness: return run_moneyness_experiment(plan);
      case ExperimentKind::kWindow: return run_window_experiment(plan);
      case ExperimentKind::kNoise: return run_noise_experiment(plan);
    }
    throw ConfigError("unknown experiment");
  }

  RunRecord run_input_experiment(const ExperimentPlan& plan) {
    const auto start = Clock::now();
    auto rec = begin(plan);
    for (const auto& sub : plan.sub_experiments) {
      const auto cfg = InputConfig::named(sub);
      evaluate(rec, sub, data_.train, data_.test, cfg, window_if_global(), MoneynessBucket::kAll, false);
    }
    finish_scores(rec);
    rec.wall_clock_seconds = seconds_since(start);
    return rec;
  }

  RunRecord run_moneyness_experiment(const ExperimentPlan& plan) {
    const auto start = Clock::now();
    auto rec = begin(plan);
    const auto cfg = InputConfig::named("STANDARD");
    for (const auto& sub : plan.sub_experiments)
      evaluate(rec, sub, data_.train, data_.test, cfg, window_if_global(), parse_bucket(sub), false);
    finish_scores(rec);
    rec.wall_clock_seconds = seconds_since(start);
    return rec;
  }

  RunRecord run_window_experiment(const ExperimentPlan& plan) {
    const auto start = Clock::now();
    auto rec = begin(plan);
    const auto cfg = InputConfig::named("STANDARD");
    for (const auto& sub : plan.sub_experiments) {
      const auto dash = sub.rfind('-');
      if (dash == std::string::npos) throw ConfigError("window sub-experiment must be BUCKET-ON|OFF: '" + sub + "'");
      const auto bucket = parse_bucket(sub.substr(0, dash));
      const auto arm = sub.substr(dash + 1);
      if (arm != "ON" && arm != "OFF") throw ConfigError("window arm must be ON or OFF: '" + sub + "'");
      const std::optional<std::size_t> w = arm == "ON" ? std::optional(config_.window) : std::nullopt;
      evaluate(rec, sub, data_.train, data_.test, cfg, w, bucket, false);
    }
    rec.wall_clock_seconds = seconds_since(start);
    return rec;
  }

  RunRecord run_noise_experiment(const ExperimentPlan& plan) {
    if (data_.denoised_extra.empty()) throw ConfigError("noise experiment: empty denoised training extension");
    const auto start = Clock::now();
    auto rec = begin(plan);
    rec.metric = "MSE";
    const auto cfg = InputConfig::named("STANDARD");
    const auto denoised = build_denoised_train(data_);
    for (const auto& sub : plan.sub_experiments) {
      if (sub != "original" && sub != "denoised") throw ConfigError("noise sub-experiment must be original|denoised");
      evaluate(rec, sub, sub == "original" ? data_.train : denoised, data_.test, cfg, window_if_global(),
               MoneynessBucket::kAll, true);
    }
    for (const auto& m : rec.errors.models()) {
      const auto a = rec.errors.get(m, "original");
      const auto b = rec.errors.get(m, "denoised");
      if (a && b && *a > 0.0) rec.error_increase_pct[m] = error_increase_pct(*a, *b);
    }
    rec.wall_clock_seconds = seconds_since(start);
    return rec;
  }

 private:
  static double seconds_since(Clock::time_point t) {
    return std::chrono::duration<double>(Clock::now() - t).count();
  }

  std::optional<std::size_t> window_if_global() const {
    return config_.window_everywhere ? std::optional(config_.window) : std::nullopt;
  }

  FeatureMatrix tuning_matrix(const ParamSource& src) const {
    FeatureMatrix m;
    if (src.experiment == "input") {
      m = assemble(data_.train, InputConfig::named(src.sub));
    } else if (src.experiment == "moneyness") {
      const auto bucket = parse_bucket(src.sub);
      m = assemble(data_.train, InputConfig::named("STANDARD"));
      m = detail::select_rows(
          m, [&](std::size_t i) { return in_bucket(data_.train[m.source[i]], bucket, config_.swap_itm_otm); });
    } else {
      throw ConfigError("tuning source must be input/<InN> or moneyness/<bucket>: '" + src.str() + "'");
    }
    if (config_.window_everywhere) m = sliding_window(m, config_.window);
    return m;
  }

  RunRecord begin(const ExperimentPlan& plan) {
    plan.validate();
    RunRecord rec;
    rec.plan = plan;
    const auto src = plan.param_source();
    const bool existed = has_tuned(src);
    if (plan.tune_in) {
      rec.param_provenance = "tuned in " + src.str();
    } else {
      rec.param_provenance = "inherited from " + src.str();
      rec.dependencies.push_back(existed ? "reused tuning results of " + src.str()
                                         : "ran tuning step " + src.str() + " on demand");
    }
    const auto& params = tuned(src, plan.roster);
    for (const auto& m : plan.roster)
      if (!is_analytic(m)) rec.hyperparameters[m] = params.at(m);
    for (const auto& m : plan.roster) rec.errors.add_model(m);
    for (const auto& s : plan.sub_experiments) rec.errors.add_sub(s);
    return rec;
  }

  void finish_scores(RunRecord& rec) const {
    if (!rec.plan.weights) return;
    if (!rec.errors.has_model("BS")) {
      rec.diagnostics.push_back("no BS row in roster; scores not computed");
      return;
    }
    auto report = score_table(rec.errors, *rec.plan.weights);
    for (const auto& w : report.warnings) rec.diagnostics.push_back("score: " + w);
    rec.scores = std::move(report);
  }

  std::vector<double> analytic_predictions(const std::string& model, const std::vector<OptionRecord>& records,
                                           const FeatureMatrix& m) const {
    std::vector<double> out;
    out.reserve(m.rows);
    for (const auto idx : m.source) {
      const auto& r = records[idx];
      const double vol = config_.bs_vol_override.value_or(r.sigma);
      if (!std::isfinite(vol)) throw DataError("BS baseline: record " + std::to_string(idx) + " has no sigma");
      auto terms = terms_of(r, vol);
      out.push_back(model == "BS" ? bs_price(terms).price : bsm_price(terms).price);
    }
    return out;
  }

  void evaluate(RunRecord& rec, const std::string& sub, const std::vector<OptionRecord>& train,
                const std::vector<OptionRecord>& test, const InputConfig& cfg, std::optional<std::size_t> window,
                MoneynessBucket bucket, bool squared) {
    auto build = [&](const std::vector<OptionRecord>& records, const char* which) {
      auto m = assemble(records, cfg);
      if (window) {
        const auto before = m.rows;
        m = sliding_window(m, *window);
        if (m.rows < before)
          rec.diagnostics.push_back(sub + ": window " + std::to_string(*window) + " dropped " +
                                    std::to_string(before - m.rows) + " " + which + " rows without enough history");
      }
      if (bucket != MoneynessBucket::kAll)
        m = detail::select_rows(m, [&](std::size_t i) {
          return in_bucket(records[m.source[i]], bucket, config_.swap_itm_otm);
        });
      return m;
    };
    const auto train_m = build(train, "train");
    const auto test_m = build(test, "test");
    auto metric = [&](const std::vector<double>& pred) {
      return squared ? mse(pred, test_m.y) : rmse(pred, test_m.y);
    };

    for (const auto& model : rec.plan.roster) {
      if (test_m.rows == 0) {
        rec.diagnostics.push_back(sub + "/" + model + ": no test rows, cell absent");
        rec.errors.set(model, sub, std::nullopt);
        continue;
      }
      if (is_analytic(model)) {
        rec.errors.set(model, sub, metric(analytic_predictions(model, test, test_m)));
        continue;
      }
      const auto& spec = rec.hyperparameters.at(model);
      rec.used_params[sub][model] = spec.serialize();
      if (train_m.rows < 2 * spec.tree.min_samples_leaf + 1) {
        rec.diagnostics.push_back(sub + "/" + model + ": only " + std::to_string(train_m.rows) +
                                  " training rows, cell absent");
        rec.errors.set(model, sub, std::nullopt);
        continue;
      }
      const auto fitted = models::fit(spec, models::MatrixView(train_m), train_m.y);
      rec.errors.set(model, sub, metric(models::predict(fitted, models::MatrixView(test_m))));
    }
  }

  HarnessConfig config_;
  DatasetSplit data_;
  std::map<ParamSource, std::map<std::string, models::ModelSpec>> tuned_;
};

// ---------------------------------------------------------------------------
// Fixture mode: score published error tables through the same path.
// ---------------------------------------------------------------------------

inline RunRecord fixture_record(ExperimentKind kind, const std::string& fixture_dir) {
  const std::filesystem::path dir(fixture_dir);
  RunRecord rec;
  rec.fixture = true;
  rec.param_provenance = "published";
  switch (kind) {
    case ExperimentKind::kInput:
      rec.plan = ExperimentPlan::input({}, 0);
      rec.errors = load_error_csv((dir / "input_rmse.csv").string());
      break;
    case ExperimentKind::kMoneyness:
      rec.plan = ExperimentPlan::moneyness({}, 0);
      rec.errors = load_error_csv((dir / "moneyness_rmse.csv").string());
      break;
    case ExperimentKind::kWindow:
      rec.plan = ExperimentPlan::window({}, 0);
      rec.errors = load_error_csv((dir / "window_rmse.csv").string());
      break;
    case ExperimentKind::kNoise:
      rec.plan = ExperimentPlan::noise({}, 0);
      rec.metric = "MSE";
      rec.errors = load_error_csv((dir / "noise_mse.csv").string());
      break;
  }
  rec.plan.roster = rec.errors.models();
  if (rec.errors.subs() != rec.plan.sub_experiments)
    throw DataError("fixture for '" + rec.plan.name() + "' has unexpected sub-experiments");
  if (rec.plan.weights) {
    auto report = score_table(rec.errors, *rec.plan.weights);
    for (const auto& w : report.warnings) rec.diagnostics.push_back("score: " + w);
    rec.scores = std::move(report);
  }
  if (kind == ExperimentKind::kNoise)
    for (const auto& m : rec.errors.models()) {
      const auto a = rec.errors.get(m, "original");
      const auto b = rec.errors.get(m, "denoised");
      if (a && b) rec.error_increase_pct[m] = error_increase_pct(*a, *b);
    }
  return rec;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

enum class ReportFormat { kCsv, kMarkdown };

inline ReportFormat parse_report_format(std::string_view s) {
  if (s == "csv") return ReportFormat::kCsv;
  if (s == "md" || s == "markdown") return ReportFormat::kMarkdown;
  throw ConfigError("unknown report format '" + std::string(s) + "'");
}

/// Deterministic rendering of a run; wall-clock time is left out.
inline std::string emit_report(const RunRecord& rec, ReportFormat format) {
  auto cell = [](std::optional<double> v) { return v ? text::format_fixed(*v, 4) : std::string("n/a"); };
  const auto& roster = rec.plan.roster;
  const auto& subs = rec.plan.sub_experiments;
  const bool noise = !rec.error_increase_pct.empty() || rec.plan.kind == ExperimentKind::kNoise;
  auto source_of = [&](const std::string& m) {
    if (rec.fixture) return std::string("published");
    return is_analytic(m) ? std::string("analytic") : rec.param_provenance;
  };
  auto increase = [&](const std::string& m) -> std::optional<double> {
    const auto it = rec.error_increase_pct.find(m);
    return it == rec.error_increase_pct.end() ? std::nullopt : std::optional(it->second);
  };

  std::string out;
  if (format == ReportFormat::kCsv) {
    out = "model,source";
    for (const auto& s : subs) out += "," + s;
    if (rec.scores) out += ",score_bs,score_ml";
    if (noise) out += ",increase_pct";
    out += '\n';
    for (const auto& m : roster) {
      out += m + "," + source_of(m);
      for (const auto& s : subs) out += "," + cell(rec.errors.get(m, s));
      if (rec.scores) {
        const auto* row = rec.scores->find(m);
        out += "," + cell(row ? std::optional(row->score_bs) : std::nullopt);
        out += "," + cell(row ? std::optional(row->score_ml) : std::nullopt);
      }
      if (noise) out += "," + cell(increase(m));
      out += '\n';
    }
    return out;
  }

  out = "# " + rec.plan.name() + " experiment\n\n";
  out += "- mode: " + std::string(rec.fixture ? "fixture" : "live") + "\n";
  out += "- seed: " + std::to_string(rec.plan.seed) + "\n";
  out += "- metric: " + rec.metric + "\n";
  out += "- hyperparameters: " + rec.param_provenance + "\n";
  for (const auto& d : rec.dependencies) out += "- dependency: " + d + "\n";
  if (roster.empty()) return out;

  if (!rec.hyperparameters.empty()) {
    out += "\n## Hyperparameters\n\n| model | source | parameters |\n|---|---|---|\n";
    for (const auto& [m, spec] : rec.hyperparameters)
      out += "| " + m + " | " + rec.param_provenance + " | `" + spec.serialize() + "` |\n";
  }

  out += "\n## Errors (" + rec.metric + ")\n\n| model |";
  for (const auto& s : subs) out += " " + s + " |";
  out += "\n|---|";
  for (std::size_t i = 0; i < subs.size(); ++i) out += "---|";
  out += '\n';
  for (const auto& m : roster) {
    out += "| " + m + " |";
    for (const auto& s : subs) out += " " + cell(rec.errors.get(m, s)) + " |";
    out += '\n';
  }

  if (rec.scores) {
    out += "\n## Score rates (%)\n\n| model | vs BS | vs worst non-parametric |\n|---|---|---|\n";
    for (const auto& r : rec.scores->rows)
      out += "| " + r.model + " | " + text::format_fixed(r.score_bs, 4) + " | " + text::format_fixed(r.score_ml, 4) +
             " |\n";
  }
  if (noise) {
    out += "\n## Denoised error increase (%)\n\n| model | original | denoised | increase |\n|---|---|---|---|\n";
    for (const auto& m : roster)
      out += "| " + m + " | " + cell(rec.errors.get(m, "original")) + " | " + cell(rec.errors.get(m, "denoised")) +
             " | " + cell(increase(m)) + " |\n";
  }
  if (!rec.diagnostics.empty()) {
    out += "\n## Diagnostics\n\n";
    for (const auto& d : rec.diagnostics) out += "- " + d + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Run directory: plan.txt, hyperparameters.txt, used_params.txt, errors.csv,
// scores.csv, increase.csv, diagnostics.txt, report.md, run.log and an
// optional config.txt snapshot.
// ---------------------------------------------------------------------------

inline void write_run_dir(const RunRecord& rec, const std::string& dir, std::string_view config_snapshot = {}) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create run directory '" + dir + "': " + ec.message());
  const fs::path d(dir);

  std::string plan = "experiment = " + rec.plan.name() + "\n";
  plan += "mode = " + std::string(rec.fixture ? "fixture" : "live") + "\n";
  plan += "metric = " + rec.metric + "\n";
  plan += "seed = " + std::to_string(rec.plan.seed) + "\n";
  plan += "subs = ";
  for (std::size_t i = 0; i < rec.plan.sub_experiments.size(); ++i) plan += (i ? "," : "") + rec.plan.sub_experiments[i];
  plan += "\nroster = ";
  for (std::size_t i = 0; i < rec.plan.roster.size(); ++i) plan += (i ? "," : "") + rec.plan.roster[i];
  plan += "\n";
  if (rec.plan.tune_in) plan += "tune_in = " + *rec.plan.tune_in + "\n";
  if (rec.plan.inherit_from) plan += "inherit_from = " + rec.plan.inherit_from->str() + "\n";
  if (rec.plan.weights) {
    plan += "weights = ";
    for (std::size_t i = 0; i < rec.plan.weights->weights.size(); ++i)
      plan += (i ? "," : "") + text::format_exact(rec.plan.weights->weights[i]);
    plan += "\n";
  }
  plan += "provenance = " + rec.param_provenance + "\n";
  for (const auto& dep : rec.dependencies) plan += "dependency = " + dep + "\n";
  text::write_file((d / "plan.txt").string(), plan);

  std::string hp;
  for (const auto& [m, spec] : rec.hyperparameters) hp += m + " = " + spec.serialize() + "\n";
  text::write_file((d / "hyperparameters.txt").string(), hp);

  std::string used;
  for (const auto& [sub, per_model] : rec.used_params)
    for (const auto& [m, spec] : per_model) used += sub + "|" + m + " = " + spec + "\n";
  text::write_file((d / "used_params.txt").string(), used);

  text::write_file((d / "errors.csv").string(), to_error_csv(rec.errors));

  std::string scores = "model,score_bs,score_ml\n";
  if (rec.scores)
    for (const auto& r : rec.scores->rows)
      scores += r.model + "," + text::format_exact(r.score_bs) + "," + text::format_exact(r.score_ml) + "\n";
  text::write_file((d / "scores.csv").string(), scores);

  std::string inc = "model,increase_pct\n";
  for (const auto& [m, v] : rec.error_increase_pct) inc += m + "," + text::format_exact(v) + "\n";
  text::write_file((d / "increase.csv").string(), inc);

  std::string diag;
  for (const auto& x : rec.diagnostics) diag += x + "\n";
  text::write_file((d / "diagnostics.txt").string(), diag);

  text::write_file((d / "report.md").string(), emit_report(rec, ReportFormat::kMarkdown));
  text::write_file((d / "run.log").string(),
                   "experiment " + rec.plan.name() + "\nwall_clock_seconds " +
                       text::format_fixed(rec.wall_clock_seconds, 3) + "\n" + diag);
  if (!config_snapshot.empty()) text::write_file((d / "config.txt").string(), config_snapshot);
}

inline RunRecord load_run_dir(const std::string& dir) {
  const std::filesystem::path d(dir);
  if (!std::filesystem::is_regular_file(d / "plan.txt"))
    throw DataError("'" + dir + "' is not a run directory (no plan.txt)");
  const auto plan_kv = text::KeyValueFile::load((d / "plan.txt").string());
  RunRecord rec;
  const auto kind = parse_experiment(plan_kv.get_string("experiment", ""));
  rec.plan.kind = kind;
  rec.fixture = plan_kv.get_string("mode", "live") == "fixture";
  rec.metric = plan_kv.get_string("metric", "RMSE");
  rec.plan.seed = static_cast<std::uint64_t>(plan_kv.get_int("seed", 0));
  rec.plan.sub_experiments = text::parse_name_list(plan_kv.get_string("subs", ""));
  rec.plan.roster = text::parse_name_list(plan_kv.get_string("roster", ""));
  if (const auto t = plan_kv.get("tune_in")) rec.plan.tune_in = *t;
  if (const auto t = plan_kv.get("inherit_from")) rec.plan.inherit_from = ParamSource::parse(*t);
  if (const auto w = plan_kv.get("weights"))
    rec.plan.weights = WeightVector::make(rec.plan.sub_experiments, text::parse_double_list(*w, "weights"));
  rec.param_provenance = plan_kv.get_string("provenance", "");
  rec.dependencies = plan_kv.get_all("dependency");

  const auto hyper_kv = text::KeyValueFile::load((d / "hyperparameters.txt").string());
  for (const auto& [m, spec] : hyper_kv.entries())
    rec.hyperparameters[m] = models::ModelSpec::parse(spec);
  const auto used_kv = text::KeyValueFile::load((d / "used_params.txt").string());
  for (const auto& [key, spec] : used_kv.entries()) {
    const auto bar = key.find('|');
    if (bar == std::string::npos) throw DataError("used_params.txt: malformed key '" + key + "'");
    rec.used_params[key.substr(0, bar)][key.substr(bar + 1)] = spec;
  }

  rec.errors = load_error_csv((d / "errors.csv").string());
  for (const auto& m : rec.plan.roster) rec.errors.add_model(m);
  for (const auto& s : rec.plan.sub_experiments) rec.errors.add_sub(s);

  auto read_rows = [&](const std::string& name) {
    std::vector<std::vector<std::string>> rows;
    const auto lines = text::split(text::read_file((d / name).string()), '\n');
    for (std::size_t i = 1; i < lines.size(); ++i)
      if (!text::trim(lines[i]).empty()) rows.push_back(text::split(text::trim(lines[i]), ','));
    return rows;
  };
  auto num = [&](const std::string& s) {
    const auto v = text::parse_double(s);
    if (!v) throw DataError("run directory '" + dir + "': bad number '" + s + "'");
    return *v;
  };
  if (rec.plan.weights) {
    ScoreReport report;
    for (const auto& r : read_rows("scores.csv")) {
      if (r.size() != 3) throw DataError("scores.csv: expected 3 fields");
      report.rows.push_back({r[0], num(r[1]), num(r[2]), {}, {}});
    }
    rec.scores = std::move(report);
  }
  for (const auto& r : read_rows("increase.csv")) {
    if (r.size() != 2) throw DataError("increase.csv: expected 2 fields");
    rec.error_increase_pct[r[0]] = num(r[1]);
  }
  for (const auto& l : text::split(text::read_file((d / "diagnostics.txt").string()), '\n'))
    if (!text::trim(l).empty()) rec.diagnostics.emplace_back(l);
  return rec;
}

// ---------------------------------------------------------------------------
// Run configuration: harness keys plus data source and split.
//
//   mode        = live | fixture
//   fixture_dir = <dir>                 (fixture mode)
//   data        = synthetic | csv
//   data_csv    = <path>                (data = csv)
//   generator   = <path>                (optional; else generator keys are read from this file)
//   train_range = A..B                  (repeatable; default Jan-Aug 2020)
//   test_range  = A..B
//   extra_range = A..B                  (repeatable; denoised extension)
// Relative paths resolve against the config file's directory.
// ---------------------------------------------------------------------------

struct RunConfig {
  HarnessConfig harness;
  bool fixture = false;
  std::string fixture_dir = "fixtures";
  bool synthetic = true;
  std::string data_csv;
  GeneratorConfig generator = GeneratorConfig::desk();
  SplitProtocol split = SplitProtocol::csi300();
  std::string snapshot;

  static RunConfig from_kv(const text::KeyValueFile& kv, const std::string& base_dir = ".") {
    auto resolve = [&](const std::string& p) {
      const std::filesystem::path path(p);
      return path.is_absolute() ? p : (std::filesystem::path(base_dir) / path).string();
    };
    RunConfig c;
    c.harness = HarnessConfig::from_kv(kv);
    const auto mode = kv.get_string("mode", "live");
    if (mode != "live" && mode != "fixture") throw ConfigError("mode must be live or fixture: '" + mode + "'");
    c.fixture = mode == "fixture";
    if (const auto d = kv.get("fixture_dir")) c.fixture_dir = resolve(*d);
    const auto data = kv.get_string("data", "synthetic");
    if (data == "csv") {
      c.synthetic = false;
      if (!kv.has("data_csv")) throw ConfigError("data = csv requires data_csv");
      c.data_csv = resolve(kv.get_string("data_csv", ""));
    } else if (data != "synthetic") {
      throw ConfigError("data must be synthetic or csv: '" + data + "'");
    }
    c.generator = kv.has("generator") ? GeneratorConfig::load(resolve(kv.get_string("generator", "")))
                                      : GeneratorConfig::from_kv(kv);
    auto ranges = [&](const std::string& key) {
      std::vector<DateRange> out;
      for (const auto& v : kv.get_all(key)) {
        const auto r = parse_range(text::trim(v));
        if (!r) throw ConfigError(key + ": bad date range '" + v + "'");
        out.push_back(*r);
      }
      return out;
    };
    if (auto t = ranges("train_range"); !t.empty()) c.split.train_ranges = t;
    if (auto t = ranges("test_range"); !t.empty()) {
      if (t.size() != 1) throw ConfigError("test_range given more than once");
      c.split.test_range = t.front();
    }
    if (kv.has("extra_range")) c.split.extra_ranges = ranges("extra_range");
    return c;
  }

  static RunConfig load(const std::string& path) {
    auto c = from_kv(text::KeyValueFile::load(path), std::filesystem::path(path).parent_path().string());
    c.snapshot = text::read_file(path);
    return c;
  }

  void set_seed(std::uint64_t seed) {
    harness.seed = seed;
    generator.seed = seed;
  }

  DatasetSplit build_data() const {
    const auto records = synthetic ? generate_synthetic(generator, generator.seed) : load_csv(data_csv);
    return split_by_dates(records, split);
  }
};

/// Plans in execution order: input, moneyness, window, noise.
inline std::vector<ExperimentPlan> standard_plans(const HarnessConfig& c) {
  return {ExperimentPlan::input(c.roster, c.seed), ExperimentPlan::moneyness(c.roster, c.seed),
          ExperimentPlan::window(c.roster, c.seed, c.window_source),
          ExperimentPlan::noise(c.roster, c.seed, c.noise_source)};
}

}  // namespace optbench::harness
