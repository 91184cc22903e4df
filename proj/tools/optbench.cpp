// optbench command-line front end.
//
//   optbench gen-data <cfg> <out.csv> [--seed N]
//   optbench fit-vol <prices.csv> [--periods-per-year N] [--column NAME]
//   optbench run <input|moneyness|window|noise|all> [--config FILE] [--seed N] --out DIR
//   optbench score <errors.csv> [--weights w1,...] [--bs-row NAME] [--exclude a,b] [--config FILE]
//   optbench report <run-dir> [--format md|csv]
//
// Exit codes: 0 ok, 2 configuration error, 3 data error, 4 numerical failure.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "optbench/dataset.hpp"
#include "optbench/error.hpp"
#include "optbench/evaluation.hpp"
#include "optbench/harness.hpp"
#include "optbench/text.hpp"
#include "optbench/volatility.hpp"

namespace {

using namespace optbench;

int gen_data(const std::string& cfg_path, const std::string& out, std::optional<std::uint64_t> seed) {
  auto cfg = GeneratorConfig::load(cfg_path);
  if (seed) cfg.seed = *seed;
  const auto records = generate_synthetic(cfg, cfg.seed);
  save_csv(out, records);
  std::cout << "wrote " << records.size() << " records to " << out << "\n";
  return 0;
}

std::vector<double> read_price_column(const std::string& path, const std::string& column) {
  const auto lines = text::split(text::read_file(path), '\n');
  if (lines.empty() || text::trim(lines[0]).empty()) throw DataError(path + ": empty file");
  const auto header = text::split(text::trim(lines[0]), ',');
  std::size_t col = header.size() - 1;
  bool has_header = !text::parse_double(text::trim(header.back())).has_value();
  if (!column.empty()) {
    if (!has_header) throw DataError(path + ": --column given but file has no header");
    const auto it = std::find_if(header.begin(), header.end(), [&](const auto& h) { return text::trim(h) == column; });
    if (it == header.end()) throw DataError(path + ": no column '" + column + "'");
    col = static_cast<std::size_t>(it - header.begin());
  }
  std::vector<double> prices;
  for (std::size_t i = has_header ? 1 : 0; i < lines.size(); ++i) {
    const auto line = text::trim(lines[i]);
    if (line.empty()) continue;
    const auto fields = text::split(line, ',');
    if (fields.size() <= col) throw DataError(path + ":" + std::to_string(i + 1) + ": missing price field");
    const auto v = text::parse_double(text::trim(fields[col]));
    if (!v || !(*v > 0.0)) throw DataError(path + ":" + std::to_string(i + 1) + ": bad price '" + fields[col] + "'");
    prices.push_back(*v);
  }
  return prices;
}

int fit_vol(const std::string& path, int periods_per_year, const std::string& column) {
  const auto prices = read_price_column(path, column);
  const auto returns = log_returns(prices);
  const auto p = garch_fit(returns);
  const auto vol = vol_series(p, returns, periods_per_year);
  std::cout << "omega = " << text::format_exact(p.omega) << "\n"
            << "alpha = " << text::format_exact(p.alpha) << "\n"
            << "beta = " << text::format_exact(p.beta) << "\n"
            << "persistence = " << text::format_exact(p.alpha + p.beta) << "\n"
            << "loglik = " << text::format_exact(p.loglik) << "\n"
            << "degenerate = " << (p.degenerate ? 1 : 0) << "\n"
            << "returns = " << returns.size() << "\n"
            << "last_annual_vol = " << text::format_exact(vol.back()) << "\n";
  return 0;
}

int run(const std::string& experiment, const std::string& config_path, std::optional<std::uint64_t> seed,
        const std::string& out) {
  auto cfg = config_path.empty() ? harness::RunConfig{} : harness::RunConfig::load(config_path);
  if (seed) cfg.set_seed(*seed);

  std::vector<harness::ExperimentKind> kinds;
  if (experiment == "all") {
    kinds = {harness::ExperimentKind::kInput, harness::ExperimentKind::kMoneyness, harness::ExperimentKind::kWindow,
             harness::ExperimentKind::kNoise};
  } else {
    kinds = {harness::parse_experiment(experiment)};
  }

  const bool nested = kinds.size() > 1;
  auto dir_for = [&](harness::ExperimentKind k) {
    return nested ? (std::filesystem::path(out) / std::string(harness::to_string(k))).string() : out;
  };

  if (cfg.fixture) {
    for (auto k : kinds) {
      const auto rec = harness::fixture_record(k, cfg.fixture_dir);
      harness::write_run_dir(rec, dir_for(k), cfg.snapshot);
      std::cout << "wrote " << dir_for(k) << "\n";
    }
    return 0;
  }

  harness::ExperimentRunner runner(cfg.harness, cfg.build_data());
  const auto plans = harness::standard_plans(cfg.harness);
  for (auto k : kinds) {
    const auto& plan = plans[static_cast<std::size_t>(k)];
    const auto rec = runner.run(plan);
    harness::write_run_dir(rec, dir_for(k), cfg.snapshot);
    std::cout << "wrote " << dir_for(k) << " (" << text::format_fixed(rec.wall_clock_seconds, 2) << " s)\n";
  }
  return 0;
}

int score(const std::string& errors_path, const std::string& config_path, const std::string& weights,
          const std::string& bs_row, const std::string& exclude) {
  ScoreConfig sc = config_path.empty() ? ScoreConfig{} : ScoreConfig::load(config_path);
  if (!weights.empty()) sc.weights = text::parse_double_list(weights, "weights");
  if (!bs_row.empty()) sc.bs_row = bs_row;
  if (!exclude.empty()) {
    const auto names = text::parse_name_list(exclude);
    sc.exclude = {names.begin(), names.end()};
  }
  auto table = load_error_csv(errors_path);
  sc.apply(table);
  const auto report = score_table(table, sc.weights_for(table));
  for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";
  std::cout << "model,score_bs,score_ml\n";
  for (const auto& r : report.rows)
    std::cout << r.model << "," << text::format_fixed(r.score_bs, 4) << "," << text::format_fixed(r.score_ml, 4)
              << "\n";
  return 0;
}

int report(const std::string& dir, const std::string& format) {
  const auto fmt = harness::parse_report_format(format);
  std::cout << harness::emit_report(harness::load_run_dir(dir), fmt);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Option pricing benchmark harness"};
  app.require_subcommand(1);

  std::string cfg_path, out_path, prices_path, column, experiment, config, errors_path, weights, bs_row, exclude,
      run_dir, format = "md";
  std::optional<std::uint64_t> seed;
  int periods_per_year = 252;

  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic option panel");
  gen->add_option("cfg", cfg_path, "Generator config")->required();
  gen->add_option("out", out_path, "Output CSV")->required();
  gen->add_option("--seed", seed, "Override the generator seed");

  auto* vol = app.add_subcommand("fit-vol", "Fit GARCH(1,1) to a price series");
  vol->add_option("prices", prices_path, "CSV of prices (last column, or --column)")->required();
  vol->add_option("--periods-per-year", periods_per_year, "Annualization factor")->check(CLI::PositiveNumber);
  vol->add_option("--column", column, "Price column name");

  auto* run_cmd = app.add_subcommand("run", "Run an experiment (input|moneyness|window|noise|all)");
  run_cmd->add_option("experiment", experiment, "Experiment name")->required();
  run_cmd->add_option("--config", config, "Run config file");
  run_cmd->add_option("--seed", seed, "Seed for data generation and models");
  run_cmd->add_option("--out", out_path, "Run directory")->required();

  auto* score_cmd = app.add_subcommand("score", "Score an error table");
  score_cmd->add_option("errors", errors_path, "Error CSV (model,sub,error)")->required();
  score_cmd->add_option("--config", config, "Score config file");
  score_cmd->add_option("--weights", weights, "Comma-separated weights in sub-experiment order");
  score_cmd->add_option("--bs-row", bs_row, "Baseline row name");
  score_cmd->add_option("--exclude", exclude, "Rows excluded from the worst-model maximum");

  auto* report_cmd = app.add_subcommand("report", "Render a run directory");
  report_cmd->add_option("run-dir", run_dir, "Run directory")->required();
  report_cmd->add_option("--format", format, "md or csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(ExitCode::kConfig);
  }

  try {
    if (*gen) return gen_data(cfg_path, out_path, seed);
    if (*vol) return fit_vol(prices_path, periods_per_year, column);
    if (*run_cmd) return run(experiment, config, seed, out_path);
    if (*score_cmd) return score(errors_path, config, weights, bs_row, exclude);
    if (*report_cmd) return report(run_dir, format);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::kNumerical);
  }
  return 0;
}
