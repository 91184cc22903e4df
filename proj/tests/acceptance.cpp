// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <random>
#include <string>

#include "optbench/harness.hpp"
#include "oracles.hpp"

using namespace optbench;
using Clock = std::chrono::steady_clock;

namespace {

const std::string kFixtures = OPTBENCH_FIXTURE_DIR;

int failures = 0;

void report(const char* id, bool ok, double seconds, const std::string& detail) {
  std::printf("%s %s (%.2f s) %s\n", ok ? "PASS" : "FAIL", id, seconds, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

// Runs `body`, which returns {ok, detail}; exceptions count as failures.
void criterion(const char* id, double limit_seconds, const std::function<std::pair<bool, std::string>()>& body) {
  const auto start = Clock::now();
  std::pair<bool, std::string> r;
  try {
    r = body();
  } catch (const std::exception& e) {
    r = {false, std::string("exception: ") + e.what()};
  }
  const double s = std::chrono::duration<double>(Clock::now() - start).count();
  if (limit_seconds > 0.0 && s >= limit_seconds) {
    r.first = false;
    r.second += " [over time limit " + text::format_fixed(limit_seconds, 0) + " s]";
  }
  report(id, r.first, s, r.second);
}

std::map<std::string, std::pair<double, double>> published_scores(const std::string& file) {
  std::map<std::string, std::pair<double, double>> out;
  const auto lines = text::split(text::read_file(kFixtures + "/" + file), '\n');
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (text::trim(lines[i]).empty()) continue;
    const auto c = text::split(lines[i], ',');
    out[std::string(text::trim(c[0]))] = {*text::parse_double(text::trim(c[1])), *text::parse_double(text::trim(c[2]))};
  }
  return out;
}

std::pair<bool, std::string> ac1() {
  int checked = 0;
  double worst = 0.0;
  for (const auto& [errors, cfg, pub] :
       {std::tuple{"input_rmse.csv", "input_score.cfg", "input_scores_published.csv"},
        std::tuple{"moneyness_rmse.csv", "moneyness_score.cfg", "moneyness_scores_published.csv"}}) {
    auto table = load_error_csv(kFixtures + "/" + errors);
    const auto sc = ScoreConfig::load(kFixtures + "/" + cfg);
    sc.apply(table);
    const auto rep = score_table(table, sc.weights_for(table));
    for (const auto& [model, p] : published_scores(pub)) {
      const auto* row = rep.find(model);
      if (!row) return {false, "missing model " + model};
      worst = std::max({worst, std::abs(row->score_bs - p.first), std::abs(row->score_ml - p.second)});
      checked += 2;
    }
  }
  return {checked == 36 && worst <= 0.01,
          std::to_string(checked) + " published scores, max deviation " + text::format_fixed(worst, 5)};
}

std::pair<bool, std::string> ac2() {
  const auto t = load_error_csv(kFixtures + "/noise_mse.csv");
  const auto lines = text::split(text::read_file(kFixtures + "/noise_increase_published.csv"), '\n');
  int checked = 0;
  double worst = 0.0;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (text::trim(lines[i]).empty()) continue;
    const auto c = text::split(lines[i], ',');
    const std::string model(text::trim(c[0]));
    const auto a = t.get(model, "original"), b = t.get(model, "denoised");
    if (!a || !b) return {false, "missing MSE for " + model};
    worst = std::max(worst, std::abs(error_increase_pct(*a, *b) - *text::parse_double(text::trim(c[1]))));
    ++checked;
  }
  return {checked == 9 && worst <= 0.02,
          std::to_string(checked) + " increases, max deviation " + text::format_fixed(worst, 5)};
}

std::pair<bool, std::string> ac3() {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> spot(50, 150), m(0.8, 1.25), tau(0.1, 2.0), r(0.0, 0.08), q(0.0, 0.05),
      vol(0.15, 0.6);
  double worst_rel = 0.0, worst_parity = 0.0, worst_delta = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double S = spot(rng);
    OptionTerms t{S, S * m(rng), tau(rng), r(rng), q(rng), vol(rng), i % 2 ? OptionKind::kPut : OptionKind::kCall};
    const double ref = oracle::european_price(t.spot, t.strike, t.tau, t.rate, t.div_yield, t.vol,
                                              t.kind == OptionKind::kCall);
    worst_rel = std::max(worst_rel, std::abs(bsm_price(t).price - ref) / ref);
    if (t.div_yield > 0.025) {
      // the q = 0 slice exercises the plain BS formula
      auto t0 = t;
      t0.div_yield = 0.0;
      const double ref0 = oracle::european_price(t0.spot, t0.strike, t0.tau, t0.rate, 0.0, t0.vol,
                                                 t0.kind == OptionKind::kCall);
      worst_rel = std::max(worst_rel, std::abs(bs_price(t0).price - ref0) / ref0);
    }
    worst_parity = std::max(worst_parity, std::abs(parity_gap(t)));
    const double h = 1e-4 * t.spot;
    auto up = t, dn = t;
    up.spot += h;
    dn.spot -= h;
    const double fd = (bsm_price(up).price - bsm_price(dn).price) / (2 * h);
    worst_delta = std::max(worst_delta, std::abs(bsm_price(t).delta - fd));
  }
  return {worst_rel <= 1e-6 && worst_parity < 1e-9 && worst_delta <= 1e-5,
          "max rel price error " + text::format_exact(worst_rel) + ", max parity gap " +
              text::format_exact(worst_parity) + ", max delta error " + text::format_exact(worst_delta)};
}

std::pair<bool, std::string> ac4() {
  std::mt19937_64 rng(42);
  std::normal_distribution<double> z(0.0, 1.0);
  const double omega = 1e-6, alpha = 0.05, beta = 0.90;
  double var = omega / (1 - alpha - beta), prev = 0.0;
  for (int i = 0; i < 500; ++i) {
    var = omega + alpha * prev * prev + beta * var;
    prev = std::sqrt(var) * z(rng);
  }
  std::vector<double> r(10000);
  for (auto& x : r) {
    var = omega + alpha * prev * prev + beta * var;
    prev = std::sqrt(var) * z(rng);
    x = prev;
  }
  const auto p = garch_fit(r);
  const double ll_const = garch_loglik(sample_variance(r), 0.0, 0.0, r);
  return {std::abs(p.alpha + p.beta - 0.95) <= 0.05 && p.loglik > ll_const,
          "alpha+beta " + text::format_fixed(p.alpha + p.beta, 4) + ", loglik gain " +
              text::format_fixed(p.loglik - ll_const, 2)};
}

struct Small {
  std::vector<double> X, y;
  std::size_t rows, cols;
};

Small small_case(std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> nr(4, 32), nc(1, 4);
  std::uniform_real_distribution<double> u(-1, 1);
  std::uniform_int_distribution<int> coarse(0, 4);
  Small s{{}, {}, nr(rng), nc(rng)};
  for (std::size_t i = 0; i < s.rows; ++i) {
    for (std::size_t j = 0; j < s.cols; ++j) s.X.push_back(j % 2 ? coarse(rng) : u(rng));
    s.y.push_back(3 * u(rng) + (s.X[i * s.cols] > 0 ? 2 : 0));
  }
  return s;
}

// Checks every internal node of `t` against the exhaustive maximizer of
// `score` on the rows reaching it; returns the number of mismatches.
template <typename Score>
int audit_tree(const models::RegressionTree& t, const Small& s, std::size_t min_leaf, int max_depth, Score&& score,
               double tol) {
  int bad = 0;
  std::vector<std::size_t> all(s.rows);
  std::iota(all.begin(), all.end(), 0u);
  std::vector<std::tuple<int, std::vector<std::size_t>, int>> stack{{0, all, 0}};
  while (!stack.empty()) {
    auto [id, rows, depth] = stack.back();
    stack.pop_back();
    const auto& n = t.nodes()[static_cast<std::size_t>(id)];
    const auto best = oracle::brute_force_split(s.X, s.cols, rows, min_leaf, score);
    if (n.is_leaf()) {
      if (depth < max_depth && best.found && best.score > tol) ++bad;
      continue;
    }
    std::vector<std::size_t> L, R;
    for (auto r : rows) (s.X[r * s.cols + static_cast<std::size_t>(n.feature)] <= n.threshold ? L : R).push_back(r);
    if (!best.found || score(L, R) < best.score - tol) ++bad;
    stack.push_back({n.left, L, depth + 1});
    stack.push_back({n.right, R, depth + 1});
  }
  return bad;
}

std::pair<bool, std::string> ac5() {
  using namespace optbench::models;
  std::mt19937_64 rng(5);
  int var_bad = 0, gain_bad = 0;
  for (int c = 0; c < 200; ++c) {
    const auto s = small_case(rng);
    const TreeParams tp{1 + c % 4, 1 + static_cast<std::size_t>(c % 3), SplitMode::kExact, 256};
    if (s.rows < 2 * tp.min_samples_leaf) continue;
    const auto cart = fit_tree(MatrixView(s.X.data(), s.rows, s.cols), s.y, tp);
    std::vector<std::size_t> all(s.rows);
    std::iota(all.begin(), all.end(), 0u);
    const double scale = 1.0 + oracle::sse(s.y, all);
    var_bad += audit_tree(
        cart, s, tp.min_samples_leaf, tp.max_depth,
        [&](const auto& L, const auto& R) {
          std::vector<std::size_t> u(L);
          u.insert(u.end(), R.begin(), R.end());
          return oracle::sse(s.y, u) - oracle::sse(s.y, L) - oracle::sse(s.y, R);
        },
        1e-9 * scale);

    std::uniform_real_distribution<double> gd(-2, 2), hd(0.1, 3);
    std::vector<double> g(s.rows), h(s.rows), cnt(s.rows, 1.0);
    double energy = 1.0;
    for (std::size_t i = 0; i < s.rows; ++i) {
      g[i] = gd(rng);
      h[i] = hd(rng);
      energy += g[i] * g[i] / h[i];
    }
    GrowOptions opt;
    opt.lambda = 0.5 * (c % 5);
    opt.gamma = 0.05 * (c % 3);
    const SplitIndex index(MatrixView(s.X.data(), s.rows, s.cols), tp);
    const auto t = grow_tree(index, {g, h, cnt}, opt);
    gain_bad += audit_tree(
        t, s, tp.min_samples_leaf, tp.max_depth,
        [&](const auto& L, const auto& R) { return oracle::second_order_gain(g, h, L, R, opt.lambda, opt.gamma); },
        1e-9 * energy);
  }

  double boost_gap = 0.0;
  for (int c = 0; c < 50; ++c) {
    const auto s = small_case(rng);
    BoostParams bp;
    bp.n_rounds = 10;
    bp.learning_rate = 0.3;
    bp.lambda = 0.0;
    bp.gamma = 0.0;
    bp.tree = {3, 1, SplitMode::kExact, 256};
    std::vector<std::vector<double>> f1, f2;
    const MatrixView X(s.X.data(), s.rows, s.cols);
    fit_gb_first_order(X, s.y, bp, [&](int, auto F) { f1.emplace_back(F.begin(), F.end()); });
    fit_gb_second_order(X, s.y, bp, [&](int, auto F) { f2.emplace_back(F.begin(), F.end()); });
    for (std::size_t m = 0; m < f1.size(); ++m)
      for (std::size_t i = 0; i < s.rows; ++i) boost_gap = std::max(boost_gap, std::abs(f1[m][i] - f2[m][i]));
  }

  double ng_gap = 0.0;
  std::uniform_real_distribution<double> mu(-5, 5), ls(-1.5, 1.5), zz(-3, 3);
  for (int i = 0; i < 1000; ++i) {
    const GaussianPrediction p{mu(rng), ls(rng)};
    const double y = p.mu + zz(rng) * p.sigma(), h = 1e-5;
    const double dm = (gaussian_nll(y, {p.mu + h, p.log_sigma}) - gaussian_nll(y, {p.mu - h, p.log_sigma})) / (2 * h);
    const double ds = (gaussian_nll(y, {p.mu, p.log_sigma + h}) - gaussian_nll(y, {p.mu, p.log_sigma - h})) / (2 * h);
    const auto F = gaussian_fisher_diagonal(p);
    const auto ng = gaussian_natural_gradient(y, p);
    ng_gap = std::max({ng_gap, std::abs(ng[0] - dm / F[0]), std::abs(ng[1] - ds / F[1])});
  }
  return {var_bad == 0 && gain_bad == 0 && boost_gap <= 1e-9 && ng_gap <= 1e-5,
          "variance-split mismatches " + std::to_string(var_bad) + ", gain-split mismatches " +
              std::to_string(gain_bad) + ", boosting gap " + text::format_exact(boost_gap) +
              ", natural-gradient gap " + text::format_exact(ng_gap)};
}

struct Pipeline {
  std::vector<harness::RunRecord> records;
  std::vector<std::string> reports;
};

Pipeline run_pipeline() {
  harness::HarnessConfig cfg;
  const auto split = split_by_dates(generate_synthetic(GeneratorConfig::desk(), cfg.seed), SplitProtocol::csi300());
  harness::ExperimentRunner runner(cfg, split);
  Pipeline p;
  for (const auto& plan : harness::standard_plans(cfg)) {
    p.records.push_back(runner.run(plan));
    p.reports.push_back(harness::emit_report(p.records.back(), harness::ReportFormat::kMarkdown) +
                        harness::emit_report(p.records.back(), harness::ReportFormat::kCsv));
  }
  return p;
}

Pipeline first_run;

std::pair<bool, std::string> ac6() {
  harness::HarnessConfig cfg;
  const auto split = split_by_dates(generate_synthetic(GeneratorConfig::desk(), cfg.seed), SplitProtocol::csi300());
  if (split.train.size() != 5000 || split.test.size() != 2000)
    return {false, "unexpected split sizes " + std::to_string(split.train.size()) + "/" +
                       std::to_string(split.test.size())};
  const auto train = assemble(split.train, InputConfig::named("STANDARD"));
  const auto test = assemble(split.test, InputConfig::named("STANDARD"));
  const double mean = std::accumulate(train.y.begin(), train.y.end(), 0.0) / static_cast<double>(train.rows);
  const double base = rmse(std::vector<double>(test.rows, mean), test.y);

  first_run = run_pipeline();
  const auto second = run_pipeline();
  const bool same = first_run.reports == second.reports;

  // STANDARD features on the full test set: the moneyness experiment's ALL column.
  const auto& money = first_run.records[1];
  bool all_under = true;
  std::string detail = "baseline " + text::format_fixed(base, 4) + ";";
  for (const char* m : {"RF", "GB1", "GB2", "GB2-hist", "NGB"}) {
    const auto e = money.errors.get(m, "ALL");
    const double ratio = e ? *e / base : std::numeric_limits<double>::infinity();
    all_under = all_under && ratio < 0.5;
    detail += std::string(" ") + m + " " + text::format_fixed(ratio, 3);
  }
  detail += same ? "; reports identical across two runs" : "; reports DIFFER across runs";
  return {all_under && same, detail};
}

std::pair<bool, std::string> ac7() {
  if (first_run.records.size() != 4) return {false, "pipeline did not run"};
  const auto& rs = first_run.records;
  bool frozen = true;
  for (const auto& r : rs)
    for (const auto& [sub, by_model] : r.used_params)
      for (const auto& [m, spec] : by_model) frozen = frozen && spec == r.hyperparameters.at(m).serialize();
  const bool window_ok = rs[2].param_provenance == "inherited from input/In1" &&
                         rs[2].hyperparameters == rs[0].hyperparameters &&
                         rs[0].param_provenance == "tuned in input/In1";
  const bool noise_ok = rs[3].param_provenance == "inherited from moneyness/ALL" &&
                        rs[3].hyperparameters == rs[1].hyperparameters &&
                        rs[1].param_provenance == "tuned in moneyness/ALL";
  return {frozen && window_ok && noise_ok, std::string("frozen across subs: ") + (frozen ? "yes" : "no") +
                                               ", window inherits In1: " + (window_ok ? "yes" : "no") +
                                               ", noise inherits ALL: " + (noise_ok ? "yes" : "no")};
}

}  // namespace

int main() {
  criterion("AC1 score tables reproduce published values", 1.0, ac1);
  criterion("AC2 denoised error increase column", 0.0, ac2);
  criterion("AC3 pricing against quadrature, parity, delta", 5.0, ac3);
  criterion("AC4 GARCH recovery", 30.0, ac4);
  criterion("AC5 learner oracles", 60.0, ac5);
  criterion("AC6 desk benchmark and determinism", 600.0, ac6);
  criterion("AC7 parameter-transfer provenance", 0.0, ac7);
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
