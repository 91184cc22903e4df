#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "optbench/date.hpp"
#include "optbench/error.hpp"
#include "optbench/pricing.hpp"
#include "optbench/text.hpp"
#include "optbench/volatility.hpp"

namespace optbench {

/// One observed option quote.
///
/// `q_monthly` is stored as quoted (a monthly dividend rate); pricing code
/// annualizes it with `annual_div_yield`. `sigma` and `delta` may be NaN when
/// a CSV leaves them empty; feature assembly rejects them then.
struct OptionRecord {
  Date trade_date{};
  std::string contract_id;
  double spot = 0.0;
  double strike = 0.0;
  double tau = 0.0;
  double rate = 0.0;
  double q_monthly = 0.0;
  OptionKind kind = OptionKind::kCall;
  double sigma = std::numeric_limits<double>::quiet_NaN();
  double delta = std::numeric_limits<double>::quiet_NaN();
  double price = 0.0;

  bool operator==(const OptionRecord&) const = default;
};

inline double annual_div_yield(double q_monthly) { return 12.0 * q_monthly; }

inline OptionTerms terms_of(const OptionRecord& r, double vol) {
  return {r.spot, r.strike, r.tau, r.rate, annual_div_yield(r.q_monthly), vol, r.kind};
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

inline constexpr std::string_view kOptionCsvHeader =
    "trade_date,contract_id,S,K,tau_years,r,q_monthly,kind,sigma,delta,price";

inline std::vector<OptionRecord> parse_option_csv(std::string_view content,
                                                  const std::string& origin = "<csv>") {
  std::vector<std::string> lines;
  for (auto& l : text::split(content, '\n')) {
    if (!l.empty() && l.back() == '\r') l.pop_back();
    lines.push_back(std::move(l));
  }
  while (!lines.empty() && text::trim(lines.back()).empty()) lines.pop_back();
  if (lines.empty()) throw DataError(origin + ": missing header");

  const auto header = text::split(lines.front(), ',');
  const std::vector<std::string> required = text::split(kOptionCsvHeader, ',');
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[std::string(text::trim(header[i]))] = i;
  for (const auto& name : required)
    if (!col.contains(name)) throw DataError(origin + ": missing column '" + name + "'");

  std::vector<OptionRecord> out;
  out.reserve(lines.size() - 1);
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const std::size_t row = li;  // 1-based data row number
    const auto cells = text::split(lines[li], ',');
    auto where = [&](const std::string& field) {
      return origin + ": row " + std::to_string(row) + ", field '" + field + "'";
    };
    auto cell = [&](const std::string& field) -> std::string_view {
      const auto idx = col.at(field);
      if (idx >= cells.size()) throw DataError(where(field) + ": missing value");
      return text::trim(cells[idx]);
    };
    auto number = [&](const std::string& field, bool optional) {
      const auto s = cell(field);
      if (s.empty() && optional) return std::numeric_limits<double>::quiet_NaN();
      const auto v = text::parse_double(s);
      if (!v || !std::isfinite(*v)) throw DataError(where(field) + ": not a number: '" + std::string(s) + "'");
      return *v;
    };

    OptionRecord r;
    const auto date = parse_date(cell("trade_date"));
    if (!date) throw DataError(where("trade_date") + ": malformed date '" + std::string(cell("trade_date")) + "'");
    r.trade_date = *date;
    r.contract_id = std::string(cell("contract_id"));
    if (r.contract_id.empty()) throw DataError(where("contract_id") + ": empty");
    r.spot = number("S", false);
    r.strike = number("K", false);
    r.tau = number("tau_years", false);
    r.rate = number("r", false);
    r.q_monthly = number("q_monthly", false);
    try {
      r.kind = parse_option_kind(cell("kind"));
    } catch (const DataError& e) {
      throw DataError(where("kind") + ": " + e.what());
    }
    r.sigma = number("sigma", true);
    r.delta = number("delta", true);
    r.price = number("price", false);

    if (!(r.spot > 0.0)) throw DataError(where("S") + ": must be > 0");
    if (!(r.strike > 0.0)) throw DataError(where("K") + ": must be > 0");
    if (!(r.tau > 0.0)) throw DataError(where("tau_years") + ": must be > 0");
    if (!(r.price >= 0.0)) throw DataError(where("price") + ": must be >= 0");
    if (r.q_monthly < 0.0) throw DataError(where("q_monthly") + ": must be >= 0");
    if (!std::isnan(r.sigma) && r.sigma < 0.0) throw DataError(where("sigma") + ": must be >= 0");
    out.push_back(std::move(r));
  }
  return out;
}

inline std::vector<OptionRecord> load_csv(const std::string& path) {
  return parse_option_csv(text::read_file(path), path);
}

inline std::string to_csv(const std::vector<OptionRecord>& records) {
  auto num = [](double v) { return std::isnan(v) ? std::string{} : text::format_exact(v); };
  std::string out(kOptionCsvHeader);
  out += '\n';
  for (const auto& r : records) {
    out += format_date(r.trade_date) + ',' + r.contract_id + ',' + num(r.spot) + ',' + num(r.strike) + ',' +
           num(r.tau) + ',' + num(r.rate) + ',' + num(r.q_monthly) + ',' + std::string(to_string(r.kind)) +
           ',' + num(r.sigma) + ',' + num(r.delta) + ',' + num(r.price) + '\n';
  }
  return out;
}

inline void save_csv(const std::string& path, const std::vector<OptionRecord>& records) {
  text::write_file(path, to_csv(records));
}

// ---------------------------------------------------------------------------
// Synthetic market
// ---------------------------------------------------------------------------

struct GeneratorSegment {
  DateRange range;
  std::size_t rows = 0;
  bool clean = false;  // quoted without noise (eta = 0)
};

/// Synthetic market: a GBM index, monthly option listings on a relative
/// strike grid, and a fixed number of quotes per segment spread evenly
/// across its trading days.
struct GeneratorConfig {
  std::vector<GeneratorSegment> segments;
  std::vector<double> moneyness;       // strikes as multiples of the listing-day spot
  std::vector<int> maturities_months;
  double strike_step = 1.0;            // strikes rounded to this grid; 0 disables rounding
  double spot0 = 100.0;
  double gbm_mu = 0.05;
  double gbm_sigma = 0.2;
  double rate = 0.02;
  double q_monthly = 0.001;
  double noise_eta = 0.02;
  bool calls = true;
  bool puts = false;                   // no feature set carries option type
  int history_days = 250;              // pre-sample trading days used by the GARCH fit
  int periods_per_year = 252;
  std::uint64_t seed = 20200101;

  static GeneratorConfig desk() {
    GeneratorConfig c;
    c.segments = {{{*parse_date("2020-01-01"), *parse_date("2020-08-31")}, 5000, false},
                  {{*parse_date("2020-09-01"), *parse_date("2020-12-31")}, 2000, false},
                  {{*parse_date("2021-09-01"), *parse_date("2021-12-31")}, 1500, true}};
    c.moneyness = {0.88, 0.91, 0.94, 0.97, 1.0, 1.03, 1.06, 1.09, 1.12};
    c.maturities_months = {1, 2, 3, 6};
    return c;
  }

  static GeneratorConfig full_scale() {
    GeneratorConfig c = desk();
    c.segments[0].rows = 39461;
    c.segments[1].rows = 21263;
    c.segments[2].rows = 19730;  // 39461 + 19730 = 59191 train-capable rows
    c.moneyness.clear();
    for (int i = 0; i <= 16; ++i) c.moneyness.push_back(0.84 + 0.02 * i);
    c.spot0 = 4000.0;
    c.strike_step = 25.0;
    return c;
  }

  static GeneratorConfig from_kv(const text::KeyValueFile& kv) {
    GeneratorConfig c = kv.get_string("scale", "desk") == "full" ? full_scale() : desk();
    if (const auto s = kv.get("scale"); s && *s != "desk" && *s != "full")
      throw ConfigError("generator: unknown scale '" + *s + "'");

    auto segs = kv.get_all("range");
    auto clean = kv.get_all("clean_range");
    if (!segs.empty() || !clean.empty()) {
      c.segments.clear();
      auto add = [&](const std::string& spec, bool is_clean) {
        // "YYYY-MM-DD..YYYY-MM-DD rows"
        const auto parts = text::split(text::trim(spec), ' ');
        std::vector<std::string> toks;
        for (const auto& p : parts)
          if (!text::trim(p).empty()) toks.emplace_back(text::trim(p));
        if (toks.size() != 2) throw ConfigError("generator: range needs 'FIRST..LAST ROWS': '" + spec + "'");
        const auto r = parse_range(toks[0]);
        const auto n = text::parse_int(toks[1]);
        if (!r) throw ConfigError("generator: bad date range '" + toks[0] + "'");
        if (!n || *n < 0) throw ConfigError("generator: bad row count '" + toks[1] + "'");
        c.segments.push_back({*r, static_cast<std::size_t>(*n), is_clean});
      };
      for (const auto& s : segs) add(s, false);
      for (const auto& s : clean) add(s, true);
    }
    if (const auto m = kv.get("moneyness")) c.moneyness = text::parse_double_list(*m, "moneyness");
    if (const auto m = kv.get("maturities_months")) {
      c.maturities_months.clear();
      for (double v : text::parse_double_list(*m, "maturities_months")) {
        if (v != std::floor(v)) throw ConfigError("maturities_months: integers expected");
        c.maturities_months.push_back(static_cast<int>(v));
      }
    }
    c.strike_step = kv.get_double("strike_step", c.strike_step);
    c.spot0 = kv.get_double("spot0", c.spot0);
    c.gbm_mu = kv.get_double("gbm_mu", c.gbm_mu);
    c.gbm_sigma = kv.get_double("gbm_sigma", c.gbm_sigma);
    c.rate = kv.get_double("rate", c.rate);
    c.q_monthly = kv.get_double("q_monthly", c.q_monthly);
    c.noise_eta = kv.get_double("noise_eta", c.noise_eta);
    c.history_days = static_cast<int>(kv.get_int("history_days", c.history_days));
    c.periods_per_year = static_cast<int>(kv.get_int("periods_per_year", c.periods_per_year));
    c.seed = static_cast<std::uint64_t>(kv.get_int("seed", static_cast<std::int64_t>(c.seed)));
    if (const auto k = kv.get("kinds")) {
      const auto names = text::parse_name_list(*k);
      c.calls = std::find(names.begin(), names.end(), "call") != names.end();
      c.puts = std::find(names.begin(), names.end(), "put") != names.end();
    }
    return c;
  }

  static GeneratorConfig load(const std::string& path) { return from_kv(text::KeyValueFile::load(path)); }

  void validate() const {
    if (segments.empty()) throw ConfigError("generator: no date ranges");
    if (moneyness.empty()) throw ConfigError("generator: empty strike grid");
    if (maturities_months.empty()) throw ConfigError("generator: empty maturities list");
    if (!calls && !puts) throw ConfigError("generator: no option kinds enabled");
    for (double m : moneyness)
      if (!(m > 0.0)) throw ConfigError("generator: moneyness entries must be > 0");
    for (int m : maturities_months)
      if (m < 1) throw ConfigError("generator: maturities must be >= 1 month");
    if (!(spot0 > 0.0) || !(gbm_sigma > 0.0)) throw ConfigError("generator: spot0 and gbm_sigma must be > 0");
    if (!(noise_eta >= 0.0)) throw ConfigError("generator: noise_eta must be >= 0");
    if (strike_step < 0.0 || q_monthly < 0.0) throw ConfigError("generator: negative strike_step or q_monthly");
    if (history_days < 0 || periods_per_year <= 0) throw ConfigError("generator: bad history/periods");
    for (std::size_t i = 0; i < segments.size(); ++i)
      for (std::size_t j = i + 1; j < segments.size(); ++j)
        if (segments[i].range.overlaps(segments[j].range))
          throw ConfigError("generator: overlapping ranges " + format_range(segments[i].range) + " and " +
                            format_range(segments[j].range));
  }
};

namespace detail {

struct Contract {
  std::string id;
  Date listed;
  Date expiry;
  double strike;
  OptionKind kind;
  std::uint64_t priority;
};

inline std::string contract_id(OptionKind kind, const Date& expiry, double strike) {
  std::string d = format_date(expiry);
  d.erase(std::remove(d.begin(), d.end(), '-'), d.end());
  return std::string(kind == OptionKind::kCall ? "C" : "P") + d + "-" + text::format_exact(strike);
}

}  // namespace detail

/// Seeded synthetic option quotes.
///
/// Every emitted price is bsm_price at the generator's true volatility
/// `gbm_sigma`, plus Gaussian noise with standard deviation eta * price,
/// truncated at zero. The `sigma` feature comes from a GARCH(1,1) fit to
/// the simulated index; `delta` is the Black-Scholes delta at that sigma.
inline std::vector<OptionRecord> generate_synthetic(const GeneratorConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  Date first = cfg.segments.front().range.first;
  Date last = cfg.segments.front().range.last;
  for (const auto& s : cfg.segments) {
    first = std::min(first, s.range.first);
    last = std::max(last, s.range.last);
  }

  // Trading calendar: history_days weekdays before `first`, then every
  // weekday through `last`, plus one trailing day so each emitted day has
  // a forward return.
  std::vector<Date> days;
  {
    Date d = add_days(first, -1);
    std::vector<Date> history;
    while (static_cast<int>(history.size()) < cfg.history_days) {
      if (is_weekday(d)) history.push_back(d);
      d = add_days(d, -1);
    }
    days.assign(history.rbegin(), history.rend());
    for (d = first; d <= last; d = add_days(d, 1))
      if (is_weekday(d)) days.push_back(d);
    d = add_days(last, 1);
    while (!is_weekday(d)) d = add_days(d, 1);
    days.push_back(d);
  }

  const double dt = 1.0 / static_cast<double>(cfg.periods_per_year);
  std::vector<double> path(days.size());
  path[0] = cfg.spot0;
  for (std::size_t i = 1; i < path.size(); ++i)
    path[i] = path[i - 1] * std::exp((cfg.gbm_mu - 0.5 * cfg.gbm_sigma * cfg.gbm_sigma) * dt +
                                     cfg.gbm_sigma * std::sqrt(dt) * gauss(rng));

  const auto returns = log_returns(path);
  std::vector<double> vol;
  if (returns.size() >= 100) {
    vol = vol_series(garch_fit(returns), returns, cfg.periods_per_year);
  } else {
    const double s2 = std::max(sample_variance(returns), detail::variance_floor());
    vol.assign(returns.size(), std::sqrt(s2 * cfg.periods_per_year));
  }

  // Listings on the first trading day of every month. A later listing with
  // an existing (kind, expiry, strike) is the same contract.
  std::vector<detail::Contract> contracts;
  std::set<std::string> listed_ids;
  for (std::size_t i = 0; i + 1 < days.size(); ++i) {
    if (i > 0 && days[i].month() == days[i - 1].month()) continue;
    for (int m : cfg.maturities_months) {
      const Date expiry = add_months(days[i], m);
      std::vector<double> strikes;
      for (double mny : cfg.moneyness) {
        double k = path[i] * mny;
        if (cfg.strike_step > 0.0) k = std::max(cfg.strike_step, std::round(k / cfg.strike_step) * cfg.strike_step);
        if (std::find(strikes.begin(), strikes.end(), k) == strikes.end()) strikes.push_back(k);
      }
      for (double k : strikes)
        for (auto kind : {OptionKind::kCall, OptionKind::kPut}) {
          if ((kind == OptionKind::kCall && !cfg.calls) || (kind == OptionKind::kPut && !cfg.puts)) continue;
          auto id = detail::contract_id(kind, expiry, k);
          const auto priority = rng();
          if (!listed_ids.insert(id).second) continue;
          contracts.push_back({std::move(id), days[i], expiry, k, kind, priority});
        }
    }
  }

  std::vector<OptionRecord> out;
  for (const auto& seg : cfg.segments) {
    std::vector<std::size_t> seg_days;
    for (std::size_t i = 0; i + 1 < days.size(); ++i)
      if (seg.range.contains(days[i])) seg_days.push_back(i);
    if (seg.rows > 0 && seg_days.empty())
      throw ConfigError("generator: range " + format_range(seg.range) + " contains no trading days");
    const double eta = seg.clean ? 0.0 : cfg.noise_eta;

    for (std::size_t j = 0; j < seg_days.size(); ++j) {
      const std::size_t n_today = seg.rows / seg_days.size() + (j < seg.rows % seg_days.size() ? 1 : 0);
      if (n_today == 0) continue;
      const std::size_t di = seg_days[j];
      const Date today = days[di];

      std::vector<const detail::Contract*> live;
      for (const auto& c : contracts)
        if (c.listed <= today && today < c.expiry) live.push_back(&c);
      if (live.size() < n_today)
        throw ConfigError("generator: only " + std::to_string(live.size()) + " live contracts on " +
                          format_date(today) + " but " + std::to_string(n_today) +
                          " quotes requested; widen the strike grid or maturities");
      std::partial_sort(live.begin(), live.begin() + static_cast<std::ptrdiff_t>(n_today), live.end(),
                        [](const auto* a, const auto* b) {
                          return a->priority != b->priority ? a->priority > b->priority : a->id < b->id;
                        });
      live.resize(n_today);
      std::sort(live.begin(), live.end(), [](const auto* a, const auto* b) { return a->id < b->id; });

      for (const auto* c : live) {
        OptionRecord r;
        r.trade_date = today;
        r.contract_id = c->id;
        r.spot = path[di];
        r.strike = c->strike;
        r.tau = static_cast<double>(days_between(today, c->expiry)) / 365.0;
        r.rate = cfg.rate;
        r.q_monthly = cfg.q_monthly;
        r.kind = c->kind;
        r.sigma = vol[di];
        r.delta = bs_price(terms_of(r, r.sigma)).delta;
        const double fair = bsm_price(terms_of(r, cfg.gbm_sigma)).price;
        const double z = gauss(rng);
        r.price = eta > 0.0 ? std::max(fair + eta * fair * z, 0.0) : fair;
        out.push_back(std::move(r));
      }
    }
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const OptionRecord& a, const OptionRecord& b) { return a.trade_date < b.trade_date; });
  return out;
}

// ---------------------------------------------------------------------------
// Splitting
// ---------------------------------------------------------------------------

struct DatasetSplit {
  std::vector<OptionRecord> train;
  std::vector<OptionRecord> test;
  std::vector<OptionRecord> denoised_extra;
  std::size_t dropped = 0;
};

struct SplitProtocol {
  std::vector<DateRange> train_ranges;
  DateRange test_range;
  std::vector<DateRange> extra_ranges;  // routed to denoised_extra

  // Train Jan-Aug 2020, test Sep-Dec 2020, denoised extra Sep-Dec 2021.
  static SplitProtocol csi300() {
    return {{{*parse_date("2020-01-01"), *parse_date("2020-08-31")}},
            {*parse_date("2020-09-01"), *parse_date("2020-12-31")},
            {{*parse_date("2021-09-01"), *parse_date("2021-12-31")}}};
  }
};

inline DatasetSplit split_by_dates(const std::vector<OptionRecord>& records,
                                   const std::vector<DateRange>& train_ranges, const DateRange& test_range,
                                   const std::vector<DateRange>& extra_ranges = {}) {
  for (const auto& r : train_ranges)
    if (r.overlaps(test_range))
      throw ConfigError("split: train range " + format_range(r) + " overlaps test range " +
                        format_range(test_range));
  for (const auto& r : extra_ranges) {
    if (r.overlaps(test_range))
      throw ConfigError("split: extra range " + format_range(r) + " overlaps test range " +
                        format_range(test_range));
    for (const auto& t : train_ranges)
      if (r.overlaps(t))
        throw ConfigError("split: extra range " + format_range(r) + " overlaps train range " + format_range(t));
  }
  DatasetSplit out;
  auto in_any = [](const std::vector<DateRange>& rs, const Date& d) {
    return std::any_of(rs.begin(), rs.end(), [&](const DateRange& r) { return r.contains(d); });
  };
  for (const auto& rec : records) {
    if (test_range.contains(rec.trade_date))
      out.test.push_back(rec);
    else if (in_any(train_ranges, rec.trade_date))
      out.train.push_back(rec);
    else if (in_any(extra_ranges, rec.trade_date))
      out.denoised_extra.push_back(rec);
    else
      ++out.dropped;
  }
  return out;
}

inline DatasetSplit split_by_dates(const std::vector<OptionRecord>& records, const SplitProtocol& p) {
  return split_by_dates(records, p.train_ranges, p.test_range, p.extra_ranges);
}

inline std::vector<OptionRecord> build_denoised_train(const DatasetSplit& split) {
  std::vector<OptionRecord> out = split.train;
  out.insert(out.end(), split.denoised_extra.begin(), split.denoised_extra.end());
  return out;
}

// ---------------------------------------------------------------------------
// Moneyness
// ---------------------------------------------------------------------------

enum class MoneynessBucket { kAll, kItm, kAtm, kOtm };

inline std::string_view to_string(MoneynessBucket b) {
  switch (b) {
    case MoneynessBucket::kAll: return "ALL";
    case MoneynessBucket::kItm: return "ITM";
    case MoneynessBucket::kAtm: return "ATM";
    case MoneynessBucket::kOtm: return "OTM";
  }
  return "?";
}

inline MoneynessBucket parse_bucket(std::string_view s) {
  for (auto b : {MoneynessBucket::kAll, MoneynessBucket::kItm, MoneynessBucket::kAtm, MoneynessBucket::kOtm})
    if (to_string(b) == s) return b;
  throw ConfigError("unknown moneyness bucket '" + std::string(s) + "'");
}

/// S/K < 0.96 is ITM, [0.96, 1.04] ATM, above 1.04 OTM. `swap_itm_otm`
/// flips the two wings to the usual call-side convention.
inline MoneynessBucket moneyness_bucket(double spot, double strike, bool swap_itm_otm = false) {
  if (!(spot > 0.0) || !(strike > 0.0) || !std::isfinite(spot) || !std::isfinite(strike))
    throw DomainError("moneyness_bucket: spot and strike must be > 0");
  const double ratio = spot / strike;
  if (ratio >= 0.96 && ratio <= 1.04) return MoneynessBucket::kAtm;
  const bool low = ratio < 0.96;
  if (swap_itm_otm) return low ? MoneynessBucket::kOtm : MoneynessBucket::kItm;
  return low ? MoneynessBucket::kItm : MoneynessBucket::kOtm;
}

inline bool in_bucket(const OptionRecord& r, MoneynessBucket b, bool swap_itm_otm = false) {
  return b == MoneynessBucket::kAll || moneyness_bucket(r.spot, r.strike, swap_itm_otm) == b;
}

inline std::vector<OptionRecord> filter_bucket(const std::vector<OptionRecord>& records, MoneynessBucket b,
                                               bool swap_itm_otm = false) {
  std::vector<OptionRecord> out;
  for (const auto& r : records)
    if (in_bucket(r, b, swap_itm_otm)) out.push_back(r);
  return out;
}

}  // namespace optbench
