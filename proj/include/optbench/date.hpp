#pragma once

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>

#include "optbench/text.hpp"

namespace optbench {

using Date = std::chrono::year_month_day;

inline std::optional<Date> parse_date(std::string_view s) {
  s = text::trim(s);
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
  const auto y = text::parse_int(s.substr(0, 4));
  const auto m = text::parse_int(s.substr(5, 2));
  const auto d = text::parse_int(s.substr(8, 2));
  if (!y || !m || !d || *m < 1 || *m > 12 || *d < 1) return std::nullopt;
  const Date date{std::chrono::year{static_cast<int>(*y)}, std::chrono::month{static_cast<unsigned>(*m)},
                  std::chrono::day{static_cast<unsigned>(*d)}};
  if (!date.ok()) return std::nullopt;
  return date;
}

inline std::string format_date(const Date& d) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(d.year()),
                static_cast<unsigned>(d.month()), static_cast<unsigned>(d.day()));
  return buf;
}

inline std::chrono::sys_days to_days(const Date& d) { return std::chrono::sys_days{d}; }

inline Date add_days(const Date& d, int n) { return Date{to_days(d) + std::chrono::days{n}}; }

inline int days_between(const Date& from, const Date& to) {
  return static_cast<int>((to_days(to) - to_days(from)).count());
}

// Same day-of-month n months later, clamped to the month's last day.
inline Date add_months(const Date& d, int n) {
  const auto ym = std::chrono::year_month{d.year(), d.month()} + std::chrono::months{n};
  const auto last = std::chrono::year_month_day_last{ym.year(), std::chrono::month_day_last{ym.month()}};
  const auto day = std::min(static_cast<unsigned>(d.day()), static_cast<unsigned>(last.day()));
  return Date{ym.year(), ym.month(), std::chrono::day{day}};
}

inline bool is_weekday(const Date& d) {
  const std::chrono::weekday wd{to_days(d)};
  return wd != std::chrono::Saturday && wd != std::chrono::Sunday;
}

// Closed interval [first, last].
struct DateRange {
  Date first;
  Date last;

  bool contains(const Date& d) const { return first <= d && d <= last; }
  bool overlaps(const DateRange& o) const { return first <= o.last && o.first <= last; }
};

inline std::string format_range(const DateRange& r) {
  return format_date(r.first) + ".." + format_date(r.last);
}

// "YYYY-MM-DD..YYYY-MM-DD"
inline std::optional<DateRange> parse_range(std::string_view s) {
  s = text::trim(s);
  const auto sep = s.find("..");
  if (sep == std::string_view::npos) return std::nullopt;
  const auto a = parse_date(s.substr(0, sep));
  const auto b = parse_date(s.substr(sep + 2));
  if (!a || !b || *b < *a) return std::nullopt;
  return DateRange{*a, *b};
}

}  // namespace optbench
