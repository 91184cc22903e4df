#pragma once

// Small text helpers: splitting, strict number parsing, round-trip number
// formatting and a key = value config reader.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include "optbench/error.hpp"

namespace optbench::text {

inline std::string_view trim(std::string_view s) {
  const auto* ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.emplace_back(s.substr(start));
      break;
    }
    out.emplace_back(s.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

inline std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::optional<std::int64_t> parse_int(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  std::int64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

// Shortest representation that parses back to the same double.
inline std::string format_exact(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

inline std::string format_fixed(double v, int decimals = 4) {
  char buf[64];
  const auto [ptr, ec] =
      std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed, decimals);
  std::string s(buf, ptr);
  if (s.starts_with("-") && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
  return s;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write file '" + path + "'");
  out << content;
}

// Ordered key = value pairs. '#' starts a comment. Keys may repeat.
class KeyValueFile {
 public:
  static KeyValueFile parse(std::string_view content, const std::string& origin = "<config>") {
    KeyValueFile kv;
    std::size_t line_no = 0;
    for (const auto& raw : split(content, '\n')) {
      ++line_no;
      std::string_view line = raw;
      if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
      line = trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string_view::npos)
        throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected 'key = value'");
      const auto key = trim(line.substr(0, eq));
      if (key.empty()) throw ConfigError(origin + ":" + std::to_string(line_no) + ": empty key");
      kv.entries_.emplace_back(std::string(key), std::string(trim(line.substr(eq + 1))));
    }
    return kv;
  }

  static KeyValueFile load(const std::string& path) {
    std::string content;
    try {
      content = read_file(path);
    } catch (const DataError&) {
      throw ConfigError("cannot open config '" + path + "'");
    }
    return parse(content, path);
  }

  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

  bool has(std::string_view key) const {
    for (const auto& [k, v] : entries_)
      if (k == key) return true;
    return false;
  }

  // Last occurrence wins.
  std::optional<std::string> get(std::string_view key) const {
    std::optional<std::string> out;
    for (const auto& [k, v] : entries_)
      if (k == key) out = v;
    return out;
  }

  std::vector<std::string> get_all(std::string_view key) const {
    std::vector<std::string> out;
    for (const auto& [k, v] : entries_)
      if (k == key) out.push_back(v);
    return out;
  }

  double get_double(std::string_view key, double fallback) const {
    const auto v = get(key);
    if (!v) return fallback;
    const auto d = parse_double(*v);
    if (!d) throw ConfigError("config key '" + std::string(key) + "': not a number: '" + *v + "'");
    return *d;
  }

  std::int64_t get_int(std::string_view key, std::int64_t fallback) const {
    const auto v = get(key);
    if (!v) return fallback;
    const auto d = parse_int(*v);
    if (!d) throw ConfigError("config key '" + std::string(key) + "': not an integer: '" + *v + "'");
    return *d;
  }

  std::string get_string(std::string_view key, std::string fallback) const {
    return get(key).value_or(std::move(fallback));
  }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

inline std::vector<double> parse_double_list(std::string_view s, const std::string& what) {
  std::vector<double> out;
  for (const auto& item : split(s, ',')) {
    const auto d = parse_double(item);
    if (!d) throw ConfigError(what + ": not a number: '" + item + "'");
    out.push_back(*d);
  }
  return out;
}

inline std::vector<std::string> parse_name_list(std::string_view s) {
  std::vector<std::string> out;
  for (const auto& item : split(s, ',')) {
    const auto t = trim(item);
    if (!t.empty()) out.emplace_back(t);
  }
  return out;
}

}  // namespace optbench::text
