#pragma once

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "flowcast/core/binary_io.hpp"
#include "flowcast/core/error.hpp"

namespace flowcast {

/// Text format shared by manifests and config files:
///
///     # comment
///     key = value
///     [table]
///     token token token
///
/// Lines inside a [table] section are kept as whitespace-split rows.
class KeyValueFile {
 public:
  static KeyValueFile parse(const std::string& text, const std::string& origin = "<text>") {
    KeyValueFile kv;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      line = trim(line);
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']') throw ConfigError(origin + ":" + std::to_string(lineno) + ": bad section header");
        section = trim(line.substr(1, line.size() - 2));
        kv.tables_[section];
        continue;
      }
      if (!section.empty()) {
        std::istringstream row(line);
        std::vector<std::string> tokens;
        for (std::string tok; row >> tok;) tokens.push_back(tok);
        kv.tables_[section].push_back(std::move(tokens));
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos) {
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
      }
      kv.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return kv;
  }

  static KeyValueFile load(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw ConfigError("config file not found: " + path.string());
    return parse(io::read_file(path), path.string());
  }

  void set(const std::string& key, const std::string& value) {
    if (!values_.contains(key)) order_.push_back(key);
    values_[key] = value;
  }
  void set(const std::string& key, double value) { set(key, format_double(value)); }
  void set(const std::string& key, long long value) { set(key, std::to_string(value)); }
  void set(const std::string& key, int value) { set(key, std::to_string(value)); }
  void set(const std::string& key, std::size_t value) { set(key, std::to_string(value)); }

  bool has(const std::string& key) const { return values_.contains(key); }

  std::string get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("missing key '" + key + "'");
    return it->second;
  }
  std::string get(const std::string& key, const std::string& fallback) const {
    return has(key) ? get(key) : fallback;
  }

  double get_double(const std::string& key) const { return to_double(key, get(key)); }
  double get_double(const std::string& key, double fallback) const {
    return has(key) ? get_double(key) : fallback;
  }
  long long get_int(const std::string& key) const {
    const std::string v = get(key);
    long long out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size()) throw ConfigError("key '" + key + "': not an integer: " + v);
    return out;
  }
  long long get_int(const std::string& key, long long fallback) const { return has(key) ? get_int(key) : fallback; }

  std::vector<std::string> get_list(const std::string& key) const {
    std::vector<std::string> out;
    if (!has(key)) return out;
    std::istringstream in(get(key));
    for (std::string tok; in >> tok;) out.push_back(tok);
    return out;
  }
  std::vector<double> get_doubles(const std::string& key) const {
    std::vector<double> out;
    for (const auto& tok : get_list(key)) out.push_back(to_double(key, tok));
    return out;
  }

  const std::vector<std::vector<std::string>>* table(const std::string& name) const {
    auto it = tables_.find(name);
    return it == tables_.end() ? nullptr : &it->second;
  }
  void add_row(const std::string& table, std::vector<std::string> row) { tables_[table].push_back(std::move(row)); }

  const std::vector<std::string>& keys() const { return order_; }

  std::string serialize() const {
    std::string out;
    for (const auto& k : order_) out += k + " = " + values_.at(k) + "\n";
    for (const auto& [name, rows] : tables_) {
      out += "[" + name + "]\n";
      for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) out += (i ? " " : "") + row[i];
        out += "\n";
      }
    }
    return out;
  }

  /// Shortest text that parses back to the same double.
  static std::string format_double(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
  }

  template <typename Range>
  static std::string join(const Range& values) {
    std::string out;
    for (const auto& v : values) {
      if (!out.empty()) out += ' ';
      if constexpr (std::is_arithmetic_v<std::decay_t<decltype(v)>>) {
        out += format_double(static_cast<double>(v));
      } else {
        out += v;
      }
    }
    return out;
  }

  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  }

 private:

  static double to_double(const std::string& key, const std::string& v) {
    double out = 0.0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size()) throw ConfigError("key '" + key + "': not a number: " + v);
    return out;
  }

  std::map<std::string, std::string> values_;
  std::vector<std::string> order_;
  std::map<std::string, std::vector<std::vector<std::string>>> tables_;
};

}  // namespace flowcast
