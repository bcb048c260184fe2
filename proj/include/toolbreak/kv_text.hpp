#ifndef TOOLBREAK_KV_TEXT_HPP
#define TOOLBREAK_KV_TEXT_HPP

// Canonical key=value text used by configs, manifests, profiles and the
// checkpoint spec block.

#include <charconv>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include "toolbreak/error.hpp"

namespace toolbreak {

/// Shortest decimal text that parses back to exactly `value`.
inline std::string format_double(double value) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc{}) throw Error("format_double: conversion failed");
  return std::string(buf, end);
}

inline std::string format_float(float value) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc{}) throw Error("format_float: conversion failed");
  return std::string(buf, end);
}

inline std::string_view trim_ws(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <typename T>
std::optional<T> parse_number(std::string_view text) {
  text = trim_ws(text);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  T value{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty()) return std::nullopt;
  return value;
}

/// One `[name]` block of key=value entries. The unnamed leading block has an
/// empty name.
struct KvSection {
  std::string name;
  std::vector<std::pair<std::string, std::string>> entries;

  void set(std::string key, std::string value) {
    for (auto& [k, v] : entries) {
      if (k == key) {
        v = std::move(value);
        return;
      }
    }
    entries.emplace_back(std::move(key), std::move(value));
  }
  void add(std::string key, std::string value) { entries.emplace_back(std::move(key), std::move(value)); }
  void set(std::string key, double value) { set(std::move(key), format_double(value)); }
  void set(std::string key, std::uint64_t value) { set(std::move(key), std::to_string(value)); }
  void set(std::string key, int value) { set(std::move(key), std::to_string(value)); }
  void set(std::string key, const char* value) { set(std::move(key), std::string(value)); }

  bool has(std::string_view key) const {
    for (const auto& [k, v] : entries)
      if (k == key) return true;
    return false;
  }

  std::optional<std::string> find(std::string_view key) const {
    for (const auto& [k, v] : entries)
      if (k == key) return v;
    return std::nullopt;
  }

  std::vector<std::string> all(std::string_view key) const {
    std::vector<std::string> out;
    for (const auto& [k, v] : entries)
      if (k == key) out.push_back(v);
    return out;
  }

  std::string get(std::string_view key) const {
    auto v = find(key);
    if (!v) throw ConfigError("missing key '" + std::string(key) + "'" + where());
    return *v;
  }

  template <typename T>
  T get_number(std::string_view key) const {
    auto text = get(key);
    auto v = parse_number<T>(text);
    if (!v) throw ConfigError("bad numeric value '" + text + "' for key '" + std::string(key) + "'" + where());
    return *v;
  }

  template <typename T>
  T get_number_or(std::string_view key, T fallback) const {
    return has(key) ? get_number<T>(key) : fallback;
  }

 private:
  std::string where() const { return name.empty() ? std::string() : " in [" + name + "]"; }
};

struct KvDocument {
  KvSection header;
  std::vector<KvSection> sections;

  KvSection& add_section(std::string name) {
    sections.push_back(KvSection{std::move(name), {}});
    return sections.back();
  }

  std::string to_string() const {
    std::ostringstream out;
    write(out);
    return out.str();
  }

  void write(std::ostream& out) const {
    for (const auto& [k, v] : header.entries) out << k << '=' << v << '\n';
    for (const auto& s : sections) {
      out << '[' << s.name << "]\n";
      for (const auto& [k, v] : s.entries) out << k << '=' << v << '\n';
    }
  }

  static KvDocument parse(std::istream& in) {
    KvDocument doc;
    KvSection* current = &doc.header;
    std::string line;
    std::uint64_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      auto view = trim_ws(line);
      if (view.empty() || view.front() == '#') continue;
      if (view.front() == '[') {
        if (view.back() != ']') throw FormatError("unterminated section header", line_no, FormatError::Unit::line);
        current = &doc.add_section(std::string(trim_ws(view.substr(1, view.size() - 2))));
        continue;
      }
      auto eq = view.find('=');
      if (eq == std::string_view::npos || eq == 0)
        throw FormatError("expected key=value", line_no, FormatError::Unit::line);
      current->add(std::string(trim_ws(view.substr(0, eq))), std::string(trim_ws(view.substr(eq + 1))));
    }
    return doc;
  }

  static KvDocument parse(const std::string& text) {
    std::istringstream in(text);
    return parse(in);
  }
};

}  // namespace toolbreak

#endif
