// Copyright 2026 The DAFC-DOA Authors
// SPDX-License-Identifier: Apache-2.0

#include "dafc/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "dafc/error.hpp"

namespace dafc {
namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

bool parse_double(const std::string& s, double& out) {
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

// Shortest text that parses back to the same double.
std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace

KeyValueConfig KeyValueConfig::parse_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_string(ss.str(), path.string());
}

KeyValueConfig KeyValueConfig::parse_string(const std::string& text, const std::string& source) {
  KeyValueConfig cfg;
  cfg.source_ = source;
  std::stringstream ss(text);
  std::string raw;
  int line = 0;
  while (std::getline(ss, raw)) {
    ++line;
    if (const auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    const std::string content = trim(raw);
    if (content.empty()) continue;
    const auto eq = content.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(source + ":" + std::to_string(line) + ": expected 'key = value', got '" +
                        content + "'");
    }
    const std::string key = trim(content.substr(0, eq));
    const std::string value = trim(content.substr(eq + 1));
    if (key.empty()) throw ConfigError(source + ":" + std::to_string(line) + ": empty key");
    if (cfg.entries_.contains(key)) {
      throw ConfigError(source + ":" + std::to_string(line) + ": duplicate key '" + key + "'");
    }
    cfg.entries_[key] = Entry{value, line};
  }
  return cfg;
}

bool KeyValueConfig::has(const std::string& key) const { return entries_.contains(key); }

void KeyValueConfig::set(const std::string& key, const std::string& value) {
  auto& e = entries_[key];
  e.value = value;
}

const KeyValueConfig::Entry& KeyValueConfig::require(const std::string& key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) throw ConfigError(source_ + ": missing required key '" + key + "'");
  used_.insert(key);
  return it->second;
}

void KeyValueConfig::fail(const std::string& key, const std::string& what) const {
  const auto it = entries_.find(key);
  const int line = it == entries_.end() ? 0 : it->second.line;
  std::string where = source_;
  if (line > 0) where += ":" + std::to_string(line);
  throw ConfigError(where + ": key '" + key + "': " + what);
}

std::string KeyValueConfig::get_string(const std::string& key) const { return require(key).value; }

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) const {
  if (!has(key)) return note_default(key, fallback), fallback;
  return get_string(key);
}

double KeyValueConfig::get_double(const std::string& key) const {
  const auto& e = require(key);
  double v = 0.0;
  if (!parse_double(e.value, v)) fail(key, "expected a number, got '" + e.value + "'");
  return v;
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
  if (!has(key)) return note_default(key, format_double(fallback)), fallback;
  return get_double(key);
}

std::int64_t KeyValueConfig::get_int(const std::string& key) const {
  const auto& e = require(key);
  std::int64_t v = 0;
  const char* end = e.value.data() + e.value.size();
  auto [ptr, ec] = std::from_chars(e.value.data(), end, v);
  if (ec != std::errc() || ptr != end) fail(key, "expected an integer, got '" + e.value + "'");
  return v;
}

std::int64_t KeyValueConfig::get_int(const std::string& key, std::int64_t fallback) const {
  if (!has(key)) return note_default(key, std::to_string(fallback)), fallback;
  return get_int(key);
}

std::uint64_t KeyValueConfig::get_uint64(const std::string& key, std::uint64_t fallback) const {
  if (!has(key)) return note_default(key, std::to_string(fallback)), fallback;
  const auto& e = require(key);
  std::uint64_t v = 0;
  const char* end = e.value.data() + e.value.size();
  auto [ptr, ec] = std::from_chars(e.value.data(), end, v);
  if (ec != std::errc() || ptr != end) fail(key, "expected an unsigned integer, got '" + e.value + "'");
  return v;
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
  if (!has(key)) return note_default(key, fallback ? "true" : "false"), fallback;
  const auto& v = require(key).value;
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  fail(key, "expected a boolean, got '" + v + "'");
}

std::vector<double> KeyValueConfig::get_doubles(const std::string& key) const {
  const auto& e = require(key);
  std::vector<double> out;
  for (const auto& item : split_list(e.value)) {
    double v = 0.0;
    if (!parse_double(item, v)) fail(key, "expected a number list, bad element '" + item + "'");
    out.push_back(v);
  }
  return out;
}

std::vector<double> KeyValueConfig::get_doubles(const std::string& key,
                                                const std::vector<double>& fallback) const {
  if (!has(key)) {
    std::string joined;
    for (double v : fallback) joined += (joined.empty() ? "" : ", ") + format_double(v);
    note_default(key, joined);
    return fallback;
  }
  return get_doubles(key);
}

std::vector<std::string> KeyValueConfig::get_strings(const std::string& key,
                                                     const std::vector<std::string>& fallback) const {
  if (!has(key)) {
    std::string joined;
    for (const auto& v : fallback) joined += (joined.empty() ? "" : ", ") + v;
    note_default(key, joined);
    return fallback;
  }
  return split_list(require(key).value);
}

void KeyValueConfig::reject_unused() const {
  for (const auto& [key, entry] : entries_) {
    if (used_.contains(key)) continue;
    std::string where = source_;
    if (entry.line > 0) where += ":" + std::to_string(entry.line);
    throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

std::string KeyValueConfig::dump() const {
  std::string out;
  for (const auto& [key, entry] : entries_) out += key + " = " + entry.value + "\n";
  return out;
}

void KeyValueConfig::note_default(const std::string& key, const std::string& value) const {
  defaults_.emplace(key, value);
}

std::string KeyValueConfig::dump_resolved() const {
  std::map<std::string, std::string> all = entries();
  for (const auto& [key, value] : defaults_) all.emplace(key, value);
  std::string out;
  for (const auto& [key, value] : all) {
    out += key + " = " + value;
    if (!entries_.contains(key)) out += "  # default";
    out += "\n";
  }
  return out;
}

std::map<std::string, std::string> KeyValueConfig::entries() const {
  std::map<std::string, std::string> out;
  for (const auto& [key, entry] : entries_) out[key] = entry.value;
  return out;
}

}  // namespace dafc
