// Copyright 2026 The DAFC-DOA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace dafc {

// Flat "key = value" text configuration. '#' starts a comment, list values are
// comma separated. Every getter marks its key as consumed so that
// reject_unused() can report misspelled keys with their line numbers.
class KeyValueConfig {
 public:
  KeyValueConfig() = default;

  static KeyValueConfig parse_file(const std::filesystem::path& path);
  static KeyValueConfig parse_string(const std::string& text, const std::string& source = "<string>");

  bool has(const std::string& key) const;
  void set(const std::string& key, const std::string& value);

  std::string get_string(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  std::int64_t get_int(const std::string& key) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  std::uint64_t get_uint64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_doubles(const std::string& key) const;
  std::vector<double> get_doubles(const std::string& key, const std::vector<double>& fallback) const;
  std::vector<std::string> get_strings(const std::string& key, const std::vector<std::string>& fallback) const;

  // Throws ConfigError naming the first key that no getter asked for.
  void reject_unused() const;

  // Resolved contents, one "key = value" line per entry in key order.
  std::string dump() const;
  // As dump(), plus every default a getter fell back to (marked as such).
  std::string dump_resolved() const;
  const std::string& source() const { return source_; }
  std::map<std::string, std::string> entries() const;

 private:
  struct Entry {
    std::string value;
    int line = 0;
  };

  const Entry& require(const std::string& key) const;
  void note_default(const std::string& key, const std::string& value) const;
  [[noreturn]] void fail(const std::string& key, const std::string& what) const;

  std::map<std::string, Entry> entries_;
  std::string source_ = "<config>";
  mutable std::set<std::string> used_;
  mutable std::map<std::string, std::string> defaults_;
};

}  // namespace dafc
