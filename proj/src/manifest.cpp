// Copyright 2026 The DAFC-DOA Authors
// SPDX-License-Identifier: Apache-2.0

#include "dafc/manifest.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>

#include "json.hpp"

#include "dafc/error.hpp"

namespace dafc {

std::uint64_t fnv1a64(const void* data, std::size_t n, std::uint64_t h) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

std::uint64_t fnv1a64_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read '" + path.string() + "'");
  std::uint64_t h = 0xcbf29ce484222325ull;
  std::array<char, 1 << 16> buf;
  while (in) {
    in.read(buf.data(), buf.size());
    h = fnv1a64(buf.data(), static_cast<std::size_t>(in.gcount()), h);
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char out[17];
  std::snprintf(out, sizeof out, "%016llx", static_cast<unsigned long long>(v));
  return out;
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void RunManifest::collect_outputs(const std::filesystem::path& dir, const std::string& manifest_name) {
  outputs.clear();
  for (const auto& entry : std::filesystem::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto rel = std::filesystem::relative(entry.path(), dir).generic_string();
    if (rel == manifest_name) continue;
    outputs.push_back({rel, hex64(fnv1a64_file(entry.path())), entry.file_size()});
  }
  std::sort(outputs.begin(), outputs.end(), [](const auto& a, const auto& b) { return a.path < b.path; });
}

void RunManifest::save(const std::filesystem::path& path) const {
  nlohmann::ordered_json j;
  j["command"] = command;
  j["config"] = config_text;
  j["config_hash"] = config_hash;
  j["seed"] = seed;
  j["threads"] = threads;
  j["version"] = version;
  j["checkpoints"] = checkpoints;
  j["outputs"] = nlohmann::ordered_json::array();
  for (const auto& o : outputs) {
    j["outputs"].push_back({{"path", o.path}, {"fnv1a64", o.fnv1a64}, {"bytes", o.bytes}});
  }
  j["wall_seconds"] = wall_seconds;
  j["started_utc"] = started_utc;
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

RunManifest RunManifest::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read manifest '" + path.string() + "'");
  nlohmann::json j;
  try {
    in >> j;
    RunManifest m;
    m.command = j.at("command").get<std::string>();
    m.config_text = j.at("config").get<std::string>();
    m.config_hash = j.value("config_hash", "");
    m.seed = j.value("seed", std::uint64_t{0});
    m.threads = j.value("threads", 1);
    m.version = j.value("version", "");
    m.checkpoints = j.value("checkpoints", std::vector<std::string>{});
    for (const auto& o : j.value("outputs", nlohmann::json::array())) {
      m.outputs.push_back({o.at("path").get<std::string>(), o.at("fnv1a64").get<std::string>(),
                           o.value("bytes", std::uint64_t{0})});
    }
    m.wall_seconds = j.value("wall_seconds", 0.0);
    m.started_utc = j.value("started_utc", "");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed manifest '" + path.string() + "': " + e.what());
  }
}

}  // namespace dafc
