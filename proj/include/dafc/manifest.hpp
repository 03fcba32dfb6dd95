// Copyright 2026 The DAFC-DOA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace dafc {

// 64-bit FNV-1a.
std::uint64_t fnv1a64(const void* data, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ull);
std::uint64_t fnv1a64_file(const std::filesystem::path& path);
std::string hex64(std::uint64_t v);

struct ManifestOutput {
  std::string path;  // relative to the output directory
  std::string fnv1a64;
  std::uint64_t bytes = 0;
};

// Everything needed to re-run a command and check its outputs: the
// subcommand, the fully resolved configuration text, the inputs it read and
// a checksum of every file it wrote.
struct RunManifest {
  std::string command;
  std::string config_text;
  std::string config_hash;
  std::uint64_t seed = 0;
  int threads = 1;
  std::string version;
  std::vector<std::string> checkpoints;
  std::vector<ManifestOutput> outputs;
  double wall_seconds = 0.0;
  std::string started_utc;

  // Checksums every regular file under dir except the manifest itself.
  void collect_outputs(const std::filesystem::path& dir, const std::string& manifest_name = "manifest.json");
  void save(const std::filesystem::path& path) const;
  static RunManifest load(const std::filesystem::path& path);
};

std::string utc_timestamp();

}  // namespace dafc
