// Copyright 2026 The DAFC-DOA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "dafc/array_sim.hpp"

namespace dafc {

// Dataset layout (little-endian):
//   "DAFCDATA"  magic, u32 version (1), u32 L, u32 K, u64 d, u64 count
//   per example:
//     L*K complex entries of X in column-major order, each as f64 re, f64 im
//     d bytes y, d bytes occupied mask
//     u32 M, M f64 source DOAs (radians)
//     u8 interference flag, f64 theta_c (radians, 0 when absent)
inline constexpr char kDatasetMagic[8] = {'D', 'A', 'F', 'C', 'D', 'A', 'T', 'A'};
inline constexpr std::uint32_t kDatasetVersion = 1;

struct DatasetRecord {
  CMatrix X;
  std::vector<std::uint8_t> y;
  std::vector<std::uint8_t> occupied_mask;
  std::vector<double> source_doas;
  bool has_interference = false;
  double theta_c = 0.0;
};

void write_dataset(const std::filesystem::path& path, std::span<const SnapshotExample> examples);
std::vector<DatasetRecord> read_dataset(const std::filesystem::path& path);

}  // namespace dafc
