// Copyright 2026 The DAFC-DOA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>

#include "dafc/dafc_net.hpp"

namespace dafc {

// Little-endian binary stream helpers shared by the checkpoint, training
// state and dataset formats.
class BinaryWriter {
 public:
  explicit BinaryWriter(const std::filesystem::path& path);

  void bytes(const void* data, std::size_t n);
  void u8(std::uint8_t v) { bytes(&v, 1); }
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f64(double v);
  void str(const std::string& s);
  void f64_array(const double* data, std::size_t n);
  void close();

 private:
  std::ofstream out_;
  std::filesystem::path path_;
};

class BinaryReader {
 public:
  explicit BinaryReader(const std::filesystem::path& path);

  void bytes(void* data, std::size_t n);
  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  double f64();
  std::string str();
  void f64_array(double* data, std::size_t n);
  bool at_end();
  const std::filesystem::path& path() const { return path_; }

 private:
  std::ifstream in_;
  std::filesystem::path path_;
};

// Checkpoint layout (all integers and floats little-endian):
//   "DAFCCKPT"            8-byte magic
//   u32 version           currently 1
//   u32 architecture      0 = DAFC, 1 = FC
//   u32 K, u32 L, u64 d
//   u32 block count, then per block u64 rows, u64 cols (output shape)
//   u32 layer count, then per layer:
//     u32 name length, name bytes, u64 rows, u64 cols, u8 activation tag,
//     rows*cols f64 of W (row-major), cols f64 of b
inline constexpr char kCheckpointMagic[8] = {'D', 'A', 'F', 'C', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_network(BinaryWriter& w, const Network& net);
Network read_network(BinaryReader& r);

void save_checkpoint(const std::filesystem::path& path, const Network& net);
Network load_checkpoint(const std::filesystem::path& path);

}  // namespace dafc
