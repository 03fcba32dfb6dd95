// Copyright 2026 The DAFC-DOA Authors
// SPDX-License-Identifier: Apache-2.0

#include "dafc/dataset_io.hpp"

#include <cstring>

#include "dafc/checkpoint.hpp"
#include "dafc/error.hpp"

namespace dafc {

void write_dataset(const std::filesystem::path& path, std::span<const SnapshotExample> examples) {
  if (examples.empty()) throw InvalidArgument("refusing to write an empty dataset");
  const Index L = examples.front().X.rows();
  const Index K = examples.front().X.cols();
  const auto d = examples.front().y.size();
  BinaryWriter w(path);
  w.bytes(kDatasetMagic, sizeof kDatasetMagic);
  w.u32(kDatasetVersion);
  w.u32(static_cast<std::uint32_t>(L));
  w.u32(static_cast<std::uint32_t>(K));
  w.u64(d);
  w.u64(examples.size());
  for (const auto& ex : examples) {
    if (ex.X.rows() != L || ex.X.cols() != K || ex.y.size() != d || ex.occupied_mask.size() != d) {
      throw DimensionError("dataset examples must share one shape");
    }
    for (Index i = 0; i < ex.X.size(); ++i) {
      w.f64(ex.X(i).real());
      w.f64(ex.X(i).imag());
    }
    w.bytes(ex.y.data(), d);
    w.bytes(ex.occupied_mask.data(), d);
    w.u32(static_cast<std::uint32_t>(ex.meta.source_doas.size()));
    for (double t : ex.meta.source_doas) w.f64(t);
    w.u8(ex.meta.interference ? 1 : 0);
    w.f64(ex.meta.interference ? ex.meta.interference->theta_c : 0.0);
  }
  w.close();
}

std::vector<DatasetRecord> read_dataset(const std::filesystem::path& path) {
  BinaryReader r(path);
  char magic[8];
  r.bytes(magic, sizeof magic);
  if (std::memcmp(magic, kDatasetMagic, sizeof magic) != 0) {
    throw ConfigError("'" + path.string() + "' is not a dataset file");
  }
  if (r.u32() != kDatasetVersion) throw ConfigError("'" + path.string() + "': unsupported dataset version");
  const Index L = r.u32();
  const Index K = r.u32();
  const auto d = static_cast<std::size_t>(r.u64());
  const auto count = r.u64();
  std::vector<DatasetRecord> out;
  out.reserve(static_cast<std::size_t>(count));
  for (std::uint64_t n = 0; n < count; ++n) {
    DatasetRecord rec;
    rec.X.resize(L, K);
    for (Index i = 0; i < rec.X.size(); ++i) {
      const double re = r.f64();
      const double im = r.f64();
      rec.X(i) = cdouble(re, im);
    }
    rec.y.resize(d);
    rec.occupied_mask.resize(d);
    r.bytes(rec.y.data(), d);
    r.bytes(rec.occupied_mask.data(), d);
    rec.source_doas.resize(r.u32());
    for (double& t : rec.source_doas) t = r.f64();
    rec.has_interference = r.u8() != 0;
    rec.theta_c = r.f64();
    out.push_back(std::move(rec));
  }
  if (!r.at_end()) throw ConfigError("'" + path.string() + "': trailing bytes after the last record");
  return out;
}

}  // namespace dafc
