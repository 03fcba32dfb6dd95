// Copyright 2026 The DAFC-DOA Authors
// SPDX-License-Identifier: Apache-2.0

#include "dafc/checkpoint.hpp"

#include <bit>
#include <cstring>

#include "dafc/error.hpp"

namespace dafc {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

BinaryWriter::BinaryWriter(const std::filesystem::path& path) : out_(path, std::ios::binary), path_(path) {
  if (!out_) throw ConfigError("cannot open '" + path.string() + "' for writing");
}

void BinaryWriter::bytes(const void* data, std::size_t n) {
  out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
  if (!out_) throw ConfigError("write failed on '" + path_.string() + "'");
}

void BinaryWriter::u32(std::uint32_t v) { bytes(&v, sizeof v); }
void BinaryWriter::u64(std::uint64_t v) { bytes(&v, sizeof v); }
void BinaryWriter::f64(double v) { bytes(&v, sizeof v); }

void BinaryWriter::str(const std::string& s) {
  u32(static_cast<std::uint32_t>(s.size()));
  bytes(s.data(), s.size());
}

void BinaryWriter::f64_array(const double* data, std::size_t n) { bytes(data, n * sizeof(double)); }

void BinaryWriter::close() {
  out_.close();
  if (!out_) throw ConfigError("closing '" + path_.string() + "' failed");
}

BinaryReader::BinaryReader(const std::filesystem::path& path) : in_(path, std::ios::binary), path_(path) {
  if (!in_) throw ConfigError("cannot open '" + path.string() + "'");
}

void BinaryReader::bytes(void* data, std::size_t n) {
  in_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in_.gcount()) != n) throw ConfigError("'" + path_.string() + "' is truncated");
}

std::uint8_t BinaryReader::u8() {
  std::uint8_t v = 0;
  bytes(&v, 1);
  return v;
}

std::uint32_t BinaryReader::u32() {
  std::uint32_t v = 0;
  bytes(&v, sizeof v);
  return v;
}

std::uint64_t BinaryReader::u64() {
  std::uint64_t v = 0;
  bytes(&v, sizeof v);
  return v;
}

double BinaryReader::f64() {
  double v = 0;
  bytes(&v, sizeof v);
  return v;
}

std::string BinaryReader::str() {
  const std::uint32_t n = u32();
  if (n > (1u << 20)) throw ConfigError("'" + path_.string() + "': implausible string length");
  std::string s(n, '\0');
  bytes(s.data(), n);
  return s;
}

void BinaryReader::f64_array(double* data, std::size_t n) { bytes(data, n * sizeof(double)); }

bool BinaryReader::at_end() { return in_.peek() == std::char_traits<char>::eof(); }

void write_network(BinaryWriter& w, const Network& net) {
  const NetworkSpec& spec = net.spec();
  w.bytes(kCheckpointMagic, sizeof kCheckpointMagic);
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(spec.arch));
  w.u32(static_cast<std::uint32_t>(spec.num_snapshots));
  w.u32(static_cast<std::uint32_t>(spec.num_sensors));
  w.u64(static_cast<std::uint64_t>(spec.grid_size));
  w.u32(static_cast<std::uint32_t>(spec.blocks.size()));
  for (const StageShape& s : spec.blocks) {
    w.u64(static_cast<std::uint64_t>(s.rows));
    w.u64(static_cast<std::uint64_t>(s.cols));
  }
  const auto layers = net.layers();
  w.u32(static_cast<std::uint32_t>(layers.size()));
  for (const AffineLayer* layer : layers) {
    w.str(layer->name);
    w.u64(static_cast<std::uint64_t>(layer->W.rows()));
    w.u64(static_cast<std::uint64_t>(layer->W.cols()));
    w.u8(static_cast<std::uint8_t>(layer->activation));
    w.f64_array(layer->W.data(), static_cast<std::size_t>(layer->W.size()));
    w.f64_array(layer->b.data(), static_cast<std::size_t>(layer->b.size()));
  }
}

Network read_network(BinaryReader& r) {
  char magic[8];
  r.bytes(magic, sizeof magic);
  if (std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0) {
    throw ConfigError("'" + r.path().string() + "' is not a network checkpoint");
  }
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw ConfigError("'" + r.path().string() + "': unsupported checkpoint version " + std::to_string(version));
  }
  const std::uint32_t arch = r.u32();
  if (arch > 1) throw ConfigError("'" + r.path().string() + "': unknown architecture tag");
  NetworkSpec spec;
  spec.arch = static_cast<Architecture>(arch);
  spec.num_snapshots = static_cast<int>(r.u32());
  spec.num_sensors = static_cast<int>(r.u32());
  spec.grid_size = static_cast<Index>(r.u64());
  const std::uint32_t nblocks = r.u32();
  for (std::uint32_t i = 0; i < nblocks; ++i) {
    const auto rows = static_cast<Index>(r.u64());
    const auto cols = static_cast<Index>(r.u64());
    spec.blocks.push_back({rows, cols});
  }
  const std::uint32_t nlayers = r.u32();
  if (nlayers < 2 * nblocks + 1) throw ConfigError("'" + r.path().string() + "': too few layers");

  struct RawLayer {
    std::string name;
    Matrix W;
    Vector b;
    Activation act;
  };
  std::vector<RawLayer> raw;
  for (std::uint32_t i = 0; i < nlayers; ++i) {
    RawLayer l;
    l.name = r.str();
    const auto rows = static_cast<Index>(r.u64());
    const auto cols = static_cast<Index>(r.u64());
    if (rows <= 0 || cols <= 0 || rows * cols > (Index{1} << 32)) {
      throw ConfigError("'" + r.path().string() + "': bad dimensions for layer " + l.name);
    }
    l.act = activation_from_tag(r.u8());
    l.W.resize(rows, cols);
    l.b.resize(cols);
    r.f64_array(l.W.data(), static_cast<std::size_t>(l.W.size()));
    r.f64_array(l.b.data(), static_cast<std::size_t>(l.b.size()));
    raw.push_back(std::move(l));
  }
  spec.dense_input = raw[2 * nblocks].W.rows();
  for (std::size_t i = 2 * nblocks; i < raw.size(); ++i) spec.dense.push_back({raw[i].W.cols(), raw[i].act});

  Network net(spec);
  auto layers = net.layers();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    AffineLayer& dst = *layers[i];
    RawLayer& src = raw[i];
    if (dst.name != src.name || dst.W.rows() != src.W.rows() || dst.W.cols() != src.W.cols() ||
        dst.activation != src.act) {
      throw ConfigError("'" + r.path().string() + "': layer " + src.name + " does not match the architecture");
    }
    dst.W = std::move(src.W);
    dst.b = std::move(src.b);
  }
  net.zero_grad();
  return net;
}

void save_checkpoint(const std::filesystem::path& path, const Network& net) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  BinaryWriter w(path);
  write_network(w, net);
  w.close();
}

Network load_checkpoint(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("checkpoint '" + path.string() + "' not found");
  BinaryReader r(path);
  return read_network(r);
}

}  // namespace dafc
