// Copyright 2026 The DAFC-DOA Authors
// SPDX-License-Identifier: Apache-2.0

#include "dafc/dafc_net.hpp"

#include <numeric>

#include "dafc/error.hpp"

namespace dafc {

std::string_view architecture_name(Architecture a) {
  switch (a) {
    case Architecture::kDafc: return "dafc";
    case Architecture::kFc: return "fc";
  }
  return "?";
}

NetworkSpec NetworkSpec::dafc_standard(int K, int L, Index d) {
  NetworkSpec s;
  s.arch = Architecture::kDafc;
  s.num_snapshots = K;
  s.num_sensors = L;
  s.grid_size = d;
  s.blocks = {{64, 256}, {128, 512}, {256, 1024}, {64, 512}, {16, 256}, {4, 128}};
  s.dense_input = 512;
  s.dense = {{1024, Activation::kTanh}, {256, Activation::kTanh}, {d, Activation::kSigmoid}};
  return s;
}

NetworkSpec NetworkSpec::fc_baseline(int K, int L, Index d) {
  NetworkSpec s;
  s.arch = Architecture::kFc;
  s.num_snapshots = K;
  s.num_sensors = L;
  s.grid_size = d;
  s.dense_input = 2 * static_cast<Index>(K) * L;
  for (Index width : {512, 512, 1024, 1024, 512, 256}) s.dense.push_back({width, Activation::kTanh});
  s.dense.push_back({d, Activation::kSigmoid});
  return s;
}

StageShape NetworkSpec::input_shape() const {
  if (arch == Architecture::kDafc) return {num_snapshots, 2 * static_cast<Index>(num_sensors)};
  return {1, 2 * static_cast<Index>(num_snapshots) * num_sensors};
}

void NetworkSpec::validate() const {
  if (num_snapshots < 1 || num_sensors < 1 || grid_size < 1) {
    throw ConfigError("network dimensions K, L, d must be positive");
  }
  if (dense.empty() || dense.back().out_dim != grid_size) {
    throw ConfigError("last dense layer must produce one output per grid point");
  }
  if (arch == Architecture::kDafc) {
    if (blocks.empty()) throw ConfigError("DAFC network needs at least one block");
    const StageShape last = blocks.back();
    if (last.rows * last.cols != dense_input) {
      throw ConfigError("last DAFC block yields " + std::to_string(last.rows) + "x" + std::to_string(last.cols) +
                        " = " + std::to_string(last.rows * last.cols) + " values but the first dense layer expects " +
                        std::to_string(dense_input));
    }
  } else {
    if (!blocks.empty()) throw ConfigError("FC network takes no DAFC blocks");
    if (dense_input != 2 * static_cast<Index>(num_snapshots) * num_sensors) {
      throw ConfigError("FC network input must be 2KL");
    }
  }
  for (const auto& b : blocks) {
    if (b.rows < 1 || b.cols < 1) throw ConfigError("DAFC block shapes must be positive");
  }
}

Matrix dafc_apply(const Matrix& Z_in, const DafcBlock& block) {
  if (Z_in.rows() != block.in_rows() || Z_in.cols() != block.in_cols()) {
    throw DimensionError("DAFC block expects " + std::to_string(block.in_rows()) + "x" +
                         std::to_string(block.in_cols()) + " input, got " + std::to_string(Z_in.rows()) + "x" +
                         std::to_string(Z_in.cols()));
  }
  const Matrix rows = affine_forward(Z_in, block.row_map);
  const Matrix cols = affine_forward(rows.transpose(), block.col_map);
  return cols.transpose();
}

Matrix preprocess(const CMatrix& X) {
  const Index L = X.rows();
  const Index K = X.cols();
  Matrix Z(K, 2 * L);
  Z.leftCols(L) = X.transpose().real();
  Z.rightCols(L) = X.transpose().imag();
  return Z;
}

Matrix flatten_input(const CMatrix& X) {
  const Index n = X.size();
  Matrix z(1, 2 * n);
  // CMatrix is column-major, so linear order is vec(X).
  for (Index i = 0; i < n; ++i) {
    z(0, i) = X(i).real();
    z(0, n + i) = X(i).imag();
  }
  return z;
}

std::vector<double> DoaEstimate::angles_deg() const {
  std::vector<double> out;
  out.reserve(angles.size());
  for (double a : angles) out.push_back(rad2deg(a));
  return out;
}

Network::Network(NetworkSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  StageShape cur = spec_.input_shape();
  int idx = 1;
  for (const StageShape& out : spec_.blocks) {
    DafcBlock blk{AffineLayer("S" + std::to_string(idx) + ".row", cur.cols, out.cols, Activation::kTanh),
                  AffineLayer("S" + std::to_string(idx) + ".col", cur.rows, out.rows, Activation::kRelu)};
    blocks_.push_back(std::move(blk));
    cur = out;
    ++idx;
  }
  Index in = spec_.dense_input;
  const char* prefix = spec_.arch == Architecture::kDafc ? "G" : "FC";
  idx = 1;
  for (const DenseSpec& d : spec_.dense) {
    dense_.emplace_back(prefix + std::to_string(idx++), in, d.out_dim, d.activation);
    in = d.out_dim;
  }
}

std::vector<AffineLayer*> Network::layers() {
  std::vector<AffineLayer*> out;
  for (auto& b : blocks_) {
    out.push_back(&b.row_map);
    out.push_back(&b.col_map);
  }
  for (auto& d : dense_) out.push_back(&d);
  return out;
}

std::vector<const AffineLayer*> Network::layers() const {
  std::vector<const AffineLayer*> out;
  for (const auto& b : blocks_) {
    out.push_back(&b.row_map);
    out.push_back(&b.col_map);
  }
  for (const auto& d : dense_) out.push_back(&d);
  return out;
}

std::size_t Network::parameter_count() const {
  const auto counts = stage_parameter_counts();
  return std::accumulate(counts.begin(), counts.end(), std::size_t{0});
}

std::vector<std::size_t> Network::stage_parameter_counts() const {
  std::vector<std::size_t> out;
  for (const auto& b : blocks_) out.push_back(b.parameter_count());
  for (const auto& d : dense_) out.push_back(d.parameter_count());
  return out;
}

void Network::init(std::uint64_t seed) {
  std::uint64_t i = 0;
  for (AffineLayer* layer : layers()) {
    Rng rng = make_rng(seed, {0x1417u, i++});
    layer->init_uniform_fan(rng);
  }
  zero_grad();
}

void Network::zero_grad() {
  for (AffineLayer* layer : layers()) layer->zero_grad();
}

void Network::check_input(const CMatrix& X) const {
  if (X.rows() != spec_.num_sensors || X.cols() != spec_.num_snapshots) {
    throw DimensionError("network expects an L x K = " + std::to_string(spec_.num_sensors) + "x" +
                         std::to_string(spec_.num_snapshots) + " input, got " + std::to_string(X.rows()) + "x" +
                         std::to_string(X.cols()));
  }
}

Matrix Network::encode(std::span<const CMatrix* const> inputs) const {
  const StageShape in = spec_.input_shape();
  Matrix out(static_cast<Index>(inputs.size()) * in.rows, in.cols);
  for (std::size_t b = 0; b < inputs.size(); ++b) {
    check_input(*inputs[b]);
    out.middleRows(static_cast<Index>(b) * in.rows, in.rows) =
        spec_.arch == Architecture::kDafc ? preprocess(*inputs[b]) : flatten_input(*inputs[b]);
  }
  return out;
}

Graph::NodeId Network::forward(Graph& graph, const Matrix& encoded, Index batch) {
  const StageShape in = spec_.input_shape();
  if (encoded.rows() != batch * in.rows || encoded.cols() != in.cols) {
    throw DimensionError("encoded batch has the wrong shape");
  }
  Graph::NodeId x = graph.input(encoded);
  Index rows = in.rows;
  for (DafcBlock& blk : blocks_) {
    x = graph.affine(x, blk.row_map);
    x = graph.block_transpose(x, rows);
    x = graph.affine(x, blk.col_map);
    x = graph.block_transpose(x, blk.out_cols());
    rows = blk.out_rows();
  }
  if (!blocks_.empty()) x = graph.reshape(x, batch, spec_.dense_input);
  for (AffineLayer& d : dense_) x = graph.affine(x, d);
  return x;
}

Matrix Network::predict_encoded(const Matrix& encoded, Index batch) const {
  const StageShape in = spec_.input_shape();
  if (encoded.rows() != batch * in.rows || encoded.cols() != in.cols) {
    throw DimensionError("encoded batch has the wrong shape");
  }
  Matrix x = encoded;
  Matrix tmp;
  Index rows = in.rows;
  for (const DafcBlock& blk : blocks_) {
    kernels::affine_forward(x, blk.row_map.W, blk.row_map.b, blk.row_map.activation, tmp);
    kernels::block_transpose(tmp, rows, x);
    kernels::affine_forward(x, blk.col_map.W, blk.col_map.b, blk.col_map.activation, tmp);
    kernels::block_transpose(tmp, blk.out_cols(), x);
    rows = blk.out_rows();
  }
  if (!blocks_.empty()) {
    Matrix flat = Eigen::Map<const Matrix>(x.data(), batch, spec_.dense_input);
    x.swap(flat);
  }
  for (const AffineLayer& d : dense_) {
    kernels::affine_forward(x, d.W, d.b, d.activation, tmp);
    x.swap(tmp);
  }
  require_finite(x, "network output");
  return x;
}

Matrix Network::predict(std::span<const CMatrix* const> inputs) const {
  return predict_encoded(encode(inputs), static_cast<Index>(inputs.size()));
}

SpatialSpectrum Network::forward(const CMatrix& X, const AngularGrid& grid) const {
  if (grid.size() != spec_.grid_size) throw DimensionError("grid size does not match the network output");
  const CMatrix* one[] = {&X};
  const Matrix p = predict(one);
  SpatialSpectrum s{std::vector<double>(p.data(), p.data() + p.size()), grid};
  return s;
}

Network build_network(const NetworkSpec& spec, std::uint64_t seed) {
  Network net(spec);
  net.init(seed);
  return net;
}

std::vector<Index> find_peaks(std::span<const double> values) {
  // Strict local maxima; an endpoint only has one neighbour to beat and a flat
  // run of equal values holds no peak.
  std::vector<Index> out;
  const std::size_t n = values.size();
  if (n < 2) return out;
  for (std::size_t i = 0; i < n; ++i) {
    const bool left = i == 0 || values[i] > values[i - 1];
    const bool right = i + 1 == n || values[i] > values[i + 1];
    if (left && right) out.push_back(static_cast<Index>(i));
  }
  return out;
}

DoaEstimate estimate_doas(const SpatialSpectrum& spectrum, double threshold) {
  if (static_cast<Index>(spectrum.probs.size()) != spectrum.grid.size()) {
    throw DimensionError("spectrum length does not match its grid");
  }
  DoaEstimate est;
  for (Index i : find_peaks(spectrum.probs)) {
    const double v = spectrum.probs[static_cast<std::size_t>(i)];
    if (v > threshold) {
      est.indices.push_back(i);
      est.angles.push_back(spectrum.grid.point(i));
      est.values.push_back(v);
    }
  }
  return est;
}

}  // namespace dafc
