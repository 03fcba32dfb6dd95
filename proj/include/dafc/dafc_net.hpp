// Copyright 2026 The DAFC-DOA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dafc/array_sim.hpp"
#include "dafc/autodiff.hpp"

namespace dafc {

enum class Architecture : std::uint32_t { kDafc = 0, kFc = 1 };

std::string_view architecture_name(Architecture a);

struct StageShape {
  Index rows;
  Index cols;
};

struct DenseSpec {
  Index out_dim;
  Activation activation;
};

// Declarative layer list. For kDafc the input is the K x 2L pre-processed
// matrix, followed by DAFC blocks (output shapes in `blocks`), row-major
// vectorization to `dense_input`, then `dense`. For kFc the input is the
// 2KL vector and `blocks` is empty.
struct NetworkSpec {
  Architecture arch = Architecture::kDafc;
  int num_snapshots = 16;  // K
  int num_sensors = 16;    // L
  Index grid_size = 121;   // d
  std::vector<StageShape> blocks;
  Index dense_input = 0;
  std::vector<DenseSpec> dense;

  // Six DAFC blocks (tanh rows, relu columns) and three dense layers.
  static NetworkSpec dafc_standard(int K, int L, Index d);
  // 2KL -> 512 -> 512 -> 1024 -> 1024 -> 512 -> 256 (tanh) -> d (sigmoid).
  static NetworkSpec fc_baseline(int K, int L, Index d);

  StageShape input_shape() const;
  void validate() const;
};

// Row map F_r (tanh) over every row, then column map F_c (relu) over every
// column of the result: Z_out = F_c(F_r(Z_in)^T)^T.
struct DafcBlock {
  AffineLayer row_map;
  AffineLayer col_map;

  Index in_rows() const { return col_map.in_dim(); }
  Index in_cols() const { return row_map.in_dim(); }
  Index out_rows() const { return col_map.out_dim(); }
  Index out_cols() const { return row_map.out_dim(); }
  std::size_t parameter_count() const { return row_map.parameter_count() + col_map.parameter_count(); }
};

// Single-example DAFC application.
Matrix dafc_apply(const Matrix& Z_in, const DafcBlock& block);

// Z0 = [Re X^T, Im X^T]; X is L x K, Z0 is K x 2L.
Matrix preprocess(const CMatrix& X);

// [Re vec(X), Im vec(X)] as a 1 x 2KL row, vec stacking columns (snapshots).
Matrix flatten_input(const CMatrix& X);

struct SpatialSpectrum {
  std::vector<double> probs;
  AngularGrid grid;
};

struct DoaEstimate {
  std::vector<Index> indices;
  std::vector<double> angles;  // radians
  std::vector<double> values;
  std::size_t count() const { return indices.size(); }
  std::vector<double> angles_deg() const;
};

class Network {
 public:
  Network() = default;
  explicit Network(NetworkSpec spec);

  const NetworkSpec& spec() const { return spec_; }
  std::vector<DafcBlock>& blocks() { return blocks_; }
  const std::vector<DafcBlock>& blocks() const { return blocks_; }
  std::vector<AffineLayer>& dense() { return dense_; }
  const std::vector<AffineLayer>& dense() const { return dense_; }

  // Every learnable layer in forward order (row/col maps, then dense).
  std::vector<AffineLayer*> layers();
  std::vector<const AffineLayer*> layers() const;

  std::size_t parameter_count() const;
  // One count per DAFC block followed by one per dense layer.
  std::vector<std::size_t> stage_parameter_counts() const;

  void init(std::uint64_t seed);
  void zero_grad();

  // Stacks the network input of every example: (B*K) x 2L for kDafc,
  // B x 2KL for kFc.
  Matrix encode(std::span<const CMatrix* const> inputs) const;

  // Records the forward pass on `graph`; returns the node holding the B x d
  // output probabilities (an affine node with sigmoid activation).
  Graph::NodeId forward(Graph& graph, const Matrix& encoded, Index batch);

  // Inference without a tape. Returns B x d probabilities.
  Matrix predict(std::span<const CMatrix* const> inputs) const;
  Matrix predict_encoded(const Matrix& encoded, Index batch) const;

  SpatialSpectrum forward(const CMatrix& X, const AngularGrid& grid) const;

 private:
  void check_input(const CMatrix& X) const;

  NetworkSpec spec_;
  std::vector<DafcBlock> blocks_;
  std::vector<AffineLayer> dense_;
};

Network build_network(const NetworkSpec& spec, std::uint64_t seed);
inline Network build_network(int K, int L, Index d, std::uint64_t seed = 0) {
  return build_network(NetworkSpec::dafc_standard(K, L, d), seed);
}

// Indices of peaks: strict local maxima, where a run of equal values counts
// as one candidate located at its leftmost index and must be strictly above
// every existing neighbour of the run. A constant sequence has no peaks.
std::vector<Index> find_peaks(std::span<const double> values);

// Peaks whose value exceeds `threshold` (0.5 for the network output).
DoaEstimate estimate_doas(const SpatialSpectrum& spectrum, double threshold = 0.5);

}  // namespace dafc
