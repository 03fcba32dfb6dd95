// Copyright 2026 The DAFC-DOA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "dafc/kernels.hpp"
#include "dafc/rng.hpp"
#include "dafc/types.hpp"

namespace dafc {

struct Tensor {
  Matrix values;
  Matrix grad;  // empty until backward reaches this tensor
  bool has_grad = false;

  Index rows() const { return values.rows(); }
  Index cols() const { return values.cols(); }
};

// h(Z W + 1 b^T) with learnable W (D_in x D_out) and b (D_out), plus gradient
// accumulators of the same shapes.
struct AffineLayer {
  std::string name;
  Matrix W;
  Vector b;
  Activation activation = Activation::kIdentity;
  Matrix grad_W;
  Vector grad_b;

  AffineLayer() = default;
  AffineLayer(std::string layer_name, Index in_dim, Index out_dim, Activation act);

  Index in_dim() const { return W.rows(); }
  Index out_dim() const { return W.cols(); }
  std::size_t parameter_count() const { return static_cast<std::size_t>(W.size() + b.size()); }

  // Uniform on +-sqrt(6/(D_in+D_out)), zero bias.
  void init_uniform_fan(Rng& rng);
  void zero_grad();
};

Matrix affine_forward(const Matrix& Z, const AffineLayer& layer);

// Throws NumericalError naming `what` if m holds NaN or Inf.
void require_finite(const Matrix& m, const std::string& what);

// Define-by-run tape. Nodes are appended in evaluation order; backward walks
// them in reverse, accumulating parameter gradients into the layers that were
// used. A graph is rebuilt for every (micro-)batch.
class Graph {
 public:
  using NodeId = std::size_t;

  NodeId input(Matrix values, bool requires_grad = false);
  NodeId affine(NodeId x, AffineLayer& layer);
  NodeId block_transpose(NodeId x, Index block_rows);
  NodeId reshape(NodeId x, Index rows, Index cols);

  const Matrix& value(NodeId id) const;
  const Matrix& grad(NodeId id) const;
  std::size_t size() const { return nodes_.size(); }
  // Layer applied by an affine node, nullptr for any other node.
  const AffineLayer* layer_of(NodeId id) const;

  enum class Seed { kOutput, kPreActivation };

  // Seeds node `output` with d(loss)/d(output) (or d(loss)/d(pre-activation)
  // for an affine node when seed == kPreActivation) and propagates.
  void backward(NodeId output, const Matrix& seed_grad, Seed seed = Seed::kOutput);

  void clear() { nodes_.clear(); }

 private:
  enum class Op { kInput, kAffine, kBlockTranspose, kReshape };
  struct Node {
    Op op;
    Tensor t;
    NodeId parent = 0;
    AffineLayer* layer = nullptr;
    Index block_rows = 0;
    bool requires_grad = false;
  };

  Node& at(NodeId id);
  const Node& at(NodeId id) const;
  void accumulate(NodeId id, Matrix&& g);

  std::vector<Node> nodes_;
};

struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t t = 0;
  std::vector<Matrix> m_W, v_W;
  std::vector<Vector> m_b, v_b;

  AdamState() = default;
  AdamState(std::span<AffineLayer* const> layers, double learning_rate);
};

// One bias-corrected Adam update over every layer's accumulated gradient.
void adam_step(std::span<AffineLayer* const> layers, AdamState& state);

// Reduce-on-plateau: after `patience` consecutive non-improving metrics the
// learning rate is multiplied by `factor` and the counter resets. The
// baseline metric can be seeded (e.g. with the loss of the untrained model).
class LrScheduler {
 public:
  LrScheduler(double lr, int patience, double factor = 0.905,
              double initial_best = std::numeric_limits<double>::infinity());

  double step(double metric);

  double lr() const { return lr_; }
  double best() const { return best_; }
  int bad_epochs() const { return bad_; }
  int patience() const { return patience_; }
  double factor() const { return factor_; }
  int reductions() const { return reductions_; }

  // Used when restoring a training state.
  void restore(double lr, double best, int bad, int reductions);

 private:
  double lr_;
  int patience_;
  double factor_;
  double best_;
  int bad_ = 0;
  int reductions_ = 0;
};

}  // namespace dafc
